// Command-line front end: optimize, evaluate, validate.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "mupmu/run.hpp"

namespace {

void add_common(CLI::App* cmd, mupmu::CliOverrides& o)
{
    cmd->add_option_function<std::string>("--network", [&](const std::string& v) { o.network = v; },
                                          "network document (JSON)");
    cmd->add_option_function<std::string>("--config", [&](const std::string& v) { o.config = v; },
                                          "run config (JSON)");
    cmd->add_option_function<std::string>("--case", [&](const std::string& v) { o.case_mode = v; }, "A or B")
        ->check(CLI::IsMember({"A", "B"}));
    cmd->add_flag("--contingency", o.contingency, "require observability under single failures");
    cmd->add_option_function<std::uint64_t>("--seed", [&](std::uint64_t v) { o.seed = v; }, "RNG seed");
    cmd->add_option_function<std::string>("--out", [&](const std::string& v) { o.out = v; }, "output directory");
    cmd->add_option_function<int>("--generations", [&](int v) { o.generations = v; }, "generation count");
    cmd->add_option_function<int>("--population", [&](int v) { o.population = v; }, "population size");
}

std::string slurp(const std::filesystem::path& p)
{
    std::ifstream in(p);
    if (!in) {
        throw mupmu::SchemaError(p.string() + ": cannot open file");
    }
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

int optimize(const mupmu::CliOverrides& o)
{
    const auto rc = mupmu::resolve_run_config(o);
    const auto res = mupmu::run_optimize(rc);
    res.outputs.write(rc.output_dir);
    const auto& ar = res.archive;
    std::printf("archive: %zu members, %zu evaluations, final hypervolume %.6g\n", ar.members.size(), ar.evaluations,
                ar.hv_trace.back());
    std::printf("min-C member: C=%d U=%.6g%% S=%.6g (%d buses)\n", ar.members.front().cost(),
                ar.members.front().objectives[1], ar.members.front().objectives[2], ar.members.front().x.count());
    std::printf("outputs written to %s\n", rc.output_dir.string().c_str());
    return mupmu::kExitOk;
}

int evaluate(const mupmu::CliOverrides& o, const std::string& placement_path)
{
    const auto rc = mupmu::resolve_run_config(o);
    std::vector<int> ids;
    try {
        ids = mupmu::parse_placement_text(slurp(placement_path));
    } catch (const mupmu::SchemaError& e) {
        throw mupmu::SchemaError(placement_path + ": " + e.what());
    }
    const auto res = mupmu::run_evaluate(rc, ids);
    res.outputs.write(rc.output_dir);
    const auto& ind = res.individual;
    if (ind.feasible()) {
        std::printf("C=%d U=%.10g%% S=%.10g feasible\n", ind.cost(), ind.objectives[1], ind.objectives[2]);
    } else {
        std::printf("C=%d infeasible (%s, violations=%d)\n", ind.cost(), mupmu::to_string(ind.status),
                    ind.violations);
    }
    return mupmu::kExitOk;
}

int validate(const mupmu::CliOverrides& o)
{
    const auto rc = mupmu::resolve_run_config(o);
    const auto res = mupmu::run_validate(rc);
    res.outputs.write(rc.output_dir);
    for (const auto& c : res.checks) {
        std::printf("%-32s %s\n", c.name.c_str(), c.status.c_str());
    }
    return res.all_passed() ? mupmu::kExitOk : mupmu::kExitNumerical;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Tri-objective micro-PMU placement"};
    app.require_subcommand(1);
    mupmu::CliOverrides opt;
    mupmu::CliOverrides ev;
    mupmu::CliOverrides va;
    std::string placement;
    auto* c_opt = app.add_subcommand("optimize", "run the NSGA-II search and export the Pareto archive");
    auto* c_ev = app.add_subcommand("evaluate", "score one placement");
    auto* c_va = app.add_subcommand("validate", "run the independent oracles");
    add_common(c_opt, opt);
    add_common(c_ev, ev);
    add_common(c_va, va);
    c_ev->add_option("--placement", placement, "text file of bus ids")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? mupmu::kExitOk : mupmu::kExitUsage;
    }

    try {
        if (c_opt->parsed()) {
            return optimize(opt);
        }
        if (c_ev->parsed()) {
            return evaluate(ev, placement);
        }
        return validate(va);
    } catch (const mupmu::InfeasibleError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return mupmu::kExitInfeasible;
    } catch (const mupmu::NumericalError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return mupmu::kExitNumerical;
    } catch (const mupmu::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return mupmu::kExitUsage;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "internal error: %s\n", e.what());
        return mupmu::kExitNumerical;
    }
}
