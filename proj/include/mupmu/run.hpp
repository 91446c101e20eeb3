#ifndef MUPMU_RUN_HPP
#define MUPMU_RUN_HPP

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mupmu/error.hpp"
#include "mupmu/estimation.hpp"
#include "mupmu/grid.hpp"
#include "mupmu/moea.hpp"
#include "mupmu/placement.hpp"
#include "mupmu/sensitivity.hpp"
#include "mupmu/validation.hpp"

namespace mupmu {

inline constexpr const char* kToolVersion = "1.0.0";

struct ValidationSettings {
    long mc_trials = 100000;
    double mc_tolerance = 0.05;
    double fd_delta = 1e-3;
    double fd_step = 1e-5;
    double fd_tolerance = 0.05;
    int sorter_population = 200;
    long hv_samples = 1000000;
    double hv_tolerance = 0.01;
};

struct RunConfig {
    std::filesystem::path network_path;
    CaseMode mode = CaseMode::B;
    bool contingency = false;
    Observability observability = Observability::ChannelLimited;
    nlohmann::json ga_overrides = nlohmann::json::object();
    UncertaintyParams uncertainty;
    ToleranceSpec tolerance;
    ValidationSettings validation;
    std::filesystem::path output_dir = "out";
    std::uint64_t rng_seed = 1;
};

/// Command-line values that take precedence over the config file.
struct CliOverrides {
    std::optional<std::filesystem::path> network;
    std::optional<std::filesystem::path> config;
    std::optional<std::string> case_mode;
    bool contingency = false;
    std::optional<std::uint64_t> seed;
    std::optional<std::filesystem::path> out;
    std::optional<int> generations;
    std::optional<int> population;
};

namespace detail {

inline CaseMode parse_case(const std::string& s, const std::string& where)
{
    if (s == "A") {
        return CaseMode::A;
    }
    if (s == "B") {
        return CaseMode::B;
    }
    throw SchemaError(where + ": case must be \"A\" or \"B\"");
}

inline const char* case_name(CaseMode m) { return m == CaseMode::A ? "A" : "B"; }

inline const char* observability_name(Observability o)
{
    return o == Observability::FullRow ? "full_row" : "channel_limited";
}

inline const char* search_name(SensitivitySearch s)
{
    return s == SensitivitySearch::SingleEntry ? "single_entry" : "per_line_corners";
}

inline const char* increase_name(IncreaseMode m) { return m == IncreaseMode::Absolute ? "absolute" : "signed"; }

inline GAConfig resolve_ga(const RunConfig& rc, int num_buses)
{
    GAConfig g = GAConfig::defaults_for(num_buses);
    const auto& o = rc.ga_overrides;
    const std::string where = "config.ga";
    if (o.contains("population_size")) {
        g.population_size = require<int>(o, "population_size", where);
    }
    if (o.contains("generations")) {
        g.generations = require<int>(o, "generations", where);
    }
    if (o.contains("crossover_prob")) {
        g.crossover_prob = require<double>(o, "crossover_prob", where);
    }
    if (o.contains("mutation_prob")) {
        g.mutation_prob = require<double>(o, "mutation_prob", where);
    }
    if (o.contains("threads")) {
        g.threads = require<unsigned>(o, "threads", where);
    }
    if (o.contains("reference_point")) {
        const auto v = require<std::vector<double>>(o, "reference_point", where);
        if (v.size() != 3) {
            throw SchemaError(where + ": reference_point must hold 3 numbers");
        }
        g.reference_point = Objectives{v[0], v[1], v[2]};
    }
    g.rng_seed = rc.rng_seed;
    g.validate();
    return g;
}

inline std::string fmt_double(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

template <typename T>
std::string join(const std::vector<T>& items, const char* sep)
{
    std::ostringstream os;
    for (std::size_t k = 0; k < items.size(); ++k) {
        if (k > 0) {
            os << sep;
        }
        os << items[k];
    }
    return os.str();
}

inline std::string fnv1a_hex(const std::string& s)
{
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

/// Files are staged in memory and written only after every computation succeeded.
struct OutputSet {
    std::map<std::string, std::string> files;

    void write(const std::filesystem::path& dir) const
    {
        std::filesystem::create_directories(dir);
        for (const auto& [name, body] : files) {
            std::ofstream out(dir / name, std::ios::binary);
            if (!out) {
                throw Error((dir / name).string() + ": cannot write");
            }
            out << body;
        }
    }
};

} // namespace detail

/// Parses a run config document. Relative network paths resolve against `base_dir`.
inline RunConfig parse_run_config(const nlohmann::json& doc, const std::filesystem::path& base_dir)
{
    using detail::reject_unknown;
    using detail::require;
    if (!doc.is_object()) {
        throw SchemaError("config: document must be an object");
    }
    reject_unknown(doc,
                   {"network", "case", "contingency", "observability", "ga", "uncertainty", "tolerance", "validation",
                    "output_dir", "rng_seed"},
                   "config");
    RunConfig rc;
    if (doc.contains("network")) {
        std::filesystem::path p = require<std::string>(doc, "network", "config");
        rc.network_path = p.is_absolute() ? p : base_dir / p;
    }
    if (doc.contains("case")) {
        rc.mode = detail::parse_case(require<std::string>(doc, "case", "config"), "config");
    }
    if (doc.contains("contingency")) {
        rc.contingency = require<bool>(doc, "contingency", "config");
    }
    if (doc.contains("observability")) {
        const auto s = require<std::string>(doc, "observability", "config");
        if (s == "channel_limited") {
            rc.observability = Observability::ChannelLimited;
        } else if (s == "full_row") {
            rc.observability = Observability::FullRow;
        } else {
            throw SchemaError("config: observability must be \"channel_limited\" or \"full_row\"");
        }
    }
    if (doc.contains("output_dir")) {
        std::filesystem::path p = require<std::string>(doc, "output_dir", "config");
        rc.output_dir = p.is_absolute() ? p : base_dir / p;
    }
    if (doc.contains("rng_seed")) {
        rc.rng_seed = require<std::uint64_t>(doc, "rng_seed", "config");
    }
    if (doc.contains("ga")) {
        const auto& g = doc.at("ga");
        reject_unknown(g, {"population_size", "generations", "crossover_prob", "mutation_prob", "threads",
                           "reference_point"},
                       "config.ga");
        rc.ga_overrides = g;
    }
    if (doc.contains("uncertainty")) {
        const auto& u = doc.at("uncertainty");
        const std::string where = "config.uncertainty";
        reject_unknown(u, {"sigma_v", "sigma_i", "zi_sigma_factor", "sigma_r"}, where);
        if (u.contains("sigma_v")) {
            rc.uncertainty.sigma_v = require<double>(u, "sigma_v", where);
        }
        if (u.contains("sigma_i")) {
            rc.uncertainty.sigma_i = require<double>(u, "sigma_i", where);
        }
        if (u.contains("zi_sigma_factor")) {
            rc.uncertainty.zi_sigma_factor = require<double>(u, "zi_sigma_factor", where);
        }
        if (u.contains("sigma_r")) {
            rc.uncertainty.sigma_r = require<double>(u, "sigma_r", where);
        }
    }
    if (doc.contains("tolerance")) {
        const auto& t = doc.at("tolerance");
        const std::string where = "config.tolerance";
        reject_unknown(t, {"delta", "search", "increase"}, where);
        if (t.contains("delta")) {
            rc.tolerance.delta = require<double>(t, "delta", where);
        }
        if (t.contains("search")) {
            const auto s = require<std::string>(t, "search", where);
            if (s == "per_line_corners") {
                rc.tolerance.search = SensitivitySearch::PerLineCorners;
            } else if (s == "single_entry") {
                rc.tolerance.search = SensitivitySearch::SingleEntry;
            } else {
                throw SchemaError(where + ": search must be \"per_line_corners\" or \"single_entry\"");
            }
        }
        if (t.contains("increase")) {
            const auto s = require<std::string>(t, "increase", where);
            if (s == "signed") {
                rc.tolerance.increase = IncreaseMode::Signed;
            } else if (s == "absolute") {
                rc.tolerance.increase = IncreaseMode::Absolute;
            } else {
                throw SchemaError(where + ": increase must be \"signed\" or \"absolute\"");
            }
        }
    }
    if (doc.contains("validation")) {
        const auto& v = doc.at("validation");
        const std::string where = "config.validation";
        reject_unknown(v, {"mc_trials", "mc_tolerance", "fd_delta", "fd_step", "fd_tolerance", "sorter_population",
                           "hv_samples", "hv_tolerance"},
                       where);
        auto& s = rc.validation;
        s.mc_trials = v.contains("mc_trials") ? require<long>(v, "mc_trials", where) : s.mc_trials;
        s.mc_tolerance = v.contains("mc_tolerance") ? require<double>(v, "mc_tolerance", where) : s.mc_tolerance;
        s.fd_delta = v.contains("fd_delta") ? require<double>(v, "fd_delta", where) : s.fd_delta;
        s.fd_step = v.contains("fd_step") ? require<double>(v, "fd_step", where) : s.fd_step;
        s.fd_tolerance = v.contains("fd_tolerance") ? require<double>(v, "fd_tolerance", where) : s.fd_tolerance;
        s.sorter_population =
            v.contains("sorter_population") ? require<int>(v, "sorter_population", where) : s.sorter_population;
        s.hv_samples = v.contains("hv_samples") ? require<long>(v, "hv_samples", where) : s.hv_samples;
        s.hv_tolerance = v.contains("hv_tolerance") ? require<double>(v, "hv_tolerance", where) : s.hv_tolerance;
        if (s.mc_trials < 10000) {
            throw SchemaError(where + ": mc_trials must be at least 10000");
        }
    }
    rc.uncertainty.validate();
    rc.tolerance.validate();
    return rc;
}

/// Config file (if any) merged with command-line overrides.
inline RunConfig resolve_run_config(const CliOverrides& cli)
{
    RunConfig rc;
    if (cli.config) {
        const auto doc = read_json_file(*cli.config);
        try {
            rc = parse_run_config(doc, cli.config->parent_path());
        } catch (const SchemaError& e) {
            throw SchemaError(cli.config->string() + ": " + e.what());
        }
    }
    if (cli.network) {
        rc.network_path = *cli.network;
    }
    if (cli.case_mode) {
        rc.mode = detail::parse_case(*cli.case_mode, "--case");
    }
    if (cli.contingency) {
        rc.contingency = true;
    }
    if (cli.seed) {
        rc.rng_seed = *cli.seed;
    }
    if (cli.out) {
        rc.output_dir = *cli.out;
    }
    if (cli.generations) {
        rc.ga_overrides["generations"] = *cli.generations;
    }
    if (cli.population) {
        rc.ga_overrides["population_size"] = *cli.population;
    }
    if (rc.network_path.empty()) {
        throw SchemaError("no network given (use --network or the config key 'network')");
    }
    return rc;
}

/// Config echo; re-parsing it reproduces the run.
inline nlohmann::json config_echo(const RunConfig& rc, const GAConfig& ga)
{
    nlohmann::json j;
    j["network"] = rc.network_path.generic_string();
    j["case"] = detail::case_name(rc.mode);
    j["contingency"] = rc.contingency;
    j["observability"] = detail::observability_name(rc.observability);
    j["rng_seed"] = rc.rng_seed;
    j["ga"] = {{"population_size", ga.population_size},
               {"generations", ga.generations},
               {"crossover_prob", ga.crossover_prob},
               {"mutation_prob", ga.mutation_prob}};
    if (ga.reference_point) {
        j["ga"]["reference_point"] = *ga.reference_point;
    }
    j["uncertainty"] = {{"sigma_v", rc.uncertainty.sigma_v},
                        {"sigma_i", rc.uncertainty.sigma_i},
                        {"zi_sigma_factor", rc.uncertainty.zi_sigma_factor},
                        {"sigma_r", rc.uncertainty.common_sigma()}};
    j["tolerance"] = {{"delta", rc.tolerance.delta},
                      {"search", detail::search_name(rc.tolerance.search)},
                      {"increase", detail::increase_name(rc.tolerance.increase)}};
    return j;
}

inline nlohmann::json grid_fingerprint(const GridModel& grid)
{
    return {{"buses", grid.num_buses()},
            {"lines", grid.num_lines()},
            {"zero_injection", grid.zero_injection_count()},
            {"content_hash", detail::fnv1a_hex(to_json(grid).dump())}};
}

inline nlohmann::json member_json(const Individual& ind)
{
    nlohmann::json ch = nlohmann::json::array();
    for (int b : ind.x.buses()) {
        ch.push_back(ind.channels[static_cast<std::size_t>(b)]);
    }
    return {{"buses", ind.x.buses()},
            {"channels", ch},
            {"C", ind.cost()},
            {"U_percent", ind.objectives[1]},
            {"S", ind.objectives[2]},
            {"violations", ind.violations}};
}

/// Archive as CSV: C,U_percent,S,buses,channels with ';'-separated lists.
inline std::string pareto_csv(const ParetoArchive& ar)
{
    std::ostringstream os;
    os << "C,U_percent,S,buses,channels\n";
    for (const auto& m : ar.members) {
        std::vector<int> ch;
        for (int b : m.x.buses()) {
            ch.push_back(m.channels[static_cast<std::size_t>(b)]);
        }
        os << m.cost() << ',' << detail::fmt_double(m.objectives[1]) << ',' << detail::fmt_double(m.objectives[2])
           << ',' << detail::join(m.x.buses(), ";") << ',' << detail::join(ch, ";") << '\n';
    }
    return os.str();
}

inline std::string hypervolume_csv(const ParetoArchive& ar)
{
    std::ostringstream os;
    os << "generation,hypervolume\n";
    for (std::size_t g = 0; g < ar.hv_trace.size(); ++g) {
        os << g << ',' << detail::fmt_double(ar.hv_trace[g]) << '\n';
    }
    return os.str();
}

/// Buses grouped by channels used, one row per group, uninstrumented first.
inline std::string placement_table(const Individual& ind)
{
    std::map<int, std::vector<int>> groups;
    for (std::size_t i = 0; i < ind.x.size(); ++i) {
        groups[ind.x[i] ? ind.channels[i] : 0].push_back(static_cast<int>(i));
    }
    std::vector<std::string> labels;
    std::vector<std::string> counts;
    std::vector<std::string> lists;
    for (const auto& [ch, buses] : groups) {
        labels.push_back(ch == 0 ? "Without u-PMUs" : "With " + std::to_string(ch) + " u-PMUs channels");
        counts.push_back(std::to_string(buses.size()));
        lists.push_back(detail::join(buses, ", "));
    }
    std::size_t w0 = std::string("Type of bus").size();
    std::size_t w1 = std::string("No. of u-PMU").size();
    for (std::size_t k = 0; k < labels.size(); ++k) {
        w0 = std::max(w0, labels[k].size());
        w1 = std::max(w1, counts[k].size());
    }
    auto pad = [](std::string s, std::size_t w) {
        s.resize(std::max(w, s.size()), ' ');
        return s;
    };
    std::ostringstream os;
    os << "# C = " << ind.cost() << ", U = " << detail::fmt_double(ind.objectives[1])
       << " %, S = " << detail::fmt_double(ind.objectives[2]) << "\n";
    os << pad("Type of bus", w0) << " | " << pad("No. of u-PMU", w1) << " | Bus Numbers\n";
    for (std::size_t k = 0; k < labels.size(); ++k) {
        os << pad(labels[k], w0) << " | " << pad(counts[k], w1) << " | " << lists[k] << '\n';
    }
    return os.str();
}

struct OptimizeResult {
    ParetoArchive archive;
    nlohmann::json record;
    detail::OutputSet outputs;
};

inline double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

/// Optimizes and stages pareto.csv, hypervolume.csv, placement_table.txt,
/// run.json and timing.json.
inline OptimizeResult run_optimize(const RunConfig& rc)
{
    const auto t0 = std::chrono::steady_clock::now();
    auto grid = load_grid(rc.network_path);
    const GAConfig ga = detail::resolve_ga(rc, grid.num_buses());
    auto problem = make_problem(grid, rc.mode, rc.contingency, rc.uncertainty, rc.tolerance, rc.observability);
    const double t_load = seconds_since(t0);

    const auto t1 = std::chrono::steady_clock::now();
    OptimizeResult res;
    res.archive = evolve(problem, ga);
    const double t_evolve = seconds_since(t1);

    const auto& ar = res.archive;
    nlohmann::json members = nlohmann::json::array();
    for (const auto& m : ar.members) {
        members.push_back(member_json(m));
    }
    res.record = {{"tool_version", kToolVersion},
                  {"config", config_echo(rc, ga)},
                  {"grid", grid_fingerprint(grid)},
                  {"reference_point", ar.reference_point},
                  {"evaluations", ar.evaluations},
                  {"archive", members},
                  {"table_member", 0},
                  {"hv_trace", ar.hv_trace}};

    auto& f = res.outputs.files;
    f["pareto.csv"] = pareto_csv(ar);
    f["hypervolume.csv"] = hypervolume_csv(ar);
    f["placement_table.txt"] = placement_table(ar.members.front());
    f["run.json"] = res.record.dump(1) + "\n";
    const nlohmann::json timing = {{"load_seconds", t_load},
                                   {"evolve_seconds", t_evolve},
                                   {"total_seconds", seconds_since(t0)}};
    f["timing.json"] = timing.dump(1) + "\n";
    return res;
}

/// Bus ids separated by whitespace or commas; '#' starts a comment.
inline std::vector<int> parse_placement_text(const std::string& text)
{
    std::vector<int> ids;
    std::istringstream lines(text);
    std::string line;
    int lineno = 0;
    while (std::getline(lines, line)) {
        ++lineno;
        line = line.substr(0, line.find('#'));
        for (auto& c : line) {
            if (c == ',') {
                c = ' ';
            }
        }
        std::istringstream tok(line);
        std::string t;
        while (tok >> t) {
            std::size_t used = 0;
            int v = 0;
            try {
                v = std::stoi(t, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != t.size()) {
                throw SchemaError("placement line " + std::to_string(lineno) + ": '" + t + "' is not a bus id");
            }
            ids.push_back(v);
        }
    }
    return ids;
}

inline nlohmann::json evaluation_json(const Individual& ind, const GridModel& grid)
{
    const auto& c = ind.constraints;
    nlohmann::json j = member_json(ind);
    j["feasible"] = ind.feasible();
    j["status"] = to_string(ind.status);
    if (!ind.feasible()) {
        j["U_percent"] = nullptr;
        j["S"] = nullptr;
    }
    j["constraints"] = {{"violations_normal", c.violations_normal},
                        {"observable_normal", c.observable_normal},
                        {"contingency_evaluated", c.contingency_evaluated},
                        {"violations_contingency", c.violations_contingency},
                        {"channel_ok", c.channel_ok}};
    j["grid"] = grid_fingerprint(grid);
    return j;
}

struct EvaluateResult {
    Individual individual;
    nlohmann::json record;
    detail::OutputSet outputs;
};

inline EvaluateResult run_evaluate(const RunConfig& rc, const std::vector<int>& bus_ids)
{
    auto grid = load_grid(rc.network_path);
    const auto x = Placement::from_buses(static_cast<std::size_t>(grid.num_buses()), bus_ids);
    auto problem = make_problem(grid, rc.mode, rc.contingency, rc.uncertainty, rc.tolerance, rc.observability);
    EvaluateResult res;
    res.individual = evaluate(x, problem);
    res.record = evaluation_json(res.individual, grid);
    res.outputs.files["eval.json"] = res.record.dump(1) + "\n";
    return res;
}

struct CheckResult {
    std::string name;
    std::string status; // pass, fail, skipped
    nlohmann::json detail = nlohmann::json::object();
};

struct ValidateResult {
    std::vector<CheckResult> checks;
    nlohmann::json record;
    detail::OutputSet outputs;

    [[nodiscard]] bool all_passed() const
    {
        return std::none_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.status == "fail"; });
    }
};

namespace detail {

inline bool same_front(std::vector<Objectives> a, std::vector<Objectives> b, double rel)
{
    auto dedup = [](std::vector<Objectives>& v) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
    };
    dedup(a);
    dedup(b);
    if (a.size() != b.size()) {
        return false;
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t k = 0; k < 3; ++k) {
            if (std::abs(a[i][k] - b[i][k]) > rel * std::max(1.0, std::abs(b[i][k]))) {
                return false;
            }
        }
    }
    return true;
}

inline std::vector<Individual> random_population(int size, int n, Rng& rng)
{
    std::vector<Individual> pop(static_cast<std::size_t>(size));
    std::uniform_int_distribution<int> cost(1, 20);
    std::uniform_int_distribution<int> viol(0, 3);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (auto& ind : pop) {
        ind.x = Placement(static_cast<std::size_t>(n));
        ind.evaluated = true;
        ind.violations = unit(rng) < 0.2 ? viol(rng) : 0;
        ind.objectives = {static_cast<double>(cost(rng)), std::round(unit(rng) * 20.0) / 4.0, unit(rng)};
    }
    return pop;
}

} // namespace detail

/// Runs the independent oracles against the configured problem.
inline ValidateResult run_validate(const RunConfig& rc)
{
    auto grid = load_grid(rc.network_path);
    auto problem = make_problem(grid, rc.mode, rc.contingency, rc.uncertainty, rc.tolerance, rc.observability);
    const auto& vs = rc.validation;
    const double base = grid.base_voltage();
    const double sr = rc.uncertainty.common_sigma() * base;
    ValidateResult res;

    // model under test: all buses instrumented, observable in either case
    const Placement full(static_cast<std::size_t>(grid.num_buses()), true);
    const auto asg = assign_channels(grid, full, problem.channels);
    const auto model = build_measurement_model(grid, asg, problem.u, rc.uncertainty);

    {
        CheckResult c{"covariance_identities", "pass"};
        const auto f = wls_gain(model);
        const double fh = (f * model.H - Eigen::MatrixXd::Identity(model.H.cols(), model.H.cols())).cwiseAbs().maxCoeff();
        const auto frf = error_covariance(model).phi_real;
        const auto inv = information_inverse(model);
        const double rel = (frf - inv).norm() / inv.norm();
        c.detail = {{"max_abs_FH_minus_I", fh}, {"rel_FRFt_vs_inverse", rel}, {"tolerance", 1e-8}};
        c.status = fh <= 1e-8 && rel <= 1e-8 ? "pass" : "fail";
        res.checks.push_back(c);
    }
    {
        const auto mc = validation::monte_carlo_uncertainty(model, validation::flat_state(grid.num_buses(), base),
                                                            vs.mc_trials, rc.rng_seed, base);
        const double u = max_uncertainty(information_covariance(model), base);
        CheckResult d{"monte_carlo_covariance_diagonal", "pass"};
        d.detail = {{"trials", mc.trials}, {"max_rel_error", mc.max_rel_error}, {"tolerance", vs.mc_tolerance}};
        d.status = mc.max_rel_error <= vs.mc_tolerance ? "pass" : "fail";
        res.checks.push_back(d);
        CheckResult e{"monte_carlo_uncertainty", "pass"};
        const double rel = std::abs(mc.empirical_U - u) / u;
        e.detail = {{"analytic_U_percent", u},
                    {"empirical_U_percent", mc.empirical_U},
                    {"empirical_max_bus_rms_percent", mc.empirical_max_bus_rms},
                    {"rel_error", rel},
                    {"tolerance", vs.mc_tolerance}};
        e.status = rel <= vs.mc_tolerance ? "pass" : "fail";
        res.checks.push_back(e);
    }
    {
        CheckResult c{"finite_difference_sensitivity", "pass"};
        ToleranceSpec tol = rc.tolerance;
        tol.delta = vs.fd_delta;
        tol.increase = IncreaseMode::Signed;
        tol.search = SensitivitySearch::PerLineCorners;
        const double s = max_sensitivity(model, grid, tol, sr).s_value;
        const double fd = validation::first_order_sensitivity(model, grid, vs.fd_delta, vs.fd_step, sr);
        const double rel = fd > 0.0 ? std::abs(s - fd) / fd : std::abs(s);
        c.detail = {{"S", s}, {"first_order", fd}, {"rel_error", rel}, {"tolerance", vs.fd_tolerance}};
        c.status = rel <= vs.fd_tolerance ? "pass" : "fail";
        res.checks.push_back(c);
    }
    {
        CheckResult c{"exhaustive_front", "pass"};
        if (grid.num_buses() > validation::kExhaustiveCap) {
            c.status = "skipped";
            c.detail = {{"reason", "exhaustive enumeration refused: " + std::to_string(grid.num_buses()) +
                                       " buses exceeds the cap of " + std::to_string(validation::kExhaustiveCap)}};
        } else {
            const auto ex = validation::exhaustive_pareto(problem);
            std::vector<Objectives> truth;
            for (auto i : ex.true_front) {
                truth.push_back(ex.all_evaluations[i].objectives);
            }
            if (truth.empty()) {
                c.status = "skipped";
                c.detail = {{"reason", "no feasible placement exists"}};
            } else {
                GAConfig ga = detail::resolve_ga(rc, grid.num_buses());
                const int want = std::max(4, (1 << grid.num_buses()) / 4);
                ga.population_size = std::min(256, want + want % 2);
                ga.generations = std::max(ga.generations, 100);
                const auto ar = evolve(problem, ga);
                std::vector<Objectives> got;
                for (const auto& m : ar.members) {
                    got.push_back(m.objectives);
                }
                const bool ok = detail::same_front(got, truth, 1e-9);
                c.detail = {{"placements", ex.all_evaluations.size()},
                            {"true_front_size", truth.size()},
                            {"archive_size", got.size()},
                            {"population", ga.population_size},
                            {"generations", ga.generations}};
                c.status = ok ? "pass" : "fail";
            }
        }
        res.checks.push_back(c);
    }
    {
        CheckResult c{"nondominated_sort", "pass"};
        Rng rng(rc.rng_seed);
        auto pop = detail::random_population(vs.sorter_population, grid.num_buses(), rng);
        const auto fast = nondominated_sort(pop);
        const auto brute = validation::brute_force_sort(pop);
        c.detail = {{"population", vs.sorter_population}, {"fronts", fast.size()}};
        c.status = fast == brute ? "pass" : "fail";
        res.checks.push_back(c);
    }
    {
        CheckResult c{"hypervolume", "pass"};
        Rng rng(rc.rng_seed + 1);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        std::vector<Objectives> pts(20);
        for (auto& p : pts) {
            p = {unit(rng), unit(rng), unit(rng)};
        }
        const Objectives ref{1.0, 1.0, 1.0};
        const double exact = hypervolume(std::span<const Objectives>(pts), ref);
        const double est =
            validation::monte_carlo_hypervolume(std::span<const Objectives>(pts), ref, vs.hv_samples, rc.rng_seed);
        const double rel = std::abs(exact - est) / exact;
        c.detail = {{"exact", exact}, {"monte_carlo", est}, {"rel_error", rel}, {"tolerance", vs.hv_tolerance}};
        c.status = rel <= vs.hv_tolerance ? "pass" : "fail";
        res.checks.push_back(c);
    }

    nlohmann::json checks = nlohmann::json::array();
    for (const auto& c : res.checks) {
        checks.push_back({{"name", c.name}, {"status", c.status}, {"detail", c.detail}});
    }
    res.record = {{"tool_version", kToolVersion},
                  {"grid", grid_fingerprint(grid)},
                  {"case", detail::case_name(rc.mode)},
                  {"contingency", rc.contingency},
                  {"rng_seed", rc.rng_seed},
                  {"checks", checks},
                  {"all_passed", res.all_passed()}};
    res.outputs.files["validation.json"] = res.record.dump(1) + "\n";
    return res;
}

} // namespace mupmu

#endif
