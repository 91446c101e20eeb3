#ifndef MUPMU_MOEA_HPP
#define MUPMU_MOEA_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <thread>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "mupmu/error.hpp"
#include "mupmu/estimation.hpp"
#include "mupmu/grid.hpp"
#include "mupmu/pareto.hpp"
#include "mupmu/placement.hpp"
#include "mupmu/sensitivity.hpp"

namespace mupmu {

/// Everything an objective evaluation needs, built once per run.
struct Problem {
    GridModel grid;
    ConnectivityMatrix a;
    ContingencySet contingencies;
    ZinVector u;
    ChannelConfig channels;
    UncertaintyParams params;
    ToleranceSpec tol;

    [[nodiscard]] int num_buses() const { return grid.num_buses(); }
    [[nodiscard]] bool contingency_aware() const { return channels.contingency_aware; }
};

inline Problem make_problem(GridModel grid, CaseMode mode, bool contingency_aware, UncertaintyParams params = {},
                            ToleranceSpec tol = {}, Observability obs = Observability::ChannelLimited)
{
    params.validate();
    tol.validate();
    auto a = build_connectivity(grid);
    auto cont = build_contingencies(grid, a);
    auto u = zin_vector(grid);
    auto ch = make_channel_config(grid, a, mode, contingency_aware, obs);
    return {std::move(grid), std::move(a), std::move(cont), std::move(u), std::move(ch), params, tol};
}

enum class EvalStatus { Feasible, Unobservable, Singular, SingularPerturbation };

inline const char* to_string(EvalStatus s)
{
    switch (s) {
    case EvalStatus::Feasible:
        return "feasible";
    case EvalStatus::Unobservable:
        return "unobservable";
    case EvalStatus::Singular:
        return "singular";
    case EvalStatus::SingularPerturbation:
        return "singular_under_perturbation";
    }
    return "unknown";
}

using Objectives = Point<3>; // (C, U percent, S)

struct Individual {
    Placement x;
    bool evaluated = false;
    Objectives objectives{};
    int violations = 0;
    EvalStatus status = EvalStatus::Unobservable;
    std::vector<int> channels; // channels_used per bus, 0 where not instrumented
    ConstraintReport constraints;
    int rank = 0;
    double crowding = 0.0;

    [[nodiscard]] bool feasible() const { return evaluated && violations == 0; }
    [[nodiscard]] int cost() const { return static_cast<int>(objectives[0]); }
};

/// Scores one placement. Failures fold into violations; U and S then hold +inf
/// while C keeps the channel count.
inline Individual evaluate(const Placement& x, const Problem& p)
{
    constexpr double inf = std::numeric_limits<double>::infinity();
    Individual ind;
    ind.x = x;
    ind.evaluated = true;
    const auto asg = assign_channels(p.grid, x, p.channels);
    ind.channels.resize(asg.buses.size());
    for (std::size_t i = 0; i < asg.buses.size(); ++i) {
        ind.channels[i] = asg.buses[i].channels_used;
    }
    ind.constraints = check_constraints(p.grid, x, p.u, p.channels, asg, p.a, p.contingencies);
    const double cost = channel_cost(x, asg);
    ind.violations = ind.constraints.total(p.contingency_aware()) + (ind.constraints.channel_ok ? 0 : 1);
    if (ind.violations > 0) {
        ind.objectives = {cost, inf, inf};
        ind.status = EvalStatus::Unobservable;
        return ind;
    }

    const auto model = build_measurement_model(p.grid, asg, p.u, p.params);
    Eigen::MatrixXd phi;
    try {
        phi = information_inverse(model);
    } catch (const NumericalError&) {
        const int deficiency =
            model.H.rows() == 0 ? 2 * p.num_buses() : rank_deficiency(information_spectrum(information_matrix(model)));
        ind.violations = std::max(1, deficiency);
        ind.objectives = {cost, inf, inf};
        ind.status = EvalStatus::Singular;
        return ind;
    }
    const double base = p.grid.base_voltage();
    const double sr = p.params.common_sigma() * base;
    try {
        const double u = max_uncertainty(complex_covariance(phi), base);
        const auto sens = max_sensitivity(model, p.grid, p.tol, sr);
        ind.objectives = {cost, u, sens.s_value};
        ind.status = EvalStatus::Feasible;
    } catch (const NumericalError&) {
        ind.violations = 1;
        ind.objectives = {cost, inf, inf};
        ind.status = EvalStatus::SingularPerturbation;
    }
    return ind;
}

/// Constraint domination: feasible beats infeasible, infeasible compare by
/// violation count, feasible by plain Pareto dominance.
inline bool constrained_dominates(const Individual& a, const Individual& b)
{
    const bool fa = a.violations == 0;
    const bool fb = b.violations == 0;
    if (fa != fb) {
        return fa;
    }
    if (!fa) {
        return a.violations < b.violations;
    }
    return dominates(a.objectives, b.objectives);
}

/// Sorts into fronts under constrained_dominates and stores each rank.
inline std::vector<std::vector<std::size_t>> nondominated_sort(std::vector<Individual>& pop)
{
    auto fronts = fast_nondominated_sort(std::span<const Individual>(pop), constrained_dominates);
    for (std::size_t f = 0; f < fronts.size(); ++f) {
        for (auto i : fronts[f]) {
            pop[i].rank = static_cast<int>(f);
        }
    }
    return fronts;
}

/// Crowding for the members of one front. Infeasible fronts carry no
/// meaningful objectives and get 0.
inline void assign_crowding(std::vector<Individual>& pop, const std::vector<std::size_t>& front)
{
    if (front.empty()) {
        return;
    }
    if (!pop[front.front()].feasible()) {
        for (auto i : front) {
            pop[i].crowding = 0.0;
        }
        return;
    }
    std::vector<Objectives> pts;
    pts.reserve(front.size());
    for (auto i : front) {
        pts.push_back(pop[i].objectives);
    }
    const auto d = crowding_distance(std::span<const Objectives>(pts));
    for (std::size_t k = 0; k < front.size(); ++k) {
        pop[front[k]].crowding = d[k];
    }
}

struct GAConfig {
    int population_size = 100;
    int generations = 300;
    double crossover_prob = 1.0;
    double mutation_prob = 0.1;
    std::uint64_t rng_seed = 1;
    unsigned threads = 0; // 0 picks hardware concurrency
    std::optional<Objectives> reference_point;

    static GAConfig defaults_for(int num_buses)
    {
        GAConfig c;
        c.population_size = num_buses <= 50 ? 100 : 200;
        return c;
    }

    void validate() const
    {
        if (population_size < 4 || population_size % 2 != 0) {
            throw SchemaError("ga: population_size must be even and at least 4");
        }
        if (generations < 0) {
            throw SchemaError("ga: generations must be nonnegative");
        }
        if (crossover_prob < 0.0 || crossover_prob > 1.0 || mutation_prob < 0.0 || mutation_prob > 1.0) {
            throw SchemaError("ga: probabilities must lie in [0, 1]");
        }
    }
};

struct ParetoArchive {
    std::vector<Individual> members;
    std::vector<double> hv_trace;
    Objectives reference_point{};
    std::size_t evaluations = 0;
};

using Rng = std::mt19937_64;

namespace detail {

inline bool bernoulli(Rng& rng, double p)
{
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p;
}

inline std::size_t uniform_index(Rng& rng, std::size_t n)
{
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

/// Runs fn(i) for i in [0, n) on up to `threads` workers; results must be
/// written by index so the schedule cannot affect them.
template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn)
{
    if (threads == 0) {
        threads = std::max(1u, std::thread::hardware_concurrency());
    }
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) {
            fn(i);
        }
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    for (unsigned t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
            try {
                for (std::size_t i = t; i < n; i += threads) {
                    fn(i);
                }
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) {
        th.join();
    }
    for (auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
}

inline bool archive_order(const Individual& a, const Individual& b)
{
    if (a.objectives != b.objectives) {
        return a.objectives < b.objectives;
    }
    return a.x < b.x;
}

} // namespace detail

/// Memoized evaluate() over a fixed problem.
class Evaluator {
public:
    Evaluator(const Problem& problem, unsigned threads) : problem_(problem), threads_(threads) {}

    std::vector<Individual> operator()(const std::vector<Placement>& xs)
    {
        std::vector<Placement> todo;
        std::unordered_set<Placement, PlacementHash> queued;
        for (const auto& x : xs) {
            if (!cache_.contains(x) && queued.insert(x).second) {
                todo.push_back(x);
            }
        }
        std::vector<Individual> fresh(todo.size());
        detail::parallel_for(todo.size(), threads_, [&](std::size_t i) { fresh[i] = evaluate(todo[i], problem_); });
        for (auto& ind : fresh) {
            cache_.emplace(ind.x, std::move(ind));
        }
        std::vector<Individual> out;
        out.reserve(xs.size());
        for (const auto& x : xs) {
            out.push_back(cache_.at(x));
        }
        return out;
    }

    [[nodiscard]] std::size_t evaluations() const { return cache_.size(); }

private:
    const Problem& problem_;
    unsigned threads_;
    std::unordered_map<Placement, Individual, PlacementHash> cache_;
};

/// Greedy observability cover: add the bus that leaves the fewest violated
/// rows until none remain, breaking ties at random.
inline Placement greedy_cover(const Problem& p, Rng& rng)
{
    const auto n = static_cast<std::size_t>(p.num_buses());
    Placement x(n);
    auto violations = [&](const Placement& cand) {
        const auto asg = assign_channels(p.grid, cand, p.channels);
        return check_constraints(p.grid, cand, p.u, p.channels, asg, p.a, p.contingencies)
            .total(p.contingency_aware());
    };
    int current = violations(x);
    while (current > 0) {
        int best = std::numeric_limits<int>::max();
        std::vector<std::size_t> ties;
        for (std::size_t b = 0; b < n; ++b) {
            if (x[b]) {
                continue;
            }
            x.set(b, true);
            const int v = violations(x);
            x.set(b, false);
            if (v < best) {
                best = v;
                ties.assign(1, b);
            } else if (v == best) {
                ties.push_back(b);
            }
        }
        if (ties.empty()) {
            break;
        }
        x.set(ties[detail::uniform_index(rng, ties.size())], true);
        current = best;
    }
    return x;
}

/// Initial placements: greedy covers (about a quarter of the population),
/// the all-ones placement, then uniform random fill. No duplicates.
inline std::vector<Placement> seed_population(const Problem& p, const GAConfig& cfg, Rng& rng)
{
    const auto n = static_cast<std::size_t>(p.num_buses());
    const auto target = static_cast<std::size_t>(cfg.population_size);
    std::vector<Placement> pop;
    std::unordered_set<Placement, PlacementHash> seen;
    auto add = [&](Placement x) {
        if (pop.size() < target && seen.insert(x).second) {
            pop.push_back(std::move(x));
        }
    };
    const std::size_t greedy = std::max<std::size_t>(1, target / 4);
    for (std::size_t k = 0; k < greedy; ++k) {
        add(greedy_cover(p, rng));
    }
    add(Placement(n, true));
    // the placement space may be smaller than the population
    const double space = std::ldexp(1.0, static_cast<int>(std::min<std::size_t>(n, 60)));
    const auto reachable = static_cast<std::size_t>(std::min(space, static_cast<double>(target)));
    while (pop.size() < reachable) {
        Placement x(n);
        for (std::size_t i = 0; i < n; ++i) {
            x.set(i, detail::bernoulli(rng, 0.5));
        }
        add(std::move(x));
    }
    return pop;
}

/// Binary tournament on (rank, crowding); returns indices into `pop`.
inline std::vector<std::size_t> select_parents(const std::vector<Individual>& pop, std::size_t count, Rng& rng)
{
    std::vector<std::size_t> out;
    out.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        const auto i = detail::uniform_index(rng, pop.size());
        const auto j = detail::uniform_index(rng, pop.size());
        const auto& a = pop[i];
        const auto& b = pop[j];
        bool pick_b = false;
        if (b.rank != a.rank) {
            pick_b = b.rank < a.rank;
        } else {
            pick_b = b.crowding > a.crowding;
        }
        out.push_back(pick_b ? j : i);
    }
    return out;
}

/// Uniform crossover on consecutive parent pairs, then per-offspring
/// single-bit mutation.
inline std::vector<Placement> vary(const std::vector<Placement>& parents, const GAConfig& cfg, Rng& rng)
{
    std::vector<Placement> kids;
    kids.reserve(parents.size());
    for (std::size_t k = 0; k + 1 < parents.size(); k += 2) {
        Placement c1 = parents[k];
        Placement c2 = parents[k + 1];
        if (detail::bernoulli(rng, cfg.crossover_prob)) {
            for (std::size_t i = 0; i < c1.size(); ++i) {
                if (detail::bernoulli(rng, 0.5)) {
                    c1.set(i, parents[k + 1][i]);
                    c2.set(i, parents[k][i]);
                }
            }
        }
        kids.push_back(std::move(c1));
        kids.push_back(std::move(c2));
    }
    if (parents.size() % 2 == 1) {
        kids.push_back(parents.back());
    }
    for (auto& c : kids) {
        if (c.size() > 0 && detail::bernoulli(rng, cfg.mutation_prob)) {
            c.flip(detail::uniform_index(rng, c.size()));
        }
    }
    return kids;
}

/// Ranks and crowds a population in place.
inline void rank_population(std::vector<Individual>& pop)
{
    for (const auto& front : nondominated_sort(pop)) {
        assign_crowding(pop, front);
    }
}

/// (mu + lambda) truncation by (rank, crowding). Repeated placements only
/// fill slots left after every distinct one has been placed.
inline std::vector<Individual> environmental_select(std::vector<Individual> merged, std::size_t size)
{
    std::vector<Individual> unique;
    std::vector<Individual> repeats;
    std::unordered_set<Placement, PlacementHash> seen;
    for (auto& ind : merged) {
        if (seen.insert(ind.x).second) {
            unique.push_back(std::move(ind));
        } else {
            repeats.push_back(std::move(ind));
        }
    }
    std::vector<Individual> next;
    next.reserve(size);
    const auto fronts = nondominated_sort(unique);
    for (const auto& front : fronts) {
        assign_crowding(unique, front);
        if (next.size() + front.size() <= size) {
            for (auto i : front) {
                next.push_back(unique[i]);
            }
            continue;
        }
        std::vector<std::size_t> order = front;
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return unique[a].crowding > unique[b].crowding; });
        for (auto i : order) {
            if (next.size() == size) {
                break;
            }
            next.push_back(unique[i]);
        }
        break;
    }
    for (std::size_t k = 0; next.size() < size && k < repeats.size(); ++k) {
        next.push_back(repeats[k]);
    }
    rank_population(next);
    return next;
}

/// Adds feasible, nondominated, not-yet-archived individuals. Returns true if
/// anything changed.
inline bool update_archive(std::vector<Individual>& members, const std::vector<Individual>& candidates)
{
    bool changed = false;
    for (const auto& c : candidates) {
        if (!c.feasible()) {
            continue;
        }
        bool skip = false;
        for (const auto& m : members) {
            if (m.x == c.x || dominates(m.objectives, c.objectives)) {
                skip = true;
                break;
            }
        }
        if (skip) {
            continue;
        }
        std::erase_if(members, [&](const Individual& m) { return dominates(c.objectives, m.objectives); });
        members.push_back(c);
        changed = true;
    }
    if (changed) {
        std::sort(members.begin(), members.end(), detail::archive_order);
    }
    return changed;
}

/// Reference point (C_max + 1, 1.1 U_max, 1.1 S_max) over feasible individuals.
inline std::optional<Objectives> reference_from(const std::vector<Individual>& pop)
{
    std::optional<Objectives> ref;
    for (const auto& ind : pop) {
        if (!ind.feasible()) {
            continue;
        }
        if (!ref) {
            ref = ind.objectives;
        } else {
            for (std::size_t k = 0; k < 3; ++k) {
                (*ref)[k] = std::max((*ref)[k], ind.objectives[k]);
            }
        }
    }
    if (ref) {
        (*ref)[0] += 1.0;
        (*ref)[1] *= 1.1;
        (*ref)[2] = (*ref)[2] > 0.0 ? 1.1 * (*ref)[2] : 1.0;
    }
    return ref;
}

/// Hypervolume of the members lying strictly inside the reference box.
inline double archive_hypervolume(const std::vector<Individual>& members, const Objectives& ref)
{
    std::vector<Objectives> pts;
    for (const auto& m : members) {
        const auto& o = m.objectives;
        if (o[0] < ref[0] && o[1] < ref[1] && o[2] < ref[2]) {
            pts.push_back(o);
        }
    }
    return hypervolume(std::span<const Objectives>(pts), ref);
}

inline ParetoArchive evolve(const Problem& p, const GAConfig& cfg)
{
    cfg.validate();
    Rng rng(cfg.rng_seed);
    Evaluator eval(p, cfg.threads);
    ParetoArchive archive;

    auto pop = eval(seed_population(p, cfg, rng));
    rank_population(pop);
    update_archive(archive.members, pop);

    std::optional<Objectives> ref = cfg.reference_point;
    if (!ref) {
        ref = reference_from(pop);
    }
    // The archive's dominated region only grows, but the slab sum can round
    // differently once a point splits a slab. Drops at rounding level are
    // folded back; anything larger is kept so it stays visible.
    auto record = [&] {
        double hv = ref ? archive_hypervolume(archive.members, *ref) : 0.0;
        if (!archive.hv_trace.empty()) {
            const double prev = archive.hv_trace.back();
            if (hv < prev && prev - hv <= 1e-12 * prev) {
                hv = prev;
            }
        }
        archive.hv_trace.push_back(hv);
    };
    record();

    const auto size = static_cast<std::size_t>(cfg.population_size);
    for (int g = 1; g <= cfg.generations; ++g) {
        const auto idx = select_parents(pop, size, rng);
        std::vector<Placement> parents;
        parents.reserve(idx.size());
        for (auto i : idx) {
            parents.push_back(pop[i].x);
        }
        auto offspring = eval(vary(parents, cfg, rng));
        update_archive(archive.members, offspring);
        if (!ref) {
            ref = reference_from(offspring);
        }
        pop.insert(pop.end(), offspring.begin(), offspring.end());
        pop = environmental_select(std::move(pop), size);
        record();
    }

    if (archive.members.empty()) {
        throw InfeasibleError("no feasible individual found");
    }
    archive.reference_point = *ref;
    archive.evaluations = eval.evaluations();
    return archive;
}

} // namespace mupmu

#endif
