#ifndef EPM_DE_HPP
#define EPM_DE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <epm/benchmarks.hpp>
#include <epm/parallel.hpp>
#include <epm/random.hpp>

namespace epm {

/// One DE configuration (NP, F, CR).
struct ParameterConfig {
    int np = 0;
    double f = 0.0;
    double cr = 0.0;

    friend bool operator==(const ParameterConfig&, const ParameterConfig&) = default;
};

inline void validate(const ParameterConfig& c)
{
    if (c.np < 4)
        throw std::invalid_argument("NP must be at least 4 (target plus three distinct donors), got " + std::to_string(c.np));
    if (!(c.f > 0.0 && c.f <= 3.0))
        throw std::invalid_argument("F must lie in (0, 3], got " + std::to_string(c.f));
    if (!(c.cr >= 0.0 && c.cr <= 1.0))
        throw std::invalid_argument("CR must lie in [0, 1], got " + std::to_string(c.cr));
}

struct DEConfig {
    int np = 0;
    double f = 0.5;
    double cr = 0.9;
    long max_fes = 0;
    std::uint64_t seed = 0;

    ParameterConfig parameters() const { return {np, f, cr}; }
};

/// Budget used when an experiment does not set one explicitly.
inline long default_max_fes(int dimension) { return 10000L * dimension; }

struct Checkpoint {
    long fes = 0;
    double best_value = 0.0;
    friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

struct RunResult {
    ProblemId problem = ProblemId::F1;
    int dimension = 0;
    double best_value = std::numeric_limits<double>::infinity();
    std::vector<double> best_point;
    long fes_used = 0;
    std::vector<Checkpoint> trajectory;

    friend bool operator==(const RunResult&, const RunResult&) = default;
};

/// Instrumentation for tests: observes every mutation (target, r1, r2, r3)
/// and the population's best objective after each generation.
struct RunObserver {
    std::function<void(std::size_t, std::size_t, std::size_t, std::size_t)> on_mutation;
    std::function<void(long, double)> on_generation;
};

struct RunOptions {
    bool record_trajectory = false;
    const RunObserver* observer = nullptr;
};

/// Vanilla DE/rand/1/bin with greedy (<=) selection and generational
/// replacement. Trial components leaving the box are clamped unless the problem
/// is unbounded. Runs exactly NP + g*NP evaluations with g = floor((max_fes - NP) / NP).
inline RunResult de_run(const ProblemInstance& problem, const DEConfig& config, const RunOptions& options = {})
{
    validate(config.parameters());
    const int d = problem.dimension;
    if (d < 1)
        throw std::invalid_argument("de_run: problem dimension must be positive");
    if (config.max_fes < config.np)
        throw std::invalid_argument("de_run: budget " + std::to_string(config.max_fes) + " is smaller than NP " + std::to_string(config.np));

    const auto np = static_cast<std::size_t>(config.np);
    const auto nd = static_cast<std::size_t>(d);
    Rng rng(config.seed);
    Rng noise_rng(mix_seed(config.seed, 0x6e6f697365ULL));
    Rng* noise = problem.noisy ? &noise_rng : nullptr;

    RunResult result;
    result.problem = problem.id;
    result.dimension = d;
    result.best_point.assign(nd, 0.0);

    std::vector<double> pop(np * nd), next(np * nd);
    std::vector<double> fit(np), next_fit(np);
    auto row = [nd](std::vector<double>& v, std::size_t i) { return std::span<double>(v.data() + i * nd, nd); };

    auto record_best = [&](std::span<const double> x, double fx) {
        if (fx < result.best_value) {
            result.best_value = fx;
            std::copy(x.begin(), x.end(), result.best_point.begin());
        }
    };

    for (std::size_t i = 0; i < np; ++i) {
        auto x = row(pop, i);
        for (std::size_t j = 0; j < nd; ++j)
            x[j] = rng.uniform(problem.lower_bounds[j], problem.upper_bounds[j]);
        fit[i] = evaluate(problem, x, noise);
        record_best(x, fit[i]);
    }
    result.fes_used = config.np;
    if (options.record_trajectory)
        result.trajectory.push_back({result.fes_used, result.best_value});

    std::vector<double> trial(nd);
    while (result.fes_used + config.np <= config.max_fes) {
        for (std::size_t i = 0; i < np; ++i) {
            std::size_t r1, r2, r3;
            do { r1 = rng.index(np); } while (r1 == i);
            do { r2 = rng.index(np); } while (r2 == i || r2 == r1);
            do { r3 = rng.index(np); } while (r3 == i || r3 == r1 || r3 == r2);
            if (options.observer && options.observer->on_mutation)
                options.observer->on_mutation(i, r1, r2, r3);

            const auto parent = row(pop, i);
            const auto a = row(pop, r1), b = row(pop, r2), c = row(pop, r3);
            const std::size_t forced = rng.index(nd);
            for (std::size_t j = 0; j < nd; ++j) {
                if (rng.uniform() < config.cr || j == forced) {
                    double v = a[j] + config.f * (b[j] - c[j]);
                    if (problem.bounded)
                        v = std::clamp(v, problem.lower_bounds[j], problem.upper_bounds[j]);
                    trial[j] = v;
                } else {
                    trial[j] = parent[j];
                }
            }
            const double ft = evaluate(problem, trial, noise);
            record_best(trial, ft);
            auto dst = row(next, i);
            if (ft <= fit[i]) {
                std::copy(trial.begin(), trial.end(), dst.begin());
                next_fit[i] = ft;
            } else {
                std::copy(parent.begin(), parent.end(), dst.begin());
                next_fit[i] = fit[i];
            }
        }
        pop.swap(next);
        fit.swap(next_fit);
        result.fes_used += config.np;
        if (options.record_trajectory)
            result.trajectory.push_back({result.fes_used, result.best_value});
        if (options.observer && options.observer->on_generation)
            options.observer->on_generation(result.fes_used, *std::min_element(fit.begin(), fit.end()));
    }
    return result;
}

/// f(x_best) - f(x*), with float noise in (-1e-9, 0) clamped to zero.
inline double approximation_error(const RunResult& result, const ProblemInstance& problem)
{
    if (result.problem != problem.id || result.dimension != problem.dimension)
        throw std::invalid_argument("approximation_error: run of " + problem_label(result.problem) + " evaluated against " + problem_label(problem.id));
    const double err = result.best_value - problem.optimum_value;
    return (err < 0.0 && err > -1e-9) ? 0.0 : err;
}

struct PerformanceRecord {
    ProblemId problem_id = ProblemId::F1;
    int dimension = 0;
    ParameterConfig config;
    std::vector<double> run_errors;
    double mean_error = 0.0;
    int n_runs = 0;
    std::uint64_t base_seed = 0;
    long max_fes = 0;
};

inline double mean_of(const std::vector<double>& v)
{
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

/// Seed of run `i` within one measured configuration.
inline std::uint64_t run_seed(std::uint64_t base_seed, int run_index)
{
    return mix_seed(base_seed, static_cast<std::uint64_t>(run_index));
}

/// Averaged approximation error of `config` over n independent runs. Runs may
/// execute on `workers` threads; results are stored by run index.
inline PerformanceRecord measure_config(const ProblemInstance& problem, const ParameterConfig& config, int n_runs,
    std::uint64_t base_seed, long max_fes, int workers = 1)
{
    if (n_runs < 1)
        throw std::invalid_argument("measure_config: n_runs must be at least 1");
    PerformanceRecord rec;
    rec.problem_id = problem.id;
    rec.dimension = problem.dimension;
    rec.config = config;
    rec.n_runs = n_runs;
    rec.base_seed = base_seed;
    rec.max_fes = max_fes;
    rec.run_errors.assign(static_cast<std::size_t>(n_runs), 0.0);
    parallel_for(static_cast<std::size_t>(n_runs), workers, [&](std::size_t i) {
        DEConfig de{config.np, config.f, config.cr, max_fes, run_seed(base_seed, static_cast<int>(i))};
        rec.run_errors[i] = approximation_error(de_run(problem, de), problem);
    });
    rec.mean_error = mean_of(rec.run_errors);
    return rec;
}

} // namespace epm

#endif // EPM_DE_HPP
