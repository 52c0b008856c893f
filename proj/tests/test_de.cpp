#include <gtest/gtest.h>

#include <algorithm>
#include <set>
#include <vector>

#include <epm/de.hpp>

using namespace epm;

namespace {

// Independent transcription of DE/rand/1/bin on the plain sphere, consuming the
// random stream in the documented order: init row by row, then per target
// r1, r2, r3 (rejection), the forced index, and one uniform per coordinate.
double reference_sphere_de(int d, int np, double f, double cr, long max_fes, std::uint64_t seed)
{
    Rng rng(seed);
    std::vector<std::vector<double>> pop(static_cast<std::size_t>(np), std::vector<double>(static_cast<std::size_t>(d)));
    std::vector<double> fit(static_cast<std::size_t>(np));
    auto sphere = [](const std::vector<double>& x) {
        double s = 0.0;
        for (double v : x)
            s += v * v;
        return s;
    };
    double best = 1e300;
    for (auto& x : pop)
        for (auto& v : x)
            v = rng.uniform(-5.12, 5.12);
    for (int i = 0; i < np; ++i) {
        fit[static_cast<std::size_t>(i)] = sphere(pop[static_cast<std::size_t>(i)]);
        best = std::min(best, fit[static_cast<std::size_t>(i)]);
    }
    long fes = np;
    while (fes + np <= max_fes) {
        auto next = pop;
        auto next_fit = fit;
        for (std::size_t i = 0; i < static_cast<std::size_t>(np); ++i) {
            std::size_t r1, r2, r3;
            do r1 = rng.index(static_cast<std::size_t>(np)); while (r1 == i);
            do r2 = rng.index(static_cast<std::size_t>(np)); while (r2 == i || r2 == r1);
            do r3 = rng.index(static_cast<std::size_t>(np)); while (r3 == i || r3 == r1 || r3 == r2);
            const std::size_t jr = rng.index(static_cast<std::size_t>(d));
            std::vector<double> u(static_cast<std::size_t>(d));
            for (std::size_t j = 0; j < u.size(); ++j) {
                if (rng.uniform() < cr || j == jr)
                    u[j] = std::clamp(pop[r1][j] + f * (pop[r2][j] - pop[r3][j]), -5.12, 5.12);
                else
                    u[j] = pop[i][j];
            }
            const double fu = sphere(u);
            best = std::min(best, fu);
            if (fu <= fit[i]) {
                next[i] = u;
                next_fit[i] = fu;
            }
        }
        pop = next;
        fit = next_fit;
        fes += np;
    }
    return best;
}

} // namespace

TEST(DeRun, MatchesReferenceTranscription)
{
    const auto p = make_problem(ProblemId::F1, 3);
    for (std::uint64_t seed : {1ULL, 2ULL, 77ULL}) {
        const auto r = de_run(p, {12, 0.7, 0.4, 2400, seed});
        EXPECT_EQ(r.best_value, reference_sphere_de(3, 12, 0.7, 0.4, 2400, seed)) << seed;
    }
}

TEST(DeRun, BudgetAccounting)
{
    const auto p = make_problem(ProblemId::F6, 2);
    for (auto [np, fes] : std::vector<std::pair<int, long>>{{4, 4}, {30, 1000}, {7, 100}, {20, 5000}}) {
        const auto r = de_run(p, {np, 0.5, 0.9, fes, 3});
        const long g = (fes - np) / np;
        EXPECT_EQ(r.fes_used, np + g * np);
        EXPECT_LE(r.fes_used, fes);
    }
}

TEST(DeRun, Deterministic)
{
    const auto p = make_problem(ProblemId::F16, 5);
    const DEConfig c{25, 0.6, 0.3, 3000, 42};
    EXPECT_EQ(de_run(p, c), de_run(p, c));
    auto c2 = c;
    c2.seed = 43;
    EXPECT_NE(de_run(p, c).best_value, de_run(p, c2).best_value);
}

TEST(DeRun, TrajectoryMonotoneAndElitist)
{
    const auto p = make_problem(ProblemId::F15, 5);
    double last_pop_best = 1e300;
    bool elitist = true;
    RunObserver obs;
    obs.on_generation = [&](long, double pop_best) {
        elitist &= pop_best <= last_pop_best;
        last_pop_best = pop_best;
    };
    const auto r = de_run(p, {20, 0.9, 0.9, 6000, 8}, {true, &obs});
    EXPECT_TRUE(elitist);
    ASSERT_EQ(r.trajectory.size(), static_cast<std::size_t>(6000 / 20));
    for (std::size_t i = 1; i < r.trajectory.size(); ++i) {
        EXPECT_LE(r.trajectory[i].best_value, r.trajectory[i - 1].best_value);
        EXPECT_EQ(r.trajectory[i].fes - r.trajectory[i - 1].fes, 20);
    }
    EXPECT_EQ(r.trajectory.back().fes, r.fes_used);
    EXPECT_EQ(r.trajectory.back().best_value, r.best_value);
}

TEST(DeRun, DonorsDistinct)
{
    const auto p = make_problem(ProblemId::F1, 2);
    long mutations = 0;
    bool distinct = true;
    RunObserver obs;
    obs.on_mutation = [&](std::size_t i, std::size_t a, std::size_t b, std::size_t c) {
        ++mutations;
        distinct &= std::set<std::size_t>{i, a, b, c}.size() == 4;
    };
    // NP = 4 forces the donors to be exactly the other three members.
    de_run(p, {4, 0.5, 0.5, 400, 1}, {false, &obs});
    de_run(p, {10, 0.5, 0.5, 1000, 2}, {false, &obs});
    EXPECT_TRUE(distinct);
    EXPECT_EQ(mutations, 396 + 990);
}

TEST(DeRun, ConvergesOnSphere)
{
    const auto p = make_problem(ProblemId::F7, 2);
    const auto r = de_run(p, {20, 0.5, 0.9, 20000, 5});
    EXPECT_LT(approximation_error(r, p), 1e-12);
}

TEST(DeRun, BoundedProblemsStayInBox)
{
    for (auto id : {ProblemId::F1, ProblemId::F4, ProblemId::F14}) {
        const auto p = make_problem(id, 3);
        const auto r = de_run(p, {12, 2.5, 1.0, 1200, 4});
        for (std::size_t j = 0; j < 3; ++j) {
            EXPECT_GE(r.best_point[j], p.lower_bounds[j]);
            EXPECT_LE(r.best_point[j], p.upper_bounds[j]);
        }
    }
}

TEST(DeRun, Errors)
{
    const auto p = make_problem(ProblemId::F1, 2);
    EXPECT_THROW(de_run(p, {3, 0.5, 0.5, 100, 1}), std::invalid_argument);
    EXPECT_THROW(de_run(p, {10, 0.5, 0.5, 9, 1}), std::invalid_argument);
    EXPECT_THROW(de_run(p, {10, 0.0, 0.5, 100, 1}), std::invalid_argument);
    EXPECT_THROW(de_run(p, {10, 3.5, 0.5, 100, 1}), std::invalid_argument);
    EXPECT_THROW(de_run(p, {10, 0.5, 1.5, 100, 1}), std::invalid_argument);
}

TEST(ApproximationError, ClampsRoundingAndChecksProblem)
{
    const auto p = make_problem(ProblemId::F1, 2);
    RunResult r;
    r.problem = ProblemId::F1;
    r.dimension = 2;
    r.best_value = -1e-12;
    EXPECT_EQ(approximation_error(r, p), 0.0);
    r.best_value = 0.25;
    EXPECT_EQ(approximation_error(r, p), 0.25);
    r.problem = ProblemId::F2;
    EXPECT_THROW(approximation_error(r, p), std::invalid_argument);
}

TEST(MeasureConfig, MeanAndRunIndexing)
{
    const auto p = make_problem(ProblemId::F6, 2);
    const auto one = measure_config(p, {8, 0.5, 0.5}, 1, 11, 800);
    ASSERT_EQ(one.run_errors.size(), 1u);
    EXPECT_EQ(one.mean_error, one.run_errors[0]);

    const auto serial = measure_config(p, {8, 0.5, 0.5}, 6, 11, 800, 1);
    const auto parallel = measure_config(p, {8, 0.5, 0.5}, 6, 11, 800, 4);
    EXPECT_EQ(serial.run_errors, parallel.run_errors);
    EXPECT_EQ(serial.mean_error, parallel.mean_error);
    EXPECT_EQ(serial.run_errors[0], approximation_error(de_run(p, {8, 0.5, 0.5, 800, run_seed(11, 0)}), p));
    EXPECT_THROW(measure_config(p, {8, 0.5, 0.5}, 0, 11, 800), std::invalid_argument);
}

TEST(MeasureConfig, ArithmeticMean)
{
    EXPECT_EQ(mean_of({1.0, 2.0, 3.0}), 2.0);
}

TEST(MeasureConfig, NoisyProblemReproducible)
{
    const auto p = make_problem(ProblemId::F10, 2);
    const auto a = measure_config(p, {10, 0.5, 0.9}, 3, 5, 1000);
    const auto b = measure_config(p, {10, 0.5, 0.9}, 3, 5, 1000);
    EXPECT_EQ(a.run_errors, b.run_errors);
}
