#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include <epm/emd.hpp>
#include <epm/random.hpp>

using namespace epm;

namespace {

WeightedPoints cloud(int n, int dims, std::uint64_t seed, double shift = 0.0)
{
    Rng rng(seed);
    Eigen::MatrixXd p(n, dims);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < dims; ++j)
            p(i, j) = rng.uniform() + shift;
    return WeightedPoints::uniform(std::move(p));
}

WeightedPoints weighted_1d(std::vector<double> x, std::vector<double> w)
{
    WeightedPoints out{Eigen::MatrixXd(static_cast<Eigen::Index>(x.size()), 1), Eigen::VectorXd(static_cast<Eigen::Index>(w.size()))};
    for (std::size_t i = 0; i < x.size(); ++i)
        out.points(static_cast<Eigen::Index>(i), 0) = x[i];
    for (std::size_t i = 0; i < w.size(); ++i)
        out.weights(static_cast<Eigen::Index>(i)) = w[i];
    return out;
}

} // namespace

TEST(Emd, IdentityIsZero)
{
    const auto a = cloud(40, 3, 1);
    EXPECT_NEAR(emd_exact(a, a), 0.0, 1e-12);
    const auto b = WeightedPoints::uniform_1d({3.0, 1.0, 2.0});
    EXPECT_EQ(emd_1d(b, b), 0.0);
}

TEST(Emd, TranslationCostsShiftLength)
{
    const auto a = cloud(30, 2, 2);
    WeightedPoints b = a;
    b.points.col(0).array() += 0.3;
    b.points.col(1).array() += 0.4;
    EXPECT_NEAR(emd_exact(a, b), 0.5, 1e-9);
    const auto u = WeightedPoints::uniform_1d({0.0, 1.0, 5.0}), v = WeightedPoints::uniform_1d({2.5, 3.5, 7.5});
    EXPECT_NEAR(emd_1d(u, v), 2.5, 1e-12);
}

TEST(Emd, OneDimensionalClosedFormMatchesFlow)
{
    for (std::uint64_t s = 0; s < 6; ++s) {
        const auto a = cloud(25, 1, 10 + s), b = cloud(17, 1, 20 + s, 0.2);
        EXPECT_NEAR(emd_1d(a, b), emd_exact(a, b), 1e-9) << s;
    }
    const auto a = weighted_1d({0.0, 1.0, 4.0}, {0.2, 0.5, 0.3}), b = weighted_1d({0.5, 3.0}, {0.6, 0.4});
    EXPECT_NEAR(emd_1d(a, b), emd_exact(a, b), 1e-12);
}

TEST(Emd, SortedMatchingForEqualUniform1d)
{
    // Equal-size uniform 1-D sets: optimal cost is the mean |sorted difference|.
    auto a = cloud(50, 1, 3), b = cloud(50, 1, 4, 0.1);
    std::vector<double> x(a.points.data(), a.points.data() + 50), y(b.points.data(), b.points.data() + 50);
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    double want = 0.0;
    for (int i = 0; i < 50; ++i)
        want += std::abs(x[static_cast<std::size_t>(i)] - y[static_cast<std::size_t>(i)]) / 50.0;
    EXPECT_NEAR(emd_1d(a, b), want, 1e-12);
}

TEST(Emd, ThreePointAssignmentMatchesEnumeration)
{
    // Equal uniform weights: an optimal plan is a permutation (Birkhoff).
    for (std::uint64_t s = 0; s < 10; ++s) {
        const auto a = cloud(3, 2, 100 + s), b = cloud(3, 2, 200 + s);
        std::array<int, 3> perm{0, 1, 2};
        double best = std::numeric_limits<double>::infinity();
        do {
            double c = 0.0;
            for (int i = 0; i < 3; ++i)
                c += (a.points.row(i) - b.points.row(perm[static_cast<std::size_t>(i)])).norm() / 3.0;
            best = std::min(best, c);
        } while (std::next_permutation(perm.begin(), perm.end()));
        EXPECT_NEAR(emd_exact(a, b), best, 1e-12) << s;
    }
}

TEST(Emd, SymmetricAndTriangle)
{
    const auto a = cloud(20, 4, 5), b = cloud(25, 4, 6, 0.3), c = cloud(15, 4, 7, -0.2);
    const double ab = emd_exact(a, b), ba = emd_exact(b, a), bc = emd_exact(b, c), ac = emd_exact(a, c);
    EXPECT_NEAR(ab, ba, 1e-10);
    EXPECT_LE(ac, ab + bc + 1e-10);
    EXPECT_GT(ab, 0.0);
}

TEST(Emd, WeightsAreNormalised)
{
    const auto a = weighted_1d({0.0, 2.0}, {1.0, 3.0}), b = weighted_1d({0.0, 2.0}, {0.25, 0.75});
    EXPECT_NEAR(emd_1d(a, b), 0.0, 1e-15);
    const auto c = weighted_1d({1.0}, {5.0});
    // Mass 1/4 moves 1, mass 3/4 moves 1.
    EXPECT_NEAR(emd_1d(a, c), 1.0, 1e-15);
}

TEST(Emd, SubsampleIsDeterministicSubset)
{
    const auto a = cloud(900, 2, 8);
    const auto s1 = subsample(a, 500, 3), s2 = subsample(a, 500, 3);
    ASSERT_EQ(s1.size(), 500);
    EXPECT_EQ(s1.points, s2.points);
    EXPECT_EQ(subsample(a, 1000, 3).size(), 900);
    const auto small = cloud(10, 2, 9);
    EXPECT_NEAR(emd(a, a, 1), emd_exact(subsample(a, 500, mix_seed(1, 1)), subsample(a, 500, mix_seed(1, 2))), 1e-12);
    EXPECT_NEAR(emd(small, small), 0.0, 1e-12);
}

TEST(Emd, Errors)
{
    const auto a = cloud(5, 2, 1), b = cloud(5, 3, 2);
    EXPECT_THROW(emd_exact(a, b), std::invalid_argument);
    EXPECT_THROW(emd_1d(a, a), std::invalid_argument);
    EXPECT_THROW(emd_exact(a, WeightedPoints::uniform(Eigen::MatrixXd(0, 2))), std::invalid_argument);
    EXPECT_THROW(emd_1d(weighted_1d({1.0}, {-1.0}), weighted_1d({1.0}, {1.0})), std::invalid_argument);
    EXPECT_THROW(emd_1d(weighted_1d({1.0}, {0.0}), weighted_1d({1.0}, {1.0})), std::invalid_argument);
    EXPECT_THROW(emd_1d(weighted_1d({1.0, 2.0}, {1.0}), weighted_1d({1.0}, {1.0})), std::invalid_argument);
}
