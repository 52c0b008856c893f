#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include <epm/random.hpp>
#include <epm/surrogates/rbfn.hpp>

using namespace epm;

namespace {

struct Data {
    Eigen::MatrixXd x;
    Eigen::VectorXd y;
};

Data sample_data(int n, std::uint64_t seed)
{
    Rng rng(seed);
    Data d{Eigen::MatrixXd(n, 3), Eigen::VectorXd(n)};
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < 3; ++j)
            d.x(i, j) = rng.uniform();
        d.y(i) = std::exp(d.x(i, 0)) * std::cos(3.0 * d.x(i, 1)) + d.x(i, 2);
    }
    return d;
}

} // namespace

TEST(Rbfn, CentresAtInputsInterpolate)
{
    const auto d = sample_data(30, 1);
    rbfn::Params p;
    p.n_centers = 30;
    p.ridge = 0.0;
    const auto m = rbfn::Model::fit(d.x, d.y, p, 2);
    // Every input becomes its own centre.
    std::set<std::vector<double>> centres, inputs;
    for (Eigen::Index i = 0; i < 30; ++i) {
        centres.insert(std::vector<double>{m.centers()(i, 0), m.centers()(i, 1), m.centers()(i, 2)});
        inputs.insert(std::vector<double>{d.x(i, 0), d.x(i, 1), d.x(i, 2)});
    }
    EXPECT_EQ(centres, inputs);
    for (Eigen::Index i = 0; i < 30; ++i)
        EXPECT_NEAR(m.predict(d.x.row(i)), d.y(i), 1e-6);
}

TEST(Rbfn, RidgeShrinksWeights)
{
    const auto d = sample_data(60, 3);
    rbfn::Params p;
    p.n_centers = 20;
    p.ridge = 1e-8;
    const auto loose = rbfn::Model::fit(d.x, d.y, p, 4);
    p.ridge = 1.0;
    const auto tight = rbfn::Model::fit(d.x, d.y, p, 4);
    EXPECT_LT(tight.weights().norm(), loose.weights().norm());
}

TEST(Rbfn, WidthFromMedianCentreDistance)
{
    Eigen::MatrixXd x(3, 1);
    x << 0.0, 1.0, 3.0;
    const Eigen::VectorXd y = Eigen::Vector3d(1.0, 2.0, 0.0);
    rbfn::Params p;
    p.n_centers = 3;
    p.width_multiplier = 2.0;
    const auto m = rbfn::Model::fit(x, y, p, 0);
    // Pairwise distances 1, 2, 3: median 2.
    EXPECT_DOUBLE_EQ(m.width(), 4.0);
}

TEST(Rbfn, KMeansSeparatesClusters)
{
    Rng rng(5);
    Eigen::MatrixXd x(40, 2);
    for (int i = 0; i < 40; ++i) {
        const double cx = i < 20 ? 0.0 : 10.0;
        x(i, 0) = cx + 0.1 * rng.normal();
        x(i, 1) = 0.1 * rng.normal();
    }
    Rng krng(1);
    const auto c = rbfn::detail::kmeans(x, 2, krng);
    const double lo = std::min(c(0, 0), c(1, 0)), hi = std::max(c(0, 0), c(1, 0));
    EXPECT_NEAR(lo, x.topRows(20).col(0).mean(), 1e-12);
    EXPECT_NEAR(hi, x.bottomRows(20).col(0).mean(), 1e-12);
}

TEST(Rbfn, DeterministicForSeed)
{
    const auto d = sample_data(50, 6);
    rbfn::Params p;
    p.n_centers = 10;
    const auto a = rbfn::Model::fit(d.x, d.y, p, 8), b = rbfn::Model::fit(d.x, d.y, p, 8);
    EXPECT_EQ(a.centers(), b.centers());
    EXPECT_EQ(a.weights(), b.weights());
}

TEST(Rbfn, Validation)
{
    const auto d = sample_data(5, 7);
    rbfn::Params p;
    p.n_centers = 6;
    EXPECT_THROW(rbfn::Model::fit(d.x, d.y, p, 0), std::invalid_argument);
    p.n_centers = 0;
    EXPECT_THROW(rbfn::Model::fit(d.x, d.y, p, 0), std::invalid_argument);
    p.n_centers = 2;
    p.width_multiplier = 0.0;
    EXPECT_THROW(rbfn::Model::fit(d.x, d.y, p, 0), std::invalid_argument);
    p.width_multiplier = 1.0;
    p.ridge = -1.0;
    EXPECT_THROW(rbfn::Model::fit(d.x, d.y, p, 0), std::invalid_argument);
}
