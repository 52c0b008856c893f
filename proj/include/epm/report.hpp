#ifndef EPM_REPORT_HPP
#define EPM_REPORT_HPP

// Per-(problem, dimension) evaluation of fitted surrogates on one shared test
// set: accuracy and correlation metrics, landscape densities, and EMD.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <epm/config_space.hpp>
#include <epm/emd.hpp>
#include <epm/metrics.hpp>
#include <epm/surrogates/surrogate.hpp>

namespace epm {

struct MetricRow {
    std::string problem_id;
    int dimension = 0;
    Family family = Family::GP;
    double rmse = 0.0;
    /// Empty when undefined (a constant prediction or constant truth).
    std::optional<double> pcc;
    std::optional<double> srcc;
    /// 1-D EMD between observed and predicted performance values.
    double emd = 0.0;
    /// EMD between the joint (configuration, performance) point clouds.
    double emd_joint = 0.0;
    std::size_t n_test = 0;
};

struct ScatterSeries {
    Family family = Family::GP;
    std::vector<std::pair<double, double>> observed_predicted;
};

struct DensitySeries {
    std::string series; // "truth" or a family name
    std::vector<DensityPoint> curve;
};

struct EvaluationReport {
    std::string problem_id;
    int dimension = 0;
    std::vector<MetricRow> rows;
    std::vector<ScatterSeries> scatter;
    std::vector<DensitySeries> kde;
    /// Human-readable remarks (undefined metrics, skipped densities).
    std::vector<std::string> notes;
};

class FingerprintMismatch : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr int kde_grid_points = 512;

/// Joint point cloud (encoded config, performance); every coordinate is
/// min-max scaled with ranges shared by both clouds.
inline std::pair<WeightedPoints, WeightedPoints> joint_clouds(const Dataset& test, std::span<const double> predicted)
{
    const auto n = static_cast<Eigen::Index>(test.size());
    Eigen::MatrixXd a(n, 4), b(n, 4);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& s = test.samples[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < 3; ++j)
            a(i, j) = b(i, j) = s.x[static_cast<std::size_t>(j)];
        a(i, 3) = s.target;
        b(i, 3) = predicted[static_cast<std::size_t>(i)];
    }
    for (Eigen::Index j = 0; j < 4; ++j) {
        const double lo = std::min(a.col(j).minCoeff(), b.col(j).minCoeff());
        const double hi = std::max(a.col(j).maxCoeff(), b.col(j).maxCoeff());
        const double span = hi - lo;
        if (span > 0.0) {
            a.col(j) = (a.col(j).array() - lo) / span;
            b.col(j) = (b.col(j).array() - lo) / span;
        } else {
            a.col(j).setZero();
            b.col(j).setZero();
        }
    }
    return {WeightedPoints::uniform(std::move(a)), WeightedPoints::uniform(std::move(b))};
}

/// Every model must have been fitted on the training set whose fingerprint
/// is `training_fingerprint`.
inline EvaluationReport build_report(const std::string& problem_id, int dimension, const Dataset& test,
    const std::string& training_fingerprint, std::span<const FittedSurrogate> models, std::uint64_t seed = 0)
{
    if (test.empty())
        throw std::invalid_argument("build_report: empty test set");
    for (const auto& m : models)
        if (m.training_fingerprint() != training_fingerprint)
            throw FingerprintMismatch("build_report: " + std::string(family_name(m.family())) + " model was trained on "
                + m.training_fingerprint() + ", expected " + training_fingerprint);

    EvaluationReport rep;
    rep.problem_id = problem_id;
    rep.dimension = dimension;
    std::vector<double> observed;
    observed.reserve(test.size());
    for (const auto& s : test.samples)
        observed.push_back(s.target);
    const auto truth_points = WeightedPoints::uniform_1d(observed);

    auto label = [&](Family f) { return problem_id + "/d" + std::to_string(dimension) + "/" + family_name(f); };

    try {
        rep.kde.push_back({"truth", kde(observed, kde_grid_points)});
    } catch (const UndefinedMetric& e) {
        rep.notes.push_back(problem_id + "/d" + std::to_string(dimension) + "/truth: " + e.what());
    }

    for (const auto& m : models) {
        const auto predicted = m.predict(test);
        MetricRow row;
        row.problem_id = problem_id;
        row.dimension = dimension;
        row.family = m.family();
        row.n_test = test.size();
        row.rmse = rmse(predicted, observed);
        try {
            row.pcc = pcc(predicted, observed);
        } catch (const UndefinedMetric& e) {
            rep.notes.push_back(label(m.family()) + ": " + e.what());
        }
        try {
            row.srcc = srcc(predicted, observed);
        } catch (const UndefinedMetric& e) {
            rep.notes.push_back(label(m.family()) + ": " + e.what());
        }
        row.emd = emd_1d(truth_points, WeightedPoints::uniform_1d(predicted));
        const auto [ja, jb] = joint_clouds(test, predicted);
        row.emd_joint = emd(ja, jb, mix_seed(seed, static_cast<std::uint64_t>(m.family())));
        rep.rows.push_back(row);

        ScatterSeries sc{m.family(), {}};
        sc.observed_predicted.reserve(test.size());
        for (std::size_t i = 0; i < test.size(); ++i)
            sc.observed_predicted.emplace_back(observed[i], predicted[i]);
        rep.scatter.push_back(std::move(sc));

        try {
            rep.kde.push_back({family_name(m.family()), kde(predicted, kde_grid_points)});
        } catch (const UndefinedMetric& e) {
            rep.notes.push_back(label(m.family()) + ": " + e.what());
        }
    }
    return rep;
}

} // namespace epm

#endif // EPM_REPORT_HPP
