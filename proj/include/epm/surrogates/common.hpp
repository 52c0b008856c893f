#ifndef EPM_SURROGATES_COMMON_HPP
#define EPM_SURROGATES_COMMON_HPP

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace epm {

/// Raised when a regression model cannot be fitted.
class FitError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Affine target scaling applied inside kernel models. Exactly invertible.
struct TargetScaler {
    double mean = 0.0;
    double scale = 1.0;

    static TargetScaler fit(const Eigen::VectorXd& y)
    {
        TargetScaler s;
        if (y.size() == 0)
            return s;
        s.mean = y.mean();
        const double var = (y.array() - s.mean).square().mean();
        s.scale = var > 0.0 ? std::sqrt(var) : 1.0;
        return s;
    }

    Eigen::VectorXd forward(const Eigen::VectorXd& y) const { return (y.array() - mean) / scale; }
    double inverse(double z) const { return z * scale + mean; }
};

struct CollapsedData {
    Eigen::MatrixXd x;
    Eigen::VectorXd y;
};

/// Merges rows with identical features, averaging their targets. Output rows
/// are in lexicographic feature order so the result does not depend on input order.
inline CollapsedData collapse_duplicates(const Eigen::MatrixXd& x, const Eigen::VectorXd& y)
{
    const auto n = static_cast<std::size_t>(x.rows());
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto row_less = [&](std::size_t a, std::size_t b) {
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
            const double va = x(static_cast<Eigen::Index>(a), j), vb = x(static_cast<Eigen::Index>(b), j);
            if (va != vb)
                return va < vb;
        }
        return a < b;
    };
    std::sort(order.begin(), order.end(), row_less);
    auto same = [&](std::size_t a, std::size_t b) {
        return (x.row(static_cast<Eigen::Index>(a)).array() == x.row(static_cast<Eigen::Index>(b)).array()).all();
    };
    std::vector<std::pair<std::size_t, std::pair<double, int>>> groups;
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t i = order[k];
        if (!groups.empty() && same(groups.back().first, i)) {
            groups.back().second.first += y(static_cast<Eigen::Index>(i));
            groups.back().second.second += 1;
        } else {
            groups.push_back({i, {y(static_cast<Eigen::Index>(i)), 1}});
        }
    }
    CollapsedData out;
    out.x.resize(static_cast<Eigen::Index>(groups.size()), x.cols());
    out.y.resize(static_cast<Eigen::Index>(groups.size()));
    for (std::size_t g = 0; g < groups.size(); ++g) {
        out.x.row(static_cast<Eigen::Index>(g)) = x.row(static_cast<Eigen::Index>(groups[g].first));
        out.y(static_cast<Eigen::Index>(g)) = groups[g].second.first / groups[g].second.second;
    }
    return out;
}

inline void require_training_data(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, Eigen::Index min_rows, const char* who)
{
    if (x.rows() != y.size())
        throw std::invalid_argument(std::string(who) + ": feature and target counts differ");
    if (x.rows() < min_rows)
        throw std::invalid_argument(std::string(who) + ": needs at least " + std::to_string(min_rows) + " training samples, got "
            + std::to_string(x.rows()));
    if (!x.allFinite() || !y.allFinite())
        throw std::invalid_argument(std::string(who) + ": non-finite training data");
}

} // namespace epm

#endif // EPM_SURROGATES_COMMON_HPP
