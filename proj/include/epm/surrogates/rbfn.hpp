#ifndef EPM_SURROGATES_RBFN_HPP
#define EPM_SURROGATES_RBFN_HPP

// Gaussian radial-basis-function network: k-means centres, a shared width
// proportional to the median centre spacing, ridge least-squares output layer
// with an unpenalised bias.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include <epm/random.hpp>
#include <epm/surrogates/common.hpp>

namespace epm::rbfn {

struct Params {
    int n_centers = 20;
    double width_multiplier = 1.0;
    double ridge = 1e-6;
};

namespace detail {

    /// k-means++ seeding followed by Lloyd iterations. An emptied cluster is
    /// re-seeded on the point farthest from its current centre.
    inline Eigen::MatrixXd kmeans(const Eigen::MatrixXd& x, int k, Rng& rng, int max_iterations = 100)
    {
        const Eigen::Index n = x.rows();
        Eigen::MatrixXd centers(k, x.cols());
        Eigen::VectorXd d2 = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::infinity());
        Eigen::Index first = static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(n)));
        centers.row(0) = x.row(first);
        for (int c = 1; c < k; ++c) {
            for (Eigen::Index i = 0; i < n; ++i)
                d2(i) = std::min(d2(i), (x.row(i) - centers.row(c - 1)).squaredNorm());
            const double total = d2.sum();
            Eigen::Index pick = 0;
            if (total > 0.0) {
                const double u = rng.uniform() * total;
                double acc = 0.0;
                for (Eigen::Index i = 0; i < n; ++i) {
                    if (d2(i) <= 0.0)
                        continue;
                    acc += d2(i);
                    pick = i;
                    if (acc > u)
                        break;
                }
            } else {
                pick = static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(n)));
            }
            centers.row(c) = x.row(pick);
        }

        std::vector<int> assign(static_cast<std::size_t>(n), -1);
        for (int it = 0; it < max_iterations; ++it) {
            bool changed = false;
            for (Eigen::Index i = 0; i < n; ++i) {
                int best = 0;
                double bd = std::numeric_limits<double>::infinity();
                for (int c = 0; c < k; ++c) {
                    const double dd = (x.row(i) - centers.row(c)).squaredNorm();
                    if (dd < bd) {
                        bd = dd;
                        best = c;
                    }
                }
                if (assign[static_cast<std::size_t>(i)] != best) {
                    assign[static_cast<std::size_t>(i)] = best;
                    changed = true;
                }
            }
            Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, x.cols());
            std::vector<int> counts(static_cast<std::size_t>(k), 0);
            for (Eigen::Index i = 0; i < n; ++i) {
                sums.row(assign[static_cast<std::size_t>(i)]) += x.row(i);
                ++counts[static_cast<std::size_t>(assign[static_cast<std::size_t>(i)])];
            }
            for (int c = 0; c < k; ++c) {
                if (counts[static_cast<std::size_t>(c)] > 0) {
                    centers.row(c) = sums.row(c) / counts[static_cast<std::size_t>(c)];
                    continue;
                }
                Eigen::Index far = 0;
                double fd = -1.0;
                for (Eigen::Index i = 0; i < n; ++i) {
                    const double dd = (x.row(i) - centers.row(assign[static_cast<std::size_t>(i)])).squaredNorm();
                    if (dd > fd) {
                        fd = dd;
                        far = i;
                    }
                }
                centers.row(c) = x.row(far);
                changed = true;
            }
            if (!changed)
                break;
        }
        return centers;
    }

    inline double median_pairwise_distance(const Eigen::MatrixXd& c)
    {
        std::vector<double> d;
        for (Eigen::Index i = 0; i < c.rows(); ++i)
            for (Eigen::Index j = i + 1; j < c.rows(); ++j)
                d.push_back((c.row(i) - c.row(j)).norm());
        if (d.empty())
            return 1.0;
        const std::size_t mid = d.size() / 2;
        std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid), d.end());
        double med = d[mid];
        if (d.size() % 2 == 0) {
            const double lower = *std::max_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid));
            med = 0.5 * (med + lower);
        }
        return med > 0.0 ? med : 1.0;
    }

} // namespace detail

class Model {
public:
    double predict(const Eigen::Ref<const Eigen::RowVectorXd>& q) const
    {
        double s = bias_;
        for (Eigen::Index c = 0; c < centers_.rows(); ++c)
            s += weights_(c) * basis((q - centers_.row(c)).squaredNorm());
        return scaler_.inverse(s);
    }

    const Eigen::MatrixXd& centers() const { return centers_; }
    const Eigen::VectorXd& weights() const { return weights_; }
    double width() const { return width_; }
    double bias() const { return bias_; }

    static Model fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Params& p, std::uint64_t seed)
    {
        require_training_data(x, y, 1, "rbfn_fit");
        if (p.n_centers < 1 || p.n_centers > x.rows())
            throw std::invalid_argument("rbfn_fit: n_centers must lie in [1, " + std::to_string(x.rows()) + "]");
        if (!(p.width_multiplier > 0.0) || !(p.ridge >= 0.0))
            throw std::invalid_argument("rbfn_fit: width multiplier must be positive and ridge nonnegative");
        Model m;
        Rng rng(seed);
        m.centers_ = detail::kmeans(x, p.n_centers, rng);
        m.width_ = p.width_multiplier * detail::median_pairwise_distance(m.centers_);
        m.scaler_ = TargetScaler::fit(y);
        const Eigen::VectorXd z = m.scaler_.forward(y);

        const Eigen::Index n = x.rows(), k = m.centers_.rows();
        // Stacked system [Phi 1; sqrt(ridge) I 0] w = [z; 0].
        Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n + k, k + 1);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index c = 0; c < k; ++c)
                a(i, c) = m.basis((x.row(i) - m.centers_.row(c)).squaredNorm());
            a(i, k) = 1.0;
        }
        const double sr = std::sqrt(p.ridge);
        for (Eigen::Index c = 0; c < k; ++c)
            a(n + c, c) = sr;
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + k);
        rhs.head(n) = z;
        const Eigen::VectorXd w = a.completeOrthogonalDecomposition().solve(rhs);
        if (!w.allFinite())
            throw FitError("rbfn_fit: least-squares solution is not finite");
        m.weights_ = w.head(k);
        m.bias_ = w(k);
        return m;
    }

private:
    double basis(double r2) const { return std::exp(-r2 / (2.0 * width_ * width_)); }

    Eigen::MatrixXd centers_;
    Eigen::VectorXd weights_;
    double bias_ = 0.0;
    double width_ = 1.0;
    TargetScaler scaler_;
};

} // namespace epm::rbfn

#endif // EPM_SURROGATES_RBFN_HPP
