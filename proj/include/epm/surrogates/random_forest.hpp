#ifndef EPM_SURROGATES_RANDOM_FOREST_HPP
#define EPM_SURROGATES_RANDOM_FOREST_HPP

// Bagged CART regression trees.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <queue>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include <epm/random.hpp>
#include <epm/surrogates/common.hpp>

namespace epm::rf {

enum class Criterion { squared_error, absolute_error };

inline const char* criterion_name(Criterion c) { return c == Criterion::squared_error ? "squared_error" : "absolute_error"; }

inline Criterion parse_criterion(const std::string& s)
{
    if (s == "squared_error") return Criterion::squared_error;
    if (s == "absolute_error") return Criterion::absolute_error;
    throw std::invalid_argument("unknown split criterion '" + s + "'");
}

struct Params {
    int n_trees = 100;
    int min_samples_split = 2;
    double max_features_fraction = 1.0;
    Criterion criterion = Criterion::squared_error;
    int min_samples_leaf = 1;
    /// Trees see bootstrap resamples of size n; disabling it is a test hook.
    bool bootstrap = true;
};

inline void validate(const Params& p)
{
    if (p.n_trees < 1)
        throw std::invalid_argument("rf: n_trees must be positive");
    if (p.min_samples_split < 2)
        throw std::invalid_argument("rf: min_samples_split must be at least 2");
    if (!(p.max_features_fraction > 0.0 && p.max_features_fraction <= 1.0))
        throw std::invalid_argument("rf: max_features_fraction must lie in (0, 1]");
    if (p.min_samples_leaf < 1)
        throw std::invalid_argument("rf: min_samples_leaf must be at least 1");
}

/// ceil(fraction * n_features), at least one.
inline int features_per_split(double fraction, int n_features)
{
    return std::clamp(static_cast<int>(std::ceil(fraction * n_features - 1e-12)), 1, n_features);
}

namespace detail {

    /// Sum of absolute deviations from the median, maintained incrementally
    /// with two heaps.
    class RunningAbsDeviation {
    public:
        void push(double v)
        {
            if (low_.empty() || v <= low_.top()) {
                low_.push(v);
                low_sum_ += v;
            } else {
                high_.push(v);
                high_sum_ += v;
            }
            if (low_.size() > high_.size() + 1) {
                const double t = low_.top();
                low_.pop();
                low_sum_ -= t;
                high_.push(t);
                high_sum_ += t;
            } else if (high_.size() > low_.size()) {
                const double t = high_.top();
                high_.pop();
                high_sum_ -= t;
                low_.push(t);
                low_sum_ += t;
            }
        }

        double value() const
        {
            if (low_.empty())
                return 0.0;
            const double med = low_.top();
            return med * static_cast<double>(low_.size()) - low_sum_ + high_sum_ - med * static_cast<double>(high_.size());
        }

    private:
        std::priority_queue<double> low_;
        std::priority_queue<double, std::vector<double>, std::greater<>> high_;
        double low_sum_ = 0.0;
        double high_sum_ = 0.0;
    };

} // namespace detail

class Tree {
public:
    struct Node {
        int feature = -1; // -1 marks a leaf
        double threshold = 0.0;
        int left = -1;
        int right = -1;
        double value = 0.0;
    };

    double predict(const Eigen::Ref<const Eigen::RowVectorXd>& q) const
    {
        int i = 0;
        while (nodes_[static_cast<std::size_t>(i)].feature >= 0) {
            const auto& n = nodes_[static_cast<std::size_t>(i)];
            i = q(n.feature) <= n.threshold ? n.left : n.right;
        }
        return nodes_[static_cast<std::size_t>(i)].value;
    }

    std::size_t node_count() const { return nodes_.size(); }

    /// Grows a tree on the rows listed in `rows` (duplicates allowed: bootstrap).
    static Tree grow(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::vector<std::size_t> rows, const Params& p, Rng& rng)
    {
        Tree t;
        t.build(x, y, rows, 0, rows.size(), p, rng);
        return t;
    }

private:
    std::vector<Node> nodes_;

    struct Split {
        int feature = -1;
        double threshold = 0.0;
        double impurity = std::numeric_limits<double>::infinity();
        std::size_t left_count = 0;
    };

    static double leaf_mean(const Eigen::VectorXd& y, const std::vector<std::size_t>& rows, std::size_t b, std::size_t e)
    {
        double s = 0.0;
        for (std::size_t k = b; k < e; ++k)
            s += y(static_cast<Eigen::Index>(rows[k]));
        return s / static_cast<double>(e - b);
    }

    int build(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::vector<std::size_t>& rows, std::size_t b, std::size_t e,
        const Params& p, Rng& rng)
    {
        const int id = static_cast<int>(nodes_.size());
        nodes_.push_back({});
        nodes_.back().value = leaf_mean(y, rows, b, e);
        const std::size_t n = e - b;
        if (n < static_cast<std::size_t>(p.min_samples_split) || n < 2 * static_cast<std::size_t>(p.min_samples_leaf))
            return id;
        bool constant = true;
        for (std::size_t k = b + 1; k < e && constant; ++k)
            constant = y(static_cast<Eigen::Index>(rows[k])) == y(static_cast<Eigen::Index>(rows[b]));
        if (constant)
            return id;

        const int n_feat = static_cast<int>(x.cols());
        std::vector<int> feats(static_cast<std::size_t>(n_feat));
        std::iota(feats.begin(), feats.end(), 0);
        rng.shuffle(feats.begin(), feats.end());
        feats.resize(static_cast<std::size_t>(features_per_split(p.max_features_fraction, n_feat)));
        std::sort(feats.begin(), feats.end());

        Split best;
        std::vector<std::size_t> sorted(rows.begin() + static_cast<std::ptrdiff_t>(b), rows.begin() + static_cast<std::ptrdiff_t>(e));
        std::vector<double> left_cost(n + 1), right_cost(n + 1);
        for (int f : feats) {
            std::stable_sort(sorted.begin(), sorted.end(), [&](std::size_t l, std::size_t r) { return x(static_cast<Eigen::Index>(l), f) < x(static_cast<Eigen::Index>(r), f); });
            auto yv = [&](std::size_t k) { return y(static_cast<Eigen::Index>(sorted[k])); };
            auto xv = [&](std::size_t k) { return x(static_cast<Eigen::Index>(sorted[k]), f); };
            // left_cost[m]: impurity of the first m samples; right_cost[m]: of the rest.
            if (p.criterion == Criterion::squared_error) {
                double s = 0.0, s2 = 0.0;
                left_cost[0] = 0.0;
                for (std::size_t m = 1; m <= n; ++m) {
                    s += yv(m - 1);
                    s2 += yv(m - 1) * yv(m - 1);
                    left_cost[m] = std::max(0.0, s2 - s * s / static_cast<double>(m));
                }
                s = s2 = 0.0;
                right_cost[n] = 0.0;
                for (std::size_t m = n; m-- > 0;) {
                    s += yv(m);
                    s2 += yv(m) * yv(m);
                    right_cost[m] = std::max(0.0, s2 - s * s / static_cast<double>(n - m));
                }
            } else {
                detail::RunningAbsDeviation lft, rgt;
                left_cost[0] = 0.0;
                for (std::size_t m = 1; m <= n; ++m) {
                    lft.push(yv(m - 1));
                    left_cost[m] = lft.value();
                }
                right_cost[n] = 0.0;
                for (std::size_t m = n; m-- > 0;) {
                    rgt.push(yv(m));
                    right_cost[m] = rgt.value();
                }
            }
            const auto leaf = static_cast<std::size_t>(p.min_samples_leaf);
            for (std::size_t m = leaf; m + leaf <= n; ++m) {
                if (xv(m - 1) == xv(m))
                    continue;
                const double cost = left_cost[m] + right_cost[m];
                if (cost < best.impurity) {
                    best.impurity = cost;
                    best.feature = f;
                    best.threshold = 0.5 * (xv(m - 1) + xv(m));
                    if (best.threshold >= xv(m))
                        best.threshold = xv(m - 1);
                    best.left_count = m;
                }
            }
        }
        if (best.feature < 0)
            return id;

        auto mid = std::stable_partition(rows.begin() + static_cast<std::ptrdiff_t>(b), rows.begin() + static_cast<std::ptrdiff_t>(e),
            [&](std::size_t r) { return x(static_cast<Eigen::Index>(r), best.feature) <= best.threshold; });
        const auto m = static_cast<std::size_t>(mid - rows.begin());
        nodes_[static_cast<std::size_t>(id)].feature = best.feature;
        nodes_[static_cast<std::size_t>(id)].threshold = best.threshold;
        const int l = build(x, y, rows, b, m, p, rng);
        nodes_[static_cast<std::size_t>(id)].left = l;
        const int r = build(x, y, rows, m, e, p, rng);
        nodes_[static_cast<std::size_t>(id)].right = r;
        return id;
    }
};

class Forest {
public:
    double predict(const Eigen::Ref<const Eigen::RowVectorXd>& q) const
    {
        double s = 0.0;
        for (const auto& t : trees_)
            s += t.predict(q);
        return s / static_cast<double>(trees_.size());
    }

    const std::vector<Tree>& trees() const { return trees_; }

    static Forest fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Params& p, std::uint64_t seed)
    {
        validate(p);
        // Fewer rows than min_samples_split simply yields single-leaf trees.
        require_training_data(x, y, 1, "rf_fit");
        Forest f;
        const auto n = static_cast<std::size_t>(x.rows());
        f.trees_.reserve(static_cast<std::size_t>(p.n_trees));
        for (int t = 0; t < p.n_trees; ++t) {
            Rng rng(mix_seed(seed, static_cast<std::uint64_t>(t)));
            std::vector<std::size_t> rows(n);
            if (p.bootstrap)
                for (auto& r : rows)
                    r = rng.index(n);
            else
                std::iota(rows.begin(), rows.end(), std::size_t{0});
            f.trees_.push_back(Tree::grow(x, y, std::move(rows), p, rng));
        }
        return f;
    }

private:
    std::vector<Tree> trees_;
};

} // namespace epm::rf

#endif // EPM_SURROGATES_RANDOM_FOREST_HPP
