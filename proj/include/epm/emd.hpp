#ifndef EPM_EMD_HPP
#define EPM_EMD_HPP

// Earth mover's distance between weighted point sets: a closed form for 1-D
// distributions and exact discrete optimal transport (successive shortest
// paths on the bipartite transport network) for higher dimensions.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include <epm/random.hpp>

namespace epm {

struct WeightedPoints {
    Eigen::MatrixXd points; // one point per row
    Eigen::VectorXd weights;

    static WeightedPoints uniform(Eigen::MatrixXd pts)
    {
        const auto n = pts.rows();
        return {std::move(pts), Eigen::VectorXd::Constant(n, n > 0 ? 1.0 / static_cast<double>(n) : 0.0)};
    }

    static WeightedPoints uniform_1d(const std::vector<double>& values)
    {
        Eigen::MatrixXd p(static_cast<Eigen::Index>(values.size()), 1);
        for (std::size_t i = 0; i < values.size(); ++i)
            p(static_cast<Eigen::Index>(i), 0) = values[i];
        return uniform(std::move(p));
    }

    Eigen::Index size() const { return points.rows(); }
    Eigen::Index dims() const { return points.cols(); }
};

namespace detail {

    inline Eigen::VectorXd normalised_weights(const WeightedPoints& a, const char* side)
    {
        if (a.size() == 0)
            throw std::invalid_argument(std::string("emd: empty point set ") + side);
        if (a.weights.size() != a.size())
            throw std::invalid_argument(std::string("emd: weight count differs from point count in ") + side);
        if ((a.weights.array() < 0.0).any() || !a.weights.allFinite())
            throw std::invalid_argument(std::string("emd: negative or non-finite weights in ") + side);
        const double s = a.weights.sum();
        if (!(s > 0.0))
            throw std::invalid_argument(std::string("emd: weights of ") + side + " cannot be normalised");
        return a.weights / s;
    }

    inline void check_dims(const WeightedPoints& a, const WeightedPoints& b)
    {
        if (a.dims() != b.dims())
            throw std::invalid_argument("emd: dimension mismatch");
        if (a.dims() < 1)
            throw std::invalid_argument("emd: points need at least one coordinate");
    }

} // namespace detail

/// Integral of |CDF_a - CDF_b| over the merged support.
inline double emd_1d(const WeightedPoints& a, const WeightedPoints& b)
{
    detail::check_dims(a, b);
    if (a.dims() != 1)
        throw std::invalid_argument("emd_1d: points must be one-dimensional");
    const Eigen::VectorXd wa = detail::normalised_weights(a, "a"), wb = detail::normalised_weights(b, "b");
    struct Atom {
        double x;
        double w; // + for a, - for b
    };
    std::vector<Atom> atoms;
    atoms.reserve(static_cast<std::size_t>(a.size() + b.size()));
    for (Eigen::Index i = 0; i < a.size(); ++i)
        atoms.push_back({a.points(i, 0), wa(i)});
    for (Eigen::Index i = 0; i < b.size(); ++i)
        atoms.push_back({b.points(i, 0), -wb(i)});
    std::sort(atoms.begin(), atoms.end(), [](const Atom& l, const Atom& r) { return l.x < r.x; });
    double cdf_diff = 0.0, total = 0.0;
    for (std::size_t i = 0; i + 1 < atoms.size(); ++i) {
        cdf_diff += atoms[i].w;
        total += std::abs(cdf_diff) * (atoms[i + 1].x - atoms[i].x);
    }
    return total;
}

/// Exact optimal transport cost with Euclidean ground distance.
inline double emd_exact(const WeightedPoints& a, const WeightedPoints& b)
{
    detail::check_dims(a, b);
    const Eigen::VectorXd wa = detail::normalised_weights(a, "a"), wb = detail::normalised_weights(b, "b");
    const auto n = static_cast<std::size_t>(a.size()), m = static_cast<std::size_t>(b.size());
    std::vector<double> cost(n * m);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j)
            cost[i * m + j] = (a.points.row(static_cast<Eigen::Index>(i)) - b.points.row(static_cast<Eigen::Index>(j))).norm();

    constexpr double tol = 1e-14;
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> supply(wa.data(), wa.data() + n), demand(wb.data(), wb.data() + m);
    std::vector<double> flow(n * m, 0.0);

    // Nodes: 0 = source, 1..n supplies, n+1..n+m demands, n+m+1 = sink.
    const std::size_t nodes = n + m + 2, src = 0, sink = n + m + 1;
    std::vector<double> pot(nodes, 0.0), dist(nodes);
    std::vector<std::size_t> pred(nodes);
    std::vector<char> done(nodes);

    auto remaining = [&] {
        double s = 0.0;
        for (double v : supply)
            s += v;
        return s;
    };

    for (int guard = 0; remaining() > 1e-12 && guard < static_cast<int>(8 * (n + m) + 1000); ++guard) {
        std::fill(dist.begin(), dist.end(), inf);
        std::fill(done.begin(), done.end(), 0);
        dist[src] = 0.0;
        for (std::size_t iter = 0; iter < nodes; ++iter) {
            std::size_t u = nodes;
            double best = inf;
            for (std::size_t v = 0; v < nodes; ++v)
                if (!done[v] && dist[v] < best) {
                    best = dist[v];
                    u = v;
                }
            if (u == nodes)
                break;
            done[u] = 1;
            auto relax = [&](std::size_t v, double c) {
                const double rc = std::max(0.0, c + pot[u] - pot[v]);
                if (dist[u] + rc < dist[v]) {
                    dist[v] = dist[u] + rc;
                    pred[v] = u;
                }
            };
            if (u == src) {
                for (std::size_t i = 0; i < n; ++i)
                    if (supply[i] > tol)
                        relax(1 + i, 0.0);
            } else if (u <= n) {
                const std::size_t i = u - 1;
                for (std::size_t j = 0; j < m; ++j)
                    relax(n + 1 + j, cost[i * m + j]);
            } else if (u < sink) {
                const std::size_t j = u - n - 1;
                for (std::size_t i = 0; i < n; ++i)
                    if (flow[i * m + j] > tol)
                        relax(1 + i, -cost[i * m + j]);
                if (demand[j] > tol)
                    relax(sink, 0.0);
            }
        }
        if (!(dist[sink] < inf))
            break;
        for (std::size_t v = 0; v < nodes; ++v)
            pot[v] += std::min(dist[v], dist[sink]);

        double push = inf;
        for (std::size_t v = sink; v != src; v = pred[v]) {
            const std::size_t u = pred[v];
            if (u == src) push = std::min(push, supply[v - 1]);
            else if (v == sink) push = std::min(push, demand[u - n - 1]);
            else if (u > n) push = std::min(push, flow[(v - 1) * m + (u - n - 1)]);
        }
        for (std::size_t v = sink; v != src; v = pred[v]) {
            const std::size_t u = pred[v];
            if (u == src) supply[v - 1] -= push;
            else if (v == sink) demand[u - n - 1] -= push;
            else if (u <= n) flow[(u - 1) * m + (v - n - 1)] += push;
            else flow[(v - 1) * m + (u - n - 1)] -= push;
        }
    }
    double total = 0.0;
    for (std::size_t k = 0; k < n * m; ++k)
        total += flow[k] * cost[k];
    return total;
}

/// Seeded uniform subsample (without replacement) to at most `limit` points,
/// weights renormalised over the kept points.
inline WeightedPoints subsample(const WeightedPoints& a, Eigen::Index limit, std::uint64_t seed)
{
    if (a.size() <= limit)
        return a;
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(a.size()));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    Rng rng(seed);
    rng.shuffle(idx.begin(), idx.end());
    idx.resize(static_cast<std::size_t>(limit));
    std::sort(idx.begin(), idx.end());
    WeightedPoints out{Eigen::MatrixXd(limit, a.dims()), Eigen::VectorXd(limit)};
    for (Eigen::Index k = 0; k < limit; ++k) {
        out.points.row(k) = a.points.row(idx[static_cast<std::size_t>(k)]);
        out.weights(k) = a.weights(idx[static_cast<std::size_t>(k)]);
    }
    return out;
}

inline constexpr Eigen::Index emd_subsample_limit = 500;

/// 1-D sets use the closed form; higher-dimensional sets are subsampled to
/// at most 500 points per side and solved exactly.
inline double emd(const WeightedPoints& a, const WeightedPoints& b, std::uint64_t seed = 0)
{
    detail::check_dims(a, b);
    if (a.dims() == 1)
        return emd_1d(a, b);
    return emd_exact(subsample(a, emd_subsample_limit, mix_seed(seed, 1)), subsample(b, emd_subsample_limit, mix_seed(seed, 2)));
}

} // namespace epm

#endif // EPM_EMD_HPP
