#ifndef EPM_METRICS_HPP
#define EPM_METRICS_HPP

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace epm {

/// Raised when a correlation or density is undefined for the given data
/// (zero variance, zero spread).
class UndefinedMetric : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

inline double rmse(std::span<const double> predicted, std::span<const double> observed)
{
    if (predicted.size() != observed.size())
        throw std::invalid_argument("rmse: length mismatch");
    if (predicted.empty())
        throw std::invalid_argument("rmse: empty input");
    double s = 0.0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        const double d = predicted[i] - observed[i];
        s += d * d;
    }
    return std::sqrt(s / static_cast<double>(predicted.size()));
}

/// Pearson correlation with population normalisation.
inline double pcc(std::span<const double> x, std::span<const double> y)
{
    if (x.size() != y.size())
        throw std::invalid_argument("pcc: length mismatch");
    if (x.size() < 2)
        throw std::invalid_argument("pcc: needs at least two points");
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx, dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0)
        throw UndefinedMetric("pcc: zero variance");
    const double r = sxy / std::sqrt(sxx * syy);
    return std::clamp(r, -1.0, 1.0);
}

/// 1-based ranks; tied values share the average of their positions.
inline std::vector<double> average_ranks(std::span<const double> v)
{
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(v.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i + 1;
        while (j < order.size() && v[order[j]] == v[order[i]])
            ++j;
        const double r = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t k = i; k < j; ++k)
            ranks[order[k]] = r;
        i = j;
    }
    return ranks;
}

/// Spearman correlation: Pearson correlation of average ranks.
inline double srcc(std::span<const double> x, std::span<const double> y)
{
    if (x.size() != y.size())
        throw std::invalid_argument("srcc: length mismatch");
    if (x.size() < 2)
        throw std::invalid_argument("srcc: needs at least two points");
    const auto rx = average_ranks(x), ry = average_ranks(y);
    try {
        return pcc(rx, ry);
    } catch (const UndefinedMetric&) {
        throw UndefinedMetric("srcc: zero variance after ranking");
    }
}

struct DensityPoint {
    double value = 0.0;
    double density = 0.0;
};

/// Silverman's rule h = 0.9 min(sigma, IQR/1.34) n^(-1/5); when one of the two
/// spreads is zero the other is used.
inline double silverman_bandwidth(std::span<const double> values)
{
    const std::size_t n = values.size();
    if (n < 2)
        throw UndefinedMetric("kde: degenerate distribution (fewer than two values)");
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(n);
    double ss = 0.0;
    for (double v : values)
        ss += (v - mean) * (v - mean);
    const double sigma = std::sqrt(ss / static_cast<double>(n - 1));
    std::vector<double> s(values.begin(), values.end());
    std::sort(s.begin(), s.end());
    auto quantile = [&](double q) {
        const double pos = q * static_cast<double>(n - 1);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const std::size_t hi = std::min(lo + 1, n - 1);
        return s[lo] + (pos - static_cast<double>(lo)) * (s[hi] - s[lo]);
    };
    const double iqr = (quantile(0.75) - quantile(0.25)) / 1.34;
    double spread = std::min(sigma, iqr);
    if (!(spread > 0.0))
        spread = std::max(sigma, iqr);
    if (!(spread > 0.0))
        throw UndefinedMetric("kde: degenerate distribution (zero spread)");
    return 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
}

/// Gaussian KDE evaluated on `grid_points` equally spaced points spanning
/// [min - 3h, max + 3h].
inline std::vector<DensityPoint> kde(std::span<const double> values, int grid_points = 512)
{
    if (values.empty())
        throw std::invalid_argument("kde: empty input");
    if (grid_points < 2)
        throw std::invalid_argument("kde: need at least two grid points");
    const double h = silverman_bandwidth(values);
    const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
    const double lo = *mn - 3.0 * h, hi = *mx + 3.0 * h;
    const double norm = 1.0 / (static_cast<double>(values.size()) * h * std::sqrt(2.0 * 3.14159265358979323846));
    std::vector<DensityPoint> out(static_cast<std::size_t>(grid_points));
    for (int g = 0; g < grid_points; ++g) {
        const double t = lo + (hi - lo) * static_cast<double>(g) / static_cast<double>(grid_points - 1);
        double s = 0.0;
        for (double v : values) {
            const double u = (t - v) / h;
            s += std::exp(-0.5 * u * u);
        }
        out[static_cast<std::size_t>(g)] = {t, s * norm};
    }
    return out;
}

inline double trapezoid(std::span<const DensityPoint> curve)
{
    double s = 0.0;
    for (std::size_t i = 1; i < curve.size(); ++i)
        s += 0.5 * (curve[i].density + curve[i - 1].density) * (curve[i].value - curve[i - 1].value);
    return s;
}

} // namespace epm

#endif // EPM_METRICS_HPP
