#ifndef EPM_CONFIG_SPACE_HPP
#define EPM_CONFIG_SPACE_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include <epm/de.hpp>
#include <epm/random.hpp>

namespace epm {

// Full grid: NP = i*d for i in 2..10, F = k/20 for k in 1..60, CR = c/10 for c in 0..10.
inline constexpr int np_multiplier_min = 2;
inline constexpr int np_multiplier_max = 10;
inline constexpr int f_levels = 60;
inline constexpr int cr_levels = 11;
inline constexpr std::size_t full_grid_size = 9 * f_levels * cr_levels;

/// Index strides through the full grid; {1,1,1} is the full 5,940-point grid.
struct GridStrides {
    int np = 1;
    int f = 1;
    int cr = 1;
};

struct GridPoint {
    ParameterConfig config;
    /// Position in the full (unstrided) grid, in (NP, F, CR) lexicographic order.
    std::size_t index = 0;
};

inline std::vector<GridPoint> grid_points(int d, GridStrides strides = {})
{
    if (d < 1)
        throw std::invalid_argument("grid_sample: dimension must be positive");
    if (strides.np < 1 || strides.f < 1 || strides.cr < 1)
        throw std::invalid_argument("grid_sample: strides must be at least 1");
    std::vector<GridPoint> out;
    for (int i = np_multiplier_min; i <= np_multiplier_max; i += strides.np)
        for (int k = 1; k <= f_levels; k += strides.f)
            for (int c = 0; c < cr_levels; c += strides.cr) {
                const auto idx = static_cast<std::size_t>(((i - np_multiplier_min) * f_levels + (k - 1)) * cr_levels + c);
                out.push_back({{i * d, k / 20.0, c / 10.0}, idx});
            }
    return out;
}

inline std::vector<ParameterConfig> grid_sample(int d, GridStrides strides = {})
{
    auto pts = grid_points(d, strides);
    std::vector<ParameterConfig> out;
    out.reserve(pts.size());
    for (const auto& p : pts)
        out.push_back(p.config);
    return out;
}

/// Full-grid index of a configuration; throws if it is not a grid point.
inline std::size_t grid_index(const ParameterConfig& c, int d)
{
    const int i = c.np / d;
    const long k = std::lround(c.f * 20.0);
    const long r = std::lround(c.cr * 10.0);
    if (c.np % d != 0 || i < np_multiplier_min || i > np_multiplier_max || k < 1 || k > f_levels || r < 0
        || r >= cr_levels || c.f != k / 20.0 || c.cr != r / 10.0)
        throw std::invalid_argument("configuration is not on the sampling grid");
    return static_cast<std::size_t>(((i - np_multiplier_min) * f_levels + (k - 1)) * cr_levels + r);
}

using Features = std::array<double, 3>;

/// Min-max scaling of (NP, F, CR) to [0,1]^3.
struct FeatureEncoding {
    Features lo{0.0, 0.0, 0.0};
    Features hi{1.0, 1.0, 1.0};

    static FeatureEncoding from_configs(std::span<const ParameterConfig> configs)
    {
        if (configs.empty())
            throw std::invalid_argument("feature encoding needs at least one configuration");
        FeatureEncoding e;
        e.lo = e.hi = raw(configs.front());
        for (const auto& c : configs) {
            const auto v = raw(c);
            for (std::size_t j = 0; j < 3; ++j) {
                e.lo[j] = std::min(e.lo[j], v[j]);
                e.hi[j] = std::max(e.hi[j], v[j]);
            }
        }
        return e;
    }

    /// Extremes of the full grid for dimension d.
    static FeatureEncoding full_grid(int d)
    {
        FeatureEncoding e;
        e.lo = {static_cast<double>(np_multiplier_min * d), 1 / 20.0, 0.0};
        e.hi = {static_cast<double>(np_multiplier_max * d), f_levels / 20.0, (cr_levels - 1) / 10.0};
        return e;
    }

    static Features raw(const ParameterConfig& c) { return {static_cast<double>(c.np), c.f, c.cr}; }

    Features encode(const ParameterConfig& c) const
    {
        const auto v = raw(c);
        Features out{};
        for (std::size_t j = 0; j < 3; ++j)
            out[j] = hi[j] > lo[j] ? (v[j] - lo[j]) / (hi[j] - lo[j]) : 0.0;
        return out;
    }

    ParameterConfig decode(const Features& z) const
    {
        Features v{};
        for (std::size_t j = 0; j < 3; ++j)
            v[j] = lo[j] + z[j] * (hi[j] - lo[j]);
        return {static_cast<int>(std::lround(v[0])), v[1], v[2]};
    }

    friend bool operator==(const FeatureEncoding&, const FeatureEncoding&) = default;
};

enum class TargetTransform { raw, log10 };

inline double transform_target(double mean_error, TargetTransform t)
{
    return t == TargetTransform::raw ? mean_error : std::log10(std::max(mean_error, 1e-16));
}

enum class SplitTag { all, train, test };

struct Sample {
    Features x{};
    double target = 0.0;
    ParameterConfig config;
    /// Index of the originating record in the dataset this sample was built from.
    std::size_t source_index = 0;
};

struct Dataset {
    std::vector<Sample> samples;
    SplitTag tag = SplitTag::all;
    FeatureEncoding encoding;

    std::size_t size() const { return samples.size(); }
    bool empty() const { return samples.empty(); }

    Eigen::MatrixXd features() const
    {
        Eigen::MatrixXd x(static_cast<Eigen::Index>(samples.size()), 3);
        for (std::size_t i = 0; i < samples.size(); ++i)
            for (std::size_t j = 0; j < 3; ++j)
                x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = samples[i].x[j];
        return x;
    }

    Eigen::VectorXd targets() const
    {
        Eigen::VectorXd y(static_cast<Eigen::Index>(samples.size()));
        for (std::size_t i = 0; i < samples.size(); ++i)
            y(static_cast<Eigen::Index>(i)) = samples[i].target;
        return y;
    }

    Dataset subset(std::span<const std::size_t> indices, SplitTag new_tag) const
    {
        Dataset out;
        out.tag = new_tag;
        out.encoding = encoding;
        out.samples.reserve(indices.size());
        for (auto i : indices)
            out.samples.push_back(samples.at(i));
        return out;
    }
};

/// Encodes every record with one shared encoding: `encoding` when given,
/// otherwise the extremes of the records themselves.
inline Dataset make_dataset(std::span<const PerformanceRecord> records, TargetTransform transform = TargetTransform::raw,
    std::optional<FeatureEncoding> encoding = std::nullopt)
{
    if (records.empty())
        throw std::invalid_argument("cannot build a dataset from an empty record list");
    Dataset ds;
    if (encoding) {
        ds.encoding = *encoding;
    } else {
        std::vector<ParameterConfig> configs;
        configs.reserve(records.size());
        for (const auto& r : records)
            configs.push_back(r.config);
        ds.encoding = FeatureEncoding::from_configs(configs);
    }
    ds.samples.reserve(records.size());
    for (std::size_t i = 0; i < records.size(); ++i)
        ds.samples.push_back({ds.encoding.encode(records[i].config), transform_target(records[i].mean_error, transform), records[i].config, i});
    return ds;
}

struct SplitResult {
    Dataset train;
    Dataset test;
    std::vector<std::size_t> train_indices;
    std::vector<std::size_t> test_indices;
};

/// Seeded uniform shuffle; the first floor(fraction*N) positions form the
/// training set. Both halves carry the encoding of the full dataset.
inline SplitResult split(const Dataset& all, double train_fraction, std::uint64_t seed)
{
    if (all.empty())
        throw std::invalid_argument("split: empty record list");
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw std::invalid_argument("split: train fraction must lie in (0, 1)");
    std::vector<std::size_t> order(all.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(order.begin(), order.end());
    const auto n_train = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(all.size())));
    SplitResult out;
    out.train_indices.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    out.test_indices.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
    out.train = all.subset(out.train_indices, SplitTag::train);
    out.test = all.subset(out.test_indices, SplitTag::test);
    return out;
}

inline SplitResult split(std::span<const PerformanceRecord> records, double train_fraction, std::uint64_t seed,
    TargetTransform transform = TargetTransform::raw)
{
    if (records.empty())
        throw std::invalid_argument("split: empty record list");
    return split(make_dataset(records, transform), train_fraction, seed);
}

struct Fold {
    Dataset fit;
    Dataset validation;
    std::vector<std::size_t> validation_indices;
};

/// k shuffled folds whose sizes differ by at most one.
inline std::vector<Fold> kfold(const Dataset& train, int k, std::uint64_t seed)
{
    if (k < 2)
        throw std::invalid_argument("kfold: k must be at least 2");
    if (static_cast<std::size_t>(k) > train.size())
        throw std::invalid_argument("kfold: k = " + std::to_string(k) + " exceeds " + std::to_string(train.size()) + " samples");
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(order.begin(), order.end());
    const std::size_t n = train.size(), kk = static_cast<std::size_t>(k);
    std::vector<Fold> folds;
    folds.reserve(kk);
    std::size_t begin = 0;
    for (std::size_t f = 0; f < kk; ++f) {
        const std::size_t len = n / kk + (f < n % kk ? 1 : 0);
        std::vector<std::size_t> val(order.begin() + static_cast<std::ptrdiff_t>(begin), order.begin() + static_cast<std::ptrdiff_t>(begin + len));
        std::vector<std::size_t> rest;
        rest.reserve(n - len);
        rest.insert(rest.end(), order.begin(), order.begin() + static_cast<std::ptrdiff_t>(begin));
        rest.insert(rest.end(), order.begin() + static_cast<std::ptrdiff_t>(begin + len), order.end());
        folds.push_back({train.subset(rest, SplitTag::train), train.subset(val, SplitTag::test), val});
        begin += len;
    }
    return folds;
}

/// Content hash of (features, targets) in sample order, as 16 hex digits.
inline std::string fingerprint(const Dataset& ds)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto feed = [&h](double v) {
        char bytes[sizeof(double)];
        std::memcpy(bytes, &v, sizeof(double));
        h = fnv1a(std::string_view(bytes, sizeof(double)), h);
    };
    for (const auto& s : ds.samples) {
        for (double v : s.x)
            feed(v);
        feed(s.target);
    }
    static constexpr char digits[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[h & 0xf];
        h >>= 4;
    }
    return out;
}

} // namespace epm

#endif // EPM_CONFIG_SPACE_HPP
