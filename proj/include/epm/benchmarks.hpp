#ifndef EPM_BENCHMARKS_HPP
#define EPM_BENCHMARKS_HPP

// Benchmark suite: six elementary functions (F1-F6) followed by the first
// fourteen CEC 2005 problems (F7-F20). Shift vectors, rotations and the
// Schwefel matrices are generated from a seed instead of shipped data files.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <epm/random.hpp>

namespace epm {

enum class ProblemId : int {
    F1 = 1, F2, F3, F4, F5, F6, F7, F8, F9, F10,
    F11, F12, F13, F14, F15, F16, F17, F18, F19, F20
};

inline constexpr int problem_count = 20;
inline constexpr std::uint64_t default_suite_seed = 0x5eedcec05ULL;

inline int problem_number(ProblemId id) { return static_cast<int>(id); }

inline std::string problem_label(ProblemId id) { return "F" + std::to_string(problem_number(id)); }

inline ProblemId parse_problem_id(std::string_view label)
{
    if (label.size() < 2 || (label[0] != 'F' && label[0] != 'f'))
        throw std::invalid_argument("unknown problem id '" + std::string(label) + "'");
    int n = 0;
    for (char c : label.substr(1)) {
        if (c < '0' || c > '9')
            throw std::invalid_argument("unknown problem id '" + std::string(label) + "'");
        n = n * 10 + (c - '0');
    }
    if (n < 1 || n > problem_count)
        throw std::invalid_argument("unknown problem id '" + std::string(label) + "'");
    return static_cast<ProblemId>(n);
}

struct ProblemInstance {
    ProblemId id = ProblemId::F1;
    std::string name;
    int dimension = 0;
    std::vector<double> lower_bounds;
    std::vector<double> upper_bounds;
    double optimum_value = 0.0;
    std::vector<double> optimum_location;
    std::vector<double> shift_vector;
    Eigen::MatrixXd rotation;
    double bias = 0.0;
    bool unimodal = false;
    bool noisy = false;
    /// When false the optimiser never clamps trial vectors to the box.
    bool bounded = true;
    std::uint64_t seed = 0;

    // Schwefel 2.6 uses (a_matrix, b_vector); Schwefel 2.13 uses
    // (a_matrix, b_matrix, b_vector) where b_vector holds the A_i constants.
    Eigen::MatrixXd a_matrix;
    Eigen::MatrixXd b_matrix;
    Eigen::VectorXd b_vector;
};

namespace detail {

    inline constexpr double pi = std::numbers::pi;
    inline constexpr double e = std::numbers::e;

    inline double rosenbrock_pair(double a, double b)
    {
        const double t = a * a - b;
        return 100.0 * t * t + (a - 1.0) * (a - 1.0);
    }

    inline double sphere(std::span<const double> z)
    {
        double s = 0.0;
        for (double v : z)
            s += v * v;
        return s;
    }

    inline double ellipsoid(std::span<const double> z)
    {
        double s = 0.0;
        for (std::size_t i = 0; i < z.size(); ++i)
            s += static_cast<double>(i + 1) * z[i] * z[i];
        return s;
    }

    inline double rosenbrock(std::span<const double> z)
    {
        double s = 0.0;
        for (std::size_t i = 0; i + 1 < z.size(); ++i)
            s += rosenbrock_pair(z[i], z[i + 1]);
        return s;
    }

    inline double ackley(std::span<const double> z)
    {
        const double n = static_cast<double>(z.size());
        double sq = 0.0, cs = 0.0;
        for (double v : z) {
            sq += v * v;
            cs += std::cos(2.0 * pi * v);
        }
        return -20.0 * std::exp(-0.2 * std::sqrt(sq / n)) - std::exp(cs / n) + 20.0 + e;
    }

    inline double griewank(std::span<const double> z)
    {
        double s = 0.0, p = 1.0;
        for (std::size_t i = 0; i < z.size(); ++i) {
            s += z[i] * z[i] / 4000.0;
            p *= std::cos(z[i] / std::sqrt(static_cast<double>(i + 1)));
        }
        return s - p + 1.0;
    }

    inline double rastrigin(std::span<const double> z)
    {
        double s = 0.0;
        for (double v : z)
            s += v * v - 10.0 * std::cos(2.0 * pi * v) + 10.0;
        return s;
    }

    inline double schwefel_12(std::span<const double> z)
    {
        double s = 0.0, partial = 0.0;
        for (double v : z) {
            partial += v;
            s += partial * partial;
        }
        return s;
    }

    inline double elliptic(std::span<const double> z)
    {
        const std::size_t n = z.size();
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double expo = n > 1 ? static_cast<double>(i) / static_cast<double>(n - 1) : 0.0;
            s += std::pow(1.0e6, expo) * z[i] * z[i];
        }
        return s;
    }

    inline constexpr int weierstrass_kmax = 20;
    inline constexpr double weierstrass_a = 0.5;
    inline constexpr double weierstrass_b = 3.0;

    inline double weierstrass(std::span<const double> z)
    {
        double s = 0.0;
        for (double v : z) {
            double ak = 1.0, bk = 1.0;
            for (int k = 0; k <= weierstrass_kmax; ++k) {
                s += ak * std::cos(2.0 * pi * bk * (v + 0.5));
                ak *= weierstrass_a;
                bk *= weierstrass_b;
            }
        }
        double offset = 0.0, ak = 1.0, bk = 1.0;
        for (int k = 0; k <= weierstrass_kmax; ++k) {
            offset += ak * std::cos(pi * bk);
            ak *= weierstrass_a;
            bk *= weierstrass_b;
        }
        return s - static_cast<double>(z.size()) * offset;
    }

    inline double griewank_1d(double x) { return x * x / 4000.0 - std::cos(x) + 1.0; }

    inline double expanded_griewank_rosenbrock(std::span<const double> z)
    {
        const std::size_t n = z.size();
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            s += griewank_1d(rosenbrock_pair(z[i], z[(i + 1) % n]));
        return s;
    }

    inline double scaffer_f6(double x, double y)
    {
        const double r2 = x * x + y * y;
        const double sn = std::sin(std::sqrt(r2));
        const double den = 1.0 + 0.001 * r2;
        return 0.5 + (sn * sn - 0.5) / (den * den);
    }

    inline double expanded_scaffer(std::span<const double> z)
    {
        const std::size_t n = z.size();
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            s += scaffer_f6(z[i], z[(i + 1) % n]);
        return s;
    }

    /// Orthogonal matrix from the QR factor of a seeded standard-normal matrix,
    /// with column signs fixed so the result is unique.
    inline Eigen::MatrixXd random_rotation(int d, Rng& rng)
    {
        Eigen::MatrixXd g(d, d);
        for (int j = 0; j < d; ++j)
            for (int i = 0; i < d; ++i)
                g(i, j) = rng.normal();
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
        Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(d, d);
        const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
        for (int j = 0; j < d; ++j)
            if (r(j, j) < 0.0)
                q.col(j) = -q.col(j);
        return q;
    }

    struct Descriptor {
        const char* name;
        double lower;
        double upper;
        bool unimodal;
        bool shifted;
        bool rotated;
    };

    // Elementary ranges follow the customary De Jong / Ackley / Griewank
    // definitions; CEC ranges follow the 2005 technical report.
    inline constexpr std::array<Descriptor, problem_count> descriptors{{
        {"sphere", -5.12, 5.12, true, false, false},
        {"ellipsoid", -5.12, 5.12, true, false, false},
        {"rosenbrock", -2.048, 2.048, false, false, false},
        {"ackley", -32.768, 32.768, false, false, false},
        {"griewank", -600.0, 600.0, false, false, false},
        {"rastrigin", -5.12, 5.12, false, false, false},
        {"shifted_sphere", -100.0, 100.0, true, true, false},
        {"shifted_schwefel_1_2", -100.0, 100.0, true, true, false},
        {"shifted_rotated_high_conditioned_elliptic", -100.0, 100.0, true, true, true},
        {"shifted_schwefel_1_2_noise", -100.0, 100.0, true, true, false},
        {"schwefel_2_6_optimum_on_bounds", -100.0, 100.0, true, true, false},
        {"shifted_rosenbrock", -100.0, 100.0, false, true, false},
        {"shifted_rotated_griewank_without_bounds", 0.0, 600.0, false, true, true},
        {"shifted_rotated_ackley_optimum_on_bounds", -32.0, 32.0, false, true, true},
        {"shifted_rastrigin", -5.0, 5.0, false, true, false},
        {"shifted_rotated_rastrigin", -5.0, 5.0, false, true, true},
        {"shifted_rotated_weierstrass", -0.5, 0.5, false, true, true},
        {"schwefel_2_13", -detail::pi, detail::pi, false, true, false},
        {"expanded_griewank_rosenbrock", -3.0, 1.0, false, true, false},
        {"shifted_rotated_expanded_scaffer_f6", -100.0, 100.0, false, true, true},
    }};

} // namespace detail

/// Builds one instance. Seeded data (shift, rotation, Schwefel matrices) is a
/// pure function of (suite_seed, id, dimension).
inline ProblemInstance make_problem(ProblemId id, int dimension, std::uint64_t suite_seed = default_suite_seed)
{
    if (dimension < 2)
        throw std::invalid_argument("benchmark dimension must be at least 2, got " + std::to_string(dimension));
    const int num = problem_number(id);
    if (num < 1 || num > problem_count)
        throw std::invalid_argument("problem id out of range");
    const auto& desc = detail::descriptors[static_cast<std::size_t>(num - 1)];
    const auto d = static_cast<std::size_t>(dimension);

    ProblemInstance p;
    p.id = id;
    p.name = desc.name;
    p.dimension = dimension;
    p.lower_bounds.assign(d, desc.lower);
    p.upper_bounds.assign(d, desc.upper);
    p.unimodal = desc.unimodal;
    p.noisy = id == ProblemId::F10;
    p.bounded = id != ProblemId::F13;
    p.seed = mix_seed(suite_seed, static_cast<std::uint64_t>(num) * 1000u + d);
    p.shift_vector.assign(d, 0.0);
    p.rotation = Eigen::MatrixXd::Identity(dimension, dimension);

    Rng rng(p.seed);
    if (desc.shifted) {
        for (std::size_t i = 0; i < d; ++i)
            p.shift_vector[i] = rng.uniform(0.8 * desc.lower, 0.8 * desc.upper);
    }
    if (desc.rotated)
        p.rotation = detail::random_rotation(dimension, rng);

    p.optimum_location = p.shift_vector;
    switch (id) {
    case ProblemId::F3:
        p.optimum_location.assign(d, 1.0);
        break;
    case ProblemId::F11: {
        // Optimum sits on the bounds: first quarter at the lower, last quarter at the upper bound.
        const std::size_t lo_end = static_cast<std::size_t>(std::ceil(static_cast<double>(d) / 4.0));
        const std::size_t hi_begin = std::max<std::size_t>(static_cast<std::size_t>(std::floor(0.75 * static_cast<double>(d))), 1) - 1;
        for (std::size_t i = 0; i < lo_end; ++i)
            p.shift_vector[i] = desc.lower;
        for (std::size_t i = hi_begin; i < d; ++i)
            p.shift_vector[i] = desc.upper;
        Eigen::MatrixXd a(dimension, dimension);
        do {
            for (int j = 0; j < dimension; ++j)
                for (int i = 0; i < dimension; ++i)
                    a(i, j) = static_cast<double>(rng.integer(-500, 500));
        } while (std::abs(a.determinant()) < 1.0);
        p.a_matrix = a;
        p.b_vector = a * Eigen::Map<const Eigen::VectorXd>(p.shift_vector.data(), dimension);
        p.optimum_location = p.shift_vector;
        break;
    }
    case ProblemId::F14:
        for (std::size_t i = 0; i < d; i += 2)
            p.shift_vector[i] = desc.lower;
        p.optimum_location = p.shift_vector;
        break;
    case ProblemId::F18: {
        // Optimum at alpha (stored as the shift vector), alpha uniform in [-pi, pi].
        for (std::size_t i = 0; i < d; ++i)
            p.shift_vector[i] = rng.uniform(-detail::pi, detail::pi);
        Eigen::MatrixXd a(dimension, dimension), b(dimension, dimension);
        for (int j = 0; j < dimension; ++j)
            for (int i = 0; i < dimension; ++i) {
                a(i, j) = static_cast<double>(rng.integer(-100, 100));
                b(i, j) = static_cast<double>(rng.integer(-100, 100));
            }
        p.a_matrix = a;
        p.b_matrix = b;
        p.b_vector.resize(dimension);
        for (int i = 0; i < dimension; ++i) {
            double s = 0.0;
            for (int j = 0; j < dimension; ++j)
                s += a(i, j) * std::sin(p.shift_vector[j]) + b(i, j) * std::cos(p.shift_vector[j]);
            p.b_vector(i) = s;
        }
        p.optimum_location = p.shift_vector;
        break;
    }
    default:
        break;
    }
    return p;
}

/// All twenty problems at one dimension, in id order.
inline std::vector<ProblemInstance> catalog(int dimension, std::uint64_t suite_seed = default_suite_seed)
{
    if (dimension < 2)
        throw std::invalid_argument("benchmark dimension must be at least 2, got " + std::to_string(dimension));
    std::vector<ProblemInstance> out;
    out.reserve(problem_count);
    for (int n = 1; n <= problem_count; ++n)
        out.push_back(make_problem(static_cast<ProblemId>(n), dimension, suite_seed));
    return out;
}

/// f(x). Bounds are not enforced. `noise` must be supplied for the noisy
/// problem (F10) and is ignored otherwise.
inline double evaluate(const ProblemInstance& p, std::span<const double> x, Rng* noise = nullptr)
{
    const auto d = static_cast<std::size_t>(p.dimension);
    if (x.size() != d)
        throw std::invalid_argument("evaluate: expected " + std::to_string(d) + " variables, got " + std::to_string(x.size()));
    for (double v : x)
        if (!std::isfinite(v))
            throw std::invalid_argument("evaluate: non-finite input");

    std::vector<double> z(x.begin(), x.end());
    for (std::size_t i = 0; i < d; ++i)
        z[i] -= p.shift_vector[i];

    const auto& desc = detail::descriptors[static_cast<std::size_t>(problem_number(p.id) - 1)];
    if (desc.rotated) {
        Eigen::Map<Eigen::VectorXd> zv(z.data(), p.dimension);
        const Eigen::VectorXd rz = p.rotation * zv;
        zv = rz;
    }

    double f = 0.0;
    switch (p.id) {
    case ProblemId::F1: f = detail::sphere(z); break;
    case ProblemId::F2: f = detail::ellipsoid(z); break;
    case ProblemId::F3: f = detail::rosenbrock(z); break;
    case ProblemId::F4: f = detail::ackley(z); break;
    case ProblemId::F5: f = detail::griewank(z); break;
    case ProblemId::F6: f = detail::rastrigin(z); break;
    case ProblemId::F7: f = detail::sphere(z); break;
    case ProblemId::F8: f = detail::schwefel_12(z); break;
    case ProblemId::F9: f = detail::elliptic(z); break;
    case ProblemId::F10: {
        if (noise == nullptr)
            throw std::invalid_argument("evaluate: " + p.name + " requires a noise stream");
        f = detail::schwefel_12(z) * (1.0 + 0.4 * std::abs(noise->normal()));
        break;
    }
    case ProblemId::F11: {
        Eigen::Map<const Eigen::VectorXd> xv(x.data(), p.dimension);
        f = ((p.a_matrix * xv) - p.b_vector).cwiseAbs().maxCoeff();
        break;
    }
    case ProblemId::F12:
    case ProblemId::F19: {
        for (double& v : z)
            v += 1.0;
        f = p.id == ProblemId::F12 ? detail::rosenbrock(z) : detail::expanded_griewank_rosenbrock(z);
        break;
    }
    case ProblemId::F13: f = detail::griewank(z); break;
    case ProblemId::F14: f = detail::ackley(z); break;
    case ProblemId::F15:
    case ProblemId::F16: f = detail::rastrigin(z); break;
    case ProblemId::F17: f = detail::weierstrass(z); break;
    case ProblemId::F18: {
        double s = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            double bi = 0.0;
            for (std::size_t j = 0; j < d; ++j)
                bi += p.a_matrix(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * std::sin(x[j])
                    + p.b_matrix(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * std::cos(x[j]);
            const double diff = p.b_vector(static_cast<Eigen::Index>(i)) - bi;
            s += diff * diff;
        }
        f = s;
        break;
    }
    case ProblemId::F20: f = detail::expanded_scaffer(z); break;
    }
    return f + p.bias;
}

} // namespace epm

#endif // EPM_BENCHMARKS_HPP
