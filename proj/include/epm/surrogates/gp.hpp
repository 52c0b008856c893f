#ifndef EPM_SURROGATES_GP_HPP
#define EPM_SURROGATES_GP_HPP

// Exact Gaussian-process regression with ARD kernels. Hyperparameters are set
// by maximising the log marginal likelihood with a box-projected L-BFGS from
// several seeded starting points.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include <epm/random.hpp>
#include <epm/surrogates/common.hpp>

namespace epm::gp {

enum class Kernel { rbf, rational_quadratic, matern52 };

inline const char* kernel_name(Kernel k)
{
    switch (k) {
    case Kernel::rbf: return "RBF";
    case Kernel::rational_quadratic: return "RationalQuadratic";
    case Kernel::matern52: return "Matern";
    }
    return "?";
}

inline Kernel parse_kernel(const std::string& s)
{
    if (s == "RBF") return Kernel::rbf;
    if (s == "RationalQuadratic") return Kernel::rational_quadratic;
    if (s == "Matern") return Kernel::matern52;
    throw std::invalid_argument("unknown GP kernel '" + s + "'");
}

struct Options {
    Kernel kernel = Kernel::rbf;
    int restarts = 5;
    int max_iterations = 60;
    /// Lower bound on the noise variance (in standardised target units).
    double noise_floor = 1e-6;
    std::uint64_t seed = 0;
};

/// Log-space hyperparameter vector:
///   [log l_1 .. log l_D, log signal_var, log noise_var, (log alpha for RQ)].
struct Layout {
    int dims = 0;
    Kernel kernel = Kernel::rbf;

    int size() const { return dims + 2 + (kernel == Kernel::rational_quadratic ? 1 : 0); }
    int signal() const { return dims; }
    int noise() const { return dims + 1; }
    int alpha() const { return dims + 2; }
};

namespace detail {

    struct KernelEval {
        double k;      // kernel value without signal variance
        double dk_dr2; // derivative w.r.t. the scaled squared distance
        double dk_dlog_alpha;
    };

    inline KernelEval unit_kernel(Kernel kernel, double r2, double alpha)
    {
        switch (kernel) {
        case Kernel::rbf: {
            const double k = std::exp(-0.5 * r2);
            return {k, -0.5 * k, 0.0};
        }
        case Kernel::rational_quadratic: {
            const double u = 1.0 + r2 / (2.0 * alpha);
            const double k = std::pow(u, -alpha);
            const double dk_dr2 = -0.5 * k / u;
            const double dlog_alpha = k * alpha * (-std::log(u) + r2 / (2.0 * alpha * u));
            return {k, dk_dr2, dlog_alpha};
        }
        case Kernel::matern52: {
            const double r = std::sqrt(r2);
            const double s5r = std::sqrt(5.0) * r;
            const double ex = std::exp(-s5r);
            const double k = (1.0 + s5r + 5.0 * r2 / 3.0) * ex;
            const double dk_dr2 = -(5.0 / 6.0) * (1.0 + s5r) * ex;
            return {k, dk_dr2, 0.0};
        }
        }
        return {0.0, 0.0, 0.0};
    }

    inline double scaled_r2(const Eigen::MatrixXd& x, Eigen::Index a, const Eigen::RowVectorXd& b, const Eigen::ArrayXd& inv_l2)
    {
        return ((x.row(a) - b).array().square() * inv_l2.transpose()).sum();
    }

} // namespace detail

/// Negative log marginal likelihood of (x, y) and its gradient in the
/// log-hyperparameter space.
class MarginalLikelihood {
public:
    MarginalLikelihood(Eigen::MatrixXd x, Eigen::VectorXd y, Kernel kernel)
        : x_(std::move(x)), y_(std::move(y)), layout_{static_cast<int>(x_.cols()), kernel}
    {
        const Eigen::Index n = x_.rows();
        diff2_.resize(static_cast<std::size_t>(layout_.dims), Eigen::MatrixXd::Zero(n, n));
        for (int j = 0; j < layout_.dims; ++j)
            for (Eigen::Index b = 0; b < n; ++b)
                for (Eigen::Index a = b + 1; a < n; ++a) {
                    const double d = x_(a, j) - x_(b, j);
                    diff2_[static_cast<std::size_t>(j)](a, b) = d * d;
                }
    }

    const Layout& layout() const { return layout_; }

    Eigen::MatrixXd covariance(const Eigen::VectorXd& theta) const
    {
        Eigen::MatrixXd k;
        fill(theta, k, nullptr, nullptr);
        return k;
    }

    /// Returns -log p(y | X, theta); +inf when the covariance is not positive
    /// definite. Fills `grad` (d/d theta of the returned value) when non-null.
    double operator()(const Eigen::VectorXd& theta, Eigen::VectorXd* grad = nullptr) const
    {
        const Eigen::Index n = x_.rows();
        const bool rq = layout_.kernel == Kernel::rational_quadratic;
        Eigen::MatrixXd k, dk_dr2, dk_dalpha;
        fill(theta, k, grad ? &dk_dr2 : nullptr, grad && rq ? &dk_dalpha : nullptr);
        Eigen::LLT<Eigen::MatrixXd> llt(k);
        if (llt.info() != Eigen::Success)
            return std::numeric_limits<double>::infinity();
        const Eigen::VectorXd alpha_vec = llt.solve(y_);
        const Eigen::MatrixXd& lmat = llt.matrixLLT();
        double log_det_half = 0.0;
        for (Eigen::Index i = 0; i < n; ++i)
            log_det_half += std::log(lmat(i, i));
        const double nll = 0.5 * y_.dot(alpha_vec) + log_det_half + 0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
        if (!std::isfinite(nll))
            return std::numeric_limits<double>::infinity();
        if (grad == nullptr)
            return nll;

        // d nll / d theta_j = -1/2 tr((alpha alpha^T - K^-1) dK/dtheta_j)
        Eigen::MatrixXd w = -llt.solve(Eigen::MatrixXd::Identity(n, n));
        w.noalias() += alpha_vec * alpha_vec.transpose();

        const int dd = layout_.dims;
        const Eigen::ArrayXd inv_l2 = (-2.0 * theta.head(dd).array()).exp();
        const double sf2 = std::exp(theta(layout_.signal()));
        const double sn2 = std::exp(theta(layout_.noise()));

        Eigen::VectorXd g = Eigen::VectorXd::Zero(layout_.size());
        std::vector<double> gl(static_cast<std::size_t>(dd), 0.0);
        double trace_w = 0.0, g_signal = 0.0, g_alpha = 0.0;
        for (Eigen::Index b = 0; b < n; ++b) {
            trace_w += w(b, b);
            for (Eigen::Index a = b + 1; a < n; ++a) {
                // Off-diagonal pairs appear twice in the trace.
                const double wab = 2.0 * w(a, b);
                const double common = wab * dk_dr2(a, b);
                for (int j = 0; j < dd; ++j)
                    gl[static_cast<std::size_t>(j)] += common * diff2_[static_cast<std::size_t>(j)](a, b);
                g_signal += wab * k(a, b);
                if (rq)
                    g_alpha += wab * dk_dalpha(a, b);
            }
        }
        for (int j = 0; j < dd; ++j)
            g(j) = gl[static_cast<std::size_t>(j)] * sf2 * (-2.0 * inv_l2(j));
        // k(a,b) already carries sf2, so d/dlog sf2 of an off-diagonal entry is k itself.
        g(layout_.signal()) = g_signal + trace_w * sf2;
        g(layout_.noise()) = trace_w * sn2;
        if (rq)
            g(layout_.alpha()) = g_alpha * sf2;
        *grad = -0.5 * g;
        return nll;
    }

private:
    /// Lower triangle of the covariance (mirrored to full); optionally the
    /// unit-kernel derivatives in the strict lower triangle.
    void fill(const Eigen::VectorXd& theta, Eigen::MatrixXd& k, Eigen::MatrixXd* dk_dr2, Eigen::MatrixXd* dk_dalpha) const
    {
        const Eigen::Index n = x_.rows();
        const int dd = layout_.dims;
        const Eigen::ArrayXd inv_l2 = (-2.0 * theta.head(dd).array()).exp();
        const double sf2 = std::exp(theta(layout_.signal()));
        const double sn2 = std::exp(theta(layout_.noise()));
        const double alpha = layout_.kernel == Kernel::rational_quadratic ? std::exp(theta(layout_.alpha())) : 1.0;
        k.resize(n, n);
        if (dk_dr2)
            dk_dr2->resize(n, n);
        if (dk_dalpha)
            dk_dalpha->resize(n, n);
        for (Eigen::Index b = 0; b < n; ++b) {
            k(b, b) = sf2 + sn2;
            for (Eigen::Index a = b + 1; a < n; ++a) {
                double r2 = 0.0;
                for (int j = 0; j < dd; ++j)
                    r2 += diff2_[static_cast<std::size_t>(j)](a, b) * inv_l2(j);
                const auto ke = detail::unit_kernel(layout_.kernel, r2, alpha);
                k(a, b) = k(b, a) = sf2 * ke.k;
                if (dk_dr2)
                    (*dk_dr2)(a, b) = ke.dk_dr2;
                if (dk_dalpha)
                    (*dk_dalpha)(a, b) = ke.dk_dlog_alpha;
            }
        }
    }

    Eigen::MatrixXd x_;
    Eigen::VectorXd y_;
    Layout layout_;
    std::vector<Eigen::MatrixXd> diff2_; // per-dimension squared differences, strict lower triangle
};

struct Bounds {
    Eigen::VectorXd lo;
    Eigen::VectorXd hi;
};

inline Bounds hyper_bounds(const Layout& layout, double noise_floor)
{
    Bounds b{Eigen::VectorXd(layout.size()), Eigen::VectorXd(layout.size())};
    for (int j = 0; j < layout.dims; ++j) {
        b.lo(j) = std::log(1e-3);
        b.hi(j) = std::log(1e2);
    }
    b.lo(layout.signal()) = std::log(1e-3);
    b.hi(layout.signal()) = std::log(1e3);
    b.lo(layout.noise()) = std::log(noise_floor);
    b.hi(layout.noise()) = std::log(std::max(1.0, noise_floor * 10.0));
    if (layout.kernel == Kernel::rational_quadratic) {
        b.lo(layout.alpha()) = std::log(1e-2);
        b.hi(layout.alpha()) = std::log(1e3);
    }
    return b;
}

struct MinimizeResult {
    Eigen::VectorXd x;
    double value = std::numeric_limits<double>::infinity();
    int iterations = 0;
};

/// Box-projected limited-memory BFGS with Armijo backtracking.
/// `f(x, grad)` returns the objective and fills grad when grad is non-null.
template <typename Objective>
MinimizeResult minimize_box(const Objective& f, Eigen::VectorXd x, const Bounds& box, int max_iterations, int memory = 6)
{
    x = x.cwiseMax(box.lo).cwiseMin(box.hi);
    Eigen::VectorXd g(x.size());
    double fx = f(x, &g);
    MinimizeResult res{x, fx, 0};
    if (!std::isfinite(fx))
        return res;

    std::deque<std::pair<Eigen::VectorXd, Eigen::VectorXd>> history;
    auto projected = [&](const Eigen::VectorXd& xv, const Eigen::VectorXd& gv) {
        Eigen::VectorXd pg = gv;
        for (Eigen::Index i = 0; i < xv.size(); ++i)
            if ((xv(i) <= box.lo(i) && gv(i) > 0.0) || (xv(i) >= box.hi(i) && gv(i) < 0.0))
                pg(i) = 0.0;
        return pg;
    };

    for (int it = 0; it < max_iterations; ++it) {
        res.iterations = it + 1;
        const Eigen::VectorXd pg = projected(x, g);
        if (pg.lpNorm<Eigen::Infinity>() < 1e-6)
            break;

        // Two-loop recursion on the free coordinates.
        Eigen::VectorXd q = pg;
        std::vector<double> rho(history.size()), a(history.size());
        for (std::size_t k = history.size(); k-- > 0;) {
            const auto& [s, yv] = history[k];
            rho[k] = 1.0 / yv.dot(s);
            a[k] = rho[k] * s.dot(q);
            q -= a[k] * yv;
        }
        if (!history.empty()) {
            const auto& [s, yv] = history.back();
            q *= s.dot(yv) / yv.dot(yv);
        }
        for (std::size_t k = 0; k < history.size(); ++k) {
            const auto& [s, yv] = history[k];
            const double beta = rho[k] * yv.dot(q);
            q += (a[k] - beta) * s;
        }
        Eigen::VectorXd dir = -q;
        for (Eigen::Index i = 0; i < x.size(); ++i)
            if (pg(i) == 0.0)
                dir(i) = 0.0;
        if (dir.dot(pg) >= 0.0 || !dir.allFinite()) {
            history.clear();
            dir = -pg;
        }

        double step = history.empty() ? std::min(1.0, 1.0 / pg.lpNorm<Eigen::Infinity>()) : 1.0;
        Eigen::VectorXd xn, gn(x.size());
        double fn = std::numeric_limits<double>::infinity();
        int accepted_at = -1;
        for (int bt = 0; bt < 40; ++bt) {
            xn = (x + step * dir).cwiseMax(box.lo).cwiseMin(box.hi);
            // The first trial is usually accepted, so its gradient is computed eagerly.
            fn = f(xn, bt == 0 ? &gn : nullptr);
            if (std::isfinite(fn) && fn <= fx + 1e-4 * g.dot(xn - x)) {
                accepted_at = bt;
                break;
            }
            step *= 0.5;
        }
        if (accepted_at < 0)
            break;
        if (accepted_at > 0)
            fn = f(xn, &gn);
        const Eigen::VectorXd s = xn - x;
        const Eigen::VectorXd yv = gn - g;
        if (s.dot(yv) > 1e-12) {
            history.emplace_back(s, yv);
            if (static_cast<int>(history.size()) > memory)
                history.pop_front();
        }
        const double decrease = fx - fn;
        x = xn;
        g = gn;
        fx = fn;
        if (decrease < 1e-10 * (1.0 + std::abs(fx)))
            break;
    }
    res.x = x;
    res.value = fx;
    return res;
}

/// Fitted posterior-mean predictor.
class Model {
public:
    Kernel kernel() const { return kernel_; }
    const Eigen::VectorXd& log_hyperparameters() const { return theta_; }
    double log_marginal_likelihood() const { return lml_; }
    double jitter() const { return jitter_; }
    Eigen::Index training_size() const { return x_.rows(); }

    double predict(const Eigen::Ref<const Eigen::RowVectorXd>& q) const
    {
        const int dd = static_cast<int>(x_.cols());
        const Eigen::ArrayXd inv_l2 = (-2.0 * theta_.head(dd).array()).exp();
        const double sf2 = std::exp(theta_(dd));
        const double alpha = kernel_ == Kernel::rational_quadratic ? std::exp(theta_(dd + 2)) : 1.0;
        double mean = 0.0;
        for (Eigen::Index i = 0; i < x_.rows(); ++i)
            mean += weights_(i) * sf2 * detail::unit_kernel(kernel_, detail::scaled_r2(x_, i, q, inv_l2), alpha).k;
        return scaler_.inverse(mean);
    }

private:
    friend Model fit(const Eigen::MatrixXd&, const Eigen::VectorXd&, const Options&);

    Kernel kernel_ = Kernel::rbf;
    Eigen::VectorXd theta_;
    Eigen::MatrixXd x_;
    Eigen::VectorXd weights_;
    TargetScaler scaler_;
    double lml_ = 0.0;
    double jitter_ = 0.0;
};

inline Eigen::VectorXd default_start(const Layout& layout, double noise_floor)
{
    Eigen::VectorXd t(layout.size());
    t.head(layout.dims).setConstant(std::log(0.3));
    t(layout.signal()) = 0.0;
    t(layout.noise()) = std::log(std::max(1e-2, noise_floor));
    if (layout.kernel == Kernel::rational_quadratic)
        t(layout.alpha()) = 0.0;
    return t;
}

/// Fits on (x, y). Duplicate inputs are collapsed first and targets are
/// standardised; predictions are returned on the original scale.
inline Model fit(const Eigen::MatrixXd& x_in, const Eigen::VectorXd& y_in, const Options& opt)
{
    require_training_data(x_in, y_in, 2, "gp_fit");
    auto data = collapse_duplicates(x_in, y_in);
    Model m;
    m.kernel_ = opt.kernel;
    m.scaler_ = TargetScaler::fit(data.y);
    const Eigen::VectorXd z = m.scaler_.forward(data.y);
    m.x_ = data.x;

    MarginalLikelihood objective(data.x, z, opt.kernel);
    const Layout layout = objective.layout();
    const Bounds box = hyper_bounds(layout, opt.noise_floor);

    Rng rng(opt.seed);
    MinimizeResult best;
    for (int r = 0; r < std::max(1, opt.restarts); ++r) {
        Eigen::VectorXd start = default_start(layout, opt.noise_floor);
        if (r > 0)
            for (Eigen::Index j = 0; j < start.size(); ++j)
                start(j) = rng.uniform(box.lo(j), box.hi(j));
        auto res = minimize_box([&](const Eigen::VectorXd& t, Eigen::VectorXd* g) { return objective(t, g); }, start, box, opt.max_iterations);
        if (res.value < best.value)
            best = res;
    }
    if (!std::isfinite(best.value))
        throw FitError("gp_fit: marginal likelihood is not finite at any restart");
    m.theta_ = best.x;
    m.lml_ = -best.value;

    Eigen::MatrixXd k = objective.covariance(m.theta_);
    Eigen::LLT<Eigen::MatrixXd> llt(k);
    double jitter = 0.0;
    if (llt.info() != Eigen::Success) {
        for (jitter = 1e-10; jitter <= 1e-2 * (1.0 + 1e-9); jitter *= 10.0) {
            llt.compute(k + jitter * Eigen::MatrixXd::Identity(k.rows(), k.cols()));
            if (llt.info() == Eigen::Success)
                break;
        }
        if (llt.info() != Eigen::Success) {
            std::ostringstream msg;
            msg << "gp_fit: Cholesky factorisation failed; final jitter tried " << jitter / 10.0;
            throw FitError(msg.str());
        }
    }
    m.jitter_ = jitter;
    m.weights_ = llt.solve(z);
    return m;
}

} // namespace epm::gp

#endif // EPM_SURROGATES_GP_HPP
