#ifndef EPM_SURROGATES_SVR_HPP
#define EPM_SURROGATES_SVR_HPP

// epsilon-insensitive support vector regression. The dual is solved by SMO with
// second-order working-set selection (maximal violating pair with curvature).

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include <epm/surrogates/common.hpp>

namespace epm::svr {

enum class Kernel { rbf, sigmoid };

inline const char* kernel_name(Kernel k) { return k == Kernel::rbf ? "RBF" : "Sigmoid"; }

inline Kernel parse_kernel(const std::string& s)
{
    if (s == "RBF") return Kernel::rbf;
    if (s == "Sigmoid") return Kernel::sigmoid;
    throw std::invalid_argument("unknown SVR kernel '" + s + "'");
}

struct Params {
    Kernel kernel = Kernel::rbf;
    double epsilon = 0.1;
    double c = 1.0;
    double gamma = 0.1;
    /// Stop when the maximal KKT violation drops below this.
    double tolerance = 1e-3;
    long max_iterations = 0; // 0: max(10^6, 100 * 2n)
};

inline void validate(const Params& p)
{
    if (!(p.epsilon >= 0.0))
        throw std::invalid_argument("svr: epsilon must be nonnegative");
    if (!(p.c > 0.0))
        throw std::invalid_argument("svr: C must be positive");
    if (!(p.gamma > 0.0))
        throw std::invalid_argument("svr: gamma must be positive");
}

inline double kernel_value(Kernel k, double gamma, const Eigen::Ref<const Eigen::RowVectorXd>& a, const Eigen::Ref<const Eigen::RowVectorXd>& b)
{
    if (k == Kernel::rbf)
        return std::exp(-gamma * (a - b).squaredNorm());
    return std::tanh(gamma * a.dot(b)); // coef0 = 0
}

class Model {
public:
    double predict(const Eigen::Ref<const Eigen::RowVectorXd>& q) const
    {
        double s = -rho_;
        for (Eigen::Index i = 0; i < x_.rows(); ++i)
            if (coef_(i) != 0.0)
                s += coef_(i) * kernel_value(params_.kernel, params_.gamma, x_.row(i), q);
        return scaler_.inverse(s);
    }

    /// Prediction in standardised target units (the scale epsilon refers to).
    double decision(const Eigen::Ref<const Eigen::RowVectorXd>& q) const { return (predict(q) - scaler_.mean) / scaler_.scale; }

    const Eigen::VectorXd& alpha() const { return alpha_; }
    const Eigen::VectorXd& alpha_star() const { return alpha_star_; }
    /// alpha - alpha*, one per training row.
    const Eigen::VectorXd& coefficients() const { return coef_; }
    double bias() const { return -rho_; }
    long iterations() const { return iterations_; }
    double final_violation() const { return violation_; }
    const TargetScaler& scaler() const { return scaler_; }
    const Params& params() const { return params_; }

    static Model fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Params& p);

private:
    Params params_;
    Eigen::MatrixXd x_;
    Eigen::VectorXd alpha_, alpha_star_, coef_;
    TargetScaler scaler_;
    double rho_ = 0.0;
    long iterations_ = 0;
    double violation_ = 0.0;
};

inline Model Model::fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y_raw, const Params& p)
{
    validate(p);
    require_training_data(x, y_raw, 1, "svr_fit");
    constexpr double tau = 1e-12;
    const Eigen::Index n = x.rows();
    const Eigen::Index l = 2 * n;
    Model m;
    m.params_ = p;
    m.x_ = x;
    m.scaler_ = TargetScaler::fit(y_raw);
    const Eigen::VectorXd z = m.scaler_.forward(y_raw);

    Eigen::MatrixXd k(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i; j < n; ++j)
            k(i, j) = k(j, i) = kernel_value(p.kernel, p.gamma, x.row(i), x.row(j));

    // Variables t < n are alpha (sign +1), t >= n are alpha* (sign -1).
    auto sign = [n](Eigen::Index t) { return t < n ? 1.0 : -1.0; };
    auto base = [n](Eigen::Index t) { return t < n ? t : t - n; };
    auto q = [&](Eigen::Index a, Eigen::Index b) { return sign(a) * sign(b) * k(base(a), base(b)); };

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(l);
    Eigen::VectorXd grad(l);
    for (Eigen::Index t = 0; t < l; ++t)
        grad(t) = p.epsilon - sign(t) * z(base(t));
    const double c = p.c;
    auto at_upper = [&](Eigen::Index t) { return beta(t) >= c; };
    auto at_lower = [&](Eigen::Index t) { return beta(t) <= 0.0; };

    const long cap = p.max_iterations > 0 ? p.max_iterations : std::max<long>(1'000'000L, 100L * static_cast<long>(l));
    long iter = 0;
    double violation = std::numeric_limits<double>::infinity();
    for (;; ++iter) {
        double gmax = -std::numeric_limits<double>::infinity();
        Eigen::Index i = -1;
        for (Eigen::Index t = 0; t < l; ++t) {
            if (sign(t) > 0) {
                if (!at_upper(t) && -grad(t) >= gmax) {
                    gmax = -grad(t);
                    i = t;
                }
            } else if (!at_lower(t) && grad(t) >= gmax) {
                gmax = grad(t);
                i = t;
            }
        }
        double gmax2 = -std::numeric_limits<double>::infinity();
        Eigen::Index j = -1;
        double obj_min = std::numeric_limits<double>::infinity();
        for (Eigen::Index t = 0; t < l; ++t) {
            if (sign(t) > 0) {
                if (!at_lower(t)) {
                    const double gd = gmax + grad(t);
                    gmax2 = std::max(gmax2, grad(t));
                    if (i >= 0 && gd > 0.0) {
                        double quad = q(i, i) + q(t, t) - 2.0 * sign(i) * q(i, t);
                        const double obj = -(gd * gd) / (quad > 0.0 ? quad : tau);
                        if (obj <= obj_min) {
                            j = t;
                            obj_min = obj;
                        }
                    }
                }
            } else if (!at_upper(t)) {
                const double gd = gmax - grad(t);
                gmax2 = std::max(gmax2, -grad(t));
                if (i >= 0 && gd > 0.0) {
                    double quad = q(i, i) + q(t, t) + 2.0 * sign(i) * q(i, t);
                    const double obj = -(gd * gd) / (quad > 0.0 ? quad : tau);
                    if (obj <= obj_min) {
                        j = t;
                        obj_min = obj;
                    }
                }
            }
        }
        violation = gmax + gmax2;
        if (i < 0 || j < 0 || violation < p.tolerance)
            break;
        if (iter >= cap)
            throw FitError("svr_fit: no convergence after " + std::to_string(cap) + " iterations (KKT violation "
                + std::to_string(violation) + ")");

        const double old_i = beta(i), old_j = beta(j);
        const double qij = q(i, j);
        if (sign(i) != sign(j)) {
            double quad = q(i, i) + q(j, j) + 2.0 * qij;
            if (quad <= 0.0)
                quad = tau;
            const double delta = (-grad(i) - grad(j)) / quad;
            const double diff = beta(i) - beta(j);
            beta(i) += delta;
            beta(j) += delta;
            if (diff > 0.0) {
                if (beta(j) < 0.0) {
                    beta(j) = 0.0;
                    beta(i) = diff;
                }
            } else if (beta(i) < 0.0) {
                beta(i) = 0.0;
                beta(j) = -diff;
            }
            if (diff > 0.0) {
                if (beta(i) > c) {
                    beta(i) = c;
                    beta(j) = c - diff;
                }
            } else if (beta(j) > c) {
                beta(j) = c;
                beta(i) = c + diff;
            }
        } else {
            double quad = q(i, i) + q(j, j) - 2.0 * qij;
            if (quad <= 0.0)
                quad = tau;
            const double delta = (grad(i) - grad(j)) / quad;
            const double sum = beta(i) + beta(j);
            beta(i) -= delta;
            beta(j) += delta;
            if (sum > c) {
                if (beta(i) > c) {
                    beta(i) = c;
                    beta(j) = sum - c;
                }
            } else if (beta(j) < 0.0) {
                beta(j) = 0.0;
                beta(i) = sum;
            }
            if (sum > c) {
                if (beta(j) > c) {
                    beta(j) = c;
                    beta(i) = sum - c;
                }
            } else if (beta(i) < 0.0) {
                beta(i) = 0.0;
                beta(j) = sum;
            }
        }
        const double di = beta(i) - old_i, dj = beta(j) - old_j;
        const Eigen::Index bi = base(i), bj = base(j);
        const double si = sign(i), sj = sign(j);
        for (Eigen::Index t = 0; t < l; ++t) {
            const double st = sign(t);
            const Eigen::Index bt = base(t);
            grad(t) += st * (si * k(bi, bt) * di + sj * k(bj, bt) * dj);
        }
    }

    // Offset from free variables, or the midpoint of the feasible interval.
    double ub = std::numeric_limits<double>::infinity(), lb = -std::numeric_limits<double>::infinity();
    double sum_free = 0.0;
    int n_free = 0;
    for (Eigen::Index t = 0; t < l; ++t) {
        const double yg = sign(t) * grad(t);
        if (at_upper(t)) {
            if (sign(t) < 0) ub = std::min(ub, yg);
            else lb = std::max(lb, yg);
        } else if (at_lower(t)) {
            if (sign(t) > 0) ub = std::min(ub, yg);
            else lb = std::max(lb, yg);
        } else {
            ++n_free;
            sum_free += yg;
        }
    }
    m.rho_ = n_free > 0 ? sum_free / n_free : 0.5 * (ub + lb);
    m.alpha_ = beta.head(n);
    m.alpha_star_ = beta.tail(n);
    m.coef_ = m.alpha_ - m.alpha_star_;
    m.iterations_ = iter;
    m.violation_ = violation;
    return m;
}

} // namespace epm::svr

#endif // EPM_SURROGATES_SVR_HPP
