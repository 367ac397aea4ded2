#include "ana/oracle.hpp"

#include <cmath>

#include "ana/errors.hpp"

namespace ana {

PairSample pairs_from_path(std::span<const double> path) {
    if (path.size() < 2) throw ShapeError("pairs_from_path: need at least two values");
    PairSample s;
    s.x.assign(path.begin(), path.end() - 1);
    s.y.assign(path.begin() + 1, path.end());
    return s;
}

namespace {

struct PairMoments {
    double mean_y_over_x = 0.0;
    double mean_inv_x = 0.0;
    double mean_x = 0.0;
    double mean_y = 0.0;
};

PairMoments moments(const PairSample& s) {
    if (s.size() == 0) throw ShapeError("estimator: empty pair sample");
    if (s.y.size() != s.x.size())
        throw ShapeError("estimator: x and y lengths differ");
    PairMoments m;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s.x[i] <= 0.0) throw DomainError("estimator: non-positive state", s.x[i]);
        m.mean_y_over_x += s.y[i] / s.x[i];
        m.mean_inv_x += 1.0 / s.x[i];
        m.mean_x += s.x[i];
        m.mean_y += s.y[i];
    }
    double n = static_cast<double>(s.size());
    m.mean_y_over_x /= n;
    m.mean_inv_x /= n;
    m.mean_x /= n;
    m.mean_y /= n;
    return m;
}

}  // namespace

double tau_mle(const PairSample& s, double kappa, double dt) {
    if (kappa * dt == 0.0) throw ContractError("tau_mle: kappa * dt must be positive");
    PairMoments m = moments(s);
    double den = m.mean_inv_x * kappa * dt;
    if (std::abs(den) < 1e-300)
        throw DegenerateEstimatorError("tau_mle: vanishing denominator");
    return (m.mean_y_over_x + kappa * dt - 1.0) / den;
}

double kappa_mle(const PairSample& s, double tau, double dt, bool* conditioning_warning) {
    PairMoments m = moments(s);
    double den = (tau * m.mean_inv_x) * tau - 2.0 * tau + m.mean_x;
    if (conditioning_warning) *conditioning_warning = std::abs(den) < 1e-4 * tau * tau;
    if (std::abs(den) < 1e-12)
        throw DegenerateEstimatorError(
            "kappa_mle: denominator " + std::to_string(den) +
            " is degenerate (sample moments sit at the stationary point)");
    double num = tau * m.mean_y_over_x - m.mean_y - tau + m.mean_x;
    return num / (dt * den);
}

double fisher_tau(double kappa, double sigma, double dt, double x_minus1) {
    return kappa * kappa * dt * x_minus1 / (sigma * sigma);
}

double fisher_kappa(double tau, double sigma, double dt, double x_minus1, double x_0) {
    // Grouped as (tau X_{-1}) tau so the stationary moments X_{-1} = 1/tau,
    // X_0 = tau cancel exactly in floating point.
    return dt / (sigma * sigma) * ((tau * x_minus1) * tau - 2.0 * tau + x_0);
}

double tau_mle_asymptotic_sd(double kappa, double sigma, double dt, std::size_t n,
                             double tau) {
    return sigma * std::sqrt(tau) / (kappa * std::sqrt(dt * static_cast<double>(n)));
}

double log_gamma(double x) {
    if (!(x > 0.0)) throw DomainError("log_gamma: non-positive argument", x);
    // Lanczos approximation, g = 7, 9 coefficients.
    static const double c[9] = {
        0.99999999999980993,  676.5203681218851,   -1259.1392167224028,
        771.32342877765313,   -176.61502916214059, 12.507343278686905,
        -0.13857109526572012, 9.9843695780195716e-6, 1.5056327351493116e-7};
    if (x < 0.5) {
        // Reflection keeps the series in its accurate range.
        return std::log(M_PI / std::sin(M_PI * x)) - log_gamma(1.0 - x);
    }
    double z = x - 1.0;
    double acc = c[0];
    for (int i = 1; i < 9; ++i) acc += c[i] / (z + i);
    double t = z + 7.5;
    return 0.5 * std::log(2.0 * M_PI) + (z + 0.5) * std::log(t) - t + std::log(acc);
}

double stationary_density(double r, double kappa, double tau, double sigma,
                          bool* feller_warning) {
    if (kappa <= 0.0) throw DomainError("stationary_density: kappa must be positive", kappa);
    if (tau <= 0.0) throw DomainError("stationary_density: tau must be positive", tau);
    if (sigma == 0.0) throw DomainError("stationary_density: sigma must be nonzero", sigma);
    double w = 2.0 * kappa / (sigma * sigma);
    double nu = 2.0 * kappa * tau / (sigma * sigma);
    if (feller_warning) *feller_warning = !(2.0 * kappa * tau > sigma * sigma);
    if (r < 0.0) return 0.0;
    if (r == 0.0) return nu > 1.0 ? 0.0 : (nu == 1.0 ? w : HUGE_VAL);
    return std::exp(nu * std::log(w) - log_gamma(nu) + (nu - 1.0) * std::log(r) - w * r);
}

double discrete_kl(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) throw ContractError("discrete_kl: bin counts differ");
    if (p.empty()) throw ShapeError("discrete_kl: empty histograms");
    double kl = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] <= 0.0) continue;
        double qi = q[i] < 1e-12 ? 1e-12 : q[i];
        kl += p[i] * std::log(p[i] / qi);
    }
    return kl;
}

double discrete_kl(const Histogram& p, const Histogram& q) {
    if (p.lo != q.lo || p.hi != q.hi)
        throw ContractError("discrete_kl: histograms do not share bin edges");
    return discrete_kl(std::span<const double>(p.mass), std::span<const double>(q.mass));
}

PairSample resample_uniform(double lo, double hi, std::size_t count, const CirParams& p,
                            CirScheme scheme, std::mt19937_64& rng) {
    if (!(0.0 < lo && lo < hi)) throw ShapeError("resample_uniform: need 0 < lo < hi");
    std::uniform_real_distribution<double> u(lo, hi);
    std::normal_distribution<double> normal(0.0, 1.0);
    PairSample s;
    s.x.resize(count);
    s.y.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        double x = u(rng);
        double w = normal(rng);
        s.x[i] = x;
        s.y[i] = scheme == CirScheme::EulerMaruyama ? cir_em_step_value(x, w, p)
                                                    : cir_milstein_step_value(x, w, p);
    }
    return s;
}

}  // namespace ana
