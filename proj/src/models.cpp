#include "ana/models.hpp"

#include <cmath>

#include "ana/errors.hpp"

namespace ana {

namespace {

std::vector<double> thomas_impl(std::span<const double> sub, std::span<const double> diag,
                                std::span<const double> super, std::span<const double> rhs) {
    const std::size_t n = diag.size();
    if (n == 0) throw ShapeError("thomas_solve: empty system");
    if (sub.size() != n - 1 || super.size() != n - 1 || rhs.size() != n)
        throw ShapeError("thomas_solve: band sizes do not match");

    // Forward sweep, then back substitution.
    std::vector<double> cp(n - 1), dp(n);
    double piv = diag[0];
    if (std::abs(piv) < 1e-300) throw SingularSystemError("thomas_solve: zero pivot", 0);
    if (n > 1) cp[0] = super[0] / piv;
    dp[0] = rhs[0] / piv;
    for (std::size_t i = 1; i < n; ++i) {
        piv = diag[i] - sub[i - 1] * cp[i - 1];
        if (std::abs(piv) < 1e-300)
            throw SingularSystemError("thomas_solve: zero pivot", static_cast<int>(i));
        if (i < n - 1) cp[i] = super[i] / piv;
        dp[i] = (rhs[i] - sub[i - 1] * dp[i - 1]) / piv;
    }
    std::vector<double> x(n);
    x[n - 1] = dp[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) x[i] = dp[i] - cp[i] * x[i + 1];
    return x;
}

}  // namespace

std::vector<double> thomas_solve(const TridiagonalSystem& sys) {
    return thomas_impl(sys.sub, sys.diag, sys.super, sys.rhs);
}

std::vector<double> thomas_solve_transposed(const TridiagonalSystem& sys) {
    // A^T has the sub and super bands exchanged.
    return thomas_impl(sys.super, sys.diag, sys.sub, sys.rhs);
}

std::vector<double> poisson_coefficients(double mu, double sigma, int n) {
    if (n < 1) throw ShapeError("poisson: need at least one interior node");
    if (std::abs(sigma) < 1e-8) throw DomainError("poisson: sigma too close to zero", sigma);
    const double h = 1.0 / (n + 1);
    std::vector<double> a(static_cast<std::size_t>(n) + 1);
    for (int j = 0; j <= n; ++j) {
        double x = h * (j + 0.5);
        double d = x - mu;
        a[j] = 1.0 - kBumpDepth * std::exp(-d * d / (2.0 * sigma * sigma));
    }
    return a;
}

namespace {

// Assembles and solves one column given its n+1 half-grid coefficients.
std::vector<double> solve_from_coefficients(std::span<const double> a, int n, double h) {
    TridiagonalSystem sys;
    sys.diag.resize(n);
    sys.sub.resize(n - 1);
    sys.super.resize(n - 1);
    sys.rhs.assign(n, h * h);
    for (int k = 0; k < n; ++k) {
        sys.diag[k] = a[k] + a[k + 1];
        if (k < n - 1) {
            sys.super[k] = -a[k + 1];
            sys.sub[k] = -a[k + 1];
        }
    }
    return thomas_solve(sys);
}

}  // namespace

std::vector<double> poisson_solve_values(double mu, double sigma, int n) {
    std::vector<double> a = poisson_coefficients(mu, sigma, n);
    return solve_from_coefficients(a, n, 1.0 / (n + 1));
}

Var poisson_solve(Tape& tape, Var mu, Var sigma, int n) {
    if (n < 1) throw ShapeError("poisson_solve: need at least one interior node");
    if (tape.rows(mu) != 1 || tape.rows(sigma) != 1)
        throw ShapeError("poisson_solve: mu and sigma must be row vectors");
    for (double s : tape.value(sigma))
        if (std::abs(s) < 1e-8) throw DomainError("poisson_solve: sigma too close to zero", s);

    const double h = 1.0 / (n + 1);
    std::vector<double> xh(static_cast<std::size_t>(n) + 1);
    for (int j = 0; j <= n; ++j) xh[j] = h * (j + 0.5);
    Var grid = tape.leaf(n + 1, 1, xh);

    Var d = grid - mu;  // (n+1) x B
    Var a = 1.0 - kBumpDepth * exp(-square(d) / (2.0 * square(sigma)));

    const int B = tape.cols(a);
    auto aval = tape.value(a);
    std::vector<double> u(static_cast<std::size_t>(n) * B);
    std::vector<double> acol(static_cast<std::size_t>(n) + 1);
    for (int b = 0; b < B; ++b) {
        for (int j = 0; j <= n; ++j) acol[j] = aval[static_cast<std::size_t>(j) * B + b];
        std::vector<double> ucol = solve_from_coefficients(acol, n, h);
        for (int i = 0; i < n; ++i) u[static_cast<std::size_t>(i) * B + b] = ucol[i];
    }

    // Adjoint: with A(a) u = h^2 1 and an incoming adjoint ubar, solve
    // A^T lambda = ubar, then abar_j = (lambda_{j+1} - lambda_j)(u_j - u_{j+1})
    // using the convention u_0 = u_{n+1} = lambda_0 = lambda_{n+1} = 0.
    auto hook = [n, B, h](std::span<const double> out_val, std::span<const double> out_adj,
                          std::span<const double> in_val, std::span<double> in_adj) {
        std::vector<double> acol(static_cast<std::size_t>(n) + 1);
        TridiagonalSystem sys;
        sys.diag.resize(n);
        sys.sub.resize(n - 1);
        sys.super.resize(n - 1);
        sys.rhs.resize(n);
        for (int b = 0; b < B; ++b) {
            for (int j = 0; j <= n; ++j)
                acol[j] = in_val[static_cast<std::size_t>(j) * B + b];
            for (int k = 0; k < n; ++k) {
                sys.diag[k] = acol[k] + acol[k + 1];
                if (k < n - 1) {
                    sys.super[k] = -acol[k + 1];
                    sys.sub[k] = -acol[k + 1];
                }
                sys.rhs[k] = out_adj[static_cast<std::size_t>(k) * B + b];
            }
            std::vector<double> lam = thomas_solve_transposed(sys);
            auto uu = [&](int i) -> double {
                return (i >= 1 && i <= n) ? out_val[static_cast<std::size_t>(i - 1) * B + b]
                                          : 0.0;
            };
            auto ll = [&](int i) -> double {
                return (i >= 1 && i <= n) ? lam[static_cast<std::size_t>(i - 1)] : 0.0;
            };
            for (int j = 0; j <= n; ++j)
                in_adj[static_cast<std::size_t>(j) * B + b] +=
                    (ll(j + 1) - ll(j)) * (uu(j) - uu(j + 1));
        }
        (void)h;
    };

    return tape.custom(a, n, B, u, hook);
}

const char* scheme_name(CirScheme s) {
    return s == CirScheme::EulerMaruyama ? "em" : "milstein";
}

CirScheme scheme_from_name(const std::string& name) {
    if (name == "em" || name == "euler-maruyama") return CirScheme::EulerMaruyama;
    if (name == "milstein") return CirScheme::Milstein;
    throw IoError("unknown scheme '" + name + "'");
}

double cir_em_step_value(double x, double w, const CirParams& p) {
    if (x <= 0.0) throw DomainError("cir step: state must be positive", x);
    return x + p.kappa * (p.tau - x) * p.dt + p.sigma * std::sqrt(x * p.dt) * w;
}

double cir_milstein_step_value(double x, double w, const CirParams& p) {
    if (x <= 0.0) throw DomainError("cir step: state must be positive", x);
    double num = x + p.kappa * (p.tau - p.alpha * x) * p.dt +
                 p.sigma * std::sqrt(x) * std::sqrt(p.dt) * w +
                 0.25 * p.sigma * p.sigma * p.dt * (w * w - 1.0);
    return num / (1.0 + (1.0 - p.alpha) * p.kappa * p.dt);
}

Var cir_em_step(Tape& tape, Var x, Var w, Var kappa, Var tau, Var sigma, double dt) {
    (void)tape;
    return x + kappa * (tau - x) * dt + sigma * sqrt(x * dt) * w;
}

Var cir_milstein_step(Tape& tape, Var x, Var w, Var kappa, Var tau, Var sigma,
                      double dt, double alpha) {
    Var num = x + kappa * (tau - alpha * x) * dt +
              sigma * sqrt(x) * std::sqrt(dt) * w +
              0.25 * square(sigma) * dt * (square(w) - 1.0);
    Var den = 1.0 + (1.0 - alpha) * dt * kappa;
    (void)tape;
    return num / den;
}

std::vector<double> simulate_cir_path(double r0, long steps, const CirParams& p,
                                      CirScheme scheme, std::mt19937_64& rng,
                                      long* reflections) {
    if (r0 <= 0.0) throw DomainError("simulate_cir_path: start must be positive", r0);
    if (steps < 0) throw ShapeError("simulate_cir_path: negative step count");
    std::vector<double> path;
    path.reserve(static_cast<std::size_t>(steps) + 1);
    path.push_back(r0);
    std::normal_distribution<double> normal(0.0, 1.0);
    long refl = 0;
    double r = r0;
    for (long k = 0; k < steps; ++k) {
        double w = normal(rng);
        double next = scheme == CirScheme::EulerMaruyama ? cir_em_step_value(r, w, p)
                                                         : cir_milstein_step_value(r, w, p);
        if (next < 0.0) {
            next = -next;
            ++refl;
        }
        r = next;
        path.push_back(r);
    }
    if (reflections) *reflections = refl;
    return path;
}

double gbm_option_payoff_value(double w, const GbmParams& p) {
    double st = p.s0 * std::exp((p.rate - 0.5 * p.sigma * p.sigma) * p.maturity +
                                p.sigma * std::sqrt(p.maturity) * w);
    return std::max(st - p.strike, 0.0);
}

Var gbm_option_payoff(Tape& tape, Var w, Var sigma, const GbmParams& p) {
    Var drift = (p.rate - 0.5 * square(sigma)) * p.maturity;
    Var st = p.s0 * exp(drift + sigma * std::sqrt(p.maturity) * w);
    (void)tape;
    return relu(st - p.strike);
}

}  // namespace ana
