// Closed-form estimators, Fisher information, the stationary density, and
// the discrete divergence. Statistical claims run over many seeds so a wrong
// constant shows up as a systematic, not a fluke.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "ana/errors.hpp"
#include "ana/histogram.hpp"
#include "ana/models.hpp"
#include "ana/oracle.hpp"

using namespace ana;

namespace {

CirParams paper_params() {
    CirParams p;
    p.kappa = 0.5;
    p.tau = 0.06;
    p.sigma = 0.08;
    p.dt = 0.01;
    p.alpha = 0.5;
    return p;
}

PairSample noiseless_pairs(std::span<const double> xs, double kappa, double tau, double dt) {
    PairSample s;
    for (double x : xs) {
        s.x.push_back(x);
        s.y.push_back(x + kappa * (tau - x) * dt);
    }
    return s;
}

// trapezoid quadrature of f over [lo, hi]
template <class F>
double integrate(F f, double lo, double hi, int n) {
    double h = (hi - lo) / n;
    double acc = 0.5 * (f(lo) + f(hi));
    for (int i = 1; i < n; ++i) acc += f(lo + i * h);
    return acc * h;
}

}  // namespace

TEST_CASE("two-pair arithmetic gives four thirds") {
    PairSample s;
    s.x = {1.0, 2.0};
    s.y = {1.0, 2.0};
    CHECK(tau_mle(s, 1.0, 0.1) == doctest::Approx(4.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("noiseless transitions recover both parameters exactly") {
    std::vector<double> xs = {0.02, 0.05, 0.09, 0.031, 0.14, 0.07};
    auto s = noiseless_pairs(xs, 0.5, 0.06, 0.01);
    CHECK(tau_mle(s, 0.5, 0.01) == doctest::Approx(0.06).epsilon(1e-11));
    bool warn = true;
    CHECK(kappa_mle(s, 0.06, 0.01, &warn) == doctest::Approx(0.5).epsilon(1e-9));
    CHECK_FALSE(warn);
}

TEST_CASE("estimator input errors") {
    PairSample s;
    s.x = {0.05};
    s.y = {0.05};
    CHECK_THROWS_AS((void)tau_mle(s, 0.0, 0.01), ContractError);
    CHECK_THROWS_AS((void)tau_mle(s, 0.5, 0.0), ContractError);
    PairSample empty;
    CHECK_THROWS_AS((void)tau_mle(empty, 0.5, 0.01), ShapeError);
    PairSample bad;
    bad.x = {0.05, -0.01};
    bad.y = {0.05, 0.02};
    CHECK_THROWS_AS((void)tau_mle(bad, 0.5, 0.01), DomainError);
}

TEST_CASE("stationary design degenerates the speed estimator") {
    // all states at the long-run level: tau^2 mean(1/x) - 2 tau + mean(x)
    // collapses to zero and no information about kappa remains
    std::vector<double> xs(10, 0.06);
    auto s = noiseless_pairs(xs, 0.5, 0.06, 0.01);
    CHECK_THROWS_AS((void)kappa_mle(s, 0.06, 0.01), DegenerateEstimatorError);
}

TEST_CASE("near-stationary design trips the conditioning warning") {
    // spread 1e-5 around tau gives denominator ~ eps^2 / tau: tiny but nonzero
    std::vector<double> xs = {0.06 - 1e-5, 0.06 + 1e-5};
    auto s = noiseless_pairs(xs, 0.5, 0.06, 0.01);
    bool warn = false;
    (void)kappa_mle(s, 0.06, 0.01, &warn);
    CHECK(warn);
}

TEST_CASE("fisher information formulas") {
    CHECK(fisher_tau(1.0, 1.0, 1.0, 1.0) == 1.0);
    CHECK(fisher_tau(0.5, 0.08, 0.01, 1.0 / 0.06) ==
          doctest::Approx(6.510416666666667).epsilon(1e-14));
    // doubling sigma quarters the information
    double base = fisher_tau(0.5, 0.08, 0.01, 12.0);
    CHECK(fisher_tau(0.5, 0.16, 0.01, 12.0) == doctest::Approx(0.25 * base).epsilon(1e-14));

    CHECK(fisher_kappa(1.0, 1.0, 1.0, 2.0, 1.0) == 1.0);
    // stationary moments cancel to an exact floating-point zero
    CHECK(fisher_kappa(0.06, 0.08, 0.01, 1.0 / 0.06, 0.06) == 0.0);
    CHECK(fisher_kappa(0.37, 0.08, 0.01, 1.0 / 0.37, 0.37) == 0.0);
    // uniform-design moments X_{-1} = ln(30)/0.029, X_0 = 0.0155 restore it
    double xm1 = std::log(30.0) / 0.029;
    CHECK(xm1 == doctest::Approx(117.28266833317777).epsilon(1e-14));
    CHECK(fisher_kappa(0.06, 0.08, 0.01, xm1, 0.0155) ==
          doctest::Approx(0.49643375937412498).epsilon(1e-12));
}

TEST_CASE("asymptotic standard deviation of the level estimate") {
    CHECK(tau_mle_asymptotic_sd(0.5, 0.08, 0.01, 4000, 0.06) ==
          doctest::Approx(0.0061967733539318656).epsilon(1e-14));
}

TEST_CASE("log gamma tracks the standard library") {
    for (double x : {0.07, 0.31, 0.5, 1.0, 2.0, 3.7, 9.375, 55.5, 156.25, 1000.0})
        CHECK(log_gamma(x) == doctest::Approx(std::lgamma(x)).epsilon(1e-10));
    CHECK_THROWS_AS((void)log_gamma(0.0), DomainError);
    CHECK_THROWS_AS((void)log_gamma(-2.5), DomainError);
}

TEST_CASE("stationary density normalizes and matches the known moments") {
    double kappa = 0.5, tau = 0.06, sigma = 0.08;
    bool warn = true;
    auto h = [&](double r) { return stationary_density(r, kappa, tau, sigma, &warn); };
    // mass concentrates well below 0.2 at these parameters
    CHECK(std::abs(integrate(h, 1e-9, 0.4, 400000) - 1.0) < 1e-6);
    CHECK_FALSE(warn);
    // exact inverse moment of a gamma(nu, w) is w/(nu - 1) = 2k/(2kt - s^2);
    // it approaches 1/tau only as the vol-to-reversion ratio vanishes
    auto h_over_r = [&](double r) { return stationary_density(r, kappa, tau, sigma) / r; };
    double inv_moment = 2.0 * kappa / (2.0 * kappa * tau - sigma * sigma);
    CHECK(integrate(h_over_r, 1e-9, 0.4, 400000) ==
          doctest::Approx(inv_moment).epsilon(1e-4));
    auto h_small = [&](double r) { return stationary_density(r, kappa, tau, 0.01) / r; };
    CHECK(integrate(h_small, 1e-9, 0.4, 400000) ==
          doctest::Approx(1.0 / tau).epsilon(5e-3));
    // mode of a gamma(w, nu): (nu - 1)/w with w = 156.25, nu = 9.375
    double mode = (9.375 - 1.0) / 156.25;
    CHECK(h(mode) > h(mode * 0.9));
    CHECK(h(mode) > h(mode * 1.1));
    // Feller violation flags but still evaluates
    bool feller = false;
    double v = stationary_density(0.01, 0.5, 0.001, 0.08, &feller);
    CHECK(feller);
    CHECK(std::isfinite(v));
    CHECK(v >= 0.0);
}

TEST_CASE("discrete divergence basics") {
    std::vector<double> p = {0.25, 0.25, 0.5};
    CHECK(discrete_kl(std::span<const double>(p), std::span<const double>(p)) == 0.0);
    std::vector<double> a = {1.0, 0.0};
    std::vector<double> b = {0.5, 0.5};
    CHECK(discrete_kl(std::span<const double>(a), std::span<const double>(b)) ==
          doctest::Approx(std::log(2.0)).epsilon(1e-14));
    // zero mass in q is floored rather than infinite
    std::vector<double> q0 = {0.0, 1.0};
    double kl = discrete_kl(std::span<const double>(a), std::span<const double>(q0));
    CHECK(std::isfinite(kl));
    CHECK(kl == doctest::Approx(std::log(1.0 / 1e-12)).epsilon(1e-12));
}

TEST_CASE("divergence is nonnegative over random mass pairs") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int rep = 0; rep < 200; ++rep) {
        std::vector<double> p(20), q(20);
        double sp = 0.0, sq = 0.0;
        for (int i = 0; i < 20; ++i) {
            p[i] = u(rng);
            q[i] = u(rng);
            sp += p[i];
            sq += q[i];
        }
        for (int i = 0; i < 20; ++i) {
            p[i] /= sp;
            q[i] /= sq;
        }
        CHECK(discrete_kl(std::span<const double>(p), std::span<const double>(q)) >= 0.0);
    }
}

TEST_CASE("histogram mismatches are contract violations") {
    std::vector<double> samples = {0.1, 0.2, 0.3, 0.4};
    auto h1 = make_histogram(samples, 10, 0.0, 1.0);
    auto h2 = make_histogram(samples, 10, 0.0, 2.0);
    CHECK_THROWS_AS((void)discrete_kl(h1, h2), ContractError);
    std::vector<double> p3 = {0.5, 0.5};
    std::vector<double> q3 = {0.3, 0.3, 0.4};
    CHECK_THROWS_AS(
        (void)discrete_kl(std::span<const double>(p3), std::span<const double>(q3)),
        ContractError);
}

TEST_CASE("uniform resampling produces an identifiable design") {
    CirParams p = paper_params();
    std::mt19937_64 rng(17);
    auto s = resample_uniform(0.001, 0.03, 5000, p, CirScheme::Milstein, rng);
    REQUIRE(s.size() == 5000);
    double xm1 = 0.0, x0 = 0.0;
    for (double x : s.x) {
        CHECK(x >= 0.001);
        CHECK(x <= 0.03);
        xm1 += 1.0 / x;
        x0 += x;
    }
    xm1 /= 5000.0;
    x0 /= 5000.0;
    double den = p.tau * p.tau * xm1 - 2.0 * p.tau + x0;
    // analytic denominator at these moments is about 0.318
    CHECK(den > 0.2);
    CHECK(den < 0.45);

    auto empty = resample_uniform(0.001, 0.03, 0, p, CirScheme::Milstein, rng);
    CHECK(empty.size() == 0);
    CHECK_THROWS_AS((void)resample_uniform(0.03, 0.001, 10, p, CirScheme::Milstein, rng),
                    ShapeError);
}

TEST_CASE("resampled speed estimates concentrate at the truth") {
    CirParams p = paper_params();
    std::mt19937_64 rng(23);
    std::vector<double> ests;
    for (int rep = 0; rep < 20; ++rep) {
        auto s = resample_uniform(0.001, 0.03, 4000, p, CirScheme::EulerMaruyama, rng);
        ests.push_back(kappa_mle(s, p.tau, p.dt));
    }
    double mean = 0.0;
    for (double e : ests) mean += e;
    mean /= static_cast<double>(ests.size());
    // asymptotic sd per replication = sigma / sqrt(dt n den) evaluated at the
    // uniform moments is about 0.066; the mean of 20 tightens that to ~0.015
    CHECK(std::abs(mean - p.kappa) < 0.045);
}

TEST_CASE("path estimates land inside the asymptotic band") {
    CirParams p = paper_params();
    std::mt19937_64 rng(1);
    auto path = simulate_cir_path(p.tau, 4000, p, CirScheme::EulerMaruyama, rng);
    auto s = pairs_from_path(path);
    REQUIRE(s.size() == 4000);
    double est = tau_mle(s, p.kappa, p.dt);
    double band = 3.0 * tau_mle_asymptotic_sd(p.kappa, p.sigma, p.dt, 4000, p.tau);
    CHECK(std::abs(est - p.tau) < band);
}

TEST_CASE("estimator error shrinks like the inverse square root") {
    CirParams p = paper_params();
    std::vector<std::size_t> ns = {500, 2000, 8000, 32000};
    std::vector<double> rms(ns.size(), 0.0);
    for (int seed = 0; seed < 50; ++seed) {
        std::mt19937_64 rng(1000 + seed);
        auto path = simulate_cir_path(p.tau, static_cast<long>(ns.back()), p,
                                      CirScheme::EulerMaruyama, rng);
        for (std::size_t k = 0; k < ns.size(); ++k) {
            PairSample s;
            s.x.assign(path.begin(), path.begin() + ns[k]);
            s.y.assign(path.begin() + 1, path.begin() + ns[k] + 1);
            double err = tau_mle(s, p.kappa, p.dt) - p.tau;
            rms[k] += err * err;
        }
    }
    for (auto& v : rms) v = std::sqrt(v / 50.0);
    // least-squares slope of log rms against log n
    double mx = 0.0, my = 0.0;
    for (std::size_t k = 0; k < ns.size(); ++k) {
        mx += std::log(static_cast<double>(ns[k]));
        my += std::log(rms[k]);
    }
    mx /= 4.0;
    my /= 4.0;
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < ns.size(); ++k) {
        double dx = std::log(static_cast<double>(ns[k])) - mx;
        num += dx * (std::log(rms[k]) - my);
        den += dx * dx;
    }
    double slope = num / den;
    CHECK(slope > -0.65);
    CHECK(slope < -0.35);
}

TEST_CASE("discretization bias grows linearly in the step size") {
    // Exact transitions are approximated by 20 fine Euler substeps per
    // coarse step; estimating with the coarse dt then isolates the O(dt)
    // bias. Common random numbers across the three step sizes cancel the
    // sampling noise, leaving the trend visible at moderate sample sizes.
    CirParams fine = paper_params();
    fine.sigma = 0.01;  // small noise keeps states well inside the domain
    const int substeps = 20;
    const std::size_t count = 500000;
    std::vector<double> dts = {0.04, 0.02, 0.01};
    std::vector<double> biases;
    for (double dt : dts) {
        CirParams sub = fine;
        sub.dt = dt / substeps;
        std::mt19937_64 rng(777);  // same draws for every dt
        std::uniform_real_distribution<double> u(0.2, 1.0);
        std::normal_distribution<double> normal(0.0, 1.0);
        PairSample s;
        s.x.resize(count);
        s.y.resize(count);
        for (std::size_t i = 0; i < count; ++i) {
            double x = u(rng);
            s.x[i] = x;
            double y = x;
            for (int k = 0; k < substeps; ++k) y = cir_em_step_value(y, normal(rng), sub);
            s.y[i] = y;
        }
        biases.push_back(tau_mle(s, fine.kappa, dt) - fine.tau);
    }
    CHECK(biases[0] > 0.0);
    CHECK(biases[1] > 0.0);
    CHECK(biases[2] > 0.0);
    CHECK(biases[0] > biases[1]);
    CHECK(biases[1] > biases[2]);
    // halving dt should roughly halve the bias; allow generous slack
    double ratio = biases[0] / biases[2];
    CHECK(ratio > 2.6);
    CHECK(ratio < 5.6);
}

TEST_CASE("paths shorter than two values cannot form pairs") {
    std::vector<double> one = {0.06};
    CHECK_THROWS_AS((void)pairs_from_path(one), ShapeError);
}
