#pragma once

#include <random>
#include <span>
#include <vector>

#include "ana/histogram.hpp"
#include "ana/models.hpp"

namespace ana {

// Closed-form estimators and reference quantities for the mean-reverting
// rate model.  These are the yardsticks the adversarial estimates are
// compared against.

// Consecutive-pair sample (x_i, y_i) extracted from a path or resampled.
struct PairSample {
    std::vector<double> x, y;
    std::size_t size() const { return x.size(); }
};

PairSample pairs_from_path(std::span<const double> path);

// Maximum-likelihood estimate of the reversion level tau from transition
// pairs, with kappa known:
//   tau^ = (mean(y/x) + kappa dt - 1) / (mean(1/x) kappa dt)
double tau_mle(const PairSample& s, double kappa, double dt);

// Maximum-likelihood estimate of the reversion speed kappa with tau known:
//   kappa^ = (1/dt) (tau mean(y/x) - mean(y) - tau + mean(x))
//                 / (tau^2 mean(1/x) - 2 tau + mean(x))
// Throws DegenerateEstimatorError when the denominator is numerically zero;
// sets *conditioning_warning when it is merely tiny relative to tau^2.
double kappa_mle(const PairSample& s, double tau, double dt,
                 bool* conditioning_warning = nullptr);

// Per-sample Fisher information of the transition likelihood, evaluated at
// given empirical moments X_{-1} = mean(1/x) and X_0 = mean(x):
//   I(tau)   = kappa^2 dt X_{-1} / sigma^2
//   I(kappa) = (dt / sigma^2) (tau^2 X_{-1} - 2 tau + X_0)
// I(kappa) vanishes exactly at the stationary moments X_{-1} = 1/tau,
// X_0 = tau, which is why kappa needs the resampled design below.
double fisher_tau(double kappa, double sigma, double dt, double x_minus1);
double fisher_kappa(double tau, double sigma, double dt, double x_minus1, double x_0);

// Large-n standard deviation of tau^ per Fisher information:
// sd = sigma sqrt(tau) / (kappa sqrt(dt n)) at stationarity.
double tau_mle_asymptotic_sd(double kappa, double sigma, double dt, std::size_t n,
                             double tau);

// Stationary density of the process: Gamma with rate w = 2 kappa / sigma^2
// and shape nu = 2 kappa tau / sigma^2.  feller_warning (when given) is set
// if 2 kappa tau <= sigma^2, where zero becomes attainable.
double stationary_density(double r, double kappa, double tau, double sigma,
                          bool* feller_warning = nullptr);

// log Gamma(x) for x > 0 via the Lanczos series (relative error < 1e-10 on
// the function value).
double log_gamma(double x);

// Discrete Kullback-Leibler divergence  sum_i p_i log(p_i / q_i)  between two
// histograms on shared edges; q is floored at 1e-12 and zero-p bins are
// skipped.
double discrete_kl(const Histogram& p, const Histogram& q);
double discrete_kl(std::span<const double> p, std::span<const double> q);

// Breaks the kappa degeneracy: draws count states x ~ U(lo, hi) and advances
// each one transition, producing an identifiable pair sample.
PairSample resample_uniform(double lo, double hi, std::size_t count, const CirParams& p,
                            CirScheme scheme, std::mt19937_64& rng);

}  // namespace ana
