#pragma once

#include <random>
#include <span>
#include <vector>

#include "ana/tape.hpp"

namespace ana {

// -- tridiagonal solving -----------------------------------------------------

// A x = rhs with A given by three bands: diag has n entries, sub and super
// have n-1 (sub[i] = A[i+1][i], super[i] = A[i][i+1]).
struct TridiagonalSystem {
    std::vector<double> sub, diag, super, rhs;
};

std::vector<double> thomas_solve(const TridiagonalSystem& sys);
// Solves A^T x = rhs (bands swapped), for adjoint equations.
std::vector<double> thomas_solve_transposed(const TridiagonalSystem& sys);

// -- 1-D diffusion boundary value problem ------------------------------------
//
//   -(a(x) u')' = 1 on (0, 1),  u(0) = u(1) = 0,
//   a(x) = 1 - 0.9 exp(-(x - mu)^2 / (2 sigma^2)),
//
// discretized with central differences on n interior nodes (h = 1/(n+1)):
//   -a_{i-1/2} u_{i-1} + (a_{i-1/2} + a_{i+1/2}) u_i - a_{i+1/2} u_{i+1} = h^2.

inline constexpr double kBumpDepth = 0.9;

// The n+1 half-grid coefficients a(h (j + 1/2)), j = 0..n.
std::vector<double> poisson_coefficients(double mu, double sigma, int n);

// Plain solve: interior solution values u_1..u_n.
std::vector<double> poisson_solve_values(double mu, double sigma, int n);

// Differentiable batched solve.  mu and sigma are 1x1 or 1xB row vectors;
// returns u as an (n x B) node.  The backward rule solves the transposed
// tridiagonal system for each column instead of differentiating the
// elimination, so the adjoint costs one extra solve per column.
Var poisson_solve(Tape& tape, Var mu, Var sigma, int n);

// -- square-root mean-reverting rate process ----------------------------------
//
//   dr = kappa (tau - r) dt + sigma sqrt(r) dW

struct CirParams {
    double kappa = 0.5;
    double tau = 0.06;
    double sigma = 0.08;
    double dt = 0.01;
    double alpha = 0.5;  // implicitness weight of the drift in the Milstein step
};

enum class CirScheme { EulerMaruyama, Milstein };

const char* scheme_name(CirScheme s);
CirScheme scheme_from_name(const std::string& name);

double cir_em_step_value(double x, double w, const CirParams& p);
double cir_milstein_step_value(double x, double w, const CirParams& p);

// One transition on the tape; x and w are 1xB rows, the parameters are 1x1
// or 1xB nodes.  dt and alpha stay plain numbers.
Var cir_em_step(Tape& tape, Var x, Var w, Var kappa, Var tau, Var sigma, double dt);
Var cir_milstein_step(Tape& tape, Var x, Var w, Var kappa, Var tau, Var sigma,
                      double dt, double alpha);

// Simulates steps transitions from r0 (path of steps+1 values).  A step that
// lands at a negative value is reflected to its absolute value; reflections
// counts how often that happened.
std::vector<double> simulate_cir_path(double r0, long steps, const CirParams& p,
                                      CirScheme scheme, std::mt19937_64& rng,
                                      long* reflections = nullptr);

// -- terminal-value option payoff under geometric Brownian motion -------------
//
//   S_T = s exp((r - sigma^2/2) T + sigma sqrt(T) W),  payoff max(S_T - K, 0)

struct GbmParams {
    double s0 = 100.0;
    double strike = 100.0;
    double rate = 0.05;
    double sigma = 0.2;
    double maturity = 1.0;
};

double gbm_option_payoff_value(double w, const GbmParams& p);

// sigma is the differentiable input (1x1 or 1xB); w is a 1xB row of standard
// normal draws.  The payoff kink carries subgradient 0.
Var gbm_option_payoff(Tape& tape, Var w, Var sigma, const GbmParams& p);

}  // namespace ana
