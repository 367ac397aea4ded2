#pragma once

#include <deque>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace ana {

enum class OptKind { Gd, Adam, RmsProp, Lbfgs };

const char* opt_name(OptKind kind);
OptKind opt_from_name(const std::string& name);

struct OptimizerSpec {
    OptKind kind = OptKind::Adam;
    double lr = 1e-3;
    // Adam
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    // RMSProp (shares eps)
    double rho = 0.9;
    // LBFGS
    int memory = 10;
    double armijo_c = 1e-4;
    double backtrack_factor = 0.5;
    int max_backtracks = 40;
    double init_step = 1.0;
    // Cap on the first trial displacement of each line search; 0 turns it
    // off.  Near-flat objectives (an adversarial loss under an untrained
    // discriminator) otherwise let backtracking accept arbitrarily long
    // steps along a badly scaled direction.
    double max_step = 0.0;
};

// Stateful parameter updater.  gd/adam/rmsprop take precomputed gradients;
// lbfgs needs objective access for its line search, so it runs through
// step_with_objective (one quasi-Newton iteration per call; the (s, y)
// history persists across calls).
class Optimizer {
public:
    // Evaluates the objective at x; when grad_out is non-empty it must be
    // filled with the gradient.  An empty grad_out asks for the value only.
    using Objective =
        std::function<double(std::span<const double> x, std::span<double> grad_out)>;

    explicit Optimizer(OptimizerSpec spec) : spec_(spec) {}

    const OptimizerSpec& spec() const { return spec_; }

    void step(std::span<double> params, std::span<const double> grad);

    // Returns the objective value at the incoming parameter vector.
    double step_with_objective(std::span<double> params, const Objective& f);

    long linesearch_fallbacks() const { return fallbacks_; }

    void save(std::ostream& os) const;
    void load(std::istream& is);
    void reset();

private:
    OptimizerSpec spec_;
    long t_ = 0;                  // adam step counter
    std::vector<double> m_, v_;   // adam moments / rmsprop average
    struct Pair {
        std::vector<double> s, y;
        double rho;
    };
    std::deque<Pair> history_;
    long fallbacks_ = 0;

    void first_order_step(std::span<double> params, std::span<const double> grad);
    double lbfgs_step(std::span<double> params, const Objective& f);
    std::vector<double> two_loop_direction(std::span<const double> grad) const;
};

struct LbfgsResult {
    std::vector<double> x;
    double f = 0.0;
    int iterations = 0;
    long fallbacks = 0;
    bool converged = false;
};

// Full minimization loop on a deterministic objective: repeats LBFGS
// iterations until the gradient norm drops below grad_tol or max_iter is hit.
LbfgsResult lbfgs_minimize(const Optimizer::Objective& f, std::span<const double> x0,
                           int memory = 10, int max_iter = 100, double grad_tol = 1e-8);

}  // namespace ana
