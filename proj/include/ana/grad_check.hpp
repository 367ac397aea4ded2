#pragma once

#include <functional>
#include <span>
#include <vector>

#include "ana/tape.hpp"

namespace ana {

// Compares reverse-mode gradients against central finite differences.
//
// The builder receives a fresh tape plus one scalar leaf per point component
// and must return a scalar root.  The same builder is re-run at perturbed
// points for the finite-difference side, so it must be deterministic.

struct GradCheckReport {
    bool pass = true;
    double max_err = 0.0;      // worst |ad - fd| / (1 + |fd|)
    int worst_index = -1;
    std::vector<double> analytic;
    std::vector<double> numeric;
};

using GradCheckBuilder = std::function<Var(Tape&, std::span<const Var>)>;

GradCheckReport grad_check(const GradCheckBuilder& f, std::span<const double> point,
                           double step = 1e-6, double tol = 1e-5);

}  // namespace ana
