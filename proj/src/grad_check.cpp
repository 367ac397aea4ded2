#include "ana/grad_check.hpp"

#include <cmath>

namespace ana {

namespace {

double eval_at(const GradCheckBuilder& f, std::span<const double> point) {
    Tape tape;
    std::vector<Var> xs;
    xs.reserve(point.size());
    for (double p : point) xs.push_back(tape.leaf(p));
    Var root = f(tape, xs);
    return tape.value_scalar(root);
}

}  // namespace

GradCheckReport grad_check(const GradCheckBuilder& f, std::span<const double> point,
                           double step, double tol) {
    GradCheckReport rep;
    rep.analytic.resize(point.size());
    rep.numeric.resize(point.size());

    {
        Tape tape;
        std::vector<Var> xs;
        xs.reserve(point.size());
        for (double p : point) xs.push_back(tape.leaf(p));
        Var root = f(tape, xs);
        tape.backward(root);
        for (std::size_t i = 0; i < point.size(); ++i)
            rep.analytic[i] = tape.adjoint_scalar(xs[i]);
    }

    std::vector<double> p(point.begin(), point.end());
    for (std::size_t i = 0; i < p.size(); ++i) {
        double saved = p[i];
        p[i] = saved + step;
        double fp = eval_at(f, p);
        p[i] = saved - step;
        double fm = eval_at(f, p);
        p[i] = saved;
        rep.numeric[i] = (fp - fm) / (2.0 * step);

        double err = std::abs(rep.analytic[i] - rep.numeric[i]) /
                     (1.0 + std::abs(rep.numeric[i]));
        if (err > rep.max_err) {
            rep.max_err = err;
            rep.worst_index = static_cast<int>(i);
        }
    }
    rep.pass = rep.max_err <= tol;
    return rep;
}

}  // namespace ana
