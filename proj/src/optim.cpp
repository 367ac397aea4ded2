#include "ana/optim.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>

#include "ana/errors.hpp"

namespace ana {

namespace {

void check_finite(std::span<const double> grad) {
    for (std::size_t i = 0; i < grad.size(); ++i)
        if (!std::isfinite(grad[i]))
            throw TrainingError("non-finite gradient (component " + std::to_string(i) + ")");
}

double dot(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

void write_vec(std::ostream& os, std::span<const double> v) {
    os << v.size();
    char buf[40];
    for (double x : v) {
        std::snprintf(buf, sizeof buf, "%.17g", x);
        os << ' ' << buf;
    }
    os << '\n';
}

std::vector<double> read_vec(std::istream& is) {
    std::size_t n;
    if (!(is >> n)) throw IoError("optimizer state: truncated vector header");
    std::vector<double> v(n);
    for (auto& x : v)
        if (!(is >> x)) throw IoError("optimizer state: truncated vector body");
    return v;
}

}  // namespace

const char* opt_name(OptKind kind) {
    switch (kind) {
        case OptKind::Gd: return "gd";
        case OptKind::Adam: return "adam";
        case OptKind::RmsProp: return "rmsprop";
        case OptKind::Lbfgs: return "lbfgs";
    }
    return "?";
}

OptKind opt_from_name(const std::string& name) {
    if (name == "gd") return OptKind::Gd;
    if (name == "adam") return OptKind::Adam;
    if (name == "rmsprop") return OptKind::RmsProp;
    if (name == "lbfgs") return OptKind::Lbfgs;
    throw IoError("unknown optimizer '" + name + "'");
}

void Optimizer::step(std::span<double> params, std::span<const double> grad) {
    if (spec_.kind == OptKind::Lbfgs)
        throw ContractError("lbfgs needs objective access; use step_with_objective");
    if (params.size() != grad.size())
        throw ShapeError("optimizer step: parameter and gradient sizes differ");
    check_finite(grad);
    first_order_step(params, grad);
}

void Optimizer::first_order_step(std::span<double> params, std::span<const double> grad) {
    switch (spec_.kind) {
        case OptKind::Gd:
            for (std::size_t i = 0; i < params.size(); ++i)
                params[i] -= spec_.lr * grad[i];
            break;
        case OptKind::Adam: {
            if (m_.size() != params.size()) {
                m_.assign(params.size(), 0.0);
                v_.assign(params.size(), 0.0);
                t_ = 0;
            }
            ++t_;
            double bc1 = 1.0 - std::pow(spec_.beta1, static_cast<double>(t_));
            double bc2 = 1.0 - std::pow(spec_.beta2, static_cast<double>(t_));
            for (std::size_t i = 0; i < params.size(); ++i) {
                m_[i] = spec_.beta1 * m_[i] + (1.0 - spec_.beta1) * grad[i];
                v_[i] = spec_.beta2 * v_[i] + (1.0 - spec_.beta2) * grad[i] * grad[i];
                params[i] -= spec_.lr * (m_[i] / bc1) / (std::sqrt(v_[i] / bc2) + spec_.eps);
            }
            break;
        }
        case OptKind::RmsProp: {
            if (v_.size() != params.size()) v_.assign(params.size(), 0.0);
            for (std::size_t i = 0; i < params.size(); ++i) {
                v_[i] = spec_.rho * v_[i] + (1.0 - spec_.rho) * grad[i] * grad[i];
                params[i] -= spec_.lr * grad[i] / (std::sqrt(v_[i]) + spec_.eps);
            }
            break;
        }
        case OptKind::Lbfgs:
            break;
    }
}

double Optimizer::step_with_objective(std::span<double> params, const Objective& f) {
    if (spec_.kind == OptKind::Lbfgs) return lbfgs_step(params, f);
    std::vector<double> grad(params.size());
    double value = f(params, grad);
    check_finite(grad);
    first_order_step(params, grad);
    return value;
}

std::vector<double> Optimizer::two_loop_direction(std::span<const double> grad) const {
    std::vector<double> q(grad.begin(), grad.end());
    std::vector<double> alpha(history_.size());
    for (std::size_t k = history_.size(); k-- > 0;) {
        const Pair& p = history_[k];
        alpha[k] = p.rho * dot(p.s, q);
        for (std::size_t i = 0; i < q.size(); ++i) q[i] -= alpha[k] * p.y[i];
    }
    if (!history_.empty()) {
        const Pair& last = history_.back();
        double gamma = dot(last.s, last.y) / dot(last.y, last.y);
        for (auto& x : q) x *= gamma;
    }
    for (std::size_t k = 0; k < history_.size(); ++k) {
        const Pair& p = history_[k];
        double beta = p.rho * dot(p.y, q);
        for (std::size_t i = 0; i < q.size(); ++i) q[i] += (alpha[k] - beta) * p.s[i];
    }
    for (auto& x : q) x = -x;
    return q;
}

double Optimizer::lbfgs_step(std::span<double> params, const Objective& f) {
    const std::size_t n = params.size();
    std::vector<double> g0(n);
    double f0 = f(params, g0);
    check_finite(g0);
    double gnorm = norm(g0);
    if (gnorm == 0.0) return f0;

    std::vector<double> x0(params.begin(), params.end());
    std::vector<double> d = two_loop_direction(g0);
    double slope = dot(g0, d);
    if (!(slope < 0.0)) {
        // Not a descent direction (stale history); restart from steepest descent.
        history_.clear();
        for (std::size_t i = 0; i < n; ++i) d[i] = -g0[i];
        slope = -gnorm * gnorm;
    }

    // Optional trust region on the first trial: shrink the direction so the
    // unbacktracked step moves at most max_step.  Backtracking alone accepts
    // any decrease, which on a nearly flat objective can mean a huge jump.
    auto cap_trial = [&](std::vector<double>& dir, double& dslope) {
        if (spec_.max_step <= 0.0) return;
        double trial = spec_.init_step * norm(dir);
        if (trial > spec_.max_step) {
            double scale = spec_.max_step / trial;
            for (double& di : dir) di *= scale;
            dslope *= scale;
        }
    };
    cap_trial(d, slope);

    // Armijo backtracking.  Non-finite trial values are treated as rejections.
    auto search = [&](std::span<const double> dir, double dslope,
                      double& alpha_out) -> bool {
        double alpha = spec_.init_step;
        for (int k = 0; k <= spec_.max_backtracks; ++k) {
            for (std::size_t i = 0; i < n; ++i) params[i] = x0[i] + alpha * dir[i];
            double ft = f(params, {});
            if (std::isfinite(ft) && ft <= f0 + spec_.armijo_c * alpha * dslope) {
                alpha_out = alpha;
                return true;
            }
            alpha *= spec_.backtrack_factor;
        }
        return false;
    };

    double alpha = 0.0;
    bool ok = search(d, slope, alpha);
    if (!ok) {
        // Give up on the quasi-Newton direction: drop the history, record the
        // event, and retry along the raw gradient.
        ++fallbacks_;
        history_.clear();
        for (std::size_t i = 0; i < n; ++i) d[i] = -g0[i];
        double retry_slope = -gnorm * gnorm;
        cap_trial(d, retry_slope);
        ok = search(d, retry_slope, alpha);
        if (!ok) {
            // No progress possible within the budget; leave parameters alone.
            for (std::size_t i = 0; i < n; ++i) params[i] = x0[i];
            return f0;
        }
    }

    for (std::size_t i = 0; i < n; ++i) params[i] = x0[i] + alpha * d[i];
    std::vector<double> g1(n);
    f(params, g1);
    check_finite(g1);

    Pair p;
    p.s.resize(n);
    p.y.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        p.s[i] = params[i] - x0[i];
        p.y[i] = g1[i] - g0[i];
    }
    double sy = dot(p.s, p.y);
    // Curvature condition: keep the pair only if s.y is positive (with a
    // relative guard so a rounding-level value cannot blow up rho).  A failed
    // pair means the local model is wrong about this direction; since pure
    // backtracking can never lengthen a step to recover curvature the way a
    // Wolfe search would, the stale history goes too, and the next iteration
    // rebuilds from a steepest-descent probe.  Without this the iterate can
    // crawl along a negative-curvature valley under a frozen model.
    if (sy > 1e-12 * norm(p.s) * norm(p.y)) {
        p.rho = 1.0 / sy;
        history_.push_back(std::move(p));
        while (static_cast<int>(history_.size()) > spec_.memory) history_.pop_front();
    } else {
        history_.clear();
    }
    return f0;
}

void Optimizer::reset() {
    t_ = 0;
    m_.clear();
    v_.clear();
    history_.clear();
}

void Optimizer::save(std::ostream& os) const {
    os << "optimizer " << opt_name(spec_.kind) << ' ' << t_ << ' ' << fallbacks_ << '\n';
    write_vec(os, m_);
    write_vec(os, v_);
    os << history_.size() << '\n';
    char buf[40];
    for (const Pair& p : history_) {
        write_vec(os, p.s);
        write_vec(os, p.y);
        std::snprintf(buf, sizeof buf, "%.17g", p.rho);
        os << buf << '\n';
    }
}

void Optimizer::load(std::istream& is) {
    std::string tag, kind;
    if (!(is >> tag >> kind) || tag != "optimizer")
        throw IoError("optimizer state: bad header");
    if (kind != opt_name(spec_.kind))
        throw IoError("optimizer state: kind '" + kind + "' does not match spec '" +
                      opt_name(spec_.kind) + "'");
    if (!(is >> t_ >> fallbacks_)) throw IoError("optimizer state: bad counters");
    m_ = read_vec(is);
    v_ = read_vec(is);
    std::size_t hn;
    if (!(is >> hn)) throw IoError("optimizer state: bad history size");
    history_.clear();
    for (std::size_t k = 0; k < hn; ++k) {
        Pair p;
        p.s = read_vec(is);
        p.y = read_vec(is);
        if (!(is >> p.rho)) throw IoError("optimizer state: bad rho");
        history_.push_back(std::move(p));
    }
}

LbfgsResult lbfgs_minimize(const Optimizer::Objective& f, std::span<const double> x0,
                           int memory, int max_iter, double grad_tol) {
    OptimizerSpec spec;
    spec.kind = OptKind::Lbfgs;
    spec.memory = memory;
    Optimizer opt(spec);
    LbfgsResult res;
    res.x.assign(x0.begin(), x0.end());
    std::vector<double> grad(x0.size());
    for (int it = 0; it < max_iter; ++it) {
        res.f = f(res.x, grad);
        check_finite(grad);
        if (norm(grad) <= grad_tol) {
            res.converged = true;
            res.iterations = it;
            res.fallbacks = opt.linesearch_fallbacks();
            return res;
        }
        opt.step_with_objective(res.x, f);
        res.iterations = it + 1;
    }
    res.f = f(res.x, grad);
    res.converged = norm(grad) <= grad_tol;
    res.fallbacks = opt.linesearch_fallbacks();
    return res;
}

}  // namespace ana
