// Parameter-update rules: hand-checked single steps, convergence runs,
// the two-loop recursion against a dense BFGS oracle, state round-trips,
// and failure handling.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include "ana/errors.hpp"
#include "ana/optim.hpp"

using namespace ana;

namespace {

OptimizerSpec spec_of(OptKind kind, double lr) {
    OptimizerSpec s;
    s.kind = kind;
    s.lr = lr;
    return s;
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

}  // namespace

TEST_CASE("plain gradient descent step") {
    Optimizer opt(spec_of(OptKind::Gd, 0.1));
    std::vector<double> p = {1.0};
    std::vector<double> g = {2.0};
    opt.step(p, g);
    CHECK(p[0] == 0.8);
}

TEST_CASE("adam ignores zero gradients") {
    Optimizer opt(spec_of(OptKind::Adam, 0.1));
    std::vector<double> p = {1.5, -2.0};
    std::vector<double> g = {0.0, 0.0};
    for (int i = 0; i < 10; ++i) opt.step(p, g);
    CHECK(p[0] == 1.5);
    CHECK(p[1] == -2.0);
}

TEST_CASE("adam first step matches the hand computation") {
    Optimizer opt(spec_of(OptKind::Adam, 0.1));
    std::vector<double> p = {1.0};
    std::vector<double> g = {0.5};
    opt.step(p, g);
    CHECK(p[0] == doctest::Approx(0.90000000199999997).epsilon(1e-15));
}

TEST_CASE("rmsprop first step matches the hand computation") {
    Optimizer opt(spec_of(OptKind::RmsProp, 0.1));
    std::vector<double> p = {1.0};
    std::vector<double> g = {0.5};
    opt.step(p, g);
    CHECK(p[0] == doctest::Approx(0.68377225398316077).epsilon(1e-15));
}

TEST_CASE("adam minimizes the shifted quadratic") {
    Optimizer opt(spec_of(OptKind::Adam, 0.1));
    std::vector<double> p = {0.0};
    for (int i = 0; i < 500; ++i) {
        std::vector<double> g = {2.0 * (p[0] - 3.0)};
        opt.step(p, g);
    }
    CHECK(std::abs(p[0] - 3.0) < 1e-3);
}

TEST_CASE("every first-order rule decreases a convex quadratic") {
    // f(p) = p0^2 + 4 p1^2, small learning rate
    for (OptKind kind : {OptKind::Gd, OptKind::Adam, OptKind::RmsProp}) {
        Optimizer opt(spec_of(kind, 1e-3));
        std::vector<double> p = {1.0, -1.0};
        auto f = [&] { return p[0] * p[0] + 4.0 * p[1] * p[1]; };
        double prev = f();
        for (int i = 0; i < 50; ++i) {
            std::vector<double> g = {2.0 * p[0], 8.0 * p[1]};
            opt.step(p, g);
            double cur = f();
            CHECK(cur < prev);
            prev = cur;
        }
    }
}

namespace {

// value/gradient pairs for the reference objectives
double quad_unit(std::span<const double> x, std::span<double> g) {
    double f = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) f += 0.5 * x[i] * x[i];
    if (!g.empty())
        for (std::size_t i = 0; i < x.size(); ++i) g[i] = x[i];
    return f;
}

double quad_aniso(std::span<const double> x, std::span<double> g) {
    double f = 0.5 * (x[0] * x[0] + 10.0 * x[1] * x[1]);
    if (!g.empty()) {
        g[0] = x[0];
        g[1] = 10.0 * x[1];
    }
    return f;
}

double rosenbrock(std::span<const double> x, std::span<double> g) {
    double a = 1.0 - x[0], b = x[1] - x[0] * x[0];
    if (!g.empty()) {
        g[0] = -2.0 * a - 400.0 * x[0] * b;
        g[1] = 200.0 * b;
    }
    return a * a + 100.0 * b * b;
}

}  // namespace

TEST_CASE("lbfgs solves the unit quadratic immediately") {
    std::vector<double> x0 = {3.0, -1.5, 0.7};
    auto res = lbfgs_minimize(quad_unit, x0);
    CHECK(res.converged);
    CHECK(res.iterations <= 2);
    for (double v : res.x) CHECK(std::abs(v) < 1e-8);
}

TEST_CASE("lbfgs solves the anisotropic quadratic") {
    std::vector<double> x0 = {1.0, 1.0};
    auto res = lbfgs_minimize(quad_aniso, x0, 5, 20);
    CHECK(res.converged);
    CHECK(std::sqrt(res.x[0] * res.x[0] + res.x[1] * res.x[1]) < 1e-8);
}

TEST_CASE("lbfgs crosses the rosenbrock valley") {
    std::vector<double> x0 = {-1.2, 1.0};
    auto res = lbfgs_minimize(rosenbrock, x0, 10, 200, 1e-10);
    CHECK(std::abs(res.x[0] - 1.0) < 1e-6);
    CHECK(std::abs(res.x[1] - 1.0) < 1e-6);
    CHECK(res.iterations <= 200);
}

TEST_CASE("lbfgs reports non-convergence honestly") {
    std::vector<double> x0 = {-1.2, 1.0};
    auto res = lbfgs_minimize(rosenbrock, x0, 10, 3, 1e-12);
    CHECK_FALSE(res.converged);
    CHECK(res.iterations == 3);
}

TEST_CASE("two-loop direction equals the dense bfgs oracle") {
    // Quadratic f = 1/2 x^T A x on dimension 5.  Record every gradient
    // evaluation and the first trial point of each line search; the trial
    // point minus the start is the direction (initial step 1).
    const std::vector<double> diag = {1.0, 3.0, 5.0, 0.5, 2.0};
    struct Eval {
        std::vector<double> x, g;
    };
    std::vector<Eval> grads;          // gradient evaluations in order
    std::vector<std::vector<double>> trials;  // first value-only point per search
    bool last_was_grad = false;
    auto f = [&](std::span<const double> x, std::span<double> g) {
        double v = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) v += 0.5 * diag[i] * x[i] * x[i];
        if (!g.empty()) {
            for (std::size_t i = 0; i < x.size(); ++i) g[i] = diag[i] * x[i];
            grads.push_back({{x.begin(), x.end()}, {g.begin(), g.end()}});
            last_was_grad = true;
        } else {
            if (last_was_grad) trials.push_back({x.begin(), x.end()});
            last_was_grad = false;
        }
        return v;
    };

    OptimizerSpec spec;
    spec.kind = OptKind::Lbfgs;
    spec.memory = 10;
    Optimizer opt(spec);
    std::vector<double> x = {1.0, -2.0, 0.5, 3.0, -1.0};
    const int steps = 6;
    std::vector<std::vector<double>> starts, start_grads;
    for (int it = 0; it < steps; ++it) {
        starts.push_back(x);
        grads.clear();
        trials.clear();
        last_was_grad = false;
        opt.step_with_objective(x, f);
        REQUIRE(!grads.empty());
        start_grads.push_back(grads.front().g);
        REQUIRE(!trials.empty());

        if (it == 0) continue;  // first direction is plain steepest descent
        // rebuild the (s, y) history the optimizer kept: one pair per
        // completed step, from consecutive starts and their gradients
        const std::size_t n = x.size();
        std::vector<std::vector<double>> S, Y;
        for (std::size_t k = 1; k < starts.size(); ++k) {
            std::vector<double> s(n), yv(n);
            for (std::size_t i = 0; i < n; ++i) {
                s[i] = starts[k][i] - starts[k - 1][i];
                yv[i] = start_grads[k][i] - start_grads[k - 1][i];
            }
            S.push_back(s);
            Y.push_back(yv);
        }
        // dense BFGS: H0 = gamma I from the newest pair, then fold pairs in
        double gamma = dot(S.back(), Y.back()) / dot(Y.back(), Y.back());
        std::vector<std::vector<double>> H(n, std::vector<double>(n, 0.0));
        for (std::size_t i = 0; i < n; ++i) H[i][i] = gamma;
        for (std::size_t k = 0; k < S.size(); ++k) {
            double rho = 1.0 / dot(S[k], Y[k]);
            // H <- (I - rho s y^T) H (I - rho y s^T) + rho s s^T
            std::vector<std::vector<double>> M(n, std::vector<double>(n));
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    M[i][j] = (i == j ? 1.0 : 0.0) - rho * S[k][i] * Y[k][j];
            std::vector<std::vector<double>> HM(n, std::vector<double>(n, 0.0));
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t l = 0; l < n; ++l)
                    for (std::size_t j = 0; j < n; ++j) HM[i][j] += M[i][l] * H[l][j];
            std::vector<std::vector<double>> HN(n, std::vector<double>(n, 0.0));
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t l = 0; l < n; ++l)
                    for (std::size_t j = 0; j < n; ++j) HN[i][j] += HM[i][l] * M[j][l];
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    H[i][j] = HN[i][j] + rho * S[k][i] * S[k][j];
        }
        std::vector<double> expected(n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                expected[i] -= H[i][j] * start_grads.back()[j];
        std::vector<double> observed(n);
        for (std::size_t i = 0; i < n; ++i)
            observed[i] = trials.front()[i] - starts.back()[i];
        for (std::size_t i = 0; i < n; ++i)
            CHECK(observed[i] == doctest::Approx(expected[i]).epsilon(1e-9));
    }
}

TEST_CASE("non-finite gradients abort") {
    Optimizer opt(spec_of(OptKind::Adam, 0.1));
    std::vector<double> p = {1.0};
    std::vector<double> bad = {std::numeric_limits<double>::quiet_NaN()};
    CHECK_THROWS_AS(opt.step(p, bad), TrainingError);
    std::vector<double> inf = {std::numeric_limits<double>::infinity()};
    CHECK_THROWS_AS(opt.step(p, inf), TrainingError);

    OptimizerSpec ls;
    ls.kind = OptKind::Lbfgs;
    Optimizer lopt(ls);
    auto f = [](std::span<const double> x, std::span<double> g) {
        if (!g.empty()) g[0] = std::numeric_limits<double>::quiet_NaN();
        return x[0] * x[0];
    };
    CHECK_THROWS_AS((void)lopt.step_with_objective(p, f), TrainingError);
}

TEST_CASE("api misuse is rejected") {
    OptimizerSpec ls;
    ls.kind = OptKind::Lbfgs;
    Optimizer lbfgs(ls);
    std::vector<double> p = {1.0};
    std::vector<double> g = {1.0};
    CHECK_THROWS_AS(lbfgs.step(p, g), ContractError);
    Optimizer gd(spec_of(OptKind::Gd, 0.1));
    std::vector<double> g2 = {1.0, 2.0};
    CHECK_THROWS_AS(gd.step(p, g2), ShapeError);
}

TEST_CASE("a lying gradient lands in the fallback path") {
    // the reported gradient points uphill, so no Armijo trial can succeed
    OptimizerSpec ls;
    ls.kind = OptKind::Lbfgs;
    Optimizer opt(ls);
    std::vector<double> p = {1.0};
    auto f = [](std::span<const double> x, std::span<double> g) {
        if (!g.empty()) g[0] = -10.0;  // true gradient is +2x
        return x[0] * x[0];
    };
    double before = p[0];
    opt.step_with_objective(p, f);
    CHECK(opt.linesearch_fallbacks() == 1);
    CHECK(p[0] == before);  // gave up and restored the point
}

TEST_CASE("max_step caps the first trial displacement") {
    // record where the line search probes first
    auto first_trial_distance = [](double max_step) {
        OptimizerSpec ls;
        ls.kind = OptKind::Lbfgs;
        ls.max_step = max_step;
        Optimizer opt(ls);
        std::vector<double> p = {10.0};
        std::vector<double> trials;
        auto f = [&](std::span<const double> x, std::span<double> g) {
            if (g.empty())
                trials.push_back(x[0]);
            else
                g[0] = x[0];
            return 0.5 * x[0] * x[0];
        };
        opt.step_with_objective(p, f);
        REQUIRE(!trials.empty());
        return std::abs(trials[0] - 10.0);
    };
    CHECK(first_trial_distance(0.0) == 10.0);  // 0 means no cap
    CHECK(first_trial_distance(0.5) == doctest::Approx(0.5).epsilon(1e-12));

    // a capped run still reaches the minimum, one bounded move at a time
    OptimizerSpec ls;
    ls.kind = OptKind::Lbfgs;
    ls.max_step = 0.5;
    Optimizer opt(ls);
    std::vector<double> p = {10.0};
    double prev = p[0];
    for (int i = 0; i < 40; ++i) {
        opt.step_with_objective(p, quad_unit);
        CHECK(std::abs(p[0] - prev) <= 0.5 + 1e-12);
        prev = p[0];
    }
    CHECK(std::abs(p[0]) < 1e-8);
}

TEST_CASE("optimizer names round-trip") {
    for (OptKind k : {OptKind::Gd, OptKind::Adam, OptKind::RmsProp, OptKind::Lbfgs})
        CHECK(opt_from_name(opt_name(k)) == k);
    CHECK_THROWS_AS((void)opt_from_name("newton"), IoError);
}

TEST_CASE("state save and load resume the exact trajectory") {
    auto drive = [](Optimizer& opt, std::vector<double>& p, int steps) {
        for (int i = 0; i < steps; ++i) {
            std::vector<double> g = {2.0 * (p[0] - 3.0), 0.5 * p[1]};
            opt.step(p, g);
        }
    };
    Optimizer full(spec_of(OptKind::Adam, 0.05));
    std::vector<double> pf = {0.0, 1.0};
    drive(full, pf, 40);

    Optimizer first(spec_of(OptKind::Adam, 0.05));
    std::vector<double> ps = {0.0, 1.0};
    drive(first, ps, 25);
    std::ostringstream os;
    first.save(os);
    Optimizer second(spec_of(OptKind::Adam, 0.05));
    std::istringstream is(os.str());
    second.load(is);
    drive(second, ps, 15);
    CHECK(ps[0] == pf[0]);
    CHECK(ps[1] == pf[1]);

    // lbfgs history survives the round-trip too
    OptimizerSpec ls;
    ls.kind = OptKind::Lbfgs;
    Optimizer la(ls);
    std::vector<double> xa = {1.0, -2.0};
    for (int i = 0; i < 3; ++i) la.step_with_objective(xa, quad_aniso);
    std::ostringstream los;
    la.save(los);
    Optimizer lb(ls);
    std::istringstream lis(los.str());
    lb.load(lis);
    std::vector<double> xb = xa;
    la.step_with_objective(xa, quad_aniso);
    lb.step_with_objective(xb, quad_aniso);
    CHECK(xa == xb);

    // kind mismatch is an error
    Optimizer gd(spec_of(OptKind::Gd, 0.1));
    std::istringstream wrong(os.str());
    CHECK_THROWS_AS(gd.load(wrong), IoError);
}

TEST_CASE("reset clears accumulated state") {
    Optimizer a(spec_of(OptKind::Adam, 0.1));
    std::vector<double> p = {1.0};
    std::vector<double> g = {0.5};
    a.step(p, g);
    a.reset();
    std::vector<double> q = {1.0};
    a.step(q, g);
    Optimizer fresh(spec_of(OptKind::Adam, 0.1));
    std::vector<double> r = {1.0};
    fresh.step(r, g);
    CHECK(q[0] == r[0]);
}
