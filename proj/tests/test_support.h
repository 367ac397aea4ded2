#pragma once

// Shared helpers for the test binaries: finite-difference gradient checks on
// matrix-valued graph builders, scratch directories, and small file utilities.

#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ana/tape.hpp"

namespace testsup {

// Builds a scalar root from matrix leaves xs (shapes fixed by the caller).
using MatrixBuilder = std::function<ana::Var(ana::Tape&, std::span<const ana::Var> xs)>;

struct MatrixGradReport {
    bool pass = true;
    double max_err = 0.0;  // worst |ad - fd| / (1 + |fd|)
    int worst_input = -1, worst_entry = -1;
};

// Central finite differences against backward() for every entry of every
// input matrix.  inputs[i] holds the entries of a rows[i] x cols[i] leaf.
inline MatrixGradReport check_matrix_grad(const MatrixBuilder& build,
                                          std::vector<std::vector<double>> inputs,
                                          const std::vector<std::pair<int, int>>& shapes,
                                          double step = 1e-6, double tol = 1e-5) {
    auto eval = [&](const std::vector<std::vector<double>>& vals) {
        ana::Tape tape;
        std::vector<ana::Var> xs;
        for (std::size_t i = 0; i < vals.size(); ++i)
            xs.push_back(tape.leaf(shapes[i].first, shapes[i].second, vals[i]));
        return tape.value_scalar(build(tape, xs));
    };

    MatrixGradReport rep;
    std::vector<std::vector<double>> analytic;
    {
        ana::Tape tape;
        std::vector<ana::Var> xs;
        for (std::size_t i = 0; i < inputs.size(); ++i)
            xs.push_back(tape.leaf(shapes[i].first, shapes[i].second, inputs[i]));
        tape.backward(build(tape, xs));
        for (auto x : xs) {
            auto adj = tape.adjoint(x);
            analytic.emplace_back(adj.begin(), adj.end());
        }
    }
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        for (std::size_t k = 0; k < inputs[i].size(); ++k) {
            double saved = inputs[i][k];
            inputs[i][k] = saved + step;
            double fp = eval(inputs);
            inputs[i][k] = saved - step;
            double fm = eval(inputs);
            inputs[i][k] = saved;
            double fd = (fp - fm) / (2.0 * step);
            double err = std::abs(analytic[i][k] - fd) / (1.0 + std::abs(fd));
            if (err > rep.max_err) {
                rep.max_err = err;
                rep.worst_input = static_cast<int>(i);
                rep.worst_entry = static_cast<int>(k);
            }
        }
    }
    rep.pass = rep.max_err <= tol;
    return rep;
}

inline std::vector<double> random_values(std::size_t count, double lo, double hi,
                                         std::mt19937_64& rng) {
    std::uniform_real_distribution<double> d(lo, hi);
    std::vector<double> v(count);
    for (auto& x : v) x = d(rng);
    return v;
}

// Random values in [lo, hi] with |x| kept away from the given points (for
// kinked ops, where finite differences straddle with the wrong slope).
inline std::vector<double> random_values_avoiding(std::size_t count, double lo, double hi,
                                                  const std::vector<double>& avoid,
                                                  double margin, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> d(lo, hi);
    std::vector<double> v(count);
    for (auto& x : v) {
        for (;;) {
            x = d(rng);
            bool ok = true;
            for (double a : avoid)
                if (std::abs(x - a) < margin) ok = false;
            if (ok) break;
        }
    }
    return v;
}

// Fresh empty directory under the system temp path.
inline std::string scratch_dir(const std::string& tag) {
    auto path = std::filesystem::temp_directory_path() /
                ("ana_test_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
    return path.string();
}

inline std::string slurp(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

// File equality ignoring the trailing comma-separated column of each data
// row (the wall-time column of history files).
inline bool equal_without_last_column(const std::string& a, const std::string& b) {
    std::istringstream sa(a), sb(b);
    std::string la, lb;
    for (;;) {
        bool ga = static_cast<bool>(std::getline(sa, la));
        bool gb = static_cast<bool>(std::getline(sb, lb));
        if (ga != gb) return false;
        if (!ga) return true;
        auto ca = la.rfind(','), cb = lb.rfind(',');
        if (ca != std::string::npos) la.erase(ca);
        if (cb != std::string::npos) lb.erase(cb);
        if (la != lb) return false;
    }
}

}  // namespace testsup
