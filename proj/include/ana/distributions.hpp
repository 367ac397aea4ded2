#pragma once

#include <array>
#include <random>
#include <string>
#include <vector>

namespace ana {

// Scalar target distributions the generator is trained to reproduce.
// Parse specs look like "exponential:1", "f:5,2", "arcsine", "beta:1,3",
// "cauchy:0,0.5", "cosine:0.5,0.5", "normal:0.3,0.1",
// "mixture:w1,m1,s1,w2,m2,s2" (normal components, s = standard deviation).
struct TargetDist {
    enum class Kind {
        Exponential,
        FisherF,
        Arcsine,
        Beta,
        Cauchy,
        RaisedCosine,
        Normal,
        GaussMixture,
    };

    Kind kind = Kind::Normal;
    std::vector<double> params;

    double sample(std::mt19937_64& rng) const;
    std::vector<double> sample_many(std::size_t count, std::mt19937_64& rng) const;

    // True when both mean and variance are finite.
    bool has_moments() const;
    double mean() const;
    double variance() const;

    std::string spec_string() const;
    static TargetDist parse(const std::string& spec);
};

// Two-dimensional targets for joint (mu, sigma) recovery:
// "gauss2d:m1,m2,c11,c12,c22" or "dirichlet:a1,a2,a3" (first two coordinates
// of the simplex draw).
struct TargetDist2 {
    enum class Kind { Gaussian, Dirichlet };

    Kind kind = Kind::Gaussian;
    std::vector<double> params;

    std::array<double, 2> sample(std::mt19937_64& rng) const;
    std::array<double, 2> mean() const;
    std::array<double, 3> covariance() const;  // c11, c12, c22

    std::string spec_string() const;
    static TargetDist2 parse(const std::string& spec);
};

}  // namespace ana
