// Target distributions for the generator to imitate: parsing, analytic
// moments, seeded sampling, and the histogram/KS utilities used to compare
// generated against target samples.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "ana/distributions.hpp"
#include "ana/errors.hpp"
#include "ana/histogram.hpp"

using namespace ana;

namespace {

struct Moments {
    double mean = 0.0, var = 0.0;
};

Moments empirical(std::span<const double> v) {
    Moments m;
    for (double x : v) m.mean += x;
    m.mean /= static_cast<double>(v.size());
    for (double x : v) m.var += (x - m.mean) * (x - m.mean);
    m.var /= static_cast<double>(v.size() - 1);
    return m;
}

}  // namespace

TEST_CASE("spec strings round-trip through the parser") {
    for (const char* spec :
         {"exponential:1", "f:5,2", "arcsine", "beta:1,3", "cauchy:0,0.5",
          "cosine:0.5,0.5", "normal:0.3,0.1", "mixture:0.4,0.3,0.1,0.6,0.8,0.05"}) {
        auto d = TargetDist::parse(spec);
        CHECK(TargetDist::parse(d.spec_string()).spec_string() == d.spec_string());
    }
    for (const char* spec : {"gauss2d:0.3,1,0.1,-0.05,0.1", "dirichlet:1,2,3"}) {
        auto d = TargetDist2::parse(spec);
        CHECK(TargetDist2::parse(d.spec_string()).spec_string() == d.spec_string());
    }
}

TEST_CASE("malformed specs are rejected") {
    CHECK_THROWS_AS((void)TargetDist::parse("triangle:1,2"), IoError);
    CHECK_THROWS_AS((void)TargetDist::parse("beta:1"), IoError);
    CHECK_THROWS_AS((void)TargetDist::parse("normal:0.3,abc"), IoError);
    CHECK_THROWS_AS((void)TargetDist::parse("arcsine:0,1"), IoError);
    CHECK_THROWS_AS((void)TargetDist::parse("mixture:0.4,0.3"), IoError);
    CHECK_THROWS_AS((void)TargetDist2::parse("simplex:1,1"), IoError);
    CHECK_THROWS_AS((void)TargetDist2::parse("gauss2d:0,0,1,2,1"), IoError);
}

TEST_CASE("analytic moments match the textbook values") {
    CHECK(TargetDist::parse("exponential:1").mean() == 1.0);
    CHECK(TargetDist::parse("exponential:1").variance() == 1.0);
    CHECK(TargetDist::parse("beta:1,3").mean() == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(TargetDist::parse("beta:1,3").variance() ==
          doctest::Approx(0.0375).epsilon(1e-14));
    CHECK(TargetDist::parse("arcsine").mean() == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(TargetDist::parse("arcsine").variance() == doctest::Approx(0.125).epsilon(1e-14));
    CHECK(TargetDist::parse("cosine:0.5,0.5").mean() ==
          doctest::Approx(0.5).epsilon(1e-14));
    CHECK(TargetDist::parse("cosine:0.5,0.5").variance() ==
          doctest::Approx(0.032672741512164441).epsilon(1e-14));
    CHECK(TargetDist::parse("normal:0.3,0.1").variance() ==
          doctest::Approx(0.01).epsilon(1e-14));
    auto mix = TargetDist::parse("mixture:0.4,0.3,0.1,0.6,0.8,0.05");
    CHECK(mix.mean() == doctest::Approx(0.6).epsilon(1e-14));
    CHECK(mix.variance() == doctest::Approx(0.0655).epsilon(1e-13));
}

TEST_CASE("heavy tails report missing moments") {
    CHECK_FALSE(TargetDist::parse("cauchy:0,0.5").has_moments());
    CHECK_FALSE(TargetDist::parse("f:5,2").has_moments());
    CHECK(TargetDist::parse("beta:1,3").has_moments());
    CHECK(TargetDist::parse("exponential:1").has_moments());
    CHECK_THROWS_AS((void)TargetDist::parse("cauchy:0,0.5").mean(), DomainError);
    CHECK_THROWS_AS((void)TargetDist::parse("f:5,2").variance(), DomainError);
}

TEST_CASE("sampling is deterministic under a fixed seed") {
    auto d = TargetDist::parse("mixture:0.4,0.3,0.1,0.6,0.8,0.05");
    std::mt19937_64 a(9), b(9);
    CHECK(d.sample_many(100, a) == d.sample_many(100, b));
    auto g = TargetDist2::parse("dirichlet:1,2,3");
    std::mt19937_64 c(9), e(9);
    for (int i = 0; i < 50; ++i) CHECK(g.sample(c) == g.sample(e));
}

TEST_CASE("empirical moments agree with the analytic ones") {
    std::mt19937_64 rng(31);
    for (const char* spec : {"exponential:1", "arcsine", "beta:1,3", "cosine:0.5,0.5",
                             "normal:0.3,0.1", "mixture:0.4,0.3,0.1,0.6,0.8,0.05"}) {
        auto d = TargetDist::parse(spec);
        auto v = d.sample_many(200000, rng);
        auto m = empirical(v);
        double sd = std::sqrt(d.variance());
        CHECK(std::abs(m.mean - d.mean()) < 5.0 * sd / std::sqrt(200000.0));
        CHECK(std::abs(m.var - d.variance()) < 0.03 * d.variance());
    }
}

TEST_CASE("support constraints hold for bounded families") {
    std::mt19937_64 rng(77);
    auto arcsine = TargetDist::parse("arcsine").sample_many(20000, rng);
    for (double x : arcsine) {
        CHECK(x >= 0.0);
        CHECK(x <= 1.0);
    }
    auto beta = TargetDist::parse("beta:1,3").sample_many(20000, rng);
    for (double x : beta) {
        CHECK(x >= 0.0);
        CHECK(x <= 1.0);
    }
    auto expo = TargetDist::parse("exponential:1").sample_many(20000, rng);
    for (double x : expo) CHECK(x >= 0.0);
    auto f = TargetDist::parse("f:5,2").sample_many(20000, rng);
    for (double x : f) CHECK(x >= 0.0);
}

TEST_CASE("two-dimensional gaussian matches its stated moments") {
    auto g = TargetDist2::parse("gauss2d:0.3,1,0.1,-0.05,0.1");
    CHECK(g.mean()[0] == 0.3);
    CHECK(g.mean()[1] == 1.0);
    CHECK(g.covariance()[0] == 0.1);
    CHECK(g.covariance()[1] == -0.05);
    CHECK(g.covariance()[2] == 0.1);
    std::mt19937_64 rng(13);
    const int n = 200000;
    double m1 = 0.0, m2 = 0.0, c11 = 0.0, c12 = 0.0, c22 = 0.0;
    std::vector<std::array<double, 2>> draws(n);
    for (auto& d : draws) {
        d = g.sample(rng);
        m1 += d[0];
        m2 += d[1];
    }
    m1 /= n;
    m2 /= n;
    for (const auto& d : draws) {
        c11 += (d[0] - m1) * (d[0] - m1);
        c12 += (d[0] - m1) * (d[1] - m2);
        c22 += (d[1] - m2) * (d[1] - m2);
    }
    c11 /= n - 1;
    c12 /= n - 1;
    c22 /= n - 1;
    CHECK(std::abs(m1 - 0.3) < 0.005);
    CHECK(std::abs(m2 - 1.0) < 0.005);
    CHECK(std::abs(c11 - 0.1) < 0.003);
    CHECK(std::abs(c12 + 0.05) < 0.003);
    CHECK(std::abs(c22 - 0.1) < 0.003);
}

TEST_CASE("dirichlet moments follow the closed form") {
    auto d = TargetDist2::parse("dirichlet:1,2,3");
    CHECK(d.mean()[0] == doctest::Approx(1.0 / 6.0).epsilon(1e-14));
    CHECK(d.mean()[1] == doctest::Approx(2.0 / 6.0).epsilon(1e-14));
    CHECK(d.covariance()[0] == doctest::Approx(5.0 / 252.0).epsilon(1e-13));
    CHECK(d.covariance()[1] == doctest::Approx(-2.0 / 252.0).epsilon(1e-13));
    CHECK(d.covariance()[2] == doctest::Approx(8.0 / 252.0).epsilon(1e-13));

    auto flat = TargetDist2::parse("dirichlet:1,1,1");
    CHECK(flat.mean()[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
    CHECK(flat.covariance()[0] == doctest::Approx(1.0 / 18.0).epsilon(1e-13));
    CHECK(flat.covariance()[1] == doctest::Approx(-1.0 / 36.0).epsilon(1e-13));

    // draws live on the simplex and track the mean
    std::mt19937_64 rng(29);
    double m1 = 0.0, m2 = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        auto s = d.sample(rng);
        CHECK(s[0] >= 0.0);
        CHECK(s[1] >= 0.0);
        CHECK(s[0] + s[1] <= 1.0 + 1e-12);
        m1 += s[0];
        m2 += s[1];
    }
    CHECK(std::abs(m1 / n - 1.0 / 6.0) < 0.002);
    CHECK(std::abs(m2 / n - 2.0 / 6.0) < 0.002);
}

TEST_CASE("histograms conserve mass and clamp outliers to edge bins") {
    std::vector<double> samples = {0.05, 0.15, 0.15, 0.95, -3.0, 7.0};
    auto h = make_histogram(samples, 10, 0.0, 1.0);
    CHECK(h.bins() == 10);
    double total = std::accumulate(h.mass.begin(), h.mass.end(), 0.0);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    // -3 lands in bin 0 alongside 0.05; 7 joins 0.95 in the last bin
    CHECK(h.mass[0] == doctest::Approx(2.0 / 6.0).epsilon(1e-12));
    CHECK(h.mass[9] == doctest::Approx(2.0 / 6.0).epsilon(1e-12));
    CHECK(h.mass[1] == doctest::Approx(2.0 / 6.0).epsilon(1e-12));
    CHECK(h.center(0) == doctest::Approx(0.05).epsilon(1e-12));
    CHECK_THROWS_AS((void)make_histogram(samples, 0, 0.0, 1.0), ShapeError);
    CHECK_THROWS_AS((void)make_histogram(samples, 10, 1.0, 1.0), ShapeError);
}

TEST_CASE("shared histograms pool the range") {
    std::vector<double> a = {0.0, 0.5, 1.0};
    std::vector<double> b = {2.0, 3.0};
    auto [ha, hb] = make_shared_histograms(a, b, 6);
    CHECK(ha.lo == hb.lo);
    CHECK(ha.hi == hb.hi);
    CHECK(ha.lo == 0.0);
    CHECK(ha.hi == 3.0);
    CHECK(ha.bins() == 6);
    CHECK(std::accumulate(ha.mass.begin(), ha.mass.end(), 0.0) ==
          doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::accumulate(hb.mass.begin(), hb.mass.end(), 0.0) ==
          doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("the two-sample statistic separates what it should") {
    std::mt19937_64 rng(3);
    auto d = TargetDist::parse("normal:0.3,0.1");
    auto a = d.sample_many(10000, rng);
    auto b = d.sample_many(10000, rng);
    CHECK(two_sample_ks(a, b) < 0.03);
    // identical arrays are indistinguishable
    CHECK(two_sample_ks(a, a) == 0.0);
    // a point mass against a spread sample is maximally distinguishable
    std::vector<double> constant(100, 0.3);
    CHECK(two_sample_ks(constant, a) > 0.45);
    auto shifted = TargetDist::parse("normal:0.9,0.1").sample_many(10000, rng);
    CHECK(two_sample_ks(a, shifted) > 0.9);
    CHECK_THROWS_AS((void)two_sample_ks({}, a), ShapeError);
}
