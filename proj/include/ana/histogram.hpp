#pragma once

#include <span>
#include <vector>

namespace ana {

// Uniform-bin histogram normalized to unit mass.  Samples outside [lo, hi)
// land in the nearest edge bin so no mass is ever dropped.
struct Histogram {
    double lo = 0.0, hi = 1.0;
    std::vector<double> mass;  // one entry per bin, sums to 1 for nonempty input

    int bins() const { return static_cast<int>(mass.size()); }
    double bin_width() const { return (hi - lo) / bins(); }
    double center(int b) const { return lo + (b + 0.5) * bin_width(); }
};

Histogram make_histogram(std::span<const double> samples, int bins, double lo, double hi);

// Bins over the pooled range of both sample sets, so the two histograms share
// edges and are directly comparable.
std::pair<Histogram, Histogram> make_shared_histograms(std::span<const double> a,
                                                       std::span<const double> b, int bins);

// Two-sample Kolmogorov-Smirnov statistic (sup distance of empirical CDFs).
double two_sample_ks(std::span<const double> a, std::span<const double> b);

}  // namespace ana
