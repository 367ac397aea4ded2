#include "ana/histogram.hpp"

#include <algorithm>
#include <cmath>

#include "ana/errors.hpp"

namespace ana {

Histogram make_histogram(std::span<const double> samples, int bins, double lo, double hi) {
    if (bins < 1) throw ShapeError("make_histogram: need at least one bin");
    if (!(lo < hi)) throw ShapeError("make_histogram: empty range");
    Histogram h;
    h.lo = lo;
    h.hi = hi;
    h.mass.assign(static_cast<std::size_t>(bins), 0.0);
    if (samples.empty()) return h;
    const double width = (hi - lo) / bins;
    for (double x : samples) {
        int b = static_cast<int>(std::floor((x - lo) / width));
        b = std::clamp(b, 0, bins - 1);
        h.mass[static_cast<std::size_t>(b)] += 1.0;
    }
    for (auto& m : h.mass) m /= static_cast<double>(samples.size());
    return h;
}

std::pair<Histogram, Histogram> make_shared_histograms(std::span<const double> a,
                                                       std::span<const double> b, int bins) {
    if (a.empty() || b.empty())
        throw ShapeError("make_shared_histograms: empty sample set");
    auto [amin, amax] = std::minmax_element(a.begin(), a.end());
    auto [bmin, bmax] = std::minmax_element(b.begin(), b.end());
    double lo = std::min(*amin, *bmin);
    double hi = std::max(*amax, *bmax);
    if (lo == hi) {  // all samples identical; give the bins some width
        lo -= 0.5;
        hi += 0.5;
    }
    return {make_histogram(a, bins, lo, hi), make_histogram(b, bins, lo, hi)};
}

double two_sample_ks(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw ShapeError("two_sample_ks: empty sample set");
    std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    double d = 0.0;
    std::size_t i = 0, j = 0;
    while (i < sa.size() && j < sb.size()) {
        double x = std::min(sa[i], sb[j]);
        while (i < sa.size() && sa[i] <= x) ++i;
        while (j < sb.size() && sb[j] <= x) ++j;
        double fa = static_cast<double>(i) / sa.size();
        double fb = static_cast<double>(j) / sb.size();
        d = std::max(d, std::abs(fa - fb));
    }
    return d;
}

}  // namespace ana
