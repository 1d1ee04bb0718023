#include "etfb/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace etfb {

void RunningMetrics::add(double d) {
    ++count_;
    const double delta = d - mean_;
    mean_ += delta / static_cast<double>(count_);
    m2_ += delta * (d - mean_);
    max_ = count_ == 1 ? d : std::max(max_, d);
}

TrialMetrics RunningMetrics::metrics() const {
    if (count_ == 0) return {};
    return {mean_, std::sqrt(std::max(0.0, m2_ / static_cast<double>(count_))), max_, count_};
}

TrialMetrics compute_metrics(std::span<const double> depths) {
    RunningMetrics acc;
    for (double d : depths) acc.add(d);
    return acc.metrics();
}

TrialMetrics compute_metrics(std::span<const InterpenetrationSample> samples) {
    RunningMetrics acc;
    for (const auto& s : samples) acc.add(s.d);
    return acc.metrics();
}

}  // namespace etfb
