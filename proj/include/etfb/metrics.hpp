#pragma once

#include <cstddef>
#include <span>

#include "etfb/contact.hpp"

namespace etfb {

/// Per-trial interpenetration summary, meters. std_d is the population standard deviation.
struct TrialMetrics {
    double avg_d = 0.0;
    double std_d = 0.0;
    double max_d = 0.0;
    std::size_t count = 0;
};

/// Welford accumulator updated once per window sample.
class RunningMetrics {
public:
    void add(double d);
    TrialMetrics metrics() const;
    std::size_t count() const { return count_; }

private:
    std::size_t count_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
    double max_ = 0.0;
};

TrialMetrics compute_metrics(std::span<const double> depths);
TrialMetrics compute_metrics(std::span<const InterpenetrationSample> samples);

}  // namespace etfb
