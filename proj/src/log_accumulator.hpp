#pragma once

#include <cmath>

#include "crowdbp/prior.hpp"

namespace crowdbp::detail {

/// Streaming log-sum-exp.
class LogAccumulator {
 public:
  void add(double t) {
    if (t == kLogZero) return;
    if (t <= peak_) {
      sum_ += std::exp(t - peak_);
    } else {
      sum_ = sum_ * std::exp(peak_ - t) + 1.0;
      peak_ = t;
    }
  }
  double value() const { return peak_ == kLogZero ? kLogZero : peak_ + std::log(sum_); }

 private:
  double peak_ = kLogZero;
  double sum_ = 0.0;
};

}  // namespace crowdbp::detail
