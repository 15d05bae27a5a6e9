#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace cmr {

// Neumaier-compensated accumulator. Reductions over voxels go through this so
// that the result does not depend on summation order beyond rounding noise.
class CompensatedSum {
 public:
  void add(double x) noexcept {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  CompensatedSum& operator+=(double x) noexcept {
    add(x);
    return *this;
  }
  double value() const noexcept { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

double compensated_sum(std::span<const double> xs) noexcept;

// Population mean / standard deviation (divide by N). Empty input yields
// nullopt; a single sample has stdev 0.
std::optional<double> mean_of(std::span<const double> xs) noexcept;
std::optional<double> population_stdev(std::span<const double> xs) noexcept;

double median_of(std::vector<double> xs);

}  // namespace cmr
