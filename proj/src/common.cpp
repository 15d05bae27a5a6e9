#include <algorithm>

#include "cmr/error.hpp"
#include "cmr/numeric.hpp"

namespace cmr {

const char* error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kFormat: return "format";
    case ErrorCode::kSize: return "size";
    case ErrorCode::kArgument: return "argument";
    case ErrorCode::kLocate: return "locate";
    case ErrorCode::kUndefinedDistance: return "undefined-distance";
    case ErrorCode::kTraining: return "training";
    case ErrorCode::kSelection: return "selection";
    case ErrorCode::kStratification: return "stratification";
    case ErrorCode::kBuild: return "build";
    case ErrorCode::kTrace: return "trace";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kModel: return "model";
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kPipeline: return "pipeline";
  }
  return "unknown";
}

double compensated_sum(std::span<const double> xs) noexcept {
  CompensatedSum s;
  for (double x : xs) s.add(x);
  return s.value();
}

std::optional<double> mean_of(std::span<const double> xs) noexcept {
  if (xs.empty()) return std::nullopt;
  return compensated_sum(xs) / static_cast<double>(xs.size());
}

std::optional<double> population_stdev(std::span<const double> xs) noexcept {
  const auto m = mean_of(xs);
  if (!m) return std::nullopt;
  CompensatedSum ss;
  for (double x : xs) ss.add((x - *m) * (x - *m));
  return std::sqrt(ss.value() / static_cast<double>(xs.size()));
}

double median_of(std::vector<double> xs) {
  if (xs.empty()) fail(ErrorCode::kArgument, "median of empty sequence");
  std::sort(xs.begin(), xs.end());
  const std::size_t n = xs.size();
  return n % 2 == 1 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

}  // namespace cmr
