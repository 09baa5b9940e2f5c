#ifndef FINEVAL_RELIABILITY_HPP
#define FINEVAL_RELIABILITY_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "fineval/metrics.hpp"
#include "fineval/types.hpp"

namespace fineval::reliability {

// Percentile bootstrap over whole samples. Replicate r draws from a generator
// seeded with seed + r, so results do not depend on thread count.
struct BootstrapConfig {
  std::size_t replicates = 1000;
  double confidence_level = 0.95;
  std::uint64_t seed = 0;

  // Throws InvalidBootstrapConfig.
  void validate() const;
};

struct ConfidenceInterval {
  double low = 0.0;
  double high = 0.0;
  friend bool operator==(const ConfidenceInterval&, const ConfidenceInterval&) = default;
};

// Resamples `per_sample` with replacement and recomputes the metric from the
// merged tallies of each replicate. Replicates without evidence are skipped;
// nullopt if none has any. Throws NoData on empty input.
std::optional<ConfidenceInterval> bootstrap_ci(std::span<const metrics::MetricTally> per_sample,
                                               metrics::Metric metric,
                                               const BootstrapConfig& config);

// Accuracy interval over 0/1 outcomes.
ConfidenceInterval bootstrap_ci(const std::vector<bool>& outcomes, const BootstrapConfig& config);

// Linear-interpolation quantile of an ascending sequence, q in [0,1].
double quantile_sorted(std::span<const double> sorted, double q);

struct CalibrationBin {
  double lower = 0.0;  // exclusive, except the first bin which includes 0
  double upper = 0.0;  // inclusive
  std::size_t n = 0;
  std::optional<double> mean_confidence;
  std::optional<double> accuracy;
};

struct CalibrationReport {
  std::vector<CalibrationBin> bins;
  double ece = 0.0;
  std::size_t total = 0;
};

// Equal-width, right-closed bins over [0,1];
// ECE = sum_b (n_b / N) * |accuracy_b - meanConfidence_b|.
CalibrationReport calibration(std::span<const double> confidences, const std::vector<bool>& correct,
                              std::size_t bin_count = 10);

// Errors: CalibrationUnsupportedTask, MissingConfidences, plus check_compatible's.
CalibrationReport calibration(const SystemOutput& system, const Dataset& dataset,
                              std::size_t bin_count = 10);

std::size_t calibration_bin_index(double confidence, std::size_t bin_count);

}  // namespace fineval::reliability

#endif  // FINEVAL_RELIABILITY_HPP
