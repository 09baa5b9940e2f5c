#include "fineval/reliability.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <thread>

#include "fineval/error.hpp"

namespace fineval::reliability {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Unbiased enough for n far below 2^64: multiply-shift reduction.
std::size_t draw_index(std::mt19937_64& rng, std::size_t n) {
  return static_cast<std::size_t>((static_cast<unsigned __int128>(rng()) * n) >> 64);
}

// Runs fn(r) for r in [0, count), possibly on several threads.
template <typename Fn>
void for_each_replicate(std::size_t count, std::size_t work_per_replicate, Fn fn) {
  const std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t threads =
      (count * work_per_replicate < 200000) ? 1 : std::min<std::size_t>(hw, count);
  if (threads <= 1) {
    for (std::size_t r = 0; r < count; ++r) fn(r);
    return;
  }
  std::vector<std::jthread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      for (std::size_t r = t; r < count; r += threads) fn(r);
    });
  }
}

std::pair<double, double> tail_quantiles(double confidence_level) {
  const double alpha = 1.0 - confidence_level;
  return {alpha / 2.0, 1.0 - alpha / 2.0};
}

}  // namespace

void BootstrapConfig::validate() const {
  if (replicates < 1) throw Error("InvalidBootstrapConfig", "replicates must be >= 1");
  if (!(confidence_level > 0.0 && confidence_level < 1.0)) {
    throw Error("InvalidBootstrapConfig", "confidence level must lie in (0,1)");
  }
}

double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw Error("NoData", "quantile of empty sequence");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = h - static_cast<double>(lo);
  if (frac == 0.0 || sorted[lo] == sorted[lo + 1]) return sorted[lo];
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

std::optional<ConfidenceInterval> bootstrap_ci(std::span<const metrics::MetricTally> per_sample,
                                               metrics::Metric metric,
                                               const BootstrapConfig& config) {
  config.validate();
  if (per_sample.empty()) throw Error("NoData", "no samples to resample");
  const std::size_t n = per_sample.size();
  // Hashing the seed first keeps seed s+1 from replaying seed s shifted by one.
  const std::uint64_t stream = splitmix64(config.seed);
  std::vector<std::optional<double>> replicate_values(config.replicates);
  for_each_replicate(config.replicates, n, [&](std::size_t r) {
    std::mt19937_64 rng(splitmix64(stream + r));
    metrics::MetricTally merged;
    for (std::size_t i = 0; i < n; ++i) merged += per_sample[draw_index(rng, n)];
    replicate_values[r] = metrics::value(metric, merged);
  });

  std::vector<double> values;
  values.reserve(replicate_values.size());
  for (const auto& v : replicate_values) {
    if (v) values.push_back(*v);
  }
  if (values.empty()) return std::nullopt;
  std::sort(values.begin(), values.end());
  const auto [lo_q, hi_q] = tail_quantiles(config.confidence_level);
  return ConfidenceInterval{quantile_sorted(values, lo_q), quantile_sorted(values, hi_q)};
}

ConfidenceInterval bootstrap_ci(const std::vector<bool>& outcomes, const BootstrapConfig& config) {
  std::vector<metrics::MetricTally> tallies(outcomes.size());
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    tallies[i].total = 1;
    tallies[i].correct = outcomes[i] ? 1 : 0;
  }
  return *bootstrap_ci(tallies, metrics::Metric::Accuracy, config);
}

std::size_t calibration_bin_index(double confidence, std::size_t bin_count) {
  const double k = static_cast<double>(bin_count);
  double scaled = std::ceil(confidence * k);
  std::size_t index = scaled <= 1.0 ? 0 : static_cast<std::size_t>(scaled) - 1;
  index = std::min(index, bin_count - 1);
  // Bin i covers (i/k, (i+1)/k]; fix up rounding in confidence * k.
  while (index > 0 && confidence <= static_cast<double>(index) / k) --index;
  while (index + 1 < bin_count && confidence > static_cast<double>(index + 1) / k) ++index;
  return index;
}

CalibrationReport calibration(std::span<const double> confidences, const std::vector<bool>& correct,
                              std::size_t bin_count) {
  if (bin_count < 1) throw Error("InvalidBinCount", "bin count must be >= 1");
  if (confidences.size() != correct.size()) {
    throw Error("InternalError", "confidence/outcome length mismatch");
  }
  CalibrationReport report;
  report.total = confidences.size();
  struct Accumulator {
    std::size_t n = 0;
    std::size_t hits = 0;
    double sum = 0.0;
    double compensation = 0.0;  // Neumaier
  };
  std::vector<Accumulator> acc(bin_count);
  for (std::size_t i = 0; i < confidences.size(); ++i) {
    const double c = confidences[i];
    if (!(c >= 0.0 && c <= 1.0)) throw Error("BadConfidence", "confidence outside [0,1]");
    Accumulator& a = acc[calibration_bin_index(c, bin_count)];
    ++a.n;
    if (correct[i]) ++a.hits;
    const double t = a.sum + c;
    a.compensation += std::abs(a.sum) >= std::abs(c) ? (a.sum - t) + c : (c - t) + a.sum;
    a.sum = t;
  }
  const double k = static_cast<double>(bin_count);
  // (n_b / N) * |acc_b - conf_b| == |hits_b - sum_b| / N; the latter keeps
  // exact inputs exact.
  double gap_sum = 0.0;
  for (std::size_t b = 0; b < bin_count; ++b) {
    CalibrationBin bin;
    bin.lower = static_cast<double>(b) / k;
    bin.upper = static_cast<double>(b + 1) / k;
    bin.n = acc[b].n;
    if (bin.n > 0) {
      const double n = static_cast<double>(bin.n);
      bin.mean_confidence = (acc[b].sum + acc[b].compensation) / n;
      bin.accuracy = static_cast<double>(acc[b].hits) / n;
      gap_sum += std::abs(static_cast<double>(acc[b].hits) - (acc[b].sum + acc[b].compensation));
    }
    report.bins.push_back(bin);
  }
  if (report.total > 0) report.ece = gap_sum / static_cast<double>(report.total);
  return report;
}

CalibrationReport calibration(const SystemOutput& system, const Dataset& dataset,
                              std::size_t bin_count) {
  if (dataset.task != TaskKind::TextClassification || system.task != dataset.task) {
    throw Error("CalibrationUnsupportedTask",
                "calibration is only defined for text classification");
  }
  check_compatible(system, dataset);
  std::vector<double> confidences;
  std::vector<bool> correct;
  for (const Sample& sample : dataset.samples) {
    const auto& prediction = system.predictions[sample.id].classification();
    if (!prediction.confidence) {
      throw Error("MissingConfidences", "prediction " + std::to_string(sample.id) +
                                            " carries no confidence");
    }
    confidences.push_back(*prediction.confidence);
    correct.push_back(prediction.label == sample.classification().gold_label);
  }
  return calibration(confidences, correct, bin_count);
}

}  // namespace fineval::reliability
