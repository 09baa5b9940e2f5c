#ifndef FINEVAL_METRICS_HPP
#define FINEVAL_METRICS_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "fineval/attributes.hpp"
#include "fineval/types.hpp"

namespace fineval::metrics {

enum class Metric { Accuracy, SpanF1, MeanScore };

Metric metric_for(TaskKind task);
std::string_view metric_name(Metric metric);

// Additive sufficient statistics for every supported metric. Only the fields
// of the metric in use are populated; merging is plain field-wise addition.
struct MetricTally {
  std::int64_t correct = 0;
  std::int64_t total = 0;
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
  double sum = 0.0;
  std::int64_t count = 0;

  MetricTally& operator+=(const MetricTally& other) {
    correct += other.correct;
    total += other.total;
    tp += other.tp;
    fp += other.fp;
    fn += other.fn;
    sum += other.sum;
    count += other.count;
    return *this;
  }
  friend MetricTally operator+(MetricTally a, const MetricTally& b) { return a += b; }
  friend bool operator==(const MetricTally&, const MetricTally&) = default;
};

struct PrfScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Zero denominators give 0 rather than NaN.
PrfScores prf(const MetricTally& tally);

// Metric value of a tally; nullopt when the tally holds no evidence.
std::optional<double> value(Metric metric, const MetricTally& tally);

struct SpanMatch {
  MetricTally tally;
  PrfScores scores;
  std::vector<bool> gold_matched;
  std::vector<bool> pred_matched;
};

// Exact (start, end, label) matching between two span lists of one sentence.
SpanMatch span_f1(std::span<const Span> gold, std::span<const Span> pred);

// Per-unit outcome of one system on one dataset. `gold` parallels
// gold_units(dataset); `spurious` holds predicted spans matching no gold span.
struct SystemScoring {
  Metric metric = Metric::Accuracy;
  std::vector<EvaluationUnit> gold;
  std::vector<bool> gold_correct;
  std::vector<EvaluationUnit> spurious;
  std::vector<double> scores;            // ScoredGeneration, per sample
  std::vector<MetricTally> per_sample;   // whole-sample contributions

  MetricTally overall() const;
};

SystemScoring score_system(const SystemOutput& system, const Dataset& dataset);

// Tally contributed by one gold unit (index into scoring.gold) or one spurious span.
MetricTally gold_unit_tally(const SystemScoring& scoring, std::size_t index);
MetricTally spurious_unit_tally();

struct BucketTally {
  BucketKey key;
  std::size_t n = 0;  // gold units in the bucket
  MetricTally tally;
};

struct BucketValue {
  BucketKey key;
  std::size_t n = 0;
  std::optional<double> value;  // null for empty buckets
  MetricTally tally;
};

struct BucketedMetric {
  std::vector<BucketValue> buckets;
  MetricTally overall_tally;
  std::optional<double> overall;
};

// Per-bucket values from each bucket's own tally, overall from their sum.
BucketedMetric bucket_metric(Metric metric, std::span<const BucketTally> buckets);

}  // namespace fineval::metrics

#endif  // FINEVAL_METRICS_HPP
