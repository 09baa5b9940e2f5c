#ifndef FINEVAL_ANALYSIS_HPP
#define FINEVAL_ANALYSIS_HPP

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fineval/attributes.hpp"
#include "fineval/metrics.hpp"
#include "fineval/reliability.hpp"
#include "fineval/types.hpp"

namespace fineval::analysis {

inline constexpr std::string_view kEngineVersion = "0.3.1";

struct BucketPerformance {
  std::string attribute;  // empty for the overall record
  BucketKey key;
  std::size_t n = 0;
  std::optional<double> value;
  std::optional<double> ci_low;
  std::optional<double> ci_high;
  metrics::MetricTally components;

  std::string id() const { return attribute.empty() ? "overall" : attribute + "|" + key.to_string(); }
};

struct AttributeSeries {
  std::string attribute;
  ValueKind value_kind = ValueKind::Continuous;
  std::vector<BucketPerformance> buckets;
};

struct MemberValue {
  std::string system_id;
  std::string name;
  std::optional<double> overall;
};

struct AnalysisReport {
  std::vector<std::string> system_ids;
  std::string dataset_id;
  TaskKind task = TaskKind::TextClassification;
  metrics::Metric metric = metrics::Metric::Accuracy;
  BucketPerformance overall;
  std::vector<AttributeSeries> per_attribute;
  reliability::BootstrapConfig bootstrap;
  bool confidence_intervals = true;
  std::string generated_at;
  std::string engine_version{kEngineVersion};
  std::vector<MemberValue> members;  // populated for combined reports
};

struct AnalysisOptions {
  std::vector<std::string> attributes;  // empty selects every attribute of the task
  reliability::BootstrapConfig bootstrap;
  bool confidence_intervals = true;
  bool strict = false;  // eFreq without training statistics is an error
};

// Attribute buckets of a dataset's gold units. Bucket membership depends on
// gold data only, so every system analyzed against the dataset shares it.
class DatasetIndex {
 public:
  DatasetIndex(const Dataset& dataset, const std::vector<std::string>& attributes,
               bool strict = false);

  struct Entry {
    const AttributeSpec* spec = nullptr;
    BucketingRule rule;
    std::vector<Bucket> buckets;
    std::vector<std::size_t> unit_bucket;  // parallels units()
  };

  const Dataset& dataset() const { return *dataset_; }
  const std::vector<EvaluationUnit>& units() const { return units_; }
  const std::vector<Entry>& entries() const { return entries_; }
  const Entry& entry(std::string_view attribute) const;
  bool strict() const { return strict_; }

 private:
  const Dataset* dataset_;
  bool strict_;
  std::vector<EvaluationUnit> units_;
  std::vector<Entry> entries_;
};

// Per-bucket tallies of one system along one attribute; spurious spans land in
// the bucket of their own attribute value, adding zero-size categorical
// buckets when the value never occurs in gold data.
struct SystemBuckets {
  std::vector<Bucket> buckets;
  std::vector<metrics::MetricTally> tallies;
  // Contributing samples per bucket, ascending sample id, with their tallies.
  std::vector<std::vector<std::pair<std::size_t, metrics::MetricTally>>> per_sample;
  // Index into buckets for each spurious unit of the scoring.
  std::vector<std::size_t> spurious_bucket;
};

SystemBuckets bucket_system(const DatasetIndex& index, const DatasetIndex::Entry& entry,
                            const metrics::SystemScoring& scoring);

// Errors: TaskMismatch, SampleCountMismatch, UnknownAttribute, MissingTrainStats.
AnalysisReport single_analysis(const SystemOutput& system, const Dataset& dataset,
                               const AnalysisOptions& options);
AnalysisReport single_analysis(const SystemOutput& system, const DatasetIndex& index,
                               const AnalysisOptions& options);

struct PairBucket {
  BucketKey key;
  std::size_t n = 0;
  std::optional<double> value_a;
  std::optional<double> value_b;
  std::optional<double> gap;
};

struct PairSeries {
  std::string attribute;
  ValueKind value_kind = ValueKind::Continuous;
  std::vector<PairBucket> buckets;
};

struct PairReport {
  std::string system_a;
  std::string system_b;
  std::string dataset_id;
  TaskKind task = TaskKind::TextClassification;
  metrics::Metric metric = metrics::Metric::Accuracy;
  std::optional<double> overall_a;
  std::optional<double> overall_b;
  std::optional<double> overall_gap;
  std::vector<PairSeries> per_attribute;
  std::string generated_at;
  std::string engine_version{kEngineVersion};
};

// gap = value(A) - value(B) per bucket; null when either side is null.
PairReport pair_analysis(const SystemOutput& a, const SystemOutput& b, const Dataset& dataset,
                         const AnalysisOptions& options);

struct BiasSummary {
  std::size_t n = 0;
  std::optional<double> mean;                     // continuous attributes
  std::map<std::string, std::size_t> distribution;  // categorical attributes
};

struct BiasSeries {
  std::string attribute;
  ValueKind value_kind = ValueKind::Continuous;
  std::map<std::string, BiasSummary> per_dataset;
  std::vector<std::string> order;  // datasets by descending mean (or descending n)
};

struct BiasProfile {
  std::vector<std::string> dataset_ids;
  TaskKind task = TaskKind::TextClassification;
  std::vector<BiasSeries> per_attribute;
  std::string generated_at;
  std::string engine_version{kEngineVersion};
};

// Errors: NoDatasets, TaskMismatch, UnknownAttribute.
BiasProfile bias_analysis(const std::vector<const Dataset*>& datasets,
                          const std::vector<std::string>& attributes, bool strict = false);

enum class ErrorKind { Missed, Spurious, Misclassified };
std::string_view to_string(ErrorKind kind);

struct ErrorCase {
  std::size_t sample_id = 0;
  std::optional<Span> span;
  ErrorKind kind = ErrorKind::Misclassified;
  std::string gold;
  std::vector<std::pair<std::string, std::string>> predicted;  // system id, prediction
  std::string context;
};

struct ErrorSelector {
  enum class Mode { All, Bucket, Common, Unique };
  Mode mode = Mode::All;
  std::string bucket;  // "attribute|key" for Bucket mode

  static ErrorSelector all() { return {Mode::All, {}}; }
  static ErrorSelector in_bucket(std::string id) { return {Mode::Bucket, std::move(id)}; }
  static ErrorSelector common() { return {Mode::Common, {}}; }
  // Units systems[0] gets right and systems[1] gets wrong.
  static ErrorSelector unique() { return {Mode::Unique, {}}; }
};

// Ordered by sample id, then span start. Errors: UnknownBucket, NeedOneSystem,
// NeedTwoSystems, NeedTwoOrMoreSystems, ErrorAnalysisUnsupportedTask.
std::vector<ErrorCase> error_cases(const std::vector<const SystemOutput*>& systems,
                                   const Dataset& dataset, const ErrorSelector& selector,
                                   bool strict = false);

inline constexpr std::size_t kContextCharLimit = 256;

// UTC ISO-8601 timestamp; honours SOURCE_DATE_EPOCH for reproducible output.
std::string current_timestamp();

}  // namespace fineval::analysis

#endif  // FINEVAL_ANALYSIS_HPP
