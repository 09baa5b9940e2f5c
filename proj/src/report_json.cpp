#include "fineval/report_json.hpp"

#include <algorithm>
#include <cmath>

#include "fineval/error.hpp"

namespace fineval::service {

namespace {

json optional_real(const std::optional<double>& value) {
  return value ? json(*value) : json(nullptr);
}

json real_or_null(double value) { return std::isfinite(value) ? json(value) : json(nullptr); }

std::string_view kind_name(ValueKind kind) {
  return kind == ValueKind::Continuous ? "continuous" : "categorical";
}

json components(metrics::Metric metric, const metrics::MetricTally& tally) {
  switch (metric) {
    case metrics::Metric::Accuracy:
      return {{"correct", tally.correct}, {"total", tally.total}};
    case metrics::Metric::SpanF1:
      return {{"tp", tally.tp}, {"fp", tally.fp}, {"fn", tally.fn}};
    case metrics::Metric::MeanScore:
      return {{"sum", tally.sum}, {"count", tally.count}};
  }
  return json::object();
}

void add_bounds(json& out, const BucketKey& key) {
  if (const auto* interval = std::get_if<Interval>(&key.value)) {
    out["lower"] = real_or_null(interval->lower);
    out["upper"] = real_or_null(interval->upper);
  }
}

json bucket_json(metrics::Metric metric, const analysis::BucketPerformance& bucket) {
  json out{{"bucketId", bucket.id()},
           {"n", bucket.n},
           {"value", optional_real(bucket.value)},
           {"ciLow", optional_real(bucket.ci_low)},
           {"ciHigh", optional_real(bucket.ci_high)},
           {"components", components(metric, bucket.components)}};
  if (!bucket.attribute.empty()) {
    out["key"] = bucket.key.to_string();
    add_bounds(out, bucket.key);
  }
  return out;
}

}  // namespace

json to_json(const analysis::AnalysisReport& report) {
  json per_attribute = json::object();
  json attribute_order = json::array();
  for (const auto& series : report.per_attribute) {
    json buckets = json::array();
    for (const auto& bucket : series.buckets) buckets.push_back(bucket_json(report.metric, bucket));
    per_attribute[series.attribute] = {{"valueKind", kind_name(series.value_kind)},
                                       {"buckets", std::move(buckets)}};
    attribute_order.push_back(series.attribute);
  }
  json members = json::array();
  for (const auto& m : report.members) {
    members.push_back({{"systemId", m.system_id}, {"name", m.name}, {"overall", optional_real(m.overall)}});
  }
  json metadata{{"averaging", "micro"},
                {"resampleUnit", "sample"},
                {"confidenceIntervals", report.confidence_intervals}};
  if (report.confidence_intervals) {
    metadata["ciMethod"] = "percentile";
    metadata["replicates"] = report.bootstrap.replicates;
    metadata["confidenceLevel"] = report.bootstrap.confidence_level;
    metadata["seed"] = report.bootstrap.seed;
  }
  return {{"systemIds", report.system_ids},
          {"datasetId", report.dataset_id},
          {"taskKind", to_string(report.task)},
          {"metricName", metrics::metric_name(report.metric)},
          {"overall", bucket_json(report.metric, report.overall)},
          {"perAttribute", std::move(per_attribute)},
          {"attributeOrder", std::move(attribute_order)},
          {"metadata", std::move(metadata)},
          {"members", std::move(members)},
          {"generatedAt", report.generated_at},
          {"engineVersion", report.engine_version}};
}

json to_json(const analysis::PairReport& report) {
  json per_attribute = json::object();
  json attribute_order = json::array();
  for (const auto& series : report.per_attribute) {
    json buckets = json::array();
    for (const auto& bucket : series.buckets) {
      json b{{"key", bucket.key.to_string()},
             {"bucketId", series.attribute + "|" + bucket.key.to_string()},
             {"n", bucket.n},
             {"valueA", optional_real(bucket.value_a)},
             {"valueB", optional_real(bucket.value_b)},
             {"gap", optional_real(bucket.gap)}};
      add_bounds(b, bucket.key);
      buckets.push_back(std::move(b));
    }
    per_attribute[series.attribute] = {{"valueKind", kind_name(series.value_kind)},
                                       {"buckets", std::move(buckets)}};
    attribute_order.push_back(series.attribute);
  }
  return {{"systemA", report.system_a},
          {"systemB", report.system_b},
          {"datasetId", report.dataset_id},
          {"taskKind", to_string(report.task)},
          {"metricName", metrics::metric_name(report.metric)},
          {"overallA", optional_real(report.overall_a)},
          {"overallB", optional_real(report.overall_b)},
          {"overallGap", optional_real(report.overall_gap)},
          {"perAttribute", std::move(per_attribute)},
          {"attributeOrder", std::move(attribute_order)},
          {"generatedAt", report.generated_at},
          {"engineVersion", report.engine_version}};
}

json to_json(const analysis::BiasProfile& profile) {
  json per_attribute = json::object();
  json attribute_order = json::array();
  for (const auto& series : profile.per_attribute) {
    json per_dataset = json::object();
    for (const auto& [id, summary] : series.per_dataset) {
      json s{{"n", summary.n}};
      if (series.value_kind == ValueKind::Continuous) {
        s["mean"] = optional_real(summary.mean);
      } else {
        s["distribution"] = summary.distribution;
      }
      per_dataset[id] = std::move(s);
    }
    per_attribute[series.attribute] = {{"valueKind", kind_name(series.value_kind)},
                                       {"perDataset", std::move(per_dataset)},
                                       {"order", series.order}};
    attribute_order.push_back(series.attribute);
  }
  return {{"datasetIds", profile.dataset_ids},
          {"taskKind", to_string(profile.task)},
          {"perAttribute", std::move(per_attribute)},
          {"attributeOrder", std::move(attribute_order)},
          {"generatedAt", profile.generated_at},
          {"engineVersion", profile.engine_version}};
}

json to_json(const analysis::ErrorCase& error) {
  json predicted = json::array();
  for (const auto& [system, value] : error.predicted) {
    predicted.push_back({{"systemId", system}, {"value", value}});
  }
  json span = nullptr;
  if (error.span) {
    span = {{"start", error.span->start}, {"end", error.span->end}, {"label", error.span->label}};
  }
  return {{"sampleId", error.sample_id},
          {"span", std::move(span)},
          {"kind", analysis::to_string(error.kind)},
          {"gold", error.gold},
          {"predicted", std::move(predicted)},
          {"context", error.context}};
}

json error_page(const std::vector<analysis::ErrorCase>& cases, std::size_t page,
                std::size_t page_size) {
  if (page < 1) throw Error("InvalidPage", "page numbers start at 1");
  json items = json::array();
  const std::size_t size = page_size == 0 ? cases.size() : page_size;
  if (size > 0) {
    const std::size_t begin = std::min(cases.size(), (page - 1) * size);
    const std::size_t end = std::min(cases.size(), begin + size);
    for (std::size_t i = begin; i < end; ++i) items.push_back(to_json(cases[i]));
  }
  return {{"total", cases.size()}, {"page", page}, {"pageSize", size}, {"items", std::move(items)}};
}

json to_json(const reliability::CalibrationReport& report) {
  json bins = json::array();
  for (const auto& bin : report.bins) {
    bins.push_back({{"lower", bin.lower},
                    {"upper", bin.upper},
                    {"n", bin.n},
                    {"meanConfidence", optional_real(bin.mean_confidence)},
                    {"accuracy", optional_real(bin.accuracy)}});
  }
  return {{"bins", std::move(bins)},
          {"binCount", report.bins.size()},
          {"ece", report.ece},
          {"total", report.total}};
}

json calibration_json(const reliability::CalibrationReport& report, const std::string& system_id,
                      const std::string& dataset_id) {
  json out = to_json(report);
  out["systemId"] = system_id;
  out["datasetId"] = dataset_id;
  out["engineVersion"] = analysis::kEngineVersion;
  return out;
}

json combine_json(const analysis::AnalysisReport& report,
                  const combination::CombinedSystem& combined) {
  json out = to_json(report);
  out["combinedId"] = combined.output.id;
  out["memberIds"] = combined.member_ids;
  out["tieCount"] = combined.tie_count();
  return out;
}

json error_json(const std::string& code, const std::string& message) {
  return {{"error", {{"code", code}, {"message", message}}}};
}

}  // namespace fineval::service
