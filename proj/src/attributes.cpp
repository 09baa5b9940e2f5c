#include "fineval/attributes.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "fineval/bio.hpp"
#include "fineval/error.hpp"

namespace fineval {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::size_t whitespace_token_count(std::string_view text) {
  std::size_t count = 0;
  bool in_token = false;
  for (char c : text) {
    const bool space = c == ' ' || c == '\t' || c == '\n' || c == '\r';
    if (!space && !in_token) ++count;
    in_token = !space;
  }
  return count;
}

}  // namespace

std::string format_number(double value) {
  if (std::isinf(value)) return value > 0 ? "+inf" : "-inf";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, end);
}

std::string BucketKey::to_string() const {
  if (const auto* interval = std::get_if<Interval>(&value)) {
    std::string out = "(" + format_number(interval->lower) + "," + format_number(interval->upper);
    out += std::isinf(interval->upper) ? ")" : "]";
    return out;
  }
  return std::get<std::string>(value);
}

BucketingRule BucketingRule::categorical() { return BucketingRule{}; }

BucketingRule BucketingRule::continuous(std::vector<double> thresholds) {
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  BucketingRule rule;
  rule.kind_ = ValueKind::Continuous;
  rule.thresholds_ = std::move(thresholds);
  return rule;
}

BucketKey BucketingRule::assign(const AttributeValue& value) const {
  if (kind_ == ValueKind::Categorical) {
    if (const auto* category = std::get_if<std::string>(&value)) return {*category};
    return {format_number(std::get<double>(value))};
  }
  const double x = std::get<double>(value);
  // First threshold >= x closes the interval containing x.
  auto it = std::lower_bound(thresholds_.begin(), thresholds_.end(), x);
  const double upper = it == thresholds_.end() ? kInf : *it;
  const double lower = it == thresholds_.begin() ? -kInf : *std::prev(it);
  return {Interval{lower, upper}};
}

std::vector<BucketKey> BucketingRule::intervals() const {
  std::vector<BucketKey> keys;
  double lower = -kInf;
  for (double t : thresholds_) {
    keys.push_back({Interval{lower, t}});
    lower = t;
  }
  keys.push_back({Interval{lower, kInf}});
  return keys;
}

const std::vector<AttributeSpec>& attributes_for(TaskKind task) {
  static const std::vector<AttributeSpec> kLabeling{
      {"eLen", ValueKind::Continuous, UnitKind::Span, BucketingStrategy::FixedThresholds,
       {1, 2, 3}, "entity length in tokens"},
      {"sLen", ValueKind::Continuous, UnitKind::Span, BucketingStrategy::Quartiles, {},
       "length of the sentence containing the entity"},
      {"eLab", ValueKind::Categorical, UnitKind::Span, BucketingStrategy::Categorical, {},
       "entity label"},
      {"eFreq", ValueKind::Continuous, UnitKind::Span, BucketingStrategy::FixedThresholds,
       {0, 2, 5}, "occurrences of the entity surface as a gold training entity"},
  };
  static const std::vector<AttributeSpec> kClassification{
      {"tLen", ValueKind::Continuous, UnitKind::Sample, BucketingStrategy::Quartiles, {},
       "text length in tokens"},
      {"label", ValueKind::Categorical, UnitKind::Sample, BucketingStrategy::Categorical, {},
       "gold label"},
  };
  static const std::vector<AttributeSpec> kGeneration{
      {"tLen", ValueKind::Continuous, UnitKind::Sample, BucketingStrategy::Quartiles, {},
       "reference length in tokens (0 without a reference)"},
  };
  switch (task) {
    case TaskKind::SequenceLabeling: return kLabeling;
    case TaskKind::TextClassification: return kClassification;
    case TaskKind::ScoredGeneration: return kGeneration;
  }
  return kClassification;
}

const AttributeSpec& find_attribute(TaskKind task, std::string_view name) {
  for (const auto& attribute : attributes_for(task)) {
    if (attribute.name == name) return attribute;
  }
  throw Error("UnknownAttribute", "attribute '" + std::string(name) + "' is not defined for " +
                                      std::string(to_string(task)));
}

std::vector<std::string> default_attributes(TaskKind task) {
  std::vector<std::string> names;
  for (const auto& attribute : attributes_for(task)) names.push_back(attribute.name);
  return names;
}

AttributeValue attribute_value(const AttributeSpec& attribute, const EvaluationUnit& unit,
                               const Dataset& dataset, bool strict) {
  if (unit.sample_id >= dataset.size()) {
    throw Error("UnknownSample", "sample " + std::to_string(unit.sample_id) + " out of range");
  }
  const Sample& sample = dataset.samples[unit.sample_id];
  if (attribute.unit_kind == UnitKind::Span && !unit.span) {
    throw Error("AttributeNotApplicable", attribute.name + " applies to entity spans");
  }

  if (attribute.name == "eLen") return static_cast<double>(unit.span->length());
  if (attribute.name == "sLen") {
    return static_cast<double>(sample.labeling().tokens.size());
  }
  if (attribute.name == "eLab") return unit.span->label;
  if (attribute.name == "eFreq") {
    if (!dataset.train) {
      if (strict) {
        throw Error("MissingTrainStats", "eFreq requires training statistics for dataset '" +
                                             dataset.id + "'");
      }
      return 0.0;
    }
    const auto surface = span_surface(sample.labeling().tokens, *unit.span);
    return static_cast<double>(dataset.train->entity_count(surface));
  }
  if (attribute.name == "tLen") {
    if (dataset.task == TaskKind::TextClassification) {
      return static_cast<double>(whitespace_token_count(sample.classification().text));
    }
    const auto& reference = sample.generation().reference;
    return static_cast<double>(reference ? whitespace_token_count(*reference) : 0);
  }
  if (attribute.name == "label") return sample.classification().gold_label;
  throw Error("UnknownAttribute", "attribute '" + attribute.name + "' has no extractor");
}

std::vector<EvaluationUnit> gold_units(const Dataset& dataset) {
  std::vector<EvaluationUnit> units;
  units.reserve(dataset.size());
  for (const Sample& sample : dataset.samples) {
    if (dataset.task == TaskKind::SequenceLabeling) {
      for (Span& span : extract_spans(sample.labeling().gold_tags)) {
        units.push_back({sample.id, std::move(span)});
      }
    } else {
      units.push_back({sample.id, std::nullopt});
    }
  }
  return units;
}

BucketingRule resolve_rule(const AttributeSpec& attribute,
                           std::span<const AttributeValue> gold_values) {
  switch (attribute.strategy) {
    case BucketingStrategy::Categorical:
      return BucketingRule::categorical();
    case BucketingStrategy::FixedThresholds:
      return BucketingRule::continuous(attribute.thresholds);
    case BucketingStrategy::Quartiles: {
      std::vector<double> values;
      values.reserve(gold_values.size());
      for (const auto& v : gold_values) values.push_back(std::get<double>(v));
      if (values.empty()) return BucketingRule::continuous({});
      std::sort(values.begin(), values.end());
      std::vector<double> thresholds;
      for (double p : {0.25, 0.5, 0.75}) {
        // Nearest rank: the smallest value with at least p of the mass at or below it.
        auto rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(values.size())));
        thresholds.push_back(values[std::max<std::size_t>(rank, 1) - 1]);
      }
      return BucketingRule::continuous(std::move(thresholds));
    }
  }
  return BucketingRule::categorical();
}

void sort_categorical(std::vector<std::pair<std::string, std::size_t>>& keyed_counts) {
  std::sort(keyed_counts.begin(), keyed_counts.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
}

std::vector<Bucket> partition(const std::string& attribute, const BucketingRule& rule,
                              std::span<const EvaluationUnit> units,
                              std::span<const AttributeValue> values) {
  if (units.size() != values.size()) {
    throw Error("InternalError", "unit/value count mismatch in partition");
  }
  std::vector<Bucket> buckets;
  if (rule.kind() == ValueKind::Continuous) {
    for (auto& key : rule.intervals()) buckets.push_back({attribute, std::move(key), {}});
    const auto& thresholds = rule.thresholds();
    for (std::size_t i = 0; i < units.size(); ++i) {
      const double x = std::get<double>(values[i]);
      const auto index = static_cast<std::size_t>(
          std::lower_bound(thresholds.begin(), thresholds.end(), x) - thresholds.begin());
      buckets[index].units.push_back(units[i]);
    }
    return buckets;
  }

  std::map<std::string, std::vector<EvaluationUnit>> by_category;
  for (std::size_t i = 0; i < units.size(); ++i) {
    by_category[rule.assign(values[i]).to_string()].push_back(units[i]);
  }
  std::vector<std::pair<std::string, std::size_t>> order;
  for (const auto& [category, members] : by_category) order.emplace_back(category, members.size());
  sort_categorical(order);
  for (const auto& [category, count] : order) {
    buckets.push_back({attribute, BucketKey{category}, std::move(by_category[category])});
  }
  return buckets;
}

}  // namespace fineval
