#ifndef FINEVAL_ATTRIBUTES_HPP
#define FINEVAL_ATTRIBUTES_HPP

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "fineval/types.hpp"

namespace fineval {

enum class ValueKind { Continuous, Categorical };
enum class UnitKind { Sample, Span };
enum class BucketingStrategy { FixedThresholds, Quartiles, Categorical };

// An interpretable dimension along which evaluation units are partitioned.
struct AttributeSpec {
  std::string name;
  ValueKind value_kind = ValueKind::Continuous;
  UnitKind unit_kind = UnitKind::Sample;
  BucketingStrategy strategy = BucketingStrategy::Categorical;
  std::vector<double> thresholds;  // FixedThresholds only
  std::string description;
};

using AttributeValue = std::variant<double, std::string>;

// A whole sample, or one entity span inside a labeling sample.
struct EvaluationUnit {
  std::size_t sample_id = 0;
  std::optional<Span> span;

  friend auto operator<=>(const EvaluationUnit&, const EvaluationUnit&) = default;
};

// Half-open interval (lower, upper]; the last interval of a rule is open at +inf.
struct Interval {
  double lower;
  double upper;
  friend bool operator==(const Interval&, const Interval&) = default;
};

struct BucketKey {
  std::variant<Interval, std::string> value;

  bool is_interval() const { return std::holds_alternative<Interval>(value); }
  // "(-inf,1]", "(1,2]", "(3,+inf)" for intervals; the category itself otherwise.
  std::string to_string() const;
  friend bool operator==(const BucketKey&, const BucketKey&) = default;
};

class BucketingRule {
 public:
  static BucketingRule categorical();
  // Thresholds are sorted and deduplicated; k thresholds give k+1 intervals.
  static BucketingRule continuous(std::vector<double> thresholds);

  ValueKind kind() const { return kind_; }
  const std::vector<double>& thresholds() const { return thresholds_; }

  BucketKey assign(const AttributeValue& value) const;
  // Every interval of a continuous rule, lower bound ascending.
  std::vector<BucketKey> intervals() const;

 private:
  ValueKind kind_ = ValueKind::Categorical;
  std::vector<double> thresholds_;
};

struct Bucket {
  std::string attribute;
  BucketKey key;
  std::vector<EvaluationUnit> units;

  std::size_t n() const { return units.size(); }
  // Stable API address, e.g. "eLen|(3,+inf)".
  std::string id() const { return attribute + "|" + key.to_string(); }
};

const std::vector<AttributeSpec>& attributes_for(TaskKind task);
// Throws UnknownAttribute.
const AttributeSpec& find_attribute(TaskKind task, std::string_view name);
std::vector<std::string> default_attributes(TaskKind task);

// Value of an attribute for one unit. eFreq reads dataset.train; without it the
// value is 0 unless `strict`, in which case MissingTrainStats is thrown.
AttributeValue attribute_value(const AttributeSpec& attribute, const EvaluationUnit& unit,
                               const Dataset& dataset, bool strict = false);

// Gold entity spans for sequence labeling, whole samples otherwise.
std::vector<EvaluationUnit> gold_units(const Dataset& dataset);

// Fixed thresholds, nearest-rank quartiles of the gold values, or categorical.
BucketingRule resolve_rule(const AttributeSpec& attribute,
                           std::span<const AttributeValue> gold_values);

// Partitions units by value. Continuous rules yield every interval (possibly
// empty) ordered by lower bound; categorical rules yield one bucket per value
// ordered by descending size, ties broken lexicographically.
std::vector<Bucket> partition(const std::string& attribute, const BucketingRule& rule,
                              std::span<const EvaluationUnit> units,
                              std::span<const AttributeValue> values);

// Orders categorical keys by descending count, ties lexicographic.
void sort_categorical(std::vector<std::pair<std::string, std::size_t>>& keyed_counts);

// Shortest round-tripping decimal form of a double.
std::string format_number(double value);

}  // namespace fineval

#endif  // FINEVAL_ATTRIBUTES_HPP
