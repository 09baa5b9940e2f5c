#include "fineval/analysis.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <set>
#include <tuple>
#include <unordered_map>

#include "fineval/bio.hpp"
#include "fineval/error.hpp"

namespace fineval::analysis {

namespace {

std::vector<std::string> unique_names(const std::vector<std::string>& names, TaskKind task) {
  std::vector<std::string> out;
  for (const auto& name : names.empty() ? default_attributes(task) : names) {
    if (std::find(out.begin(), out.end(), name) == out.end()) out.push_back(name);
  }
  return out;
}

std::optional<std::size_t> find_bucket(const std::vector<Bucket>& buckets, const BucketKey& key) {
  for (std::size_t i = 0; i < buckets.size(); ++i) {
    if (buckets[i].key == key) return i;
  }
  return std::nullopt;
}

void widen_to_contain(BucketPerformance& perf) {
  if (!perf.value || !perf.ci_low) return;
  perf.ci_low = std::min(*perf.ci_low, *perf.value);
  perf.ci_high = std::max(*perf.ci_high, *perf.value);
}

void attach_interval(BucketPerformance& perf, metrics::Metric metric,
                     const std::vector<metrics::MetricTally>& samples,
                     const AnalysisOptions& options) {
  if (!options.confidence_intervals || !perf.value || samples.empty()) return;
  if (auto ci = reliability::bootstrap_ci(samples, metric, options.bootstrap)) {
    perf.ci_low = ci->low;
    perf.ci_high = ci->high;
    widen_to_contain(perf);
  }
}

std::string truncate_code_points(const std::string& text, std::size_t limit) {
  std::size_t seen = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if ((static_cast<unsigned char>(text[i]) & 0xC0) != 0x80) {
      if (seen == limit) return text.substr(0, i);
      ++seen;
    }
  }
  return text;
}

std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

// How a list of spans covers `target`: the label of an exact-extent span,
// otherwise every overlapping span as LABEL[start,end], otherwise "O".
std::string describe_overlap(const std::vector<Span>& spans, const Span& target) {
  for (const auto& s : spans) {
    if (s.start == target.start && s.end == target.end) return s.label;
  }
  std::string out;
  for (const auto& s : spans) {
    if (s.end < target.start || s.start > target.end) continue;
    if (!out.empty()) out += ' ';
    out += s.label + "[" + std::to_string(s.start) + "," + std::to_string(s.end) + "]";
  }
  return out.empty() ? "O" : out;
}

using ErrorKey = std::tuple<std::size_t, std::size_t, std::size_t, std::string, int>;

ErrorKey key_of(const ErrorCase& e) {
  if (e.span) {
    return {e.sample_id, e.span->start, e.span->end, e.span->label, static_cast<int>(e.kind)};
  }
  return {e.sample_id, 0, 0, std::string(), static_cast<int>(e.kind)};
}

// Every error unit of one system; `bucket_filter` keeps gold unit i when
// keep_gold(i) and spurious unit j when keep_spurious(j).
template <typename KeepGold, typename KeepSpurious>
std::vector<ErrorCase> collect_errors(const metrics::SystemScoring& scoring, KeepGold keep_gold,
                                      KeepSpurious keep_spurious) {
  std::vector<ErrorCase> out;
  for (std::size_t i = 0; i < scoring.gold.size(); ++i) {
    if (scoring.gold_correct[i] || !keep_gold(i)) continue;
    ErrorCase e;
    e.sample_id = scoring.gold[i].sample_id;
    e.span = scoring.gold[i].span;
    e.kind = e.span ? ErrorKind::Missed : ErrorKind::Misclassified;
    out.push_back(std::move(e));
  }
  for (std::size_t j = 0; j < scoring.spurious.size(); ++j) {
    if (!keep_spurious(j)) continue;
    ErrorCase e;
    e.sample_id = scoring.spurious[j].sample_id;
    e.span = scoring.spurious[j].span;
    e.kind = ErrorKind::Spurious;
    out.push_back(std::move(e));
  }
  return out;
}

void sort_errors(std::vector<ErrorCase>& errors) {
  std::sort(errors.begin(), errors.end(),
            [](const ErrorCase& a, const ErrorCase& b) { return key_of(a) < key_of(b); });
}

void describe_errors(std::vector<ErrorCase>& errors,
                     const std::vector<const SystemOutput*>& systems, const Dataset& dataset) {
  std::unordered_map<std::size_t, std::vector<std::vector<Span>>> pred_spans;
  std::unordered_map<std::size_t, std::vector<Span>> gold_spans;
  for (ErrorCase& e : errors) {
    const Sample& sample = dataset.samples[e.sample_id];
    e.predicted.clear();
    if (!e.span) {
      e.gold = sample.classification().gold_label;
      e.context = truncate_code_points(sample.classification().text, kContextCharLimit);
      for (const auto* s : systems) {
        e.predicted.emplace_back(s->id, s->predictions[e.sample_id].classification().label);
      }
      continue;
    }
    const auto& sentence = sample.labeling();
    e.context = join_tokens(sentence.tokens);
    auto& preds = pred_spans[e.sample_id];
    if (preds.empty()) {
      for (const auto* s : systems) {
        preds.push_back(extract_spans(s->predictions[e.sample_id].labeling().tags));
      }
    }
    if (e.kind == ErrorKind::Missed) {
      e.gold = e.span->label;
    } else {
      auto [it, inserted] = gold_spans.try_emplace(e.sample_id);
      if (inserted) it->second = extract_spans(sentence.gold_tags);
      e.gold = describe_overlap(it->second, *e.span);
    }
    for (std::size_t k = 0; k < systems.size(); ++k) {
      e.predicted.emplace_back(systems[k]->id, describe_overlap(preds[k], *e.span));
    }
  }
}

}  // namespace

std::string current_timestamp() {
  std::time_t seconds = 0;
  const char* epoch = std::getenv("SOURCE_DATE_EPOCH");
  if (epoch && *epoch) {
    seconds = static_cast<std::time_t>(std::strtoll(epoch, nullptr, 10));
  } else {
    seconds = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  }
  std::tm utc{};
  gmtime_r(&seconds, &utc);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &utc);
  return buf;
}

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Missed: return "missed";
    case ErrorKind::Spurious: return "spurious";
    case ErrorKind::Misclassified: return "misclassified";
  }
  return "unknown";
}

DatasetIndex::DatasetIndex(const Dataset& dataset, const std::vector<std::string>& attributes,
                           bool strict)
    : dataset_(&dataset), strict_(strict), units_(gold_units(dataset)) {
  for (const auto& name : unique_names(attributes, dataset.task)) {
    const AttributeSpec& spec = find_attribute(dataset.task, name);
    if (strict && spec.name == "eFreq" && !dataset.train) {
      throw Error("MissingTrainStats",
                  "eFreq requires training statistics for dataset '" + dataset.id + "'");
    }
    std::vector<AttributeValue> values;
    values.reserve(units_.size());
    for (const auto& unit : units_) values.push_back(attribute_value(spec, unit, dataset, strict));

    Entry entry;
    entry.spec = &spec;
    entry.rule = resolve_rule(spec, values);
    entry.buckets = partition(spec.name, entry.rule, units_, values);
    entry.unit_bucket.reserve(units_.size());
    std::unordered_map<std::string, std::size_t> category_index;
    for (std::size_t b = 0; b < entry.buckets.size(); ++b) {
      category_index[entry.buckets[b].key.to_string()] = b;
    }
    for (const auto& v : values) {
      entry.unit_bucket.push_back(category_index.at(entry.rule.assign(v).to_string()));
    }
    entries_.push_back(std::move(entry));
  }
}

const DatasetIndex::Entry& DatasetIndex::entry(std::string_view attribute) const {
  for (const auto& e : entries_) {
    if (e.spec->name == attribute) return e;
  }
  throw Error("UnknownAttribute", "attribute '" + std::string(attribute) + "' is not indexed");
}

SystemBuckets bucket_system(const DatasetIndex& index, const DatasetIndex::Entry& entry,
                            const metrics::SystemScoring& scoring) {
  SystemBuckets out;
  out.buckets = entry.buckets;

  // Spurious spans whose value opens a bucket unseen in gold data.
  std::vector<BucketKey> spurious_keys;
  spurious_keys.reserve(scoring.spurious.size());
  std::set<std::string> extra;
  for (const auto& unit : scoring.spurious) {
    BucketKey key = entry.rule.assign(attribute_value(*entry.spec, unit, index.dataset(),
                                                      index.strict()));
    if (!key.is_interval() && !find_bucket(out.buckets, key)) extra.insert(key.to_string());
    spurious_keys.push_back(std::move(key));
  }
  for (const auto& category : extra) {
    out.buckets.push_back({entry.spec->name, BucketKey{category}, {}});
  }

  out.tallies.resize(out.buckets.size());
  out.per_sample.resize(out.buckets.size());
  auto add = [&](std::size_t b, std::size_t sample_id, const metrics::MetricTally& t) {
    out.tallies[b] += t;
    auto& samples = out.per_sample[b];
    if (!samples.empty() && samples.back().first == sample_id) {
      samples.back().second += t;
    } else {
      samples.emplace_back(sample_id, t);
    }
  };
  for (std::size_t i = 0; i < scoring.gold.size(); ++i) {
    add(entry.unit_bucket[i], scoring.gold[i].sample_id, metrics::gold_unit_tally(scoring, i));
  }
  out.spurious_bucket.reserve(spurious_keys.size());
  std::vector<bool> touched(out.buckets.size(), false);
  for (std::size_t j = 0; j < spurious_keys.size(); ++j) {
    const std::size_t b = *find_bucket(out.buckets, spurious_keys[j]);
    out.spurious_bucket.push_back(b);
    out.tallies[b] += metrics::spurious_unit_tally();
    out.per_sample[b].emplace_back(scoring.spurious[j].sample_id, metrics::spurious_unit_tally());
    touched[b] = true;
  }
  // Restore ascending sample order where spurious entries were appended.
  for (std::size_t b = 0; b < out.buckets.size(); ++b) {
    if (!touched[b]) continue;
    auto& samples = out.per_sample[b];
    std::stable_sort(samples.begin(), samples.end(),
                     [](const auto& x, const auto& y) { return x.first < y.first; });
    std::vector<std::pair<std::size_t, metrics::MetricTally>> merged;
    for (auto& entry_pair : samples) {
      if (!merged.empty() && merged.back().first == entry_pair.first) {
        merged.back().second += entry_pair.second;
      } else {
        merged.push_back(entry_pair);
      }
    }
    samples = std::move(merged);
  }
  return out;
}

AnalysisReport single_analysis(const SystemOutput& system, const Dataset& dataset,
                               const AnalysisOptions& options) {
  check_compatible(system, dataset);
  const DatasetIndex index(dataset, options.attributes, options.strict);
  return single_analysis(system, index, options);
}

AnalysisReport single_analysis(const SystemOutput& system, const DatasetIndex& index,
                               const AnalysisOptions& options) {
  const Dataset& dataset = index.dataset();
  check_compatible(system, dataset);
  if (options.confidence_intervals) options.bootstrap.validate();
  const metrics::SystemScoring scoring = metrics::score_system(system, dataset);

  AnalysisReport report;
  report.system_ids = {system.id};
  report.dataset_id = dataset.id;
  report.task = dataset.task;
  report.metric = scoring.metric;
  report.bootstrap = options.bootstrap;
  report.confidence_intervals = options.confidence_intervals;
  report.generated_at = current_timestamp();

  report.overall.key = BucketKey{std::string("overall")};
  report.overall.n = index.units().size();
  report.overall.components = scoring.overall();
  report.overall.value = metrics::value(scoring.metric, report.overall.components);
  attach_interval(report.overall, scoring.metric, scoring.per_sample, options);

  const auto names = options.attributes.empty() ? std::vector<std::string>{}
                                                : unique_names(options.attributes, dataset.task);
  std::vector<const DatasetIndex::Entry*> entries;
  if (names.empty()) {
    for (const auto& e : index.entries()) entries.push_back(&e);
  } else {
    for (const auto& name : names) entries.push_back(&index.entry(name));
  }

  for (const auto* entry : entries) {
    const SystemBuckets sb = bucket_system(index, *entry, scoring);
    std::vector<metrics::BucketTally> tallies;
    for (std::size_t b = 0; b < sb.buckets.size(); ++b) {
      tallies.push_back({sb.buckets[b].key, sb.buckets[b].n(), sb.tallies[b]});
    }
    const metrics::BucketedMetric bucketed = metrics::bucket_metric(scoring.metric, tallies);

    AttributeSeries series{entry->spec->name, entry->spec->value_kind, {}};
    for (std::size_t b = 0; b < sb.buckets.size(); ++b) {
      BucketPerformance perf;
      perf.attribute = entry->spec->name;
      perf.key = bucketed.buckets[b].key;
      perf.n = bucketed.buckets[b].n;
      perf.value = bucketed.buckets[b].value;
      perf.components = bucketed.buckets[b].tally;
      std::vector<metrics::MetricTally> samples;
      samples.reserve(sb.per_sample[b].size());
      for (const auto& [id, t] : sb.per_sample[b]) samples.push_back(t);
      attach_interval(perf, scoring.metric, samples, options);
      series.buckets.push_back(std::move(perf));
    }
    report.per_attribute.push_back(std::move(series));
  }
  return report;
}

PairReport pair_analysis(const SystemOutput& a, const SystemOutput& b, const Dataset& dataset,
                         const AnalysisOptions& options) {
  if (a.task != b.task) {
    throw Error("TaskMismatch", "systems '" + a.id + "' and '" + b.id + "' differ in task");
  }
  check_compatible(a, dataset);
  check_compatible(b, dataset);
  const DatasetIndex index(dataset, options.attributes, options.strict);
  AnalysisOptions point_only = options;
  point_only.confidence_intervals = false;
  const AnalysisReport ra = single_analysis(a, index, point_only);
  const AnalysisReport rb = single_analysis(b, index, point_only);

  PairReport report;
  report.system_a = a.id;
  report.system_b = b.id;
  report.dataset_id = dataset.id;
  report.task = dataset.task;
  report.metric = ra.metric;
  report.overall_a = ra.overall.value;
  report.overall_b = rb.overall.value;
  if (report.overall_a && report.overall_b) {
    report.overall_gap = *report.overall_a - *report.overall_b;
  }
  report.generated_at = current_timestamp();

  for (std::size_t s = 0; s < ra.per_attribute.size(); ++s) {
    const auto& sa = ra.per_attribute[s];
    const auto& sb = rb.per_attribute[s];
    const std::size_t shared = index.entry(sa.attribute).buckets.size();
    PairSeries series{sa.attribute, sa.value_kind, {}};

    auto lookup = [](const AttributeSeries& series_of, const BucketKey& key)
        -> const BucketPerformance* {
      for (const auto& perf : series_of.buckets) {
        if (perf.key == key) return &perf;
      }
      return nullptr;
    };
    std::vector<BucketKey> keys;
    for (std::size_t i = 0; i < shared; ++i) keys.push_back(sa.buckets[i].key);
    std::set<std::string> extra;
    for (const auto* side : {&sa, &sb}) {
      for (std::size_t i = shared; i < side->buckets.size(); ++i) {
        extra.insert(side->buckets[i].key.to_string());
      }
    }
    for (const auto& category : extra) keys.push_back(BucketKey{category});

    for (const auto& key : keys) {
      PairBucket pb;
      pb.key = key;
      const auto* pa = lookup(sa, key);
      const auto* pbp = lookup(sb, key);
      if (pa) {
        pb.n = pa->n;
        pb.value_a = pa->value;
      }
      if (pbp) {
        pb.n = pbp->n;
        pb.value_b = pbp->value;
      }
      if (pb.value_a && pb.value_b) pb.gap = *pb.value_a - *pb.value_b;
      series.buckets.push_back(std::move(pb));
    }
    report.per_attribute.push_back(std::move(series));
  }
  return report;
}

BiasProfile bias_analysis(const std::vector<const Dataset*>& datasets,
                          const std::vector<std::string>& attributes, bool strict) {
  if (datasets.empty()) throw Error("NoDatasets", "bias analysis needs at least one dataset");
  const TaskKind task = datasets.front()->task;
  std::set<std::string> ids;
  for (const auto* d : datasets) {
    if (d->task != task) {
      throw Error("TaskMismatch", "dataset '" + d->id + "' is " + std::string(fineval::to_string(d->task)) +
                                      ", expected " + std::string(fineval::to_string(task)));
    }
    if (!ids.insert(d->id).second) throw Error("DuplicateDataset", "dataset '" + d->id + "' repeats");
  }

  BiasProfile profile;
  profile.task = task;
  profile.generated_at = current_timestamp();
  for (const auto* d : datasets) profile.dataset_ids.push_back(d->id);

  std::vector<std::vector<EvaluationUnit>> units;
  for (const auto* d : datasets) units.push_back(gold_units(*d));

  for (const auto& name : unique_names(attributes, task)) {
    const AttributeSpec& spec = find_attribute(task, name);
    BiasSeries series{spec.name, spec.value_kind, {}, {}};
    for (std::size_t k = 0; k < datasets.size(); ++k) {
      const Dataset& d = *datasets[k];
      BiasSummary summary;
      summary.n = units[k].size();
      double sum = 0.0;
      for (const auto& unit : units[k]) {
        const AttributeValue v = attribute_value(spec, unit, d, strict);
        if (spec.value_kind == ValueKind::Continuous) {
          sum += std::get<double>(v);
        } else {
          ++summary.distribution[std::get<std::string>(v)];
        }
      }
      if (spec.value_kind == ValueKind::Continuous && summary.n > 0) {
        summary.mean = sum / static_cast<double>(summary.n);
      }
      series.per_dataset.emplace(d.id, std::move(summary));
    }
    series.order = profile.dataset_ids;
    std::sort(series.order.begin(), series.order.end(),
              [&](const std::string& x, const std::string& y) {
                const auto& sx = series.per_dataset.at(x);
                const auto& sy = series.per_dataset.at(y);
                if (spec.value_kind == ValueKind::Continuous) {
                  const double mx = sx.mean.value_or(-1e300);
                  const double my = sy.mean.value_or(-1e300);
                  if (mx != my) return mx > my;
                } else if (sx.n != sy.n) {
                  return sx.n > sy.n;
                }
                return x < y;
              });
    profile.per_attribute.push_back(std::move(series));
  }
  return profile;
}

std::vector<ErrorCase> error_cases(const std::vector<const SystemOutput*>& systems,
                                   const Dataset& dataset, const ErrorSelector& selector,
                                   bool strict) {
  if (dataset.task == TaskKind::ScoredGeneration) {
    throw Error("ErrorAnalysisUnsupportedTask",
                "scored generation outputs have no notion of a mispredicted unit");
  }
  using Mode = ErrorSelector::Mode;
  switch (selector.mode) {
    case Mode::All:
    case Mode::Bucket:
      if (systems.size() != 1) throw Error("NeedOneSystem", "select exactly one system");
      break;
    case Mode::Common:
      if (systems.size() < 2) throw Error("NeedTwoOrMoreSystems", "select at least two systems");
      break;
    case Mode::Unique:
      if (systems.size() != 2) throw Error("NeedTwoSystems", "select exactly two systems");
      break;
  }
  for (const auto* s : systems) check_compatible(*s, dataset);

  std::vector<metrics::SystemScoring> scorings;
  for (const auto* s : systems) scorings.push_back(metrics::score_system(*s, dataset));
  auto any = [](std::size_t) { return true; };

  std::vector<ErrorCase> result;
  switch (selector.mode) {
    case Mode::All:
      result = collect_errors(scorings[0], any, any);
      break;
    case Mode::Bucket: {
      const auto bar = selector.bucket.find('|');
      if (bar == std::string::npos) {
        throw Error("UnknownBucket", "bucket id '" + selector.bucket + "' is not attribute|key");
      }
      const std::string attribute = selector.bucket.substr(0, bar);
      std::string key = selector.bucket.substr(bar + 1);
      // Query strings decode '+' to a space.
      std::replace(key.begin(), key.end(), ' ', '+');
      const auto& specs = attributes_for(dataset.task);
      if (std::none_of(specs.begin(), specs.end(),
                       [&](const AttributeSpec& s) { return s.name == attribute; })) {
        throw Error("UnknownBucket", "no attribute '" + attribute + "' for this task");
      }
      const DatasetIndex index(dataset, {attribute}, strict);
      const auto& entry = index.entry(attribute);
      const SystemBuckets sb = bucket_system(index, entry, scorings[0]);
      std::optional<std::size_t> target;
      for (std::size_t b = 0; b < sb.buckets.size(); ++b) {
        if (sb.buckets[b].key.to_string() == key) target = b;
      }
      if (!target) throw Error("UnknownBucket", "no bucket '" + selector.bucket + "'");
      result = collect_errors(
          scorings[0], [&](std::size_t i) { return entry.unit_bucket[i] == *target; },
          [&](std::size_t j) { return sb.spurious_bucket[j] == *target; });
      break;
    }
    case Mode::Common: {
      std::vector<ErrorCase> base = collect_errors(scorings[0], any, any);
      std::set<ErrorKey> common;
      for (const auto& e : base) common.insert(key_of(e));
      for (std::size_t k = 1; k < scorings.size(); ++k) {
        std::set<ErrorKey> next;
        for (const auto& e : collect_errors(scorings[k], any, any)) {
          if (common.count(key_of(e))) next.insert(key_of(e));
        }
        common = std::move(next);
      }
      for (auto& e : base) {
        if (common.count(key_of(e))) result.push_back(std::move(e));
      }
      break;
    }
    case Mode::Unique: {
      std::set<ErrorKey> first;
      for (const auto& e : collect_errors(scorings[0], any, any)) first.insert(key_of(e));
      for (auto& e : collect_errors(scorings[1], any, any)) {
        if (!first.count(key_of(e))) result.push_back(std::move(e));
      }
      break;
    }
  }
  sort_errors(result);
  describe_errors(result, systems, dataset);
  return result;
}

}  // namespace fineval::analysis
