#include "fineval/metrics.hpp"

#include <algorithm>
#include <numeric>

#include "fineval/bio.hpp"
#include "fineval/error.hpp"

namespace fineval::metrics {

Metric metric_for(TaskKind task) {
  switch (task) {
    case TaskKind::TextClassification: return Metric::Accuracy;
    case TaskKind::SequenceLabeling: return Metric::SpanF1;
    case TaskKind::ScoredGeneration: return Metric::MeanScore;
  }
  return Metric::Accuracy;
}

std::string_view metric_name(Metric metric) {
  switch (metric) {
    case Metric::Accuracy: return "accuracy";
    case Metric::SpanF1: return "f1";
    case Metric::MeanScore: return "mean_score";
  }
  return "unknown";
}

PrfScores prf(const MetricTally& tally) {
  PrfScores s;
  const auto predicted = tally.tp + tally.fp;
  const auto actual = tally.tp + tally.fn;
  if (predicted > 0) s.precision = static_cast<double>(tally.tp) / static_cast<double>(predicted);
  if (actual > 0) s.recall = static_cast<double>(tally.tp) / static_cast<double>(actual);
  if (tally.tp > 0) {
    s.f1 = static_cast<double>(2 * tally.tp) / static_cast<double>(2 * tally.tp + tally.fp + tally.fn);
  }
  return s;
}

std::optional<double> value(Metric metric, const MetricTally& tally) {
  switch (metric) {
    case Metric::Accuracy:
      if (tally.total == 0) return std::nullopt;
      return static_cast<double>(tally.correct) / static_cast<double>(tally.total);
    case Metric::SpanF1:
      if (tally.tp + tally.fp + tally.fn == 0) return std::nullopt;
      return prf(tally).f1;
    case Metric::MeanScore:
      if (tally.count == 0) return std::nullopt;
      return tally.sum / static_cast<double>(tally.count);
  }
  return std::nullopt;
}

SpanMatch span_f1(std::span<const Span> gold, std::span<const Span> pred) {
  SpanMatch match;
  match.gold_matched.assign(gold.size(), false);
  match.pred_matched.assign(pred.size(), false);

  // Spans of one sentence are few; sort indices and merge.
  std::vector<std::size_t> gi(gold.size()), pi(pred.size());
  std::iota(gi.begin(), gi.end(), 0);
  std::iota(pi.begin(), pi.end(), 0);
  std::sort(gi.begin(), gi.end(), [&](auto a, auto b) { return gold[a] < gold[b]; });
  std::sort(pi.begin(), pi.end(), [&](auto a, auto b) { return pred[a] < pred[b]; });
  std::size_t g = 0, p = 0;
  while (g < gi.size() && p < pi.size()) {
    const Span& gs = gold[gi[g]];
    const Span& ps = pred[pi[p]];
    if (gs == ps) {
      match.gold_matched[gi[g++]] = true;
      match.pred_matched[pi[p++]] = true;
    } else if (gs < ps) {
      ++g;
    } else {
      ++p;
    }
  }
  for (bool hit : match.gold_matched) (hit ? match.tally.tp : match.tally.fn) += 1;
  for (bool hit : match.pred_matched) if (!hit) match.tally.fp += 1;
  match.scores = prf(match.tally);
  return match;
}

MetricTally SystemScoring::overall() const {
  MetricTally total;
  for (const auto& t : per_sample) total += t;
  return total;
}

SystemScoring score_system(const SystemOutput& system, const Dataset& dataset) {
  check_compatible(system, dataset);
  SystemScoring scoring;
  scoring.metric = metric_for(dataset.task);
  scoring.per_sample.resize(dataset.size());

  for (const Sample& sample : dataset.samples) {
    const Prediction& prediction = system.predictions[sample.id];
    MetricTally& tally = scoring.per_sample[sample.id];
    switch (dataset.task) {
      case TaskKind::TextClassification: {
        const bool correct =
            prediction.classification().label == sample.classification().gold_label;
        scoring.gold.push_back({sample.id, std::nullopt});
        scoring.gold_correct.push_back(correct);
        tally.total = 1;
        tally.correct = correct ? 1 : 0;
        break;
      }
      case TaskKind::SequenceLabeling: {
        const auto gold = extract_spans(sample.labeling().gold_tags);
        const auto pred = extract_spans(prediction.labeling().tags);
        const SpanMatch match = span_f1(gold, pred);
        for (std::size_t i = 0; i < gold.size(); ++i) {
          scoring.gold.push_back({sample.id, gold[i]});
          scoring.gold_correct.push_back(match.gold_matched[i]);
        }
        for (std::size_t i = 0; i < pred.size(); ++i) {
          if (!match.pred_matched[i]) scoring.spurious.push_back({sample.id, pred[i]});
        }
        tally = match.tally;
        break;
      }
      case TaskKind::ScoredGeneration: {
        const double score = prediction.generation().score;
        scoring.gold.push_back({sample.id, std::nullopt});
        scoring.gold_correct.push_back(true);
        scoring.scores.push_back(score);
        tally.sum = score;
        tally.count = 1;
        break;
      }
    }
  }
  return scoring;
}

MetricTally gold_unit_tally(const SystemScoring& scoring, std::size_t index) {
  MetricTally t;
  const bool correct = scoring.gold_correct[index];
  switch (scoring.metric) {
    case Metric::Accuracy:
      t.total = 1;
      t.correct = correct ? 1 : 0;
      break;
    case Metric::SpanF1:
      (correct ? t.tp : t.fn) = 1;
      break;
    case Metric::MeanScore:
      t.sum = scoring.scores[scoring.gold[index].sample_id];
      t.count = 1;
      break;
  }
  return t;
}

MetricTally spurious_unit_tally() {
  MetricTally t;
  t.fp = 1;
  return t;
}

BucketedMetric bucket_metric(Metric metric, std::span<const BucketTally> buckets) {
  BucketedMetric out;
  for (const auto& bucket : buckets) {
    BucketValue v{bucket.key, bucket.n, std::nullopt, bucket.tally};
    if (bucket.n > 0) v.value = value(metric, bucket.tally);
    out.overall_tally += bucket.tally;
    out.buckets.push_back(std::move(v));
  }
  out.overall = value(metric, out.overall_tally);
  return out;
}

}  // namespace fineval::metrics
