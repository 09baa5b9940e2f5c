#include "fineval/combination.hpp"

#include <algorithm>
#include <optional>

#include "fineval/bio.hpp"
#include "fineval/error.hpp"
#include "fineval/hash.hpp"
#include "fineval/ingest.hpp"
#include "fineval/metrics.hpp"

namespace fineval::combination {

namespace {

struct Ballot {
  std::string label;
  std::size_t votes = 0;
  std::size_t first_member = 0;
  double confidence_mean = 0.0;  // running mean, exact when every value is equal
  bool all_confident = true;
};

// Plurality winner; ties by highest mean confidence (when every voter of every
// tied label has one), then by earliest member.
std::size_t elect(const std::vector<Ballot>& ballots, bool use_confidence, bool& tie) {
  std::size_t best_votes = 0;
  for (const auto& b : ballots) best_votes = std::max(best_votes, b.votes);
  std::vector<std::size_t> tied;
  for (std::size_t i = 0; i < ballots.size(); ++i) {
    if (ballots[i].votes == best_votes) tied.push_back(i);
  }
  tie = tied.size() > 1;
  if (!tie) return tied.front();

  if (use_confidence) {
    const bool confident = std::all_of(tied.begin(), tied.end(),
                                       [&](auto i) { return ballots[i].all_confident; });
    if (confident) {
      double best_mean = -1.0;
      std::vector<std::size_t> top;
      for (auto i : tied) {
        const double mean = ballots[i].confidence_mean;
        if (mean > best_mean) {
          best_mean = mean;
          top = {i};
        } else if (mean == best_mean) {
          top.push_back(i);
        }
      }
      tied = std::move(top);
    }
  }
  return *std::min_element(tied.begin(), tied.end(), [&](auto a, auto b) {
    return ballots[a].first_member < ballots[b].first_member;
  });
}

void cast(std::vector<Ballot>& ballots, const std::string& label, std::size_t member,
          std::optional<double> confidence) {
  auto it = std::find_if(ballots.begin(), ballots.end(),
                         [&](const Ballot& b) { return b.label == label; });
  if (it == ballots.end()) {
    ballots.push_back({label, 0, member, 0.0, true});
    it = std::prev(ballots.end());
  }
  ++it->votes;
  if (confidence) {
    it->confidence_mean += (*confidence - it->confidence_mean) / static_cast<double>(it->votes);
  } else {
    it->all_confident = false;
  }
}

VoteTally to_tally(const std::vector<Ballot>& ballots, bool tie) {
  VoteTally tally;
  tally.tie = tie;
  for (const auto& b : ballots) tally.votes.emplace_back(b.label, b.votes);
  return tally;
}

}  // namespace

std::size_t CombinedSystem::tie_count() const {
  std::size_t ties = 0;
  for (const auto& sample : provenance) {
    for (const auto& point : sample) ties += point.tie ? 1 : 0;
  }
  return ties;
}

std::string content_id(const SystemOutput& system, const Dataset& dataset) {
  return sha256_hex(ingest::serialize(dataset.task, dataset.samples, system.predictions));
}

CombinedSystem combine(const std::vector<const SystemOutput*>& systems, const Dataset& dataset) {
  if (systems.size() < 2) {
    throw Error("NeedTwoOrMoreSystems", "combination needs at least two systems");
  }
  for (const auto* s : systems) {
    if (s->task != dataset.task) {
      throw Error("TaskMismatch", "system '" + s->id + "' does not match the dataset's task");
    }
  }
  if (dataset.task == TaskKind::ScoredGeneration) {
    throw Error("CombinationUnsupportedTask",
                "voting is undefined for precomputed generation scores");
  }
  for (const auto* s : systems) check_compatible(*s, dataset);

  CombinedSystem combined;
  for (const auto* s : systems) combined.member_ids.push_back(s->id);
  combined.output.task = dataset.task;
  combined.output.name = "comb";
  combined.provenance.resize(dataset.size());

  for (const Sample& sample : dataset.samples) {
    auto& provenance = combined.provenance[sample.id];
    if (dataset.task == TaskKind::TextClassification) {
      std::vector<Ballot> ballots;
      bool every_member_confident = true;
      for (std::size_t m = 0; m < systems.size(); ++m) {
        const auto& p = systems[m]->predictions[sample.id].classification();
        every_member_confident = every_member_confident && p.confidence.has_value();
        cast(ballots, p.label, m, p.confidence);
      }
      bool tie = false;
      const Ballot& winner = ballots[elect(ballots, true, tie)];
      ClassificationPrediction prediction{winner.label, std::nullopt};
      if (every_member_confident) {
        prediction.confidence = winner.confidence_mean;
      }
      combined.output.predictions.push_back({sample.id, std::move(prediction)});
      provenance.push_back(to_tally(ballots, tie));
      continue;
    }

    const std::size_t length = sample.labeling().tokens.size();
    std::vector<std::string> tags;
    tags.reserve(length);
    for (std::size_t t = 0; t < length; ++t) {
      std::vector<Ballot> ballots;
      for (std::size_t m = 0; m < systems.size(); ++m) {
        cast(ballots, systems[m]->predictions[sample.id].labeling().tags[t], m, std::nullopt);
      }
      bool tie = false;
      tags.push_back(ballots[elect(ballots, false, tie)].label);
      provenance.push_back(to_tally(ballots, tie));
    }
    combined.output.predictions.push_back({sample.id, LabelingPrediction{repair_bio(tags)}});
  }
  combined.output.id = content_id(combined.output, dataset);
  return combined;
}

analysis::AnalysisReport combined_report(const std::vector<const SystemOutput*>& systems,
                                         const Dataset& dataset,
                                         const analysis::AnalysisOptions& options,
                                         CombinedSystem* combined_out) {
  CombinedSystem combined = combine(systems, dataset);
  const analysis::DatasetIndex index(dataset, options.attributes, options.strict);
  analysis::AnalysisReport report = analysis::single_analysis(combined.output, index, options);
  for (const auto* s : systems) {
    const auto overall = metrics::score_system(*s, dataset).overall();
    report.members.push_back({s->id, s->name, metrics::value(report.metric, overall)});
  }
  if (combined_out) *combined_out = std::move(combined);
  return report;
}

}  // namespace fineval::combination
