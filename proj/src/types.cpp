#include "fineval/types.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <utility>

#include "fineval/error.hpp"

namespace fineval {

std::string_view to_string(TaskKind task) {
  switch (task) {
    case TaskKind::TextClassification: return "TextClassification";
    case TaskKind::SequenceLabeling: return "SequenceLabeling";
    case TaskKind::ScoredGeneration: return "ScoredGeneration";
  }
  return "Unknown";
}

TaskKind parse_task_kind(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  static const std::array<std::pair<std::string_view, TaskKind>, 14> kAliases{{
      {"textclassification", TaskKind::TextClassification},
      {"classification", TaskKind::TextClassification},
      {"text-classification", TaskKind::TextClassification},
      {"tc", TaskKind::TextClassification},
      {"sequencelabeling", TaskKind::SequenceLabeling},
      {"sequence-labeling", TaskKind::SequenceLabeling},
      {"ner", TaskKind::SequenceLabeling},
      {"chunking", TaskKind::SequenceLabeling},
      {"chunk", TaskKind::SequenceLabeling},
      {"scoredgeneration", TaskKind::ScoredGeneration},
      {"scored-generation", TaskKind::ScoredGeneration},
      {"generation", TaskKind::ScoredGeneration},
      {"summarization", TaskKind::ScoredGeneration},
      {"translation", TaskKind::ScoredGeneration},
  }};
  for (const auto& [alias, task] : kAliases) {
    if (lower == alias) return task;
  }
  throw Error("UnknownTask", "unknown task '" + std::string(name) + "'");
}

void check_compatible(const SystemOutput& system, const Dataset& dataset) {
  if (system.task != dataset.task) {
    throw Error("TaskMismatch", "system '" + system.id + "' is " +
                                    std::string(to_string(system.task)) + ", dataset '" +
                                    dataset.id + "' is " +
                                    std::string(to_string(dataset.task)));
  }
  if (system.size() != dataset.size()) {
    throw Error("SampleCountMismatch", "system has " + std::to_string(system.size()) +
                                           " predictions, dataset has " +
                                           std::to_string(dataset.size()) + " samples");
  }
  for (std::size_t i = 0; i < system.predictions.size(); ++i) {
    const Prediction& p = system.predictions[i];
    if (p.sample_id != i || p.task() != dataset.task) {
      throw Error("SampleCountMismatch", "prediction " + std::to_string(i) + " is misaligned");
    }
    if (dataset.task == TaskKind::SequenceLabeling &&
        p.labeling().tags.size() != dataset.samples[i].labeling().tokens.size()) {
      throw Error("TagLengthMismatch", "sentence " + std::to_string(i) + " has " +
                                           std::to_string(dataset.samples[i].labeling().tokens.size()) +
                                           " tokens but " + std::to_string(p.labeling().tags.size()) +
                                           " predicted tags");
    }
  }
}

}  // namespace fineval
