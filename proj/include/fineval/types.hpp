#ifndef FINEVAL_TYPES_HPP
#define FINEVAL_TYPES_HPP

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace fineval {

enum class TaskKind { TextClassification, SequenceLabeling, ScoredGeneration };

std::string_view to_string(TaskKind task);
// Accepts canonical names ("TextClassification") and CLI aliases
// ("classification", "ner", "chunking", "generation", ...).
TaskKind parse_task_kind(std::string_view name);

// Entity span over token indices, both ends inclusive.
struct Span {
  std::size_t start = 0;
  std::size_t end = 0;
  std::string label;

  std::size_t length() const { return end - start + 1; }
  friend auto operator<=>(const Span&, const Span&) = default;
};

struct ClassificationSample {
  std::string text;
  std::string gold_label;
  friend bool operator==(const ClassificationSample&, const ClassificationSample&) = default;
};

struct LabelingSample {
  std::vector<std::string> tokens;
  std::vector<std::string> gold_tags;
  friend bool operator==(const LabelingSample&, const LabelingSample&) = default;
};

struct GenerationSample {
  std::string source_id;
  std::optional<std::string> reference;
  friend bool operator==(const GenerationSample&, const GenerationSample&) = default;
};

struct Sample {
  std::size_t id = 0;
  std::variant<ClassificationSample, LabelingSample, GenerationSample> payload;

  TaskKind task() const { return static_cast<TaskKind>(payload.index()); }
  const ClassificationSample& classification() const {
    return std::get<ClassificationSample>(payload);
  }
  const LabelingSample& labeling() const { return std::get<LabelingSample>(payload); }
  const GenerationSample& generation() const { return std::get<GenerationSample>(payload); }
  friend bool operator==(const Sample&, const Sample&) = default;
};

struct ClassificationPrediction {
  std::string label;
  std::optional<double> confidence;
  friend bool operator==(const ClassificationPrediction&,
                         const ClassificationPrediction&) = default;
};

struct LabelingPrediction {
  std::vector<std::string> tags;
  friend bool operator==(const LabelingPrediction&, const LabelingPrediction&) = default;
};

struct GenerationPrediction {
  double score = 0.0;
  friend bool operator==(const GenerationPrediction&, const GenerationPrediction&) = default;
};

struct Prediction {
  std::size_t sample_id = 0;
  std::variant<ClassificationPrediction, LabelingPrediction, GenerationPrediction> payload;

  TaskKind task() const { return static_cast<TaskKind>(payload.index()); }
  const ClassificationPrediction& classification() const {
    return std::get<ClassificationPrediction>(payload);
  }
  const LabelingPrediction& labeling() const { return std::get<LabelingPrediction>(payload); }
  const GenerationPrediction& generation() const {
    return std::get<GenerationPrediction>(payload);
  }
  friend bool operator==(const Prediction&, const Prediction&) = default;
};

// Gold entity statistics of a training corpus; backs the eFreq attribute.
struct TrainStats {
  std::map<std::string, std::size_t, std::less<>> entity_surface_counts;
  std::map<std::string, std::size_t, std::less<>> token_counts;
  std::string source_path;
  std::string source_hash;

  std::size_t entity_count(std::string_view surface) const {
    auto it = entity_surface_counts.find(surface);
    return it == entity_surface_counts.end() ? 0 : it->second;
  }
};

struct Dataset {
  std::string id;
  TaskKind task = TaskKind::TextClassification;
  std::vector<Sample> samples;
  std::optional<TrainStats> train;

  std::size_t size() const { return samples.size(); }
};

struct SystemOutput {
  std::string id;
  std::string name;
  TaskKind task = TaskKind::TextClassification;
  std::vector<Prediction> predictions;

  std::size_t size() const { return predictions.size(); }
};

// Checks that a system output is analyzable against a dataset: same task kind,
// one prediction per sample, labeling predictions as long as their sentence.
// Throws TaskMismatch / SampleCountMismatch / TagLengthMismatch.
void check_compatible(const SystemOutput& system, const Dataset& dataset);

}  // namespace fineval

#endif  // FINEVAL_TYPES_HPP
