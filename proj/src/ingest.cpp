#include "fineval/ingest.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "fineval/attributes.hpp"
#include "fineval/bio.hpp"
#include "fineval/error.hpp"
#include "fineval/hash.hpp"

namespace fineval::ingest {

namespace {

// Iterates physical lines, stripping a trailing '\r' so CRLF input reads as LF.
class LineReader {
 public:
  explicit LineReader(std::string_view bytes) : rest_(bytes) {}

  bool next(std::string_view& line) {
    if (done_) return false;
    const auto pos = rest_.find('\n');
    if (pos == std::string_view::npos) {
      line = rest_;
      done_ = true;
      if (line.empty()) return false;
    } else {
      line = rest_.substr(0, pos);
      rest_.remove_prefix(pos + 1);
      if (rest_.empty()) done_ = true;
    }
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    ++number_;
    return true;
  }

  std::size_t number() const { return number_; }

 private:
  std::string_view rest_;
  std::size_t number_ = 0;
  bool done_ = false;
};

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find('\t', start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

std::vector<std::string_view> split_whitespace(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    if (i > start) fields.push_back(line.substr(start, i - start));
  }
  return fields;
}

std::optional<double> parse_real(std::string_view field) {
  double value = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  if (!field.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (field.empty() || ec != std::errc{} || ptr != last || !std::isfinite(value)) {
    return std::nullopt;
  }
  return value;
}

bool is_blank(std::string_view line) {
  return line.find_first_not_of(" \t") == std::string_view::npos;
}

void append_real(std::string& out, double value) { out += format_number(value); }

}  // namespace

FileFormatKind format_for(TaskKind task) {
  switch (task) {
    case TaskKind::TextClassification: return FileFormatKind::ClassificationTsv;
    case TaskKind::SequenceLabeling: return FileFormatKind::ConllColumn;
    case TaskKind::ScoredGeneration: return FileFormatKind::ScoreTsv;
  }
  return FileFormatKind::ClassificationTsv;
}

std::string_view file_extension(FileFormatKind format) {
  switch (format) {
    case FileFormatKind::ClassificationTsv: return ".tsv";
    case FileFormatKind::ConllColumn: return ".conll";
    case FileFormatKind::ScoreTsv: return ".scores.tsv";
  }
  return ".txt";
}

ParsedFile parse_classification_tsv(std::string_view bytes, bool gold_only) {
  ParsedFile out;
  out.task = TaskKind::TextClassification;
  LineReader reader(bytes);
  std::string_view line;
  std::optional<bool> has_confidence;
  while (reader.next(line)) {
    if (line.empty() || line.front() == '#') continue;
    const auto fields = split_tabs(line);
    const std::size_t expected_min = gold_only ? 2 : 3;
    const std::size_t expected_max = gold_only ? 2 : 4;
    if (fields.size() < expected_min || fields.size() > expected_max) {
      throw Error("BadColumnCount",
                  "expected " + std::to_string(expected_min) +
                      (expected_max != expected_min ? "-" + std::to_string(expected_max) : "") +
                      " tab-separated fields, found " + std::to_string(fields.size()),
                  reader.number());
    }
    const std::size_t id = out.samples.size();
    out.samples.push_back({id, ClassificationSample{std::string(fields[0]), std::string(fields[1])}});
    if (gold_only) continue;

    ClassificationPrediction prediction{std::string(fields[2]), std::nullopt};
    if (fields.size() == 4) {
      const auto confidence = parse_real(fields[3]);
      if (!confidence || *confidence < 0.0 || *confidence > 1.0) {
        throw Error("BadConfidence",
                    "confidence '" + std::string(fields[3]) + "' is not a real in [0,1]",
                    reader.number());
      }
      prediction.confidence = confidence;
    }
    const bool with_confidence = prediction.confidence.has_value();
    if (has_confidence && *has_confidence != with_confidence) {
      throw Error("MixedConfidence", "either every prediction carries a confidence or none does",
                  reader.number());
    }
    has_confidence = with_confidence;
    out.predictions.push_back({id, std::move(prediction)});
  }
  if (out.samples.empty()) throw Error("EmptyFile", "no records");
  return out;
}

ParsedFile parse_conll(std::string_view bytes, const ConllColumns& columns) {
  ParsedFile out;
  out.task = TaskKind::SequenceLabeling;
  std::size_t needed = std::max(columns.token, columns.gold);
  if (columns.pred) needed = std::max(needed, *columns.pred);

  LabelingSample sentence;
  std::vector<std::string> pred_tags;
  auto flush = [&] {
    if (sentence.tokens.empty()) {
      ++out.dropped_empty_sentences;
      return;
    }
    const std::size_t id = out.samples.size();
    out.samples.push_back({id, std::move(sentence)});
    if (columns.pred) out.predictions.push_back({id, LabelingPrediction{std::move(pred_tags)}});
    sentence = {};
    pred_tags.clear();
  };

  LineReader reader(bytes);
  std::string_view line;
  bool previous_blank = true;
  while (reader.next(line)) {
    if (is_blank(line)) {
      if (!previous_blank) {
        flush();
      } else if (!out.samples.empty()) {
        ++out.dropped_empty_sentences;
      }
      previous_blank = true;
      continue;
    }
    const auto fields = split_whitespace(line);
    if (fields.front() == "-DOCSTART-") continue;
    previous_blank = false;
    if (needed >= fields.size()) {
      throw Error("ColumnOutOfRange",
                  "column " + std::to_string(needed) + " requested but line has " +
                      std::to_string(fields.size()) + " columns",
                  reader.number());
    }
    for (const std::optional<std::size_t>& column : {std::optional<std::size_t>(columns.gold), columns.pred}) {
      if (column && !is_well_formed_tag(fields[*column])) {
        throw Error("MalformedTag",
                    "tag '" + std::string(fields[*column]) + "' is not O, B-X or I-X",
                    reader.number());
      }
    }
    sentence.tokens.emplace_back(fields[columns.token]);
    sentence.gold_tags.emplace_back(fields[columns.gold]);
    if (columns.pred) pred_tags.emplace_back(fields[*columns.pred]);
  }
  if (!sentence.tokens.empty()) flush();
  if (out.samples.empty()) throw Error("EmptyFile", "no sentences");
  return out;
}

ParsedFile parse_score_tsv(std::string_view bytes, bool gold_only) {
  ParsedFile out;
  out.task = TaskKind::ScoredGeneration;
  std::unordered_map<std::string, std::size_t> seen;
  LineReader reader(bytes);
  std::string_view line;
  while (reader.next(line)) {
    if (line.empty() || line.front() == '#') continue;
    const auto fields = split_tabs(line);
    const bool ok = gold_only ? (fields.size() == 1 || fields.size() == 2) : fields.size() == 2;
    if (!ok || fields[0].empty()) {
      throw Error("BadColumnCount",
                  std::string(gold_only ? "expected sourceId [\\t reference]"
                                        : "expected sourceId \\t score") +
                      ", found " + std::to_string(fields.size()) + " fields",
                  reader.number());
    }
    std::string source_id(fields[0]);
    if (!seen.emplace(source_id, reader.number()).second) {
      throw Error("DuplicateSourceId", "source id '" + source_id + "' repeats line " +
                                           std::to_string(seen[source_id]),
                  reader.number());
    }
    const std::size_t id = out.samples.size();
    GenerationSample sample{std::move(source_id), std::nullopt};
    if (gold_only) {
      if (fields.size() == 2) sample.reference = std::string(fields[1]);
      out.samples.push_back({id, std::move(sample)});
      continue;
    }
    const auto score = parse_real(fields[1]);
    if (!score) {
      throw Error("BadScore", "score '" + std::string(fields[1]) + "' is not a finite real",
                  reader.number());
    }
    out.samples.push_back({id, std::move(sample)});
    out.predictions.push_back({id, GenerationPrediction{*score}});
  }
  if (out.samples.empty()) throw Error("EmptyFile", "no records");
  return out;
}

ParsedFile parse_file(TaskKind task, std::string_view bytes, bool gold_only,
                      const ConllColumns& columns) {
  switch (task) {
    case TaskKind::TextClassification: return parse_classification_tsv(bytes, gold_only);
    case TaskKind::SequenceLabeling: {
      ConllColumns effective = columns;
      if (gold_only) effective.pred.reset();
      return parse_conll(bytes, effective);
    }
    case TaskKind::ScoredGeneration: return parse_score_tsv(bytes, gold_only);
  }
  throw Error("UnknownTask", "unsupported task");
}

std::string serialize_classification_tsv(const std::vector<Sample>& samples,
                                         const std::vector<Prediction>& predictions) {
  std::string out;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& sample = samples[i].classification();
    out += sample.text;
    out += '\t';
    out += sample.gold_label;
    if (!predictions.empty()) {
      const auto& prediction = predictions[i].classification();
      out += '\t';
      out += prediction.label;
      if (prediction.confidence) {
        out += '\t';
        append_real(out, *prediction.confidence);
      }
    }
    out += '\n';
  }
  return out;
}

std::string serialize_conll(const std::vector<Sample>& samples,
                            const std::vector<Prediction>& predictions) {
  std::string out;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& sentence = samples[i].labeling();
    for (std::size_t t = 0; t < sentence.tokens.size(); ++t) {
      out += sentence.tokens[t];
      out += ' ';
      out += sentence.gold_tags[t];
      if (!predictions.empty()) {
        out += ' ';
        out += predictions[i].labeling().tags[t];
      }
      out += '\n';
    }
    out += '\n';
  }
  return out;
}

std::string serialize_score_tsv(const std::vector<Sample>& samples,
                                const std::vector<Prediction>& predictions) {
  std::string out;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& sample = samples[i].generation();
    out += sample.source_id;
    if (!predictions.empty()) {
      out += '\t';
      append_real(out, predictions[i].generation().score);
    } else if (sample.reference) {
      out += '\t';
      out += *sample.reference;
    }
    out += '\n';
  }
  return out;
}

std::string serialize(TaskKind task, const std::vector<Sample>& samples,
                      const std::vector<Prediction>& predictions) {
  switch (task) {
    case TaskKind::TextClassification: return serialize_classification_tsv(samples, predictions);
    case TaskKind::SequenceLabeling: return serialize_conll(samples, predictions);
    case TaskKind::ScoredGeneration: return serialize_score_tsv(samples, predictions);
  }
  return {};
}

TrainStats build_train_stats(std::string_view conll_bytes, std::string source_path,
                             const ConllColumns& columns) {
  ConllColumns gold_only = columns;
  gold_only.pred.reset();
  const ParsedFile parsed = parse_conll(conll_bytes, gold_only);
  TrainStats stats;
  for (const Sample& sample : parsed.samples) {
    const auto& sentence = sample.labeling();
    for (const auto& token : sentence.tokens) ++stats.token_counts[token];
    for (const Span& span : extract_spans(sentence.gold_tags)) {
      ++stats.entity_surface_counts[span_surface(sentence.tokens, span)];
    }
  }
  stats.source_path = std::move(source_path);
  stats.source_hash = sha256_hex(conll_bytes);
  return stats;
}

Dataset make_dataset(std::string id, ParsedFile parsed) {
  Dataset dataset;
  dataset.id = std::move(id);
  dataset.task = parsed.task;
  dataset.samples = std::move(parsed.samples);
  return dataset;
}

SystemOutput make_system(std::string id, std::string name, ParsedFile parsed,
                         const Dataset& dataset) {
  if (parsed.task != dataset.task) {
    throw Error("TaskMismatch", "system file is " + std::string(to_string(parsed.task)) +
                                    ", dataset is " + std::string(to_string(dataset.task)));
  }
  if (parsed.predictions.size() != parsed.samples.size()) {
    throw Error("ValidationFailed", "system file carries no predictions");
  }
  if (parsed.samples.size() != dataset.size()) {
    throw Error("SampleCountMismatch", "system has " + std::to_string(parsed.samples.size()) +
                                           " samples, dataset has " +
                                           std::to_string(dataset.size()));
  }
  SystemOutput system;
  system.id = std::move(id);
  system.name = std::move(name);
  system.task = parsed.task;

  if (dataset.task == TaskKind::ScoredGeneration) {
    std::unordered_map<std::string_view, std::size_t> position;
    for (const Sample& sample : dataset.samples) position[sample.generation().source_id] = sample.id;
    system.predictions.resize(dataset.size());
    for (std::size_t i = 0; i < parsed.samples.size(); ++i) {
      const auto& source_id = parsed.samples[i].generation().source_id;
      auto it = position.find(source_id);
      if (it == position.end()) {
        throw Error("UnknownSourceId", "source id '" + source_id + "' is not in dataset '" +
                                           dataset.id + "'");
      }
      system.predictions[it->second] = {it->second, parsed.predictions[i].payload};
    }
    return system;
  }

  for (std::size_t i = 0; i < parsed.samples.size(); ++i) {
    if (parsed.samples[i].payload != dataset.samples[i].payload) {
      throw Error("GoldMismatch", "sample " + std::to_string(i) +
                                      " differs from the dataset's text or gold annotation");
    }
  }
  system.predictions = std::move(parsed.predictions);
  return system;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("FileNotFound", "cannot open '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

}  // namespace fineval::ingest
