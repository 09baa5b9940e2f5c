#ifndef FINEVAL_INGEST_HPP
#define FINEVAL_INGEST_HPP

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fineval/types.hpp"

namespace fineval::ingest {

// File formats, all UTF-8, fields separated by a single tab (TSV) or runs of
// whitespace (CoNLL). `#` lines are comments in the TSV formats.
//
//   ClassificationTsv  text \t gold \t pred [\t confidence]     (system output)
//                      text \t gold                            (gold-only)
//   ConllColumn        token gold pred, blank line between sentences
//   ScoreTsv           sourceId \t score                        (system output)
//                      sourceId [\t reference]                  (gold-only)
enum class FileFormatKind { ClassificationTsv, ConllColumn, ScoreTsv };

FileFormatKind format_for(TaskKind task);
std::string_view file_extension(FileFormatKind format);

struct ConllColumns {
  std::size_t token = 0;
  std::size_t gold = 1;
  std::optional<std::size_t> pred = 2;  // nullopt reads a gold-only file
};

struct ParsedFile {
  TaskKind task = TaskKind::TextClassification;
  std::vector<Sample> samples;
  std::vector<Prediction> predictions;  // empty for gold-only input
  std::size_t dropped_empty_sentences = 0;
};

// Errors: EmptyFile, BadColumnCount(line), BadConfidence(line),
// MixedConfidence(line) when only some lines carry a confidence.
ParsedFile parse_classification_tsv(std::string_view bytes, bool gold_only = false);

// Errors: EmptyFile, ColumnOutOfRange(line), MalformedTag(line). `-DOCSTART-`
// lines are skipped; consecutive blank lines never produce empty sentences.
ParsedFile parse_conll(std::string_view bytes, const ConllColumns& columns = {});

// Errors: EmptyFile, BadColumnCount(line), BadScore(line), DuplicateSourceId(line).
ParsedFile parse_score_tsv(std::string_view bytes, bool gold_only = false);

// Dispatches on the task kind's format.
ParsedFile parse_file(TaskKind task, std::string_view bytes, bool gold_only = false,
                      const ConllColumns& columns = {});

// Canonical serializations; parse(serialize(x)) == x. Predictions may be empty
// to write the gold-only variant.
std::string serialize_classification_tsv(const std::vector<Sample>& samples,
                                         const std::vector<Prediction>& predictions);
std::string serialize_conll(const std::vector<Sample>& samples,
                            const std::vector<Prediction>& predictions);
std::string serialize_score_tsv(const std::vector<Sample>& samples,
                                const std::vector<Prediction>& predictions);
std::string serialize(TaskKind task, const std::vector<Sample>& samples,
                      const std::vector<Prediction>& predictions);

// Gold entity surface and token counts of a gold-only CoNLL training file.
TrainStats build_train_stats(std::string_view conll_bytes, std::string source_path = {},
                             const ConllColumns& columns = {0, 1, std::nullopt});

Dataset make_dataset(std::string id, ParsedFile parsed);

// Aligns a parsed system file with a dataset. Classification and CoNLL outputs
// align by order and must repeat the dataset's text/tokens and gold labels
// (GoldMismatch); score files align by sourceId (UnknownSourceId).
SystemOutput make_system(std::string id, std::string name, ParsedFile parsed,
                         const Dataset& dataset);

std::string read_file(const std::string& path);

}  // namespace fineval::ingest

#endif  // FINEVAL_INGEST_HPP
