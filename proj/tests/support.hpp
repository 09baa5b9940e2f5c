#ifndef FINEVAL_TESTS_SUPPORT_HPP
#define FINEVAL_TESTS_SUPPORT_HPP

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <unistd.h>

#include "fineval/ingest.hpp"
#include "fineval/types.hpp"

namespace fixture {

using Rng = std::mt19937_64;

inline std::size_t uniform(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

inline bool coin(Rng& rng, double p) { return std::bernoulli_distribution(p)(rng); }

inline const std::vector<std::string>& ner_labels() {
  static const std::vector<std::string> labels{"PER", "LOC", "ORG"};
  return labels;
}

// BIO tags over `labels`; with orphans, I- tags may follow O or another label.
inline std::vector<std::string> random_tags(Rng& rng, std::size_t length, bool orphans,
                                            const std::vector<std::string>& labels = ner_labels()) {
  std::vector<std::string> tags;
  std::string open;
  for (std::size_t i = 0; i < length; ++i) {
    const std::size_t roll = uniform(rng, 0, 9);
    if (roll < 4) {
      tags.push_back("O");
      open.clear();
    } else if (roll < 7 || (open.empty() && !orphans)) {
      open = labels[uniform(rng, 0, labels.size() - 1)];
      tags.push_back("B-" + open);
    } else if (!open.empty() && roll < 9) {
      tags.push_back("I-" + open);
    } else if (orphans) {
      open = labels[uniform(rng, 0, labels.size() - 1)];
      tags.push_back("I-" + open);
    } else {
      tags.push_back("B-" + open);
    }
  }
  return tags;
}

// Perturbs gold tags into a plausible prediction.
inline std::vector<std::string> perturb_tags(Rng& rng, const std::vector<std::string>& gold,
                                             double rate, bool orphans) {
  std::vector<std::string> out = gold;
  const auto noise = random_tags(rng, gold.size(), orphans);
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (coin(rng, rate)) out[i] = noise[i];
  }
  return out;
}

inline std::string token(Rng& rng) {
  static const char* words[] = {"the", "cat", "Paris", "Obama", "runs", "IBM", "a", "new",
                                "York", "bank", "of", "river", "John", "said", "Acme", "Corp"};
  return words[uniform(rng, 0, 15)];
}

inline fineval::Dataset labeling_dataset(Rng& rng, std::size_t sentences, std::size_t max_len,
                                         bool orphans = false) {
  fineval::Dataset d;
  d.id = "ner";
  d.task = fineval::TaskKind::SequenceLabeling;
  for (std::size_t s = 0; s < sentences; ++s) {
    const std::size_t len = uniform(rng, 1, max_len);
    fineval::LabelingSample sample;
    for (std::size_t t = 0; t < len; ++t) sample.tokens.push_back(token(rng));
    sample.gold_tags = random_tags(rng, len, orphans);
    d.samples.push_back({s, sample});
  }
  return d;
}

inline fineval::SystemOutput labeling_system(Rng& rng, const fineval::Dataset& d, double rate,
                                             bool orphans = false, std::string id = "sys") {
  fineval::SystemOutput s;
  s.id = id;
  s.name = id;
  s.task = d.task;
  for (const auto& sample : d.samples) {
    s.predictions.push_back(
        {sample.id, fineval::LabelingPrediction{
                        perturb_tags(rng, sample.labeling().gold_tags, rate, orphans)}});
  }
  return s;
}

inline fineval::Dataset classification_dataset(Rng& rng, std::size_t n, std::size_t labels = 4) {
  fineval::Dataset d;
  d.id = "tc";
  d.task = fineval::TaskKind::TextClassification;
  for (std::size_t i = 0; i < n; ++i) {
    std::string text;
    const std::size_t len = uniform(rng, 1, 30);
    for (std::size_t t = 0; t < len; ++t) text += (t ? " " : "") + token(rng);
    d.samples.push_back(
        {i, fineval::ClassificationSample{text, "L" + std::to_string(uniform(rng, 0, labels - 1))}});
  }
  return d;
}

inline fineval::SystemOutput classification_system(Rng& rng, const fineval::Dataset& d,
                                                   double accuracy, bool confidences = true,
                                                   std::string id = "sys",
                                                   std::size_t labels = 4) {
  fineval::SystemOutput s;
  s.id = id;
  s.name = id;
  s.task = d.task;
  for (const auto& sample : d.samples) {
    std::string label = sample.classification().gold_label;
    if (!coin(rng, accuracy)) label = "L" + std::to_string(uniform(rng, 0, labels));
    std::optional<double> conf;
    if (confidences) conf = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    s.predictions.push_back({sample.id, fineval::ClassificationPrediction{label, conf}});
  }
  return s;
}

// Brute-force span decoding: scans every (start, end) pair and keeps those
// that form a maximal chunk. An I-X not continuing X opens a chunk.
using SpanSet = std::set<std::tuple<std::size_t, std::size_t, std::string>>;

inline SpanSet oracle_spans(const std::vector<std::string>& tags) {
  auto label_of = [&](std::size_t i) { return tags[i] == "O" ? std::string() : tags[i].substr(2); };
  auto begins = [&](std::size_t i) {
    if (tags[i] == "O") return false;
    if (tags[i][0] == 'B') return true;
    return i == 0 || label_of(i - 1) != label_of(i);
  };
  auto continues = [&](std::size_t i) { return tags[i][0] == 'I' && !begins(i); };
  SpanSet out;
  for (std::size_t s = 0; s < tags.size(); ++s) {
    for (std::size_t e = s; e < tags.size(); ++e) {
      if (!begins(s)) continue;
      bool ok = true;
      for (std::size_t k = s + 1; k <= e; ++k) ok = ok && continues(k);
      const bool maximal = e + 1 == tags.size() || !continues(e + 1);
      if (ok && maximal) out.insert({s, e, label_of(s)});
    }
  }
  return out;
}

struct OracleCounts {
  long tp = 0, fp = 0, fn = 0;
};

inline OracleCounts oracle_prf(const std::vector<std::string>& gold,
                               const std::vector<std::string>& pred) {
  const SpanSet g = oracle_spans(gold);
  const SpanSet p = oracle_spans(pred);
  OracleCounts c;
  for (const auto& s : p) c.tp += g.count(s);
  c.fp = static_cast<long>(p.size()) - c.tp;
  c.fn = static_cast<long>(g.size()) - c.tp;
  return c;
}

// Directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("fineval-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name, const std::string& contents) const {
    const auto p = path_ / name;
    std::ofstream(p, std::ios::binary) << contents;
    return p.string();
  }

 private:
  std::filesystem::path path_;
};

}  // namespace fixture

#endif  // FINEVAL_TESTS_SUPPORT_HPP
