#include <functional>
#include <set>

#include "doctest.h"
#include "fineval/analysis.hpp"
#include "fineval/error.hpp"
#include "fineval/ingest.hpp"
#include "support.hpp"

using namespace fineval;

namespace {

analysis::AnalysisOptions no_ci(std::vector<std::string> attrs = {}) {
  analysis::AnalysisOptions o;
  o.attributes = std::move(attrs);
  o.confidence_intervals = false;
  return o;
}

std::string code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return "none";
}

const std::string kGold =
    "John B-PER\nSmith I-PER\nvisited O\nParis B-LOC\n\n"
    "IBM B-ORG\nhired O\nMary B-PER\n\n";
const std::string kSysA =
    "John B-PER B-PER\nSmith I-PER I-PER\nvisited O O\nParis B-LOC O\n\n"
    "IBM B-ORG B-ORG\nhired O B-MISC\nMary B-PER O\n\n";
const std::string kSysB =
    "John B-PER B-PER\nSmith I-PER O\nvisited O O\nParis B-LOC B-LOC\n\n"
    "IBM B-ORG B-ORG\nhired O O\nMary B-PER O\n\n";

}  // namespace

TEST_SUITE("analysis") {
  TEST_CASE("single analysis buckets and spurious spans") {
    const Dataset d = ingest::make_dataset("d", ingest::parse_conll(kGold, {0, 1, std::nullopt}));
    const auto a = ingest::make_system("a", "A", ingest::parse_conll(kSysA), d);
    const auto r = analysis::single_analysis(a, d, no_ci({"eLab", "eLen"}));
    CHECK(r.metric == metrics::Metric::SpanF1);
    CHECK(r.overall.id() == "overall");
    CHECK(r.overall.components.tp == 2);
    CHECK(r.overall.components.fp == 1);
    CHECK(r.overall.components.fn == 2);
    REQUIRE(r.per_attribute.size() == 2);
    const auto& eLab = r.per_attribute[0];
    CHECK(eLab.attribute == "eLab");
    REQUIRE(eLab.buckets.size() == 4);
    CHECK(eLab.buckets[0].id() == "eLab|PER");
    CHECK(eLab.buckets[0].n == 2);
    CHECK(eLab.buckets[3].id() == "eLab|MISC");
    CHECK(eLab.buckets[3].n == 0);
    CHECK_FALSE(eLab.buckets[3].value.has_value());
    CHECK(eLab.buckets[3].components.fp == 1);
    const auto& eLen = r.per_attribute[1];
    CHECK(eLen.buckets[0].components.fp == 1);
    CHECK(eLen.buckets[1].id() == "eLen|(1,2]");
    CHECK(*eLen.buckets[1].value == 1.0);
  }

  TEST_CASE("errors: unknown attributes and task mismatch") {
    const Dataset d = ingest::make_dataset("d", ingest::parse_conll(kGold, {0, 1, std::nullopt}));
    const auto a = ingest::make_system("a", "A", ingest::parse_conll(kSysA), d);
    CHECK(code_of([&] { analysis::single_analysis(a, d, no_ci({"tLen"})); }) == "UnknownAttribute");
    CHECK(code_of([&] { analysis::single_analysis(a, d, no_ci({"eFreq"})); }) == "none");
    auto strict = no_ci({"eFreq"});
    strict.strict = true;
    CHECK(code_of([&] { analysis::single_analysis(a, d, strict); }) == "MissingTrainStats");
    SystemOutput wrong = a;
    wrong.task = TaskKind::TextClassification;
    CHECK(code_of([&] { analysis::single_analysis(wrong, d, no_ci()); }) == "TaskMismatch");
    SystemOutput short_sys = a;
    short_sys.predictions.pop_back();
    CHECK(code_of([&] { analysis::single_analysis(short_sys, d, no_ci()); }) == "SampleCountMismatch");
  }

  TEST_CASE("property: bucket tallies reconcile with the overall tally") {
    fixture::Rng rng(41);
    for (int i = 0; i < 60; ++i) {
      const Dataset d = fixture::labeling_dataset(rng, fixture::uniform(rng, 1, 40), 12);
      const auto s = fixture::labeling_system(rng, d, 0.3, true);
      const auto r = analysis::single_analysis(s, d, no_ci());
      for (const auto& series : r.per_attribute) {
        metrics::MetricTally sum;
        std::size_t n = 0;
        for (const auto& b : series.buckets) {
          sum += b.components;
          n += b.n;
        }
        CHECK(sum == r.overall.components);
        CHECK(n == r.overall.n);
      }
    }
    for (int i = 0; i < 60; ++i) {
      const Dataset d = fixture::classification_dataset(rng, fixture::uniform(rng, 1, 300));
      const auto s = fixture::classification_system(rng, d, 0.6);
      const auto r = analysis::single_analysis(s, d, no_ci());
      for (const auto& series : r.per_attribute) {
        std::int64_t correct = 0, total = 0;
        for (const auto& b : series.buckets) {
          correct += b.components.correct;
          total += b.components.total;
        }
        CHECK(correct == r.overall.components.correct);
        CHECK(total == r.overall.components.total);
      }
    }
  }

  TEST_CASE("property: pair gaps equal single differences exactly") {
    fixture::Rng rng(42);
    for (int i = 0; i < 30; ++i) {
      const Dataset d = fixture::labeling_dataset(rng, fixture::uniform(rng, 1, 30), 10);
      const auto a = fixture::labeling_system(rng, d, 0.3, false, "a");
      const auto b = fixture::labeling_system(rng, d, 0.5, true, "b");
      const auto p = analysis::pair_analysis(a, b, d, no_ci());
      const auto ra = analysis::single_analysis(a, d, no_ci());
      const auto rb = analysis::single_analysis(b, d, no_ci());
      if (ra.overall.value && rb.overall.value) CHECK(*p.overall_gap == *ra.overall.value - *rb.overall.value);
      for (const auto& series : p.per_attribute) {
        for (const auto& bucket : series.buckets) {
          auto find = [&](const analysis::AnalysisReport& r) -> std::optional<double> {
            for (const auto& s : r.per_attribute) {
              if (s.attribute != series.attribute) continue;
              for (const auto& x : s.buckets) {
                if (x.key == bucket.key) return x.value;
              }
            }
            return std::nullopt;
          };
          const auto va = find(ra), vb = find(rb);
          CHECK(bucket.value_a == va);
          CHECK(bucket.value_b == vb);
          if (va && vb) {
            CHECK(*bucket.gap == *va - *vb);
          } else {
            CHECK_FALSE(bucket.gap.has_value());
          }
        }
      }
      const auto self = analysis::pair_analysis(a, a, d, no_ci());
      for (const auto& series : self.per_attribute) {
        for (const auto& bucket : series.buckets) {
          if (bucket.gap) CHECK(*bucket.gap == 0.0);
        }
      }
    }
  }

  TEST_CASE("bias analysis orders datasets") {
    const Dataset d1 = ingest::make_dataset("short", ingest::parse_conll("a B-PER\n\nb B-LOC\n", {0, 1, std::nullopt}));
    const Dataset d2 = ingest::make_dataset("long", ingest::parse_conll("a B-PER\nb I-PER\nc I-PER\n\nd B-PER\n", {0, 1, std::nullopt}));
    const auto p = analysis::bias_analysis({&d1, &d2}, {"eLen", "eLab"});
    REQUIRE(p.per_attribute.size() == 2);
    const auto& eLen = p.per_attribute[0];
    CHECK(eLen.order == std::vector<std::string>{"long", "short"});
    CHECK(*eLen.per_dataset.at("long").mean == 2.0);
    CHECK(*eLen.per_dataset.at("short").mean == 1.0);
    const auto& eLab = p.per_attribute[1];
    CHECK(eLab.per_dataset.at("short").distribution.at("LOC") == 1);
    CHECK(eLab.per_dataset.at("long").distribution.at("PER") == 2);
    CHECK(code_of([] { analysis::bias_analysis({}, {}); }) == "NoDatasets");
    const Dataset tc = ingest::make_dataset("tc", ingest::parse_classification_tsv("a\tb\n", true));
    CHECK(code_of([&] { analysis::bias_analysis({&d1, &tc}, {}); }) == "TaskMismatch");
    CHECK(code_of([&] { analysis::bias_analysis({&d1, &d1}, {}); }) == "DuplicateDataset");
  }

  TEST_CASE("error cases: all, bucket, common, unique") {
    const Dataset d = ingest::make_dataset("d", ingest::parse_conll(kGold, {0, 1, std::nullopt}));
    const auto a = ingest::make_system("a", "A", ingest::parse_conll(kSysA), d);
    const auto b = ingest::make_system("b", "B", ingest::parse_conll(kSysB), d);

    const auto all_a = analysis::error_cases({&a}, d, analysis::ErrorSelector::all());
    REQUIRE(all_a.size() == 3);
    CHECK(all_a[0].sample_id == 0);
    CHECK(all_a[0].kind == analysis::ErrorKind::Missed);
    CHECK(all_a[0].gold == "LOC");
    CHECK(all_a[0].predicted[0].second == "O");
    CHECK(all_a[0].context == "John Smith visited Paris");
    CHECK(all_a[1].kind == analysis::ErrorKind::Spurious);
    CHECK(all_a[1].predicted[0].second == "MISC");
    CHECK(all_a[2].span->start == 2);

    const auto per = analysis::error_cases({&a}, d, analysis::ErrorSelector::in_bucket("eLab|PER"));
    REQUIRE(per.size() == 1);
    CHECK(per[0].gold == "PER");
    CHECK(analysis::error_cases({&a}, d, analysis::ErrorSelector::in_bucket("eLen|(-inf,1]")).size() == 3);
    CHECK(code_of([&] {
            analysis::error_cases({&a}, d, analysis::ErrorSelector::in_bucket("eLen|(7,9]"));
          }) == "UnknownBucket");
    CHECK(code_of([&] { analysis::error_cases({&a}, d, analysis::ErrorSelector::in_bucket("nope")); }) ==
          "UnknownBucket");

    const auto common = analysis::error_cases({&a, &b}, d, analysis::ErrorSelector::common());
    REQUIRE(common.size() == 1);
    CHECK(common[0].span->label == "PER");
    CHECK(common[0].predicted.size() == 2);

    const auto unique = analysis::error_cases({&a, &b}, d, analysis::ErrorSelector::unique());
    REQUIRE(unique.size() == 2);
    CHECK(unique[0].kind == analysis::ErrorKind::Spurious);
    CHECK(*unique[0].span == Span{0, 0, "PER"});
    CHECK(unique[1].kind == analysis::ErrorKind::Missed);
    CHECK(*unique[1].span == Span{0, 1, "PER"});
    CHECK(unique[1].predicted[0].second == "PER");
    CHECK(unique[1].predicted[1].second == "PER[0,0]");

    CHECK(code_of([&] { analysis::error_cases({&a}, d, analysis::ErrorSelector::common()); }) ==
          "NeedTwoOrMoreSystems");
    CHECK(code_of([&] { analysis::error_cases({&a}, d, analysis::ErrorSelector::unique()); }) ==
          "NeedTwoSystems");
    CHECK(code_of([&] { analysis::error_cases({}, d, analysis::ErrorSelector::all()); }) ==
          "NeedOneSystem");
  }

  TEST_CASE("property: adding a system never grows the common-error set") {
    fixture::Rng rng(43);
    for (int i = 0; i < 40; ++i) {
      const Dataset d = fixture::labeling_dataset(rng, fixture::uniform(rng, 1, 20), 10);
      std::vector<SystemOutput> systems;
      for (int k = 0; k < 4; ++k) systems.push_back(fixture::labeling_system(rng, d, 0.4, false, "s" + std::to_string(k)));
      auto keys = [&](std::size_t count) {
        std::vector<const SystemOutput*> ptrs;
        for (std::size_t k = 0; k < count; ++k) ptrs.push_back(&systems[k]);
        std::set<std::tuple<std::size_t, std::size_t, std::size_t, std::string, int>> out;
        for (const auto& e : analysis::error_cases(ptrs, d, analysis::ErrorSelector::common())) {
          out.insert({e.sample_id, e.span->start, e.span->end, e.span->label, static_cast<int>(e.kind)});
        }
        return out;
      };
      const auto c2 = keys(2), c3 = keys(3), c4 = keys(4);
      CHECK(std::includes(c2.begin(), c2.end(), c3.begin(), c3.end()));
      CHECK(std::includes(c3.begin(), c3.end(), c4.begin(), c4.end()));
    }
  }

  TEST_CASE("classification contexts are truncated to 256 code points") {
    std::string text;
    for (int i = 0; i < 300; ++i) text += "\xC3\xA9";
    Dataset d;
    d.id = "d";
    d.task = TaskKind::TextClassification;
    d.samples.push_back({0, ClassificationSample{text, "a"}});
    SystemOutput s{"s", "s", d.task, {{0, ClassificationPrediction{"b", std::nullopt}}}};
    const auto cases = analysis::error_cases({&s}, d, analysis::ErrorSelector::all());
    REQUIRE(cases.size() == 1);
    CHECK(cases[0].context.size() == 512);
    CHECK(cases[0].kind == analysis::ErrorKind::Misclassified);
  }

  TEST_CASE("confidence intervals contain the point value and are reproducible") {
    fixture::Rng rng(44);
    const Dataset d = fixture::labeling_dataset(rng, 200, 12);
    const auto s = fixture::labeling_system(rng, d, 0.2);
    analysis::AnalysisOptions o;
    o.bootstrap.replicates = 200;
    o.bootstrap.seed = 7;
    const auto r1 = analysis::single_analysis(s, d, o);
    const auto r2 = analysis::single_analysis(s, d, o);
    CHECK(*r1.overall.ci_low <= *r1.overall.value);
    CHECK(*r1.overall.value <= *r1.overall.ci_high);
    CHECK(r1.overall.ci_low == r2.overall.ci_low);
    for (std::size_t a = 0; a < r1.per_attribute.size(); ++a) {
      for (std::size_t b = 0; b < r1.per_attribute[a].buckets.size(); ++b) {
        const auto& x = r1.per_attribute[a].buckets[b];
        CHECK(x.ci_low == r2.per_attribute[a].buckets[b].ci_low);
        CHECK(x.ci_high == r2.per_attribute[a].buckets[b].ci_high);
        if (x.value) {
          CHECK(*x.ci_low <= *x.value);
          CHECK(*x.value <= *x.ci_high);
        }
      }
    }
  }

  TEST_CASE("timestamps honour SOURCE_DATE_EPOCH") {
    setenv("SOURCE_DATE_EPOCH", "86400", 1);
    CHECK(analysis::current_timestamp() == "1970-01-02T00:00:00Z");
    unsetenv("SOURCE_DATE_EPOCH");
  }
}
