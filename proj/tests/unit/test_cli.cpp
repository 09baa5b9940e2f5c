#include <cmath>
#include <sstream>

#include "doctest.h"
#include "fineval/cli.hpp"
#include "fineval/ingest.hpp"
#include "json.hpp"
#include "support.hpp"

using nlohmann::json;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = fineval::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

const std::string kSysA =
    "John B-PER B-PER\nSmith I-PER I-PER\nvisited O O\nParis B-LOC O\n\n"
    "IBM B-ORG B-ORG\nhired O B-MISC\nMary B-PER O\n\n";
const std::string kSysB =
    "John B-PER B-PER\nSmith I-PER O\nvisited O O\nParis B-LOC B-LOC\n\n"
    "IBM B-ORG B-ORG\nhired O O\nMary B-PER B-PER\n\n";

std::optional<double> bucket_value(const json& report, const std::string& attr, const std::string& key,
                                   const char* field = "value") {
  for (const auto& b : report["perAttribute"][attr]["buckets"]) {
    if (b["key"] == key) return b[field].is_null() ? std::nullopt : std::optional<double>(b[field].get<double>());
  }
  return std::nullopt;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("validate reports positioned errors") {
    fixture::TempDir dir;
    const auto good = dir.file("good.conll", kSysA);
    const auto bad = dir.file("bad.conll", "John B-PER B-PER\nSmith I-PER X-PER\n");
    auto ok = run({"validate", "ner", good});
    CHECK(ok.code == 0);
    CHECK(json::parse(ok.out)["samples"] == 2);
    auto fail = run({"validate", "ner", bad});
    CHECK(fail.code == 1);
    CHECK(fail.out.empty());
    CHECK(fail.err.find("MalformedTag") != std::string::npos);
    CHECK(fail.err.find("line 2") != std::string::npos);
    CHECK(fail.err.find("bad.conll") != std::string::npos);
    const auto orphan = dir.file("orphan.conll", "a O I-PER\n");
    CHECK(run({"validate", "ner", orphan}).code == 0);
    CHECK(json::parse(run({"validate", "ner", orphan}).out)["orphanInsideTags"] == 1);
    CHECK(run({"validate", "ner", orphan, "--strict"}).code == 1);
    CHECK(run({"validate", "ner", dir.path().string() + "/missing.conll"}).code == 1);
  }

  TEST_CASE("usage errors exit with 2") {
    CHECK(run({}).code == 2);
    CHECK(run({"frobnicate"}).code == 2);
    CHECK(run({"single", "--system", "x.conll"}).code == 2);
    CHECK(run({"single", "--task", "ner", "--system", "x", "--bootstrap-b", "zero"}).code == 2);
    CHECK(run({"--help"}).code == 0);
    CHECK(run({"validate", "sentiment", "x"}).code == 1);
  }

  TEST_CASE("pair gaps equal the difference of two single runs") {
    fixture::TempDir dir;
    const auto a = dir.file("a.conll", kSysA);
    const auto b = dir.file("b.conll", kSysB);
    auto single_a = run({"single", "--task", "ner", "-s", a, "--dataset-id", "toy", "--attrs", "eLen,sLen,eLab", "--no-ci"});
    auto single_b = run({"single", "--task", "ner", "-s", b, "--dataset-id", "toy", "--attrs", "eLen,sLen,eLab", "--no-ci"});
    auto pair = run({"pair", "--task", "ner", "-s", a, "-s", b, "--dataset-id", "toy", "--attrs", "eLen,sLen,eLab"});
    REQUIRE(single_a.code == 0);
    REQUIRE(pair.code == 0);
    const auto ra = json::parse(single_a.out), rb = json::parse(single_b.out), p = json::parse(pair.out);
    CHECK(p["datasetId"] == "toy");
    CHECK(p["systemA"] == ra["systemIds"][0]);
    for (const auto& [attr, series] : p["perAttribute"].items()) {
      for (const auto& bucket : series["buckets"]) {
        const auto va = bucket_value(ra, attr, bucket["key"]);
        const auto vb = bucket_value(rb, attr, bucket["key"]);
        if (va && vb) {
          // Each printed value is rounded to 5 places independently.
          CHECK(std::abs(bucket["gap"].get<double>() - (*va - *vb)) <= 1e-5 + 1e-12);
        } else {
          CHECK(bucket["gap"].is_null());
        }
      }
    }
  }

  TEST_CASE("single with a separate gold file and --out") {
    fixture::TempDir dir;
    const auto gold = dir.file("test.conll",
                               "John B-PER\nSmith I-PER\nvisited O\nParis B-LOC\n\nIBM B-ORG\nhired O\nMary B-PER\n");
    const auto a = dir.file("a.conll", kSysA);
    const auto out = (dir.path() / "report.json").string();
    setenv("SOURCE_DATE_EPOCH", "0", 1);
    auto r = run({"single", "--task", "ner", "--dataset", gold, "-s", a, "--attrs", "eLen,sLen,eLab",
                  "--bootstrap-b", "100", "--seed", "9", "--out", out});
    auto again = run({"single", "--task", "ner", "--dataset", gold, "-s", a, "--attrs", "eLen,sLen,eLab",
                      "--bootstrap-b", "100", "--seed", "9"});
    unsetenv("SOURCE_DATE_EPOCH");
    CHECK(r.code == 0);
    CHECK(r.out.empty());
    const std::string written = fineval::ingest::read_file(out);
    CHECK(written == again.out);
    const auto report = json::parse(written);
    CHECK(report["datasetId"] == "test");
    CHECK(report["generatedAt"] == "1970-01-01T00:00:00Z");
    CHECK(report["overall"]["value"] == 0.57143);
  }

  TEST_CASE("combine, errors, bias and calibrate") {
    fixture::TempDir dir;
    const auto a = dir.file("a.conll", kSysA);
    const auto b = dir.file("b.conll", kSysB);
    const auto written = (dir.path() / "comb.conll").string();
    auto comb = run({"combine", "--task", "ner", "-s", a, "-s", b, "-s", b, "--no-ci", "--write-system", written});
    REQUIRE(comb.code == 0);
    const auto c = json::parse(comb.out);
    CHECK(c["members"].size() == 3);
    CHECK(c["overall"]["value"] == json::parse(run({"single", "--task", "ner", "-s", b, "--no-ci"}).out)["overall"]["value"]);
    CHECK(run({"validate", "ner", written}).code == 0);
    CHECK(run({"combine", "--task", "ner", "-s", a}).code == 2);

    auto common = json::parse(run({"errors", "--task", "ner", "-s", a, "-s", b, "--mode", "common"}).out);
    CHECK(common["total"] == 0);
    auto all = json::parse(run({"errors", "--task", "ner", "-s", a}).out);
    CHECK(all["total"] == 3);
    CHECK(all["pageSize"] == 3);
    auto bucket = json::parse(run({"errors", "--task", "ner", "-s", a, "--bucket", "eLab|LOC"}).out);
    CHECK(bucket["total"] == 1);
    auto unknown = run({"errors", "--task", "ner", "-s", a, "--bucket", "eLab|FOO"});
    CHECK(unknown.code == 1);
    CHECK(unknown.err.find("UnknownBucket") != std::string::npos);

    const auto g1 = dir.file("d1.conll", "a B-PER\nb I-PER\n\nc O\n");
    const auto g2 = dir.file("d2.conll", "a B-PER\n");
    auto bias = json::parse(run({"bias", "--task", "ner", "--dataset", g1, "--dataset", g2, "--attrs", "eLen"}).out);
    CHECK(bias["perAttribute"]["eLen"]["order"] == json{"d1", "d2"});

    const auto clf = dir.file("clf.tsv", "good\tpos\tpos\t0.8\nbad\tneg\tpos\t0.8\n");
    auto cal = run({"calibrate", "-s", clf, "--bins", "10"});
    REQUIRE(cal.code == 0);
    CHECK(json::parse(cal.out)["ece"] == 0.3);
    CHECK(run({"calibrate", "--task", "ner", "-s", a}).code == 1);
  }

  TEST_CASE("registry subcommands persist across invocations") {
    fixture::TempDir dir;
    const std::string root = (dir.path() / "reg").string();
    const auto gold = dir.file("toy.conll", "John B-PER\nSmith I-PER\nvisited O\nParis B-LOC\n\nIBM B-ORG\nhired O\nMary B-PER\n");
    const auto a = dir.file("a.conll", kSysA);
    const auto b = dir.file("b.conll", kSysB);
    CHECK(run({"registry", "--root", root, "add-dataset", "--id", "toy", "--task", "ner", "--file", gold}).code == 0);
    auto added = run({"registry", "--root", root, "add-system", "--dataset", "toy", "--name", "A", "--file", a});
    REQUIRE(added.code == 0);
    CHECK(json::parse(added.out)["duplicate"] == false);
    CHECK(json::parse(run({"registry", "--root", root, "add-system", "--dataset", "toy", "--name", "A", "--file", a}).out)["duplicate"] == true);
    run({"registry", "--root", root, "add-system", "--dataset", "toy", "--name", "B", "--file", b});
    auto listed = json::parse(run({"registry", "--root", root, "list"}).out);
    CHECK(listed["datasets"].size() == 1);
    REQUIRE(listed["systems"].size() == 2);
    CHECK(listed["systems"][0]["name"] == "B");
    auto missing = run({"registry", "--root", root, "add-system", "--dataset", "nope", "--name", "A", "--file", a});
    CHECK(missing.code == 1);
    CHECK(missing.err.find("UnknownDataset") != std::string::npos);
    setenv("FINEVAL_ROOT", root.c_str(), 1);
    CHECK(json::parse(run({"registry", "list", "--dataset", "toy"}).out)["systems"].size() == 2);
    unsetenv("FINEVAL_ROOT");
  }
}
