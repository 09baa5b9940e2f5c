#include "fineval/cli.hpp"

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <ostream>

#include "CLI11.hpp"
#include "fineval/analysis.hpp"
#include "fineval/bio.hpp"
#include "fineval/canonical_json.hpp"
#include "fineval/combination.hpp"
#include "fineval/error.hpp"
#include "fineval/http_api.hpp"
#include "fineval/ingest.hpp"
#include "fineval/registry.hpp"
#include "fineval/reliability.hpp"
#include "fineval/report_json.hpp"

namespace fineval::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct ReportFlags {
  std::string task;
  std::string dataset;
  std::string dataset_id;
  std::vector<std::string> systems;
  std::string train;
  std::string attrs;
  std::string columns;
  std::string out;
  std::size_t replicates = 1000;
  std::uint64_t seed = 0;
  double level = 0.95;
  bool no_ci = false;
  bool strict = false;
};

std::string stem(const std::string& path) { return fs::path(path).stem().string(); }

ingest::ConllColumns parse_columns(const std::string& text) {
  ingest::ConllColumns columns;
  if (text.empty()) return columns;
  const auto parts = service::split_list(text);
  if (parts.size() < 2 || parts.size() > 3) {
    throw Error("BadColumns", "--columns takes token,gold[,pred] column indices");
  }
  std::vector<std::size_t> indices;
  for (const auto& p : parts) {
    std::size_t v = 0;
    const auto [end, ec] = std::from_chars(p.data(), p.data() + p.size(), v);
    if (ec != std::errc() || end != p.data() + p.size()) {
      throw Error("BadColumns", "column index '" + p + "' is not a number");
    }
    indices.push_back(v);
  }
  columns.token = indices[0];
  columns.gold = indices[1];
  columns.pred = indices.size() == 3 ? std::optional<std::size_t>(indices[2]) : std::nullopt;
  return columns;
}

// Re-raises an ingest error with the offending path in its message.
template <typename Fn>
auto with_path(const std::string& path, Fn fn) {
  try {
    return fn();
  } catch (const NotFound&) {
    throw;
  } catch (const Error& e) {
    throw Error(e.code(), path + ": " + e.detail(), e.line());
  }
}

struct Inputs {
  Dataset dataset;
  std::vector<SystemOutput> systems;

  std::vector<const SystemOutput*> pointers() const {
    std::vector<const SystemOutput*> out;
    for (const auto& s : systems) out.push_back(&s);
    return out;
  }
};

Inputs load_inputs(const ReportFlags& flags) {
  const TaskKind task = parse_task_kind(flags.task);
  const ingest::ConllColumns columns = parse_columns(flags.columns);
  Inputs inputs;
  if (!flags.dataset.empty()) {
    const auto parsed = with_path(flags.dataset, [&] {
      return ingest::parse_file(task, ingest::read_file(flags.dataset), true,
                                {columns.token, columns.gold, std::nullopt});
    });
    inputs.dataset = ingest::make_dataset(
        flags.dataset_id.empty() ? stem(flags.dataset) : flags.dataset_id, parsed);
  } else {
    if (task == TaskKind::ScoredGeneration) {
      throw Error("MissingDataset", "score files carry no references; pass --dataset");
    }
    auto parsed = with_path(flags.systems.front(), [&] {
      return ingest::parse_file(task, ingest::read_file(flags.systems.front()), false, columns);
    });
    parsed.predictions.clear();
    inputs.dataset = ingest::make_dataset(
        flags.dataset_id.empty() ? stem(flags.systems.front()) : flags.dataset_id,
        std::move(parsed));
  }
  if (!flags.train.empty()) {
    inputs.dataset.train = with_path(flags.train, [&] {
      return ingest::build_train_stats(ingest::read_file(flags.train), flags.train);
    });
  }
  for (const auto& path : flags.systems) {
    SystemOutput system = with_path(path, [&] {
      auto parsed = ingest::parse_file(task, ingest::read_file(path), false, columns);
      return ingest::make_system("", stem(path), std::move(parsed), inputs.dataset);
    });
    system.id = combination::content_id(system, inputs.dataset);
    inputs.systems.push_back(std::move(system));
  }
  return inputs;
}

analysis::AnalysisOptions options_from(const ReportFlags& flags) {
  analysis::AnalysisOptions options;
  options.attributes = service::split_list(flags.attrs);
  options.bootstrap.replicates = flags.replicates;
  options.bootstrap.seed = flags.seed;
  options.bootstrap.confidence_level = flags.level;
  options.confidence_intervals = !flags.no_ci;
  options.strict = flags.strict;
  return options;
}

void emit(const json& body, const std::string& out_path, std::ostream& out) {
  const std::string text = canonical_dump(body) + "\n";
  if (out_path.empty()) {
    out << text;
    out.flush();
    return;
  }
  std::ofstream file(out_path, std::ios::binary | std::ios::trunc);
  file << text;
  if (!file) throw Error("IoError", "cannot write " + out_path);
}

void add_report_flags(CLI::App* cmd, ReportFlags& flags, bool bootstrap) {
  cmd->add_option("--task", flags.task, "classification, ner, chunking, generation, ...")
      ->required();
  cmd->add_option("--dataset", flags.dataset,
                  "gold file; defaults to the gold columns of the first system file");
  cmd->add_option("--dataset-id", flags.dataset_id, "dataset id (default: file stem)");
  cmd->add_option("--train", flags.train, "gold CoNLL training file for eFreq");
  cmd->add_option("--attrs", flags.attrs, "comma-separated attributes (default: all)");
  cmd->add_option("--columns", flags.columns, "CoNLL columns token,gold[,pred] (default 0,1,2)");
  cmd->add_option("--out", flags.out, "write JSON here instead of stdout");
  cmd->add_flag("--strict", flags.strict, "fail on orphan I- tags and missing training stats");
  if (bootstrap) {
    cmd->add_option("--bootstrap-b", flags.replicates, "bootstrap replicates")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--seed", flags.seed, "bootstrap seed");
    cmd->add_option("--confidence-level", flags.level, "interval coverage")
        ->check(CLI::Range(0.0, 1.0));
    cmd->add_flag("--no-ci", flags.no_ci, "skip confidence intervals");
  }
}

std::string default_root() {
  const char* env = std::getenv("FINEVAL_ROOT");
  return env && *env ? env : "fineval-registry";
}

json validate_file(const std::string& task_name, const std::string& path, bool gold_only,
                   const std::string& columns_text, bool strict) {
  const TaskKind task = parse_task_kind(task_name);
  const auto columns = parse_columns(columns_text);
  return with_path(path, [&] {
    const auto parsed = ingest::parse_file(task, ingest::read_file(path), gold_only, columns);
    std::size_t orphan_repairs = 0;
    if (task == TaskKind::SequenceLabeling) {
      auto check = [&](const std::vector<std::string>& tags) {
        if (strict) extract_spans(tags, BioMode::Strict);
        const auto repaired = repair_bio(tags);
        for (std::size_t i = 0; i < tags.size(); ++i) orphan_repairs += tags[i] != repaired[i];
      };
      for (const auto& s : parsed.samples) check(s.labeling().gold_tags);
      for (const auto& p : parsed.predictions) check(p.labeling().tags);
    }
    return json{{"valid", true},
                {"file", path},
                {"taskKind", to_string(task)},
                {"samples", parsed.samples.size()},
                {"predictions", parsed.predictions.size()},
                {"droppedEmptySentences", parsed.dropped_empty_sentences},
                {"orphanInsideTags", orphan_repairs}};
  });
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"fineval: fine-grained evaluation of NLP system outputs"};
  app.name("fineval");
  app.require_subcommand(1);

  // validate
  std::string v_task, v_file, v_columns;
  bool v_gold_only = false, v_strict = false;
  auto* validate = app.add_subcommand("validate", "check that a file parses");
  validate->add_option("task", v_task, "task kind")->required();
  validate->add_option("file", v_file, "input file")->required();
  validate->add_flag("--gold-only", v_gold_only, "file has no prediction column");
  validate->add_option("--columns", v_columns, "CoNLL columns token,gold[,pred]");
  validate->add_flag("--strict", v_strict, "reject orphan I- tags");

  ReportFlags single_flags;
  auto* single = app.add_subcommand("single", "bucketed analysis of one system");
  add_report_flags(single, single_flags, true);
  single->add_option("--system,-s", single_flags.systems, "system output file")
      ->required()
      ->expected(1);

  ReportFlags pair_flags;
  auto* pair = app.add_subcommand("pair", "bucketwise gap between two systems (A - B)");
  add_report_flags(pair, pair_flags, false);
  pair->add_option("--system,-s", pair_flags.systems, "system A, then system B")
      ->required()
      ->expected(2);

  ReportFlags combine_flags;
  std::string write_system;
  auto* combine = app.add_subcommand("combine", "plurality-vote combination of systems");
  add_report_flags(combine, combine_flags, true);
  combine->add_option("--system,-s", combine_flags.systems, "member system files")
      ->required()
      ->expected(2, 1 << 20);
  combine->add_option("--write-system", write_system, "also write the combined output file");

  std::string b_task, b_attrs, b_out;
  std::vector<std::string> b_datasets, b_trains;
  bool b_strict = false;
  auto* bias = app.add_subcommand("bias", "attribute distributions across datasets");
  bias->add_option("--task", b_task)->required();
  bias->add_option("--dataset", b_datasets, "gold files")->required()->expected(1, 1 << 20);
  bias->add_option("--train", b_trains, "training file per dataset, in --dataset order");
  bias->add_option("--attrs", b_attrs);
  bias->add_option("--out", b_out);
  bias->add_flag("--strict", b_strict);

  ReportFlags cal_flags;
  std::size_t bins = 10;
  auto* calibrate = app.add_subcommand("calibrate", "reliability diagram and ECE");
  cal_flags.task = "classification";
  calibrate->add_option("--task", cal_flags.task);
  calibrate->add_option("--dataset", cal_flags.dataset);
  calibrate->add_option("--system,-s", cal_flags.systems)->required()->expected(1);
  calibrate->add_option("--bins", bins)->check(CLI::PositiveNumber);
  calibrate->add_option("--out", cal_flags.out);

  ReportFlags err_flags;
  std::string err_mode = "all", err_bucket;
  std::size_t page = 1, page_size = 0;
  auto* errors = app.add_subcommand("errors", "mispredicted units of one or more systems");
  add_report_flags(errors, err_flags, false);
  errors->add_option("--system,-s", err_flags.systems)->required()->expected(1, 1 << 20);
  errors->add_option("--mode", err_mode, "all, bucket, common or unique")
      ->check(CLI::IsMember({"all", "bucket", "common", "unique"}));
  errors->add_option("--bucket", err_bucket, "bucket address, e.g. 'eLen|(3,+inf)'");
  errors->add_option("--page", page)->check(CLI::PositiveNumber);
  errors->add_option("--page-size", page_size, "0 returns every case");

  std::string root = default_root(), host = "127.0.0.1", static_dir;
  int port = 8080;
  auto* serve = app.add_subcommand("serve", "run the HTTP API");
  serve->add_option("--root", root, "registry directory (env FINEVAL_ROOT)");
  serve->add_option("--host", host);
  serve->add_option("--port", port)->check(CLI::Range(0, 65535));
  serve->add_option("--static", static_dir, "directory of UI assets served at /");

  auto* registry = app.add_subcommand("registry", "manage the on-disk registry");
  registry->require_subcommand(1);
  registry->add_option("--root", root, "registry directory (env FINEVAL_ROOT)");
  std::string r_id, r_task, r_file, r_train, r_dataset, r_name, r_submitter, r_columns;
  auto* add_dataset = registry->add_subcommand("add-dataset", "register a gold dataset");
  add_dataset->add_option("--id", r_id)->required();
  add_dataset->add_option("--task", r_task)->required();
  add_dataset->add_option("--file", r_file)->required();
  add_dataset->add_option("--train", r_train);
  auto* add_system = registry->add_subcommand("add-system", "submit a system output");
  add_system->add_option("--dataset", r_dataset)->required();
  add_system->add_option("--file", r_file)->required();
  add_system->add_option("--name", r_name)->required();
  add_system->add_option("--submitter", r_submitter);
  add_system->add_option("--columns", r_columns);
  auto* list = registry->add_subcommand("list", "datasets and the leaderboard");
  list->add_option("--dataset", r_dataset, "only systems of this dataset");

  std::vector<const char*> argv{"fineval"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, err);
    return kOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kUsage;
  }

  try {
    if (*validate) {
      emit(validate_file(v_task, v_file, v_gold_only, v_columns, v_strict), "", out);
    } else if (*single) {
      const Inputs in = load_inputs(single_flags);
      emit(service::to_json(
               analysis::single_analysis(in.systems[0], in.dataset, options_from(single_flags))),
           single_flags.out, out);
    } else if (*pair) {
      const Inputs in = load_inputs(pair_flags);
      auto options = options_from(pair_flags);
      options.confidence_intervals = false;
      emit(service::to_json(
               analysis::pair_analysis(in.systems[0], in.systems[1], in.dataset, options)),
           pair_flags.out, out);
    } else if (*combine) {
      const Inputs in = load_inputs(combine_flags);
      combination::CombinedSystem combined;
      const auto report = combination::combined_report(in.pointers(), in.dataset,
                                                       options_from(combine_flags), &combined);
      if (!write_system.empty()) {
        service::write_atomically(write_system, ingest::serialize(in.dataset.task, in.dataset.samples,
                                                                  combined.output.predictions));
      }
      emit(service::combine_json(report, combined), combine_flags.out, out);
    } else if (*bias) {
      const TaskKind task = parse_task_kind(b_task);
      if (!b_trains.empty() && b_trains.size() != b_datasets.size()) {
        throw Error("BadTrainList", "give one --train per --dataset or none");
      }
      std::vector<Dataset> datasets;
      for (std::size_t i = 0; i < b_datasets.size(); ++i) {
        const auto& path = b_datasets[i];
        Dataset d = with_path(path, [&] {
          return ingest::make_dataset(
              stem(path), ingest::parse_file(task, ingest::read_file(path), true, {0, 1, std::nullopt}));
        });
        if (!b_trains.empty()) {
          d.train = ingest::build_train_stats(ingest::read_file(b_trains[i]), b_trains[i]);
        }
        datasets.push_back(std::move(d));
      }
      std::vector<const Dataset*> ptrs;
      for (const auto& d : datasets) ptrs.push_back(&d);
      emit(service::to_json(analysis::bias_analysis(ptrs, service::split_list(b_attrs), b_strict)),
           b_out, out);
    } else if (*calibrate) {
      const Inputs in = load_inputs(cal_flags);
      emit(service::calibration_json(reliability::calibration(in.systems[0], in.dataset, bins),
                                     in.systems[0].id, in.dataset.id),
           cal_flags.out, out);
    } else if (*errors) {
      const Inputs in = load_inputs(err_flags);
      analysis::ErrorSelector selector;
      if (err_mode == "bucket" || (!err_bucket.empty() && err_mode == "all")) {
        if (err_bucket.empty()) throw Error("UnknownBucket", "--mode bucket needs --bucket");
        selector = analysis::ErrorSelector::in_bucket(err_bucket);
      } else if (err_mode == "common") {
        selector = analysis::ErrorSelector::common();
      } else if (err_mode == "unique") {
        selector = analysis::ErrorSelector::unique();
      }
      const auto cases = analysis::error_cases(in.pointers(), in.dataset, selector, err_flags.strict);
      emit(service::error_page(cases, page, page_size), err_flags.out, out);
    } else if (*serve) {
      service::Registry reg(root);
      service::ApiServer server(reg, static_dir.empty() ? std::nullopt
                                                        : std::optional<std::string>(static_dir));
      const int bound = server.bind(host, port);
      err << "fineval: serving " << root << " on http://" << host << ":" << bound << "/api/v1\n";
      server.run();
    } else if (*registry) {
      service::Registry reg(root);
      if (*add_dataset) {
        std::optional<std::string> train;
        if (!r_train.empty()) train = ingest::read_file(r_train);
        const auto record = with_path(r_file, [&] {
          return reg.add_dataset(r_id, parse_task_kind(r_task), ingest::read_file(r_file),
                                 train ? std::optional<std::string_view>(*train) : std::nullopt);
        });
        emit(service::to_json(record), "", out);
      } else if (*add_system) {
        service::SystemSubmission submission{r_name, r_dataset, std::nullopt};
        if (!r_submitter.empty()) submission.submitter = r_submitter;
        const auto result = with_path(r_file, [&] {
          return reg.submit_system(submission, ingest::read_file(r_file), parse_columns(r_columns));
        });
        emit(json{{"id", result.record.id},
                  {"duplicate", result.duplicate},
                  {"record", service::to_json(result.record)}},
             "", out);
      } else if (*list) {
        json datasets = json::array();
        for (const auto& d : reg.datasets()) datasets.push_back(service::to_json(d));
        json systems = json::array();
        for (const auto& s :
             reg.systems(r_dataset.empty() ? std::nullopt : std::optional<std::string>(r_dataset))) {
          systems.push_back(service::to_json(s));
        }
        emit(json{{"datasets", std::move(datasets)}, {"systems", std::move(systems)}}, "", out);
      }
    }
  } catch (const Error& e) {
    err << "fineval: error: " << e.what() << "\n";
    return kFailed;
  } catch (const std::exception& e) {
    err << "fineval: error: InternalError: " << e.what() << "\n";
    return kFailed;
  }
  return kOk;
}

}  // namespace fineval::cli
