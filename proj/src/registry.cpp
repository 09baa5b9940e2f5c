#include "fineval/registry.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <regex>
#include <unistd.h>

#include "fineval/analysis.hpp"
#include "fineval/canonical_json.hpp"
#include "fineval/error.hpp"
#include "fineval/hash.hpp"
#include "fineval/metrics.hpp"

namespace fineval::service {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::string_view kParseCodes[] = {"MalformedTag",   "OrphanInside",     "BadColumnCount",
                                            "BadConfidence",  "MixedConfidence",  "EmptyFile",
                                            "ColumnOutOfRange", "BadScore",       "DuplicateSourceId"};

bool is_parse_error(const Error& e) {
  return std::find(std::begin(kParseCodes), std::end(kParseCodes), e.code()) != std::end(kParseCodes);
}

ingest::ParsedFile parse_or_fail(TaskKind task, std::string_view bytes, bool gold_only,
                                 const ingest::ConllColumns& columns) {
  try {
    return ingest::parse_file(task, bytes, gold_only, columns);
  } catch (const Error& e) {
    if (!is_parse_error(e)) throw;
    throw Error("ValidationFailed", e.what(), e.line());
  }
}

std::string data_file_name(TaskKind task) {
  return "data." + std::string(ingest::file_extension(ingest::format_for(task)));
}

std::string output_file_name(TaskKind task) {
  return "output." + std::string(ingest::file_extension(ingest::format_for(task)));
}

void write_json(const fs::path& path, const json& value) {
  write_atomically(path, value.dump(2) + "\n");
}

json read_json(const fs::path& path) { return json::parse(ingest::read_file(path.string())); }

void check_dataset_id(const std::string& id) {
  static const std::regex pattern("[A-Za-z0-9][A-Za-z0-9._-]{0,127}");
  if (!std::regex_match(id, pattern)) {
    throw Error("InvalidDatasetId",
                "dataset ids use letters, digits, '.', '_' and '-', starting alphanumeric");
  }
}

bool leaderboard_before(const SystemRecord& a, const SystemRecord& b) {
  if (a.overall_value.has_value() != b.overall_value.has_value()) return a.overall_value.has_value();
  if (a.overall_value && *a.overall_value != *b.overall_value) {
    return *a.overall_value > *b.overall_value;
  }
  return a.id < b.id;
}

}  // namespace

void write_atomically(const fs::path& path, std::string_view bytes) {
  static std::atomic<unsigned> counter{0};
  fs::create_directories(path.parent_path());
  fs::path temp = path;
  temp += ".tmp-" + std::to_string(::getpid()) + "-" + std::to_string(counter++);
  {
    std::ofstream out(temp, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw Error("IoError", "cannot write " + temp.string());
  }
  fs::rename(temp, path);
}

json to_json(const DatasetRecord& r) {
  return {{"id", r.id},
          {"taskKind", to_string(r.task)},
          {"sampleCount", r.sample_count},
          {"hasTrain", r.has_train},
          {"contentHash", r.content_hash},
          {"createdAt", r.created_at}};
}

json to_json(const SystemRecord& r) {
  return {{"id", r.id},
          {"name", r.name},
          {"taskKind", to_string(r.task)},
          {"datasetId", r.dataset_id},
          {"submitter", r.submitter ? json(*r.submitter) : json(nullptr)},
          {"createdAt", r.created_at},
          {"outputFile", r.output_file},
          {"metricName", r.metric_name},
          {"overallValue", r.overall_value ? json(*r.overall_value) : json(nullptr)},
          {"kind", r.kind},
          {"memberIds", r.member_ids}};
}

DatasetRecord dataset_record_from_json(const json& j) {
  DatasetRecord r;
  r.id = j.at("id").get<std::string>();
  r.task = parse_task_kind(j.at("taskKind").get<std::string>());
  r.sample_count = j.at("sampleCount").get<std::size_t>();
  r.has_train = j.at("hasTrain").get<bool>();
  r.content_hash = j.at("contentHash").get<std::string>();
  r.created_at = j.at("createdAt").get<std::string>();
  return r;
}

SystemRecord system_record_from_json(const json& j) {
  SystemRecord r;
  r.id = j.at("id").get<std::string>();
  r.name = j.at("name").get<std::string>();
  r.task = parse_task_kind(j.at("taskKind").get<std::string>());
  r.dataset_id = j.at("datasetId").get<std::string>();
  if (!j.at("submitter").is_null()) r.submitter = j.at("submitter").get<std::string>();
  r.created_at = j.at("createdAt").get<std::string>();
  r.output_file = j.at("outputFile").get<std::string>();
  r.metric_name = j.at("metricName").get<std::string>();
  if (!j.at("overallValue").is_null()) r.overall_value = j.at("overallValue").get<double>();
  r.kind = j.at("kind").get<std::string>();
  r.member_ids = j.at("memberIds").get<std::vector<std::string>>();
  return r;
}

Registry::Registry(fs::path root) : root_(std::move(root)) {
  fs::create_directories(root_ / "datasets");
  fs::create_directories(root_ / "systems");
  fs::create_directories(root_ / "reports");
  load();
}

void Registry::load() {
  for (const auto& entry : fs::directory_iterator(root_ / "datasets")) {
    const fs::path meta = entry.path() / "meta.json";
    if (entry.is_directory() && fs::exists(meta)) {
      DatasetRecord r = dataset_record_from_json(read_json(meta));
      datasets_[r.id] = std::move(r);
    }
  }
  for (const auto& entry : fs::directory_iterator(root_ / "systems")) {
    const fs::path meta = entry.path() / "meta.json";
    if (entry.is_directory() && fs::exists(meta)) {
      SystemRecord r = system_record_from_json(read_json(meta));
      systems_[r.id] = std::move(r);
    }
  }
}

DatasetRecord Registry::add_dataset(const std::string& id, TaskKind task, std::string_view bytes,
                                    std::optional<std::string_view> train_bytes,
                                    const ingest::ConllColumns& columns) {
  check_dataset_id(id);
  ingest::ParsedFile parsed = parse_or_fail(task, bytes, true, columns);
  std::optional<std::string> train;
  if (train_bytes) {
    if (task != TaskKind::SequenceLabeling) {
      throw Error("ValidationFailed", "training statistics apply to sequence labeling only");
    }
    try {
      ingest::build_train_stats(*train_bytes);
    } catch (const Error& e) {
      throw Error("ValidationFailed", std::string("training file: ") + e.what(), e.line());
    }
    train = std::string(*train_bytes);
  }
  const std::string canonical = ingest::serialize(task, parsed.samples, {});
  const std::string hash = sha256_hex(canonical + "\n" + (train ? sha256_hex(*train) : ""));

  std::lock_guard writer(write_mutex_);
  {
    std::shared_lock lock(state_mutex_);
    if (auto it = datasets_.find(id); it != datasets_.end()) {
      if (it->second.content_hash == hash && it->second.task == task) return it->second;
      throw Error("DuplicateDataset", "dataset '" + id + "' already exists with other content");
    }
  }
  DatasetRecord record;
  record.id = id;
  record.task = task;
  record.sample_count = parsed.samples.size();
  record.has_train = train.has_value();
  record.content_hash = hash;
  record.created_at = analysis::current_timestamp();

  const fs::path dir = root_ / "datasets" / id;
  write_atomically(dir / data_file_name(task), canonical);
  if (train) write_atomically(dir / "train.conll", *train);
  write_json(dir / "meta.json", to_json(record));

  std::unique_lock lock(state_mutex_);
  datasets_[id] = record;
  return record;
}

SubmitResult Registry::submit_system(const SystemSubmission& submission, std::string_view bytes,
                                     const ingest::ConllColumns& columns) {
  const DatasetRecord dataset_meta = dataset_record(submission.dataset_id);
  const auto dataset_ptr = dataset(submission.dataset_id);
  ingest::ParsedFile parsed = parse_or_fail(dataset_meta.task, bytes, false, columns);
  SystemOutput output = ingest::make_system("", submission.name, std::move(parsed), *dataset_ptr);
  check_compatible(output, *dataset_ptr);

  const std::string canonical =
      ingest::serialize(dataset_ptr->task, dataset_ptr->samples, output.predictions);
  const auto metric = metrics::metric_for(dataset_ptr->task);

  SystemRecord record;
  record.id = sha256_hex(canonical);
  record.name = submission.name;
  record.task = dataset_ptr->task;
  record.dataset_id = dataset_ptr->id;
  record.submitter = submission.submitter;
  record.metric_name = std::string(metrics::metric_name(metric));
  output.id = record.id;
  record.overall_value = metrics::value(metric, metrics::score_system(output, *dataset_ptr).overall());
  return store_system(std::move(record), canonical);
}

SubmitResult Registry::add_combined(const combination::CombinedSystem& combined,
                                    const std::string& dataset_id) {
  const auto dataset_ptr = dataset(dataset_id);
  const std::string canonical =
      ingest::serialize(dataset_ptr->task, dataset_ptr->samples, combined.output.predictions);
  const auto metric = metrics::metric_for(dataset_ptr->task);
  SystemRecord record;
  record.id = sha256_hex(canonical);
  record.name = combined.output.name;
  record.task = dataset_ptr->task;
  record.dataset_id = dataset_id;
  record.metric_name = std::string(metrics::metric_name(metric));
  record.overall_value =
      metrics::value(metric, metrics::score_system(combined.output, *dataset_ptr).overall());
  record.kind = "combined";
  record.member_ids = combined.member_ids;
  return store_system(std::move(record), canonical);
}

SubmitResult Registry::store_system(SystemRecord record, const std::string& canonical_bytes) {
  std::lock_guard writer(write_mutex_);
  {
    std::shared_lock lock(state_mutex_);
    if (auto it = systems_.find(record.id); it != systems_.end()) return {it->second, true};
  }
  record.created_at = analysis::current_timestamp();
  const std::string file = output_file_name(record.task);
  record.output_file = "systems/" + record.id + "/" + file;
  const fs::path dir = root_ / "systems" / record.id;
  write_atomically(dir / file, canonical_bytes);
  write_json(dir / "meta.json", to_json(record));
  std::unique_lock lock(state_mutex_);
  systems_[record.id] = record;
  return {record, false};
}

std::vector<DatasetRecord> Registry::datasets(std::optional<TaskKind> task) const {
  std::shared_lock lock(state_mutex_);
  std::vector<DatasetRecord> out;
  for (const auto& [id, r] : datasets_) {
    if (!task || r.task == *task) out.push_back(r);
  }
  return out;
}

std::vector<SystemRecord> Registry::systems(std::optional<std::string> dataset_id) const {
  std::shared_lock lock(state_mutex_);
  std::vector<SystemRecord> out;
  for (const auto& [id, r] : systems_) {
    if (!dataset_id || r.dataset_id == *dataset_id) out.push_back(r);
  }
  std::sort(out.begin(), out.end(), leaderboard_before);
  return out;
}

DatasetRecord Registry::dataset_record(const std::string& id) const {
  std::shared_lock lock(state_mutex_);
  auto it = datasets_.find(id);
  if (it == datasets_.end()) throw NotFound("UnknownDataset", "no dataset '" + id + "'");
  return it->second;
}

SystemRecord Registry::system_record(const std::string& id) const {
  std::shared_lock lock(state_mutex_);
  auto it = systems_.find(id);
  if (it == systems_.end()) throw NotFound("UnknownSystem", "no system '" + id + "'");
  return it->second;
}

std::shared_ptr<const Dataset> Registry::dataset(const std::string& id) const {
  const DatasetRecord record = dataset_record(id);
  std::lock_guard lock(load_mutex_);
  if (auto it = loaded_datasets_.find(id); it != loaded_datasets_.end()) return it->second;
  const fs::path dir = root_ / "datasets" / id;
  auto loaded = std::make_shared<Dataset>(ingest::make_dataset(
      id, ingest::parse_file(record.task, ingest::read_file((dir / data_file_name(record.task)).string()),
                             true, {0, 1, std::nullopt})));
  if (record.has_train) {
    const fs::path train = dir / "train.conll";
    loaded->train = ingest::build_train_stats(ingest::read_file(train.string()), train.string());
  }
  loaded_datasets_[id] = loaded;
  return loaded;
}

std::shared_ptr<const SystemOutput> Registry::system(const std::string& id) const {
  const SystemRecord record = system_record(id);
  const auto dataset_ptr = dataset(record.dataset_id);
  std::lock_guard lock(load_mutex_);
  if (auto it = loaded_systems_.find(id); it != loaded_systems_.end()) return it->second;
  const std::string bytes = ingest::read_file((root_ / record.output_file).string());
  auto loaded = std::make_shared<SystemOutput>(ingest::make_system(
      id, record.name, ingest::parse_file(record.task, bytes, false), *dataset_ptr));
  loaded_systems_[id] = loaded;
  return loaded;
}

std::optional<std::string> Registry::cached_report(const std::string& key) const {
  {
    std::shared_lock lock(state_mutex_);
    if (auto it = reports_.find(key); it != reports_.end()) return it->second;
  }
  const fs::path path = root_ / "reports" / (key + ".json");
  if (!fs::exists(path)) return std::nullopt;
  std::string body = ingest::read_file(path.string());
  std::unique_lock lock(state_mutex_);
  return reports_.emplace(key, std::move(body)).first->second;
}

void Registry::store_report(const std::string& key, const std::string& body) {
  std::unique_lock lock(state_mutex_);
  if (reports_.count(key)) return;
  write_atomically(root_ / "reports" / (key + ".json"), body);
  reports_.emplace(key, body);
}

std::string Registry::report_key(const json& config) { return sha256_hex(canonical_dump(config)); }

}  // namespace fineval::service
