#ifndef FINEVAL_REGISTRY_HPP
#define FINEVAL_REGISTRY_HPP

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "fineval/combination.hpp"
#include "fineval/ingest.hpp"
#include "fineval/types.hpp"
#include "json.hpp"

namespace fineval::service {

struct DatasetRecord {
  std::string id;
  TaskKind task = TaskKind::TextClassification;
  std::size_t sample_count = 0;
  bool has_train = false;
  std::string content_hash;
  std::string created_at;
};

struct SystemRecord {
  std::string id;  // SHA-256 of the canonical output file
  std::string name;
  TaskKind task = TaskKind::TextClassification;
  std::string dataset_id;
  std::optional<std::string> submitter;
  std::string created_at;
  std::string output_file;  // relative to the registry root
  std::string metric_name;
  std::optional<double> overall_value;
  std::string kind = "submitted";  // or "combined"
  std::vector<std::string> member_ids;
};

nlohmann::json to_json(const DatasetRecord& record);
nlohmann::json to_json(const SystemRecord& record);
DatasetRecord dataset_record_from_json(const nlohmann::json& j);
SystemRecord system_record_from_json(const nlohmann::json& j);

struct SystemSubmission {
  std::string name;
  std::string dataset_id;
  std::optional<std::string> submitter;
};

struct SubmitResult {
  SystemRecord record;
  bool duplicate = false;
};

// On-disk registry:
//   <root>/datasets/<id>/{data.<ext>, train.conll, meta.json}
//   <root>/systems/<sha256>/{output.<ext>, meta.json}
//   <root>/reports/<config hash>.json
// Writers are serialized; readers run concurrently. Every file is written to a
// temporary name and renamed into place.
class Registry {
 public:
  explicit Registry(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }

  // Errors: InvalidDatasetId, DuplicateDataset (same id, different content),
  // ValidationFailed.
  DatasetRecord add_dataset(const std::string& id, TaskKind task, std::string_view bytes,
                            std::optional<std::string_view> train_bytes = std::nullopt,
                            const ingest::ConllColumns& columns = {0, 1, std::nullopt});

  // Errors: UnknownDataset (404), ValidationFailed, SampleCountMismatch,
  // GoldMismatch, TagLengthMismatch, UnknownSourceId.
  SubmitResult submit_system(const SystemSubmission& submission, std::string_view bytes,
                             const ingest::ConllColumns& columns = {});

  SubmitResult add_combined(const combination::CombinedSystem& combined,
                            const std::string& dataset_id);

  std::vector<DatasetRecord> datasets(std::optional<TaskKind> task = std::nullopt) const;
  // Leaderboard order: overall value descending (nulls last), ties by id.
  std::vector<SystemRecord> systems(std::optional<std::string> dataset_id = std::nullopt) const;

  // Throw NotFound (UnknownDataset / UnknownSystem).
  DatasetRecord dataset_record(const std::string& id) const;
  SystemRecord system_record(const std::string& id) const;
  std::shared_ptr<const Dataset> dataset(const std::string& id) const;
  std::shared_ptr<const SystemOutput> system(const std::string& id) const;

  std::optional<std::string> cached_report(const std::string& key) const;
  void store_report(const std::string& key, const std::string& body);
  // Hex digest of a canonical config object; callers include everything the
  // report depends on, engine version included.
  static std::string report_key(const nlohmann::json& config);

 private:
  void load();
  SubmitResult store_system(SystemRecord record, const std::string& canonical_bytes);

  std::filesystem::path root_;
  std::mutex write_mutex_;
  mutable std::shared_mutex state_mutex_;
  std::map<std::string, DatasetRecord> datasets_;
  std::map<std::string, SystemRecord> systems_;
  mutable std::mutex load_mutex_;
  mutable std::map<std::string, std::shared_ptr<const Dataset>> loaded_datasets_;
  mutable std::map<std::string, std::shared_ptr<const SystemOutput>> loaded_systems_;
  mutable std::map<std::string, std::string> reports_;
};

// Writes `bytes` to a sibling temporary file, then renames it over `path`.
void write_atomically(const std::filesystem::path& path, std::string_view bytes);

}  // namespace fineval::service

#endif  // FINEVAL_REGISTRY_HPP
