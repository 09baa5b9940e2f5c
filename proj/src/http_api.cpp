#include "fineval/http_api.hpp"

#include <charconv>

#include "fineval/analysis.hpp"
#include "fineval/attributes.hpp"
#include "fineval/canonical_json.hpp"
#include "fineval/error.hpp"
#include "fineval/metrics.hpp"
#include "fineval/reliability.hpp"
#include "fineval/report_json.hpp"
#include "httplib.h"

namespace fineval::service {

using nlohmann::json;

std::vector<std::string> split_list(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t comma = text.find(',', start);
    if (comma == std::string_view::npos) comma = text.size();
    if (comma > start) out.emplace_back(text.substr(start, comma - start));
    start = comma + 1;
  }
  return out;
}

namespace {

constexpr std::size_t kDefaultPageSize = 50;

template <typename T>
T number_param(const httplib::Request& req, const char* name, T fallback) {
  if (!req.has_param(name)) return fallback;
  const std::string text = req.get_param_value(name);
  T value{};
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || end != text.data() + text.size()) {
    throw Error("BadParameter", std::string("query parameter '") + name + "' is not a valid number");
  }
  return value;
}

std::string string_param(const httplib::Request& req, const char* name) {
  if (!req.has_param(name)) {
    throw Error("BadParameter", std::string("missing query parameter '") + name + "'");
  }
  return req.get_param_value(name);
}

analysis::AnalysisOptions options_from(const httplib::Request& req) {
  analysis::AnalysisOptions options;
  if (req.has_param("attrs")) options.attributes = split_list(req.get_param_value("attrs"));
  options.bootstrap.replicates = number_param<std::size_t>(req, "b", options.bootstrap.replicates);
  options.bootstrap.seed = number_param<std::uint64_t>(req, "seed", options.bootstrap.seed);
  options.bootstrap.confidence_level =
      number_param<double>(req, "level", options.bootstrap.confidence_level);
  options.confidence_intervals = number_param<int>(req, "ci", 1) != 0;
  options.strict = number_param<int>(req, "strict", 0) != 0;
  return options;
}

json options_config(const analysis::AnalysisOptions& options) {
  return {{"attributes", options.attributes},
          {"replicates", options.bootstrap.replicates},
          {"seed", options.bootstrap.seed},
          {"confidenceLevel", options.bootstrap.confidence_level},
          {"ci", options.confidence_intervals},
          {"strict", options.strict},
          {"engineVersion", analysis::kEngineVersion}};
}

void send(httplib::Response& res, const std::string& body, int status = 200) {
  res.status = status;
  res.set_content(body, "application/json");
}

void send(httplib::Response& res, const json& body, int status = 200) {
  send(res, canonical_dump(body), status);
}

json task_listing() {
  json tasks = json::array();
  for (TaskKind task :
       {TaskKind::TextClassification, TaskKind::SequenceLabeling, TaskKind::ScoredGeneration}) {
    json attributes = json::array();
    for (const auto& spec : attributes_for(task)) {
      attributes.push_back(
          {{"name", spec.name},
           {"valueKind", spec.value_kind == ValueKind::Continuous ? "continuous" : "categorical"},
           {"unitKind", spec.unit_kind == UnitKind::Span ? "span" : "sample"},
           {"description", spec.description}});
    }
    tasks.push_back({{"taskKind", to_string(task)},
                     {"metricName", metrics::metric_name(metrics::metric_for(task))},
                     {"attributes", std::move(attributes)}});
  }
  return tasks;
}

}  // namespace

struct ApiServer::Impl {
  Registry& registry;
  httplib::Server server;

  explicit Impl(Registry& r) : registry(r) {}

  using Body = std::function<void(const httplib::Request&, httplib::Response&)>;

  static httplib::Server::Handler guarded(Body body) {
    return [body = std::move(body)](const httplib::Request& req, httplib::Response& res) {
      try {
        body(req, res);
      } catch (const NotFound& e) {
        send(res, error_json(e.code(), e.detail()), 404);
      } catch (const Error& e) {
        send(res, error_json(e.code(), e.what()), 400);
      } catch (const json::exception& e) {
        send(res, error_json("BadRequest", e.what()), 400);
      } catch (const std::exception& e) {
        send(res, error_json("InternalError", e.what()), 500);
      }
    };
  }

  // Serves a cached body when present, otherwise computes and caches it.
  void cached(httplib::Response& res, const json& config, const std::function<json()>& compute) {
    const std::string key = Registry::report_key(config);
    if (auto body = registry.cached_report(key)) {
      send(res, *body);
      return;
    }
    const std::string body = canonical_dump(compute());
    registry.store_report(key, body);
    send(res, body);
  }

  std::shared_ptr<const Dataset> shared_dataset(const std::vector<std::string>& system_ids) {
    std::string dataset_id;
    for (const auto& id : system_ids) {
      const SystemRecord record = registry.system_record(id);
      if (!dataset_id.empty() && record.dataset_id != dataset_id) {
        throw Error("DatasetMismatch", "systems were evaluated on different datasets");
      }
      dataset_id = record.dataset_id;
    }
    if (dataset_id.empty()) throw Error("NeedOneSystem", "no systems given");
    return registry.dataset(dataset_id);
  }

  std::vector<std::shared_ptr<const SystemOutput>> load_systems(const std::vector<std::string>& ids) {
    std::vector<std::shared_ptr<const SystemOutput>> out;
    for (const auto& id : ids) out.push_back(registry.system(id));
    return out;
  }

  static std::vector<const SystemOutput*> raw(
      const std::vector<std::shared_ptr<const SystemOutput>>& systems) {
    std::vector<const SystemOutput*> out;
    for (const auto& s : systems) out.push_back(s.get());
    return out;
  }

  void errors_response(const httplib::Request& req, httplib::Response& res,
                       const std::vector<std::string>& ids, const analysis::ErrorSelector& selector) {
    const auto dataset = shared_dataset(ids);
    const auto systems = load_systems(ids);
    const auto cases = analysis::error_cases(raw(systems), *dataset, selector,
                                             number_param<int>(req, "strict", 0) != 0);
    send(res, error_page(cases, number_param<std::size_t>(req, "page", 1),
                         number_param<std::size_t>(req, "pageSize", kDefaultPageSize)));
  }

  void routes() {
    server.Get("/api/v1/tasks", guarded([](const auto&, auto& res) { send(res, task_listing()); }));

    server.Get("/api/v1/datasets", guarded([this](const httplib::Request& req, auto& res) {
      std::optional<TaskKind> task;
      if (req.has_param("task")) task = parse_task_kind(req.get_param_value("task"));
      json out = json::array();
      for (const auto& r : registry.datasets(task)) out.push_back(to_json(r));
      send(res, out);
    }));

    server.Post("/api/v1/datasets", guarded([this](const httplib::Request& req, auto& res) {
      if (!req.has_file("file") || !req.has_file("id") || !req.has_file("taskKind")) {
        throw Error("BadRequest", "multipart fields 'id', 'taskKind' and 'file' are required");
      }
      std::optional<std::string> train;
      if (req.has_file("train")) train = req.get_file_value("train").content;
      const auto record = registry.add_dataset(
          req.get_file_value("id").content, parse_task_kind(req.get_file_value("taskKind").content),
          req.get_file_value("file").content,
          train ? std::optional<std::string_view>(*train) : std::nullopt);
      send(res, to_json(record), 201);
    }));

    server.Get("/api/v1/systems", guarded([this](const httplib::Request& req, auto& res) {
      std::optional<std::string> dataset;
      if (req.has_param("dataset")) dataset = req.get_param_value("dataset");
      json out = json::array();
      std::size_t rank = 0;
      for (const auto& r : registry.systems(dataset)) {
        json row = to_json(r);
        row["rank"] = ++rank;
        out.push_back(std::move(row));
      }
      send(res, out);
    }));

    server.Get(R"(/api/v1/systems/([^/]+))", guarded([this](const httplib::Request& req, auto& res) {
      send(res, to_json(registry.system_record(req.matches[1])));
    }));

    server.Post("/api/v1/systems", guarded([this](const httplib::Request& req, auto& res) {
      if (!req.has_file("file")) throw Error("BadRequest", "multipart field 'file' is required");
      json meta = json::object();
      if (req.has_file("meta")) meta = json::parse(req.get_file_value("meta").content);
      for (const char* field : {"name", "datasetId", "submitter"}) {
        if (req.has_file(field)) meta[field] = req.get_file_value(field).content;
      }
      SystemSubmission submission;
      submission.name = meta.value("name", std::string("unnamed"));
      if (!meta.contains("datasetId")) throw Error("BadRequest", "meta.datasetId is required");
      submission.dataset_id = meta.at("datasetId").get<std::string>();
      if (meta.contains("submitter") && meta["submitter"].is_string()) {
        submission.submitter = meta["submitter"].get<std::string>();
      }
      const auto result = registry.submit_system(submission, req.get_file_value("file").content);
      send(res,
           json{{"id", result.record.id},
                {"duplicate", result.duplicate},
                {"record", to_json(result.record)}},
           result.duplicate ? 200 : 201);
    }));

    server.Get(R"(/api/v1/analysis/single/([^/]+))",
               guarded([this](const httplib::Request& req, auto& res) {
                 const std::string id = req.matches[1];
                 const SystemRecord record = registry.system_record(id);
                 const auto options = options_from(req);
                 json config = options_config(options);
                 config["op"] = "single";
                 config["systemIds"] = {id};
                 config["datasetId"] = record.dataset_id;
                 cached(res, config, [&] {
                   const auto system = registry.system(id);
                   return to_json(analysis::single_analysis(
                       *system, *registry.dataset(record.dataset_id), options));
                 });
               }));

    server.Get(R"(/api/v1/analysis/pair/([^/]+)/([^/]+))",
               guarded([this](const httplib::Request& req, auto& res) {
                 const std::vector<std::string> ids{req.matches[1], req.matches[2]};
                 const auto dataset = shared_dataset(ids);
                 auto options = options_from(req);
                 options.confidence_intervals = false;
                 json config = options_config(options);
                 config["op"] = "pair";
                 config["systemIds"] = ids;
                 config["datasetId"] = dataset->id;
                 cached(res, config, [&] {
                   const auto systems = load_systems(ids);
                   return to_json(
                       analysis::pair_analysis(*systems[0], *systems[1], *dataset, options));
                 });
               }));

    server.Get("/api/v1/analysis/bias", guarded([this](const httplib::Request& req, auto& res) {
      const auto ids = split_list(string_param(req, "datasets"));
      const auto options = options_from(req);
      json config = options_config(options);
      config["op"] = "bias";
      config["datasetIds"] = ids;
      std::vector<std::shared_ptr<const Dataset>> datasets;
      for (const auto& id : ids) datasets.push_back(registry.dataset(id));
      cached(res, config, [&] {
        std::vector<const Dataset*> ptrs;
        for (const auto& d : datasets) ptrs.push_back(d.get());
        return to_json(analysis::bias_analysis(ptrs, options.attributes, options.strict));
      });
    }));

    server.Post("/api/v1/analysis/combine", guarded([this](const httplib::Request& req, auto& res) {
      const json body = json::parse(req.body);
      const auto ids = body.at("systemIds").get<std::vector<std::string>>();
      const auto dataset = shared_dataset(ids);
      const auto systems = load_systems(ids);
      auto options = options_from(req);
      if (body.contains("attrs")) {
        options.attributes = body["attrs"].is_string()
                                 ? split_list(body["attrs"].get<std::string>())
                                 : body["attrs"].get<std::vector<std::string>>();
      }
      combination::CombinedSystem combined;
      const auto report = combination::combined_report(raw(systems), *dataset, options, &combined);
      registry.add_combined(combined, dataset->id);
      send(res, combine_json(report, combined));
    }));

    server.Get("/api/v1/errors/common", guarded([this](const httplib::Request& req, auto& res) {
      errors_response(req, res, split_list(string_param(req, "systems")),
                      analysis::ErrorSelector::common());
    }));

    server.Get("/api/v1/errors/unique", guarded([this](const httplib::Request& req, auto& res) {
      errors_response(req, res, {string_param(req, "a"), string_param(req, "b")},
                      analysis::ErrorSelector::unique());
    }));

    server.Get(R"(/api/v1/errors/([^/]+))", guarded([this](const httplib::Request& req, auto& res) {
      const auto selector = req.has_param("bucket")
                                ? analysis::ErrorSelector::in_bucket(req.get_param_value("bucket"))
                                : analysis::ErrorSelector::all();
      errors_response(req, res, {req.matches[1]}, selector);
    }));

    server.Get(R"(/api/v1/calibration/([^/]+))",
               guarded([this](const httplib::Request& req, auto& res) {
                 const std::string id = req.matches[1];
                 const auto system = registry.system(id);
                 const auto dataset = registry.dataset(registry.system_record(id).dataset_id);
                 const auto report = reliability::calibration(
                     *system, *dataset, number_param<std::size_t>(req, "bins", 10));
                 send(res, calibration_json(report, id, dataset->id));
               }));

    server.Options(R"(/api/v1/.*)", [](const auto&, auto& res) { res.status = 204; });

    server.set_post_routing_handler([](const auto&, httplib::Response& res) {
      res.set_header("Access-Control-Allow-Origin", "*");
      res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
      res.set_header("Access-Control-Allow-Headers", "Content-Type");
    });
  }
};

ApiServer::ApiServer(Registry& registry, std::optional<std::string> static_dir)
    : impl_(std::make_unique<Impl>(registry)) {
  impl_->routes();
  if (static_dir && !impl_->server.set_mount_point("/", *static_dir)) {
    throw Error("FileNotFound", "static directory '" + *static_dir + "' does not exist");
  }
}

ApiServer::~ApiServer() = default;

int ApiServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) throw Error("BindFailed", "cannot bind " + host);
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port)) {
    throw Error("BindFailed", "cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

void ApiServer::run() { impl_->server.listen_after_bind(); }

void ApiServer::stop() { impl_->server.stop(); }

void ApiServer::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace fineval::service
