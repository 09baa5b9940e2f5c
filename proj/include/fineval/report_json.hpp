#ifndef FINEVAL_REPORT_JSON_HPP
#define FINEVAL_REPORT_JSON_HPP

#include <cstddef>
#include <string>
#include <vector>

#include "fineval/analysis.hpp"
#include "fineval/combination.hpp"
#include "fineval/reliability.hpp"
#include "json.hpp"

namespace fineval::service {

using nlohmann::json;

// Report JSON shared by the CLI and the HTTP API. Keys are camelCase; reals
// are rounded only when dumped with canonical_dump.
json to_json(const analysis::AnalysisReport& report);
json to_json(const analysis::PairReport& report);
json to_json(const analysis::BiasProfile& profile);
json to_json(const analysis::ErrorCase& error);
json to_json(const reliability::CalibrationReport& report);

// {total, page, pageSize, items}. Pages are 1-based; page_size 0 returns
// every case on one page.
json error_page(const std::vector<analysis::ErrorCase>& cases, std::size_t page,
                std::size_t page_size);

// Combined analysis plus the combined system's id and tie count.
json combine_json(const analysis::AnalysisReport& report,
                  const combination::CombinedSystem& combined);

json calibration_json(const reliability::CalibrationReport& report, const std::string& system_id,
                      const std::string& dataset_id);

json error_json(const std::string& code, const std::string& message);

}  // namespace fineval::service

#endif  // FINEVAL_REPORT_JSON_HPP
