#ifndef FINEVAL_COMBINATION_HPP
#define FINEVAL_COMBINATION_HPP

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "fineval/analysis.hpp"
#include "fineval/types.hpp"

namespace fineval::combination {

// Votes cast at one decision point (a sample for classification, a token for
// sequence labeling), in order of first appearance among the members.
struct VoteTally {
  std::vector<std::pair<std::string, std::size_t>> votes;
  bool tie = false;
};

struct CombinedSystem {
  std::vector<std::string> member_ids;
  SystemOutput output;  // id is the content hash of its canonical file bytes
  std::vector<std::vector<VoteTally>> provenance;  // per sample, per decision point

  std::size_t tie_count() const;
};

// Plurality voting. Classification ties go to the highest mean confidence
// among the tied labels, then to the label of the earliest member; sequence
// labeling votes per token (member order breaks ties) and repairs orphan I-X
// tags. Errors: NeedTwoOrMoreSystems, TaskMismatch, CombinationUnsupportedTask.
CombinedSystem combine(const std::vector<const SystemOutput*>& systems, const Dataset& dataset);

// Analysis of the combined system with each member's overall value attached.
analysis::AnalysisReport combined_report(const std::vector<const SystemOutput*>& systems,
                                         const Dataset& dataset,
                                         const analysis::AnalysisOptions& options,
                                         CombinedSystem* combined_out = nullptr);

// Hex SHA-256 of the canonical file serialization of a system's predictions.
std::string content_id(const SystemOutput& system, const Dataset& dataset);

}  // namespace fineval::combination

#endif  // FINEVAL_COMBINATION_HPP
