#ifndef FINEVAL_BIO_HPP
#define FINEVAL_BIO_HPP

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fineval/types.hpp"

namespace fineval {

enum class BioMode {
  // An I-X that does not continue a span of label X opens a new span.
  Lenient,
  // Such an I-X is rejected with OrphanInside.
  Strict,
};

enum class TagPrefix { Outside, Begin, Inside };

struct ParsedTag {
  TagPrefix prefix = TagPrefix::Outside;
  std::string_view label;
};

// Parses `O`, `B-X` or `I-X` (X non-empty). Throws MalformedTag otherwise.
ParsedTag parse_tag(std::string_view tag);
bool is_well_formed_tag(std::string_view tag);

// Maximal entity spans of a BIO sequence, ordered by start.
std::vector<Span> extract_spans(std::span<const std::string> tags,
                                BioMode mode = BioMode::Lenient);

// True when every tag is well formed and every I-X continues a span of X.
bool is_valid_bio(std::span<const std::string> tags);

// Rewrites orphan I-X tags as B-X so that the sequence is valid BIO. Spans
// extracted leniently before and after repair are identical.
std::vector<std::string> repair_bio(std::span<const std::string> tags);

// Space-joined tokens covered by a span.
std::string span_surface(std::span<const std::string> tokens, const Span& span);

}  // namespace fineval

#endif  // FINEVAL_BIO_HPP
