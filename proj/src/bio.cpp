#include "fineval/bio.hpp"

#include "fineval/error.hpp"

namespace fineval {

ParsedTag parse_tag(std::string_view tag) {
  if (tag == "O") return {TagPrefix::Outside, {}};
  if (tag.size() > 2 && tag[1] == '-') {
    if (tag[0] == 'B') return {TagPrefix::Begin, tag.substr(2)};
    if (tag[0] == 'I') return {TagPrefix::Inside, tag.substr(2)};
  }
  throw Error("MalformedTag", "tag '" + std::string(tag) + "' is not O, B-X or I-X");
}

bool is_well_formed_tag(std::string_view tag) {
  if (tag == "O") return true;
  return tag.size() > 2 && tag[1] == '-' && (tag[0] == 'B' || tag[0] == 'I');
}

std::vector<Span> extract_spans(std::span<const std::string> tags, BioMode mode) {
  std::vector<Span> spans;
  bool open = false;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const ParsedTag tag = parse_tag(tags[i]);
    switch (tag.prefix) {
      case TagPrefix::Outside:
        open = false;
        break;
      case TagPrefix::Begin:
        spans.push_back({i, i, std::string(tag.label)});
        open = true;
        break;
      case TagPrefix::Inside:
        if (open && spans.back().label == tag.label) {
          spans.back().end = i;
        } else {
          if (mode == BioMode::Strict) {
            throw Error("OrphanInside", "tag " + std::to_string(i) + " '" + tags[i] +
                                            "' does not continue a span");
          }
          spans.push_back({i, i, std::string(tag.label)});
          open = true;
        }
        break;
    }
  }
  return spans;
}

bool is_valid_bio(std::span<const std::string> tags) {
  std::string_view open_label;
  bool open = false;
  for (const auto& raw : tags) {
    if (!is_well_formed_tag(raw)) return false;
    const ParsedTag tag = parse_tag(raw);
    if (tag.prefix == TagPrefix::Inside && (!open || open_label != tag.label)) return false;
    open = tag.prefix != TagPrefix::Outside;
    open_label = tag.label;
  }
  return true;
}

std::vector<std::string> repair_bio(std::span<const std::string> tags) {
  std::vector<std::string> out(tags.begin(), tags.end());
  std::string open_label;
  bool open = false;
  for (auto& raw : out) {
    const ParsedTag tag = parse_tag(raw);
    if (tag.prefix == TagPrefix::Inside && (!open || open_label != tag.label)) {
      raw[0] = 'B';
    }
    open = tag.prefix != TagPrefix::Outside;
    open_label = std::string(tag.label);
  }
  return out;
}

std::string span_surface(std::span<const std::string> tokens, const Span& span) {
  std::string out;
  for (std::size_t i = span.start; i <= span.end && i < tokens.size(); ++i) {
    if (i > span.start) out += ' ';
    out += tokens[i];
  }
  return out;
}

}  // namespace fineval
