#ifndef FINEVAL_ERROR_HPP
#define FINEVAL_ERROR_HPP

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace fineval {

// Every failure surfaced by the engine carries a stable machine-readable code
// (e.g. "BadColumnCount", "UnknownBucket") that the CLI prints and the HTTP API
// returns verbatim. Parse errors additionally carry a 1-based line number.
class Error : public std::runtime_error {
 public:
  Error(std::string code, std::string message,
        std::optional<std::size_t> line = std::nullopt)
      : std::runtime_error(format(code, message, line)),
        code_(std::move(code)),
        detail_(std::move(message)),
        line_(line) {}

  const std::string& code() const { return code_; }
  const std::string& detail() const { return detail_; }
  std::optional<std::size_t> line() const { return line_; }

 private:
  static std::string format(const std::string& code, const std::string& message,
                            std::optional<std::size_t> line) {
    std::string out = code;
    if (line) out += " (line " + std::to_string(*line) + ")";
    if (!message.empty()) out += ": " + message;
    return out;
  }

  std::string code_;
  std::string detail_;
  std::optional<std::size_t> line_;
};

// Errors that mean "the caller referenced something that does not exist" map
// to HTTP 404 rather than 400.
class NotFound : public Error {
 public:
  using Error::Error;
};

}  // namespace fineval

#endif  // FINEVAL_ERROR_HPP
