#ifndef FINEVAL_HTTP_API_HPP
#define FINEVAL_HTTP_API_HPP

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fineval/registry.hpp"

namespace fineval::service {

// Comma-separated list; empty items dropped.
std::vector<std::string> split_list(std::string_view text);

// JSON API under /api/v1 over a registry, with CORS and an optional static
// directory mounted at /.
class ApiServer {
 public:
  explicit ApiServer(Registry& registry, std::optional<std::string> static_dir = std::nullopt);
  ~ApiServer();
  ApiServer(const ApiServer&) = delete;
  ApiServer& operator=(const ApiServer&) = delete;

  // Port 0 picks a free port. Returns the bound port or throws.
  int bind(const std::string& host, int port);
  // Blocks until stop().
  void run();
  void stop();
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace fineval::service

#endif  // FINEVAL_HTTP_API_HPP
