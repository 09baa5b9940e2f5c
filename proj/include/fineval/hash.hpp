#ifndef FINEVAL_HASH_HPP
#define FINEVAL_HASH_HPP

#include <string>
#include <string_view>

namespace fineval {

// Lowercase hex SHA-256 (64 characters).
std::string sha256_hex(std::string_view bytes);

}  // namespace fineval

#endif  // FINEVAL_HASH_HPP
