#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace affect {

/// Incremental SHA-256, lowercase hex output.
class Sha256 {
 public:
  Sha256();
  ~Sha256();
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  Sha256& update(std::string_view bytes);
  Sha256& update(std::span<const std::uint8_t> bytes);
  std::string hex_digest();

 private:
  void* ctx_;
};

std::string sha256_hex(std::string_view bytes);

std::string base64_encode(std::span<const std::uint8_t> bytes);
/// Throws InvalidArgument on malformed input.
std::vector<std::uint8_t> base64_decode(std::string_view text);

/// Compact JSON with sorted keys and every floating-point number printed in
/// fixed notation with `precision` decimals. Integers print as integers.
std::string canonical_dump(const nlohmann::json& value, int precision = 9);

/// printf-style "%.*f".
std::string format_fixed(double value, int precision);

}  // namespace affect
