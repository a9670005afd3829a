#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace dlstf {

/// Shortest decimal that parses back to the same double.
std::string format_double(double v);

/// 64-bit FNV-1a, rendered as 16 hex digits by digest_hex.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string digest_hex(std::uint64_t digest);

}  // namespace dlstf
