#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace cipher {

// Shortest decimal text that parses back to exactly `value`, never in
// exponent notation. -0 prints as "0".
std::string format_real(double value);

std::string to_lower(std::string_view s);
std::string_view trim(std::string_view s);

// Lowercase, split on anything that is not [a-z0-9]. No stemming.
std::vector<std::string> tokenize(std::string_view text);

std::uint64_t fnv1a64(std::string_view data);
std::string hex64(std::uint64_t v);

std::string read_file(const std::string& path);

}  // namespace cipher
