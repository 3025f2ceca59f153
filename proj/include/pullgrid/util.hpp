#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace pullgrid {

uint32_t crc32_bytes(std::string_view data);
uint32_t crc32_update(uint32_t crc, std::string_view data);

uint64_t fnv1a64(std::string_view data);

std::string to_hex32(uint32_t v);
// Returns false on malformed input.
bool from_hex32(std::string_view s, uint32_t& out);
// Throwing form: Error(MalformedDocument) on bad input.
uint32_t parse_hex32(std::string_view s);

std::string base64_encode(std::string_view data);
std::string base64_decode(std::string_view data);  // throws Error(MalformedDocument)

// Shortest decimal form that round-trips the exact double value.
std::string format_double(double v);

std::string trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);

// "%0*d"-style zero padding for building sortable keys.
std::string zero_pad(uint64_t v, int width);

}  // namespace pullgrid
