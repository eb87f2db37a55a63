#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace speedrs {

/// Shortest round-trip decimal form ("%.17g" class precision via to_chars).
std::string format_double(double v);

/// Exact inverse of format_double; throws Io on malformed input.
double parse_double(std::string_view s);
std::uint64_t parse_u64(std::string_view s);

/// Quotes a field when it holds a comma, quote or newline.
std::string csv_field(std::string_view s);

/// Splits one CSV record (RFC 4180 quoting, no embedded newlines).
std::vector<std::string> parse_csv_line(std::string_view line);

/// Reads a header line and returns column names; throws Io on EOF.
std::vector<std::string> read_csv_header(std::istream& in, const std::string& what);

}  // namespace speedrs
