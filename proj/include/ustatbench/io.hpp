#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ustatbench {

/// Shortest decimal string that parses back to the same double. Non-finite
/// values print as nan, inf, -inf.
[[nodiscard]] std::string format_double(double v);

/// Inverse of format_double; also accepts any from_chars-parsable decimal.
/// Throws ArgumentError naming `what` on malformed text.
[[nodiscard]] double parse_double(std::string_view text, std::string_view what = "number");

/// Writes one comma-separated line terminated by '\n'.
void write_csv_line(std::ostream& out, std::span<const std::string> cells);

/// Splits one CSV line on commas (no quoting; the bench never emits quotes).
[[nodiscard]] std::vector<std::string> split_csv_line(std::string_view line);

} // namespace ustatbench
