#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace ustatbench {

/// Lowercase hex SHA-256 of `data`.
[[nodiscard]] std::string sha256_hex(std::string_view data);

/// Lowercase hex SHA-256 of a file's bytes. Throws InputError if unreadable.
[[nodiscard]] std::string sha256_file(const std::filesystem::path& path);

} // namespace ustatbench
