#pragma once

#include <string>

namespace glidenav {

/// Writes to a temporary file next to `path`, then renames it into place.
void write_file_atomic(const std::string& path, const std::string& contents);

std::string read_file(const std::string& path);

/// Lowercase hex SHA-256 digest.
std::string sha256_hex(const std::string& data);

}  // namespace glidenav
