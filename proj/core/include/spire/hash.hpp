#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace spire {

std::string sha256_hex(const void* data, std::size_t len);
std::string sha256_hex(const std::string& s);

// Hash of a file's raw bytes.
std::string sha256_file(const std::string& path);

// Content hash of a directory: sha256 over the sorted relative file names
// and their content hashes. Subdirectories are walked recursively.
std::string sha256_dir(const std::string& dir);

}  // namespace spire
