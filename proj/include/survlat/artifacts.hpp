#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace survlat {

// FNV-1a 64-bit content digest, hex encoded.
std::uint64_t fnv1a64(const std::string& bytes);
std::string fnv1a64_hex(const std::string& bytes);

std::string read_file(const std::string& path);

// Writes to `<path>.tmp` in the same directory, then renames into place.
void atomic_write_file(const std::string& path, const std::string& contents);

struct ManifestOutput {
  std::string path;
  std::string digest;
};

struct RunManifest {
  std::string command;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> inputs;  // flag, value
  std::vector<ManifestOutput> outputs;

  void add_output(const std::string& path);  // digests the file contents
  std::string to_json() const;
  void write(const std::string& path) const;
};

}  // namespace survlat
