#include "survlat/artifacts.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace survlat {

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x00000100000001B3ULL;
  }
  return h;
}

std::string fnv1a64_hex(const std::string& bytes) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(bytes)));
  return buf;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void atomic_write_file(const std::string& path, const std::string& contents) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open file for write: " + tmp);
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw std::runtime_error("write failed: " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw std::runtime_error("rename failed: " + tmp + " -> " + path);
  }
}

void RunManifest::add_output(const std::string& path) {
  outputs.push_back({path, fnv1a64_hex(read_file(path))});
}

std::string RunManifest::to_json() const {
  nlohmann::json j;
  j["command"] = command;
  j["seed"] = seed;
  nlohmann::json in = nlohmann::json::object();
  for (const auto& [flag, value] : inputs) in[flag] = value;
  j["inputs"] = in;
  nlohmann::json outs = nlohmann::json::array();
  for (const ManifestOutput& o : outputs) {
    outs.push_back({{"path", o.path}, {"digest", o.digest}});
  }
  j["outputs"] = outs;
  return j.dump(2) + "\n";
}

void RunManifest::write(const std::string& path) const {
  atomic_write_file(path, to_json());
}

}  // namespace survlat
