#include "qfric/cache.hpp"

#include <openssl/evp.h>

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

namespace qfric {

namespace fs = std::filesystem;

std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw IoError("sha256 failed");
  std::string out;
  char buf[3];
  for (unsigned i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", md[i]);
    out += buf;
  }
  return out;
}

std::string cache_key(const Scenario& s) {
  return sha256_hex(std::string(kVersion) + "\n" + s.canonical().dump());
}

std::optional<std::string> default_cache_dir() {
  const char* e = std::getenv("QFRIC_CACHE_DIR");
  if (!e || !*e) return std::nullopt;
  return std::string(e);
}

namespace {

std::optional<ResultRecord> read_entry(const fs::path& file, const std::string& key, std::string& problem) {
  std::ifstream in(file, std::ios::binary);
  if (!in) return std::nullopt;
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    const auto j = nlohmann::ordered_json::parse(ss.str());
    if (j.at("key").get<std::string>() != key) {
      problem = "key mismatch";
      return std::nullopt;
    }
    return record_from_json(j.at("record"));
  } catch (const std::exception& e) {
    problem = e.what();
    return std::nullopt;
  }
}

void write_entry(const fs::path& dir, const fs::path& file, const std::string& key, const ResultRecord& r) {
  static std::atomic<unsigned> counter{0};
  nlohmann::ordered_json j;
  j["key"] = key;
  j["record"] = to_json(r);
  const fs::path tmp = dir / ("." + key + ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cache: cannot write " + tmp.string());
    out << j.dump() << '\n';
    out.flush();
    if (!out) throw IoError("cache: write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, file, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cache: cannot move entry into place at " + file.string());
  }
}

}  // namespace

CacheOutcome cache_lookup_or_compute(const Scenario& s, const std::string& dir,
                                     const std::function<ResultRecord()>& compute) {
  CacheOutcome out;
  const std::string key = cache_key(s);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cache: cannot create directory " + dir);
  const fs::path file = fs::path(dir) / (key + ".json");
  if (fs::exists(file, ec)) {
    std::string problem;
    if (auto r = read_entry(file, key, problem)) {
      out.record = std::move(*r);
      out.hit = true;
      return out;
    }
    out.warnings.push_back("cache entry " + file.string() + " is corrupt (" + problem + "); recomputing");
  }
  out.record = compute();
  write_entry(dir, file, key, out.record);
  return out;
}

}  // namespace qfric
