#ifndef QFRIC_CACHE_HPP
#define QFRIC_CACHE_HPP

#include "qfric/scenario.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace qfric {

std::string sha256_hex(const std::string& data);

/// Content address of a scenario: canonical form plus tool version.
std::string cache_key(const Scenario& s);

/// QFRIC_CACHE_DIR, if set and nonempty.
std::optional<std::string> default_cache_dir();

struct CacheOutcome {
  ResultRecord record;
  bool hit = false;
  std::vector<std::string> warnings;
};

/// Unreadable or mismatched entries are recomputed and overwritten, with a warning.
CacheOutcome cache_lookup_or_compute(const Scenario& s, const std::string& dir,
                                     const std::function<ResultRecord()>& compute);

}  // namespace qfric

#endif  // QFRIC_CACHE_HPP
