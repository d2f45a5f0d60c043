#pragma once

#include <string>
#include <vector>

namespace dmf::harness {

struct Observation {
  int row = 0;  // 0-based
  int col = 0;
  double value = 0.0;
};

struct RatingsData {
  std::vector<Observation> observations;  // deduplicated, last occurrence wins
  int rows = 0;  // inferred as max 1-based index unless overridden
  int cols = 0;
};

/// Reads `user <TAB> item <TAB> rating` lines (1-based indices); lines
/// starting with '#' are skipped. Malformed lines and empty files are errors.
RatingsData ingest_ratings(const std::string& path);
RatingsData parse_ratings_text(const std::string& text);

}  // namespace dmf::harness
