#include "dmf/harness/ratings.hpp"

#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace dmf::harness {

RatingsData parse_ratings_text(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  std::map<std::pair<int, int>, double> latest;
  std::vector<std::pair<int, int>> order;  // first-seen order of distinct keys
  int max_row = 0, max_col = 0;

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    long user = 0, item = 0;
    double rating = 0.0;
    if (!(fields >> user >> item >> rating) || user < 1 || item < 1) {
      throw std::runtime_error("ratings line " + std::to_string(line_no) +
                               ": malformed entry");
    }
    std::string extra;
    if (fields >> extra && !extra.empty() && extra[0] != '#') {
      // MovieLens u.data carries a trailing timestamp column; tolerate one
      // numeric extra field, reject anything beyond it.
      std::string more;
      if (fields >> more) {
        throw std::runtime_error("ratings line " + std::to_string(line_no) +
                                 ": too many fields");
      }
    }
    const std::pair<int, int> key{static_cast<int>(user - 1), static_cast<int>(item - 1)};
    if (latest.find(key) == latest.end()) order.push_back(key);
    latest[key] = rating;
    max_row = std::max(max_row, static_cast<int>(user));
    max_col = std::max(max_col, static_cast<int>(item));
  }
  if (latest.empty()) throw std::runtime_error("ratings: no observations found");

  RatingsData data;
  data.rows = max_row;
  data.cols = max_col;
  data.observations.reserve(order.size());
  for (const auto& key : order) {
    data.observations.push_back({key.first, key.second, latest.at(key)});
  }
  return data;
}

RatingsData ingest_ratings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open ratings file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_ratings_text(buf.str());
}

}  // namespace dmf::harness
