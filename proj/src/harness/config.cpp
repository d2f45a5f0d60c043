#include "dmf/harness/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace dmf::harness {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<int> parse_int_list(const std::string& value) {
  // Either "a,b,c" or a range "lo:hi:step".
  std::vector<int> out;
  if (value.find(':') != std::string::npos) {
    std::istringstream ss(value);
    std::string part;
    std::vector<long> r;
    while (std::getline(ss, part, ':')) r.push_back(std::stol(trim(part)));
    if (r.size() != 3 || r[2] <= 0) throw std::invalid_argument("bad range: " + value);
    for (long v = r[0]; v <= r[1]; v += r[2]) out.push_back(static_cast<int>(v));
    return out;
  }
  std::istringstream ss(value);
  std::string part;
  while (std::getline(ss, part, ',')) {
    part = trim(part);
    if (!part.empty()) out.push_back(std::stoi(part));
  }
  return out;
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw std::invalid_argument("bad boolean: " + v);
}

void set_key(ExperimentConfig& cfg, const std::string& section,
             const std::string& key, const std::string& value) {
  const std::string full = section + "." + key;
  if (full == "task.kind") cfg.task_kind = value;
  else if (full == "task.d") cfg.d = std::stoi(value);
  else if (full == "task.dp") cfg.dp = std::stoi(value);
  else if (full == "task.rank") cfg.rank = std::stoi(value);
  else if (full == "task.m" || full == "task.m_grid") cfg.m_grid = parse_int_list(value);
  else if (full == "task.seed") cfg.seed = std::stoull(value);
  else if (full == "task.path") cfg.ratings_path = value;
  else if (full == "model.depths" || full == "model.depth") cfg.depths = parse_int_list(value);
  else if (full == "model.init") cfg.init_scheme = value;
  else if (full == "model.scale") cfg.init_scale = std::stod(value);
  else if (full == "model.hidden") cfg.hidden = std::stoi(value);
  else if (full == "train.lr") cfg.lr = std::stod(value);
  else if (full == "train.max_iters") cfg.max_iters = std::stol(value);
  else if (full == "train.loss_stop") cfg.loss_stop = std::stod(value);
  else if (full == "train.snapshot_every") cfg.snapshot_every = std::stol(value);
  else if (full == "flow.enabled") cfg.flow_enabled = parse_bool(value);
  else if (full == "flow.dt") cfg.flow_dt = std::stod(value);
  else if (full == "flow.T") cfg.flow_T = std::stod(value);
  else if (full == "flow.scheme") cfg.flow_scheme = value;
  else if (full == "baseline.nuclear") cfg.baseline_nuclear = parse_bool(value);
  else if (full == "baseline.psd") cfg.baseline_psd = parse_bool(value);
  else if (full == "output.path") cfg.output_path = value;
  else if (full == "output.trials") cfg.trials = std::stoi(value);
  else if (full == "output.trajectories") cfg.trajectories = parse_bool(value);
  else throw std::invalid_argument("unknown config key: " + full);
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string line, section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    if (line.front() == '[' && line.back() == ']') {
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (section.empty()) {
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": key before any [section]");
    }
    try {
      set_key(cfg, section, key, value);
    } catch (const std::exception& e) {
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": " +
                                  e.what());
    }
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

void apply_override(ExperimentConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  const auto dot = assignment.find('.');
  if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
    throw std::invalid_argument("override must be section.key=value: " + assignment);
  }
  set_key(cfg, assignment.substr(0, dot), assignment.substr(dot + 1, eq - dot - 1),
          assignment.substr(eq + 1));
}

void validate(const ExperimentConfig& cfg) {
  if (cfg.trials < 1) throw std::invalid_argument("config: trials must be >= 1");
  if (cfg.depths.empty()) throw std::invalid_argument("config: empty depth list");
  if (cfg.task_kind == "completion" || cfg.task_kind == "sensing") {
    if (cfg.m_grid.empty()) throw std::invalid_argument("config: empty m grid");
    if (cfg.task_kind == "completion") {
      const long total = static_cast<long>(cfg.d) * cfg.dp;
      for (int m : cfg.m_grid) {
        if (m > total) throw std::invalid_argument("config: m exceeds d * d'");
      }
    }
    if (cfg.rank > std::min(cfg.d, cfg.dp)) {
      throw std::invalid_argument("config: rank exceeds min(d, d')");
    }
  } else if (cfg.task_kind == "prop1") {
    if (cfg.d < 3) throw std::invalid_argument("config: prop1 requires d >= 3");
  } else if (cfg.task_kind == "ratings") {
    if (cfg.ratings_path.empty()) throw std::invalid_argument("config: ratings path missing");
  } else {
    throw std::invalid_argument("config: unknown task kind " + cfg.task_kind);
  }
}

}  // namespace dmf::harness
