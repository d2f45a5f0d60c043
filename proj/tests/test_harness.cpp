#include <doctest.h>

#include "dmf/harness/config.hpp"
#include "dmf/harness/experiment.hpp"
#include "dmf/harness/ratings.hpp"
#include "dmf/linalg.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

using namespace dmf;
using namespace dmf::harness;

TEST_CASE("config parsing covers sections, lists, ranges, and booleans") {
  const std::string text = R"(# grid experiment
[task]
kind = completion
d = 20
dp = 25
rank = 2
m = 100:300:100
seed = 42

[model]
depths = 2, 3, 4
init = identity
scale = 0.1

[train]
lr = 0.005
max_iters = 5000

[baseline]
nuclear = on

[output]
path = out.csv
trials = 3
trajectories = true
)";
  const ExperimentConfig cfg = parse_config_text(text);
  CHECK(cfg.task_kind == "completion");
  CHECK(cfg.d == 20);
  CHECK(cfg.dp == 25);
  CHECK(cfg.rank == 2);
  CHECK(cfg.m_grid == std::vector<int>{100, 200, 300});
  CHECK(cfg.seed == 42);
  CHECK(cfg.depths == std::vector<int>{2, 3, 4});
  CHECK(cfg.init_scheme == "identity");
  CHECK(cfg.init_scale == 0.1);
  CHECK(cfg.lr == 0.005);
  CHECK(cfg.max_iters == 5000);
  CHECK(cfg.baseline_nuclear);
  CHECK(cfg.output_path == "out.csv");
  CHECK(cfg.trials == 3);
  CHECK(cfg.trajectories);
  validate(cfg);
}

TEST_CASE("config parsing rejects malformed input with line numbers") {
  CHECK_THROWS_WITH_AS(parse_config_text("[task]\nbogus = 1\n"),
                       doctest::Contains("unknown config key: task.bogus"),
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse_config_text("kind = completion\n"),
                       doctest::Contains("key before any [section]"),
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse_config_text("[task]\nno equals sign here\n"),
                       doctest::Contains("line 2"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config_text("[task]\nm = 10:100\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config_text("[task]\nm = 100:10:-5\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config_text("[flow]\nenabled = maybe\n"), std::invalid_argument);
}

TEST_CASE("apply_override mirrors config keys") {
  ExperimentConfig cfg;
  apply_override(cfg, "train.lr=0.25");
  CHECK(cfg.lr == 0.25);
  apply_override(cfg, "task.m=50,60");
  CHECK(cfg.m_grid == std::vector<int>{50, 60});
  apply_override(cfg, "model.depth=5");
  CHECK(cfg.depths == std::vector<int>{5});
  CHECK_THROWS_AS(apply_override(cfg, "train.lr"), std::invalid_argument);
  CHECK_THROWS_AS(apply_override(cfg, "lr=0.1"), std::invalid_argument);
  CHECK_THROWS_AS(apply_override(cfg, "train.nope=1"), std::invalid_argument);
}

TEST_CASE("validate enforces grid invariants") {
  ExperimentConfig cfg;
  cfg.m_grid = {100};
  validate(cfg);

  ExperimentConfig bad = cfg;
  bad.m_grid.clear();
  CHECK_THROWS_WITH_AS(validate(bad), doctest::Contains("empty m grid"),
                       std::invalid_argument);
  bad = cfg;
  bad.trials = 0;
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);
  bad = cfg;
  bad.depths.clear();
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);
  bad = cfg;
  bad.m_grid = {50 * 50 + 1};
  CHECK_THROWS_WITH_AS(validate(bad), doctest::Contains("m exceeds"),
                       std::invalid_argument);
  bad = cfg;
  bad.rank = 51;
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);
  bad = cfg;
  bad.task_kind = "prop1";
  bad.d = 2;
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);
  bad = cfg;
  bad.task_kind = "ratings";
  CHECK_THROWS_WITH_AS(validate(bad), doctest::Contains("ratings path"),
                       std::invalid_argument);
  bad = cfg;
  bad.task_kind = "tensor";
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);
}

TEST_CASE("ratings parsing: dedupe, 1-based indices, comments, timestamps") {
  const std::string text =
      "# MovieLens-style header\n"
      "1\t2\t3.5\t881250949\n"
      "3\t1\t4.0\n"
      "\n"
      "1\t2\t5.0\n";
  const RatingsData data = parse_ratings_text(text);
  CHECK(data.rows == 3);
  CHECK(data.cols == 2);
  REQUIRE(data.observations.size() == 2);
  CHECK(data.observations[0].row == 0);
  CHECK(data.observations[0].col == 1);
  CHECK(data.observations[0].value == 5.0);  // last occurrence wins
  CHECK(data.observations[1].row == 2);
  CHECK(data.observations[1].col == 0);
  CHECK(data.observations[1].value == 4.0);
}

TEST_CASE("ratings parsing rejects malformed lines and empty input") {
  CHECK_THROWS_WITH_AS(parse_ratings_text("1\tx\t2.0\n"), doctest::Contains("line 1"),
                       std::runtime_error);
  CHECK_THROWS_WITH_AS(parse_ratings_text("1\t2\t3.0\n0\t2\t3.0\n"),
                       doctest::Contains("line 2"), std::runtime_error);
  CHECK_THROWS_WITH_AS(parse_ratings_text("1\t2\t3.0\t99\textra\n"),
                       doctest::Contains("too many fields"), std::runtime_error);
  CHECK_THROWS_WITH_AS(parse_ratings_text("# only comments\n"),
                       doctest::Contains("no observations"), std::runtime_error);
  CHECK_THROWS_AS(ingest_ratings("/nonexistent/ratings.tsv"), std::runtime_error);
}

TEST_CASE("ground truth has the requested rank and is reproducible") {
  const Matrix W = generate_ground_truth(12, 10, 3, 9);
  CHECK(W.rows() == 12);
  CHECK(W.cols() == 10);
  CHECK(numerical_rank(W) == 3);
  const Matrix again = generate_ground_truth(12, 10, 3, 9);
  CHECK((W - again).norm() == 0.0);
  const Matrix other = generate_ground_truth(12, 10, 3, 10);
  CHECK((W - other).norm() > 0.0);
}

TEST_CASE("build_task is reproducible and honors the task kind") {
  ExperimentConfig cfg;
  cfg.d = cfg.dp = 10;
  cfg.rank = 2;
  cfg.m_grid = {30};
  cfg.seed = 4;
  const LabeledTask a = build_task(cfg, 30);
  const LabeledTask b = build_task(cfg, 30);
  CHECK(a.op.count() == 30);
  REQUIRE(a.Wstar.has_value());
  CHECK((a.y - b.y).norm() == 0.0);
  CHECK((*a.Wstar - *b.Wstar).norm() == 0.0);
  // Labels really are ground-truth measurements.
  CHECK((a.op.apply(*a.Wstar) - a.y).norm() == 0.0);

  cfg.task_kind = "sensing";
  const LabeledTask s = build_task(cfg, 30);
  CHECK(s.op.count() == 30);
  CHECK((s.op.apply(*s.Wstar) - s.y).norm() <= 1e-12 * s.y.norm());
}

TEST_CASE("csv output is deterministic without timestamps") {
  ExperimentConfig cfg;
  cfg.m_grid = {10};
  RunOptions opts;
  opts.no_timestamp = true;

  ResultRow row;
  row.m = 10;
  row.depth = 2;
  row.trial = 0;
  row.iterations = 7;
  row.final_loss = 1e-7;
  row.reconstruction_error = 0.5;
  row.nuclear_norm_value = 3.25;
  row.effective_rank_value = 1.5;

  std::ostringstream a, b;
  write_csv({row}, cfg, opts, a);
  write_csv({row}, cfg, opts, b);
  CHECK(a.str() == b.str());
  CHECK(a.str().rfind("# dmf-csv v1", 0) == 0);
  CHECK(a.str().find("generated") == std::string::npos);

  // Every data row has as many fields as the header.
  std::istringstream lines(a.str());
  std::string line, header;
  std::getline(lines, line);  // format tag
  std::getline(lines, header);
  std::getline(lines, line);
  CHECK(std::count(header.begin(), header.end(), ',') ==
        std::count(line.begin(), line.end(), ','));
  CHECK(line.find("0.5") != std::string::npos);

  RunOptions stamped;
  std::ostringstream c;
  write_csv({row}, cfg, stamped, c);
  CHECK(c.str().find("# generated ") != std::string::npos);
}

TEST_CASE("run_experiment produces the full grid plus aggregate rows") {
  ExperimentConfig cfg;
  cfg.d = cfg.dp = 8;
  cfg.rank = 1;
  cfg.m_grid = {24, 32};
  cfg.depths = {2, 3};
  cfg.seed = 6;
  cfg.init_scale = 1e-2;
  cfg.lr = 1e-2;
  cfg.max_iters = 200000;
  cfg.loss_stop = 1e-6;
  cfg.trials = 2;
  cfg.output_path = "harness_grid_test.csv";

  RunOptions opts;
  opts.quiet = true;
  opts.no_timestamp = true;
  const std::vector<ResultRow> rows = run_experiment(cfg, opts);

  // 2 m-values x 2 depths x 2 trials, plus one aggregate per (m, depth).
  CHECK(rows.size() == 2 * 2 * 2 + 2 * 2);
  int agg = 0;
  for (const auto& row : rows) {
    if (row.agg) {
      ++agg;
      CHECK(row.trial == -1);
      CHECK(row.reconstruction_error_std.has_value());
    } else {
      CHECK(row.status == "converged");
      REQUIRE(row.reconstruction_error.has_value());
      CHECK(*row.reconstruction_error < 0.5);
    }
  }
  CHECK(agg == 4);

  std::ifstream written(cfg.output_path);
  CHECK(written.good());
  std::remove(cfg.output_path.c_str());
}
