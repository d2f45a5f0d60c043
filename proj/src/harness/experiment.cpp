#include "dmf/harness/experiment.hpp"

#include "dmf/baselines.hpp"
#include "dmf/factorization.hpp"
#include "dmf/flow.hpp"
#include "dmf/harness/ratings.hpp"
#include "dmf/rng.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

namespace dmf::harness {

Matrix generate_ground_truth(int d, int dp, int rank, std::uint64_t seed) {
  if (rank < 1 || rank > std::min(d, dp)) {
    throw std::invalid_argument("generate_ground_truth: rank out of range");
  }
  CounterRng rng(seed);
  Matrix U(d, rank), V(dp, rank);
  for (int i = 0; i < d; ++i) {
    for (int r = 0; r < rank; ++r) U(i, r) = rng.normal();
  }
  for (int j = 0; j < dp; ++j) {
    for (int r = 0; r < rank; ++r) V(j, r) = rng.normal();
  }
  return U * V.transpose();
}

namespace {

// Derived seeds; fixed so runs are reproducible across platforms.
std::uint64_t task_seed(std::uint64_t base, int m) {
  return base + 1 + static_cast<std::uint64_t>(m);
}
std::uint64_t trial_seed(std::uint64_t base, int trial) {
  return base + static_cast<std::uint64_t>(trial);
}

LabeledTask build_ratings_task(const ExperimentConfig& cfg, int m) {
  RatingsData data = ingest_ratings(cfg.ratings_path);
  const int d = std::max(cfg.d, data.rows);
  const int dp = std::max(cfg.dp, data.cols);
  std::vector<Observation> obs = data.observations;
  if (m > 0 && m < static_cast<int>(obs.size())) {
    // Uniform subsample without replacement.
    CounterRng rng(task_seed(cfg.seed, m));
    for (int k = 0; k < m; ++k) {
      const std::size_t j =
          k + static_cast<std::size_t>(rng.below(obs.size() - static_cast<std::size_t>(k)));
      std::swap(obs[k], obs[j]);
    }
    obs.resize(m);
  }
  std::vector<std::pair<int, int>> entries;
  Vector y(static_cast<Eigen::Index>(obs.size()));
  for (std::size_t i = 0; i < obs.size(); ++i) {
    entries.emplace_back(obs[i].row, obs[i].col);
    y[static_cast<Eigen::Index>(i)] = obs[i].value;
  }
  return LabeledTask{MeasurementOperator::completion(d, dp, std::move(entries)), y,
                     std::nullopt};
}

}  // namespace

LabeledTask build_task(const ExperimentConfig& cfg, int m) {
  if (cfg.task_kind == "completion") {
    const Matrix Wstar = generate_ground_truth(cfg.d, cfg.dp, cfg.rank, cfg.seed);
    return make_task(make_completion(cfg.d, cfg.dp, m, task_seed(cfg.seed, m)), Wstar);
  }
  if (cfg.task_kind == "sensing") {
    const Matrix Wstar = generate_ground_truth(cfg.d, cfg.dp, cfg.rank, cfg.seed);
    return make_task(make_gaussian_sensing(cfg.d, cfg.dp, m, task_seed(cfg.seed, m)),
                     Wstar);
  }
  if (cfg.task_kind == "prop1") return make_prop1_instance(cfg.d);
  if (cfg.task_kind == "ratings") return build_ratings_task(cfg, m);
  throw std::invalid_argument("build_task: unknown task kind " + cfg.task_kind);
}

namespace {

FactorStack build_stack(const ExperimentConfig& cfg, const LabeledTask& task, int depth,
                        int trial) {
  const int d = task.op.rows(), dp = task.op.cols();
  if (cfg.init_scheme == "identity") {
    if (d != dp) throw std::invalid_argument("identity init needs square matrices");
    return init_identity(depth, d, cfg.init_scale);
  }
  const int hidden = cfg.hidden > 0 ? cfg.hidden : std::min(d, dp);
  std::vector<int> dims(depth + 1, hidden);
  dims.front() = dp;
  dims.back() = d;
  return init_gaussian(depth, dims, cfg.init_scale, trial_seed(cfg.seed, trial));
}

std::string status_name(TerminalStatus s) {
  switch (s) {
    case TerminalStatus::Converged: return "converged";
    case TerminalStatus::IterCap: return "iter_cap";
    case TerminalStatus::Diverged: return "diverged";
  }
  return "unknown";
}

void write_trajectory_csv(const std::string& path, const TrajectoryRecord& record) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write trajectory: " + path);
  int top_k = 0;
  for (const auto& s : record.snapshots) {
    top_k = std::max<int>(top_k, static_cast<int>(s.signed_singular_values.size()));
  }
  out << "iteration,loss,balancedness,nuclear_norm,effective_rank,"
         "reconstruction_error,align_on_mean,align_off_mean";
  for (int k = 0; k < top_k; ++k) out << ",sigma" << (k + 1);
  out << "\n";
  out << std::setprecision(12);
  for (const auto& s : record.snapshots) {
    out << s.iteration << ',' << s.loss << ',' << s.balancedness << ','
        << s.nuclear_norm << ',' << s.effective_rank << ',' << s.reconstruction_error
        << ',' << s.align_on_mean << ',' << s.align_off_mean;
    for (int k = 0; k < top_k; ++k) {
      out << ',';
      if (k < s.signed_singular_values.size()) out << s.signed_singular_values[k];
    }
    out << "\n";
  }
}

struct BaselineMetrics {
  std::optional<double> recon;
  double nuclear = 0.0;
  double eff_rank = 0.0;
};

std::filesystem::path sibling_path(const std::string& output_path,
                                   const std::string& name) {
  std::filesystem::path p(output_path);
  return p.has_parent_path() ? p.parent_path() / name : std::filesystem::path(name);
}

}  // namespace

void write_csv(const std::vector<ResultRow>& rows, const ExperimentConfig& cfg,
               const RunOptions& opts, std::ostream& out) {
  out << "# dmf-csv v1\n";
  if (!opts.no_timestamp) {
    const std::time_t now = std::time(nullptr);
    char buf[64];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    out << "# generated " << buf << "\n";
  }
  out << "kind,d,dp,rank,m,depth,init,scale,lr,seed,trial,agg,status,iterations,"
         "final_loss,reconstruction_error,nuclear_norm,effective_rank,balancedness,"
         "baseline_reconstruction_error,baseline_nuclear_norm,baseline_effective_rank,"
         "reconstruction_error_std,nuclear_norm_std,effective_rank_std\n";
  out << std::setprecision(12);
  auto opt = [&](const std::optional<double>& v) -> std::string {
    if (!v) return "";
    std::ostringstream ss;
    ss << std::setprecision(12) << *v;
    return ss.str();
  };
  for (const auto& r : rows) {
    out << cfg.task_kind << ',' << cfg.d << ',' << cfg.dp << ',' << cfg.rank << ','
        << r.m << ',' << r.depth << ',' << cfg.init_scheme << ',' << cfg.init_scale
        << ',' << cfg.lr << ',' << cfg.seed << ',' << r.trial << ',' << (r.agg ? 1 : 0)
        << ',' << r.status << ',' << r.iterations << ',' << r.final_loss << ','
        << opt(r.reconstruction_error) << ',' << r.nuclear_norm_value << ','
        << r.effective_rank_value << ',' << r.balancedness_value << ','
        << opt(r.baseline_reconstruction_error) << ',' << opt(r.baseline_nuclear_norm)
        << ',' << opt(r.baseline_effective_rank) << ','
        << opt(r.reconstruction_error_std) << ',' << opt(r.nuclear_norm_std) << ','
        << opt(r.effective_rank_std) << "\n";
  }
}

std::vector<ResultRow> run_experiment(const ExperimentConfig& cfg,
                                      const RunOptions& opts) {
  validate(cfg);
  std::vector<int> ms = cfg.m_grid;
  if (cfg.task_kind == "prop1") ms = {cfg.d - 1};
  if (cfg.task_kind == "ratings" && ms.empty()) ms = {0};

  // Tasks and baselines are per-m; compute them once, up front.
  std::map<int, LabeledTask> tasks;
  std::map<int, BaselineMetrics> baselines;
  for (int m : ms) {
    tasks.emplace(m, build_task(cfg, m));
    if (cfg.baseline_nuclear) {
      const LabeledTask& task = tasks.at(m);
      NuclearOptions nopts;
      nopts.psd = cfg.baseline_psd;
      const NuclearSolution sol = min_nuclear_norm(task, nopts);
      BaselineMetrics bm;
      bm.nuclear = sol.nuclear_value;
      bm.eff_rank = sol.W.norm() > 0.0 ? effective_rank(sol.W) : 1.0;
      if (task.Wstar) bm.recon = reconstruction_error(sol.W, *task.Wstar);
      baselines[m] = bm;
    }
  }

  struct Cell {
    int m, depth, trial;
  };
  std::vector<Cell> cells;
  for (int m : ms) {
    for (int depth : cfg.depths) {
      for (int trial = 0; trial < cfg.trials; ++trial) cells.push_back({m, depth, trial});
    }
  }

  std::vector<ResultRow> per_trial(cells.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;

  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      const Cell& cell = cells[i];
      ResultRow row;
      row.m = cell.m;
      row.depth = cell.depth;
      row.trial = cell.trial;
      try {
        const LabeledTask& task = tasks.at(cell.m);
        FactorStack stack = build_stack(cfg, task, cell.depth, cell.trial);
        TrainConfig tc;
        tc.lr = cfg.lr;
        tc.max_iters = cfg.max_iters;
        tc.loss_stop = cfg.loss_stop;
        tc.snapshot_every = cfg.snapshot_every;
        if (!cfg.trajectories) {
          tc.record = RecordFlags{false, 0, false, false, false, false};
        }
        const TrajectoryRecord record = train(stack, task, tc);
        const Matrix W = product(stack);

        row.status = status_name(record.status);
        row.iterations = record.iterations;
        row.final_loss = record.final_loss;
        if (task.Wstar) row.reconstruction_error = reconstruction_error(W, *task.Wstar);
        row.nuclear_norm_value = nuclear_norm(W);
        row.effective_rank_value = W.norm() > 0.0 ? effective_rank(W) : 1.0;
        row.balancedness_value = cell.depth >= 2 ? balancedness(stack) : 0.0;
        if (cfg.baseline_nuclear) {
          const BaselineMetrics& bm = baselines.at(cell.m);
          row.baseline_reconstruction_error = bm.recon;
          row.baseline_nuclear_norm = bm.nuclear;
          row.baseline_effective_rank = bm.eff_rank;
        }
        if (cfg.trajectories) {
          std::ostringstream name;
          name << "m" << cell.m << "_d" << cell.depth << "_t" << cell.trial
               << ".traj.csv";
          write_trajectory_csv(sibling_path(cfg.output_path, name.str()).string(),
                               record);
        }
        if (!opts.quiet) {
          std::lock_guard<std::mutex> lk(log_mutex);
          std::cerr << "cell m=" << cell.m << " depth=" << cell.depth
                    << " trial=" << cell.trial << " status=" << row.status
                    << " loss=" << row.final_loss << " iters=" << row.iterations
                    << "\n";
        }
      } catch (const std::exception& e) {
        row.status = std::string("error: ") + e.what();
      }
      per_trial[i] = row;
    }
  };

  const int jobs = std::max(1, opts.jobs);
  std::vector<std::thread> threads;
  for (int j = 0; j < jobs - 1; ++j) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();

  // Interleave aggregate rows after each (m, depth) group.
  std::vector<ResultRow> rows;
  std::size_t idx = 0;
  for (int m : ms) {
    for (int depth : cfg.depths) {
      std::vector<const ResultRow*> group;
      for (int trial = 0; trial < cfg.trials; ++trial) group.push_back(&per_trial[idx++]);
      rows.insert(rows.end(), per_trial.begin() + (idx - cfg.trials),
                  per_trial.begin() + idx);
      ResultRow agg;
      agg.m = m;
      agg.depth = depth;
      agg.trial = -1;
      agg.agg = true;
      auto mean_std = [&](auto getter) -> std::pair<std::optional<double>, std::optional<double>> {
        std::vector<double> vals;
        for (const ResultRow* r : group) {
          const auto v = getter(*r);
          if (v) vals.push_back(*v);
        }
        if (vals.empty()) return {std::nullopt, std::nullopt};
        double mean = 0.0;
        for (double v : vals) mean += v;
        mean /= static_cast<double>(vals.size());
        if (vals.size() < 2) return {mean, std::nullopt};
        double var = 0.0;
        for (double v : vals) var += (v - mean) * (v - mean);
        var /= static_cast<double>(vals.size() - 1);
        return {mean, std::sqrt(var)};
      };
      auto [rm, rs] = mean_std([](const ResultRow& r) { return r.reconstruction_error; });
      agg.reconstruction_error = rm;
      agg.reconstruction_error_std = cfg.trials > 1 ? rs : std::nullopt;
      auto [nm, ns] = mean_std([](const ResultRow& r) {
        return std::optional<double>(r.nuclear_norm_value);
      });
      agg.nuclear_norm_value = nm.value_or(0.0);
      agg.nuclear_norm_std = cfg.trials > 1 ? ns : std::nullopt;
      auto [em, es] = mean_std([](const ResultRow& r) {
        return std::optional<double>(r.effective_rank_value);
      });
      agg.effective_rank_value = em.value_or(0.0);
      agg.effective_rank_std = cfg.trials > 1 ? es : std::nullopt;
      double loss_mean = 0.0, bal_mean = 0.0;
      long iter_sum = 0;
      for (const ResultRow* r : group) {
        loss_mean += r->final_loss;
        bal_mean += r->balancedness_value;
        iter_sum += r->iterations;
      }
      agg.balancedness_value = bal_mean / cfg.trials;
      agg.final_loss = loss_mean / cfg.trials;
      agg.iterations = iter_sum / cfg.trials;
      if (cfg.baseline_nuclear) {
        const BaselineMetrics& bm = baselines.at(m);
        agg.baseline_reconstruction_error = bm.recon;
        agg.baseline_nuclear_norm = bm.nuclear;
        agg.baseline_effective_rank = bm.eff_rank;
      }
      rows.push_back(agg);
    }
  }

  std::ofstream out(cfg.output_path);
  if (!out) throw std::runtime_error("cannot write output: " + cfg.output_path);
  write_csv(rows, cfg, opts, out);
  return rows;
}

void run_flow(const ExperimentConfig& cfg, const RunOptions& opts) {
  validate(cfg);
  const int m = cfg.m_grid.empty() ? (cfg.task_kind == "prop1" ? cfg.d - 1 : 0)
                                   : cfg.m_grid.front();
  const LabeledTask task = build_task(cfg, m);
  const int d = task.op.rows(), dp = task.op.cols();
  if (d != dp) throw std::invalid_argument("flow mode needs square matrices");
  const FlowScheme scheme =
      cfg.flow_scheme == "euler" ? FlowScheme::Euler : FlowScheme::RK4;

  for (int N : cfg.depths) {
    const Matrix W0 = std::pow(cfg.init_scale, N) * Matrix::Identity(d, dp);
    std::vector<double> times;
    const int n_rec = 100;
    for (int i = 0; i <= n_rec; ++i) times.push_back(cfg.flow_T * i / n_rec);
    const auto states =
        integrate_product_flow(W0, task, N, cfg.flow_dt, cfg.flow_T, scheme, times);

    std::ostringstream name;
    name << "flow_N" << N << ".traj.csv";
    const auto path = sibling_path(cfg.output_path, name.str());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    const int top_k = std::min(10, std::min(d, dp));
    out << "t,loss,nuclear_norm,align_on_mean,align_off_mean";
    for (int k = 0; k < top_k; ++k) out << ",sigma" << (k + 1);
    out << "\n" << std::setprecision(12);
    SingularTracker tracker;
    for (const auto& st : states) {
      const AlignmentDiagnostic diag =
          alignment_diagnostic(st.svd, loss_grad(task, st.W));
      const Vector tracked = tracker.track(st.svd);
      out << st.t << ',' << loss(task, st.W) << ',' << nuclear_norm(st.W) << ','
          << diag.on_diag_mean << ',' << diag.off_diag_mean;
      for (int k = 0; k < top_k; ++k) out << ',' << tracked[k];
      out << "\n";
    }
    if (!opts.quiet) {
      std::cerr << "flow depth " << N << " -> " << path.string() << "\n";
    }
  }
}

void run_baseline(const ExperimentConfig& cfg, const RunOptions& opts) {
  validate(cfg);
  std::vector<int> ms = cfg.m_grid;
  if (cfg.task_kind == "prop1") ms = {cfg.d - 1};
  std::ofstream out(cfg.output_path);
  if (!out) throw std::runtime_error("cannot write output: " + cfg.output_path);
  out << "# dmf-csv v1\n";
  if (!opts.no_timestamp) {
    const std::time_t now = std::time(nullptr);
    char buf[64];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    out << "# generated " << buf << "\n";
  }
  out << "m,psd,iterations,constraint_residual,nuclear_norm,effective_rank,"
         "reconstruction_error\n"
      << std::setprecision(12);
  for (int m : ms) {
    const LabeledTask task = build_task(cfg, m);
    NuclearOptions nopts;
    nopts.psd = cfg.baseline_psd;
    const NuclearSolution sol = min_nuclear_norm(task, nopts);
    out << m << ',' << (nopts.psd ? 1 : 0) << ',' << sol.iterations << ','
        << sol.constraint_residual << ',' << sol.nuclear_value << ','
        << (sol.W.norm() > 0.0 ? effective_rank(sol.W) : 1.0) << ',';
    if (task.Wstar) out << reconstruction_error(sol.W, *task.Wstar);
    out << "\n";
    if (!opts.quiet) std::cerr << "baseline m=" << m << " done\n";
  }
}

bool run_theory_checks(std::ostream& out) {
  bool all_ok = true;
  auto report = [&](const std::string& name, bool ok, const std::string& detail) {
    out << (ok ? "PASS" : "FAIL") << "  " << name << "  (" << detail << ")\n";
    all_ok = all_ok && ok;
  };

  // Limit trend: gradient descent on the diagonal constraint family with
  // identity init approaches the minimum-nuclear PSD solution as alpha -> 0.
  {
    const LabeledTask task = make_prop1_instance(4);
    std::vector<double> gaps;
    for (double alpha : {1e-1, 1e-2, 1e-3}) {
      FactorStack stack = init_identity(3, 4, alpha);
      TrainConfig tc;
      tc.lr = 1e-2;
      tc.max_iters = 3000000;
      tc.loss_stop = 1e-20;
      tc.record = RecordFlags{false, 0, false, false, false, false};
      train(stack, task, tc);
      gaps.push_back(std::abs(nuclear_norm(product(stack)) - 2.0));
    }
    const bool monotone = gaps[0] > gaps[1] && gaps[1] > gaps[2];
    std::ostringstream detail;
    detail << "nuclear gaps " << gaps[0] << " > " << gaps[1] << " > " << gaps[2];
    report("alpha-grid nuclear norm trend", monotone && gaps[2] <= 5e-2, detail.str());
  }

  // Schatten counterexample strictness across an (eps, p) grid.
  {
    bool ok = true;
    double worst_gap = 1.0;
    for (double eps : {0.05, 0.1, 0.3}) {
      for (double p : {0.25, 0.5, 0.75}) {
        const SchattenComparison cmp = schatten_counterexample(5, eps, p);
        ok = ok && cmp.strictly_smaller && cmp.feas_residual < 1e-12 &&
             cmp.min_eigenvalue > -1e-12;
        worst_gap = std::min(worst_gap, cmp.schatten_nuclear - cmp.schatten_hat);
      }
    }
    std::ostringstream detail;
    detail << "min gap " << worst_gap;
    report("Schatten counterexample", ok && worst_gap > 0.0, detail.str());
  }

  // Paired singular value curves under a single measurement: depth 2 gives a
  // log-log power law, depth 4 saturates the smaller value.
  {
    const int d = 6;
    CounterRng rng(7);
    Matrix A(d, d);
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) A(i, j) = rng.normal();
    }
    MeasurementOperator op = MeasurementOperator::gaussian(d, d, {A});
    Vector y(1);
    y[0] = 10.0;
    const LabeledTask task{op, y, std::nullopt};

    bool ok2 = false, ok4 = false;
    std::ostringstream detail;
    for (int N : {2, 4}) {
      const Matrix W0 = std::pow(0.05, N) * Matrix::Identity(d, d);
      std::vector<double> times;
      for (int i = 0; i <= 400; ++i) times.push_back(40.0 * i / 400);
      const auto states =
          integrate_product_flow(W0, task, N, 1e-2, 40.0, FlowScheme::RK4, times);
      SingularTracker tracker;
      std::vector<Vector> sv;
      for (const auto& st : states) sv.push_back(tracker.track(st.svd));
      const Vector first = sv.front().cwiseAbs(), last = sv.back().cwiseAbs();
      int big = 0;
      double best = -1.0;
      for (int r = 0; r < d; ++r) {
        if (last[r] > best) { best = last[r]; big = r; }
      }
      int small = big == 0 ? 1 : 0;
      best = -1.0;
      for (int r = 0; r < d; ++r) {
        if (r != big && last[r] > best) { best = last[r]; small = r; }
      }
      if (N == 2) {
        // Log-log slope between the two fastest-growing curves.
        std::vector<double> lx, ly;
        for (const auto& v : sv) {
          const double a = std::abs(v[big]), b = std::abs(v[small]);
          if (a > 10.0 * first[big] && b > 10.0 * first[small]) {
            lx.push_back(std::log(a));
            ly.push_back(std::log(b));
          }
        }
        if (lx.size() >= 5) {
          double mx = 0, my = 0;
          for (std::size_t i = 0; i < lx.size(); ++i) { mx += lx[i]; my += ly[i]; }
          mx /= lx.size();
          my /= ly.size();
          double num = 0, den = 0;
          for (std::size_t i = 0; i < lx.size(); ++i) {
            num += (lx[i] - mx) * (ly[i] - my);
            den += (lx[i] - mx) * (lx[i] - mx);
          }
          const double slope = num / den;
          detail << "N=2 slope " << slope << "; ";
          ok2 = slope > 0.0 && slope < 1.5;
        }
      } else {
        const double growth_big = last[big] / std::max(first[big], 1e-300);
        const double growth_small = last[small] / std::max(first[small], 1e-300);
        detail << "N=4 growth big " << growth_big << " small " << growth_small;
        ok4 = growth_big > 4.0 * growth_small;
      }
    }
    report("paired singular value curves", ok2 && ok4, detail.str());
  }

  return all_ok;
}

}  // namespace dmf::harness
