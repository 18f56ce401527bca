#pragma once

#include <string>

#include "viro/anchor_init.hpp"
#include "viro/fusion.hpp"
#include "viro/sim.hpp"

namespace viro {

enum class RunMode { kCollaborative, kIndependent };

struct RunConfig {
  Scenario scenario;
  RunMode mode = RunMode::kCollaborative;
  int mc_runs = 20;
  WeightMode ci_weights = WeightMode::kEqual;
  std::string out_dir;          // empty: no files written
  uint64_t seed = 1;            // master seed, mixed per run
  int process_every = 5;        // feature-processing cadence, epochs
  int threads = 0;              // 0: hardware concurrency
  double sim_noise_scale = 1.0; // 0 for noiseless end-to-end checks
};

struct MetricsRow {
  int run = 0;
  int epoch = 0;
  uint32_t robot = 0;
  double pos_err_m = 0.0;
  double ori_err_deg = 0.0;
  double nees = 0.0;
};

struct Metrics {
  double pos_err_m = 0.0;
  double ori_err_deg = 0.0;
  double nees = 0.0;
};

// Position error, orientation error |log(Rhat R^T)| in degrees, and NEES
// over the (xi_theta, xi_p) sub-blocks of the right-invariant error.
// Throws on timestamp misalignment.
Metrics compute_metrics(const RobotState& estimate, const RobotState& truth);

struct RunResult {
  std::vector<MetricsRow> rows;
  // final |anchor estimate - truth| per (robot, anchor id), robot-major
  std::vector<std::pair<uint32_t, double>> anchor_errors;
  uint64_t packets_read = 0;
  bool failed = false;
  std::string error;
};

// One full filter run over a freshly simulated world. run_index seeds the
// noise realization; the world itself is fixed by the scenario seed.
RunResult run_single(const RunConfig& config, int run_index);

struct McAggregate {
  // Team-time averages of the per-epoch across-run RMSE (the comparison
  // table analogue), plus per-robot breakdowns.
  double team_prmse_m = 0.0;
  double team_ormse_deg = 0.0;
  std::vector<double> robot_prmse_m;
  std::vector<double> robot_ormse_deg;
  double mean_nees = 0.0;
  double nees_fraction_in_band = 0.0;  // epochs with mean NEES inside 99% band
  double nees_fraction_below_upper = 0.0;
  std::vector<double> anchor_final_err_m;  // indexed by anchor id
  uint64_t packets_read = 0;
  int runs_completed = 0;
  int runs_failed = 0;
  std::string metrics_csv;  // full per-row CSV, also written to disk
};

// Monte-Carlo batch; writes metrics.csv, curves.csv and summary.csv into
// out_dir when set. Failed runs are excluded from aggregates with a
// warning on stderr.
McAggregate run_monte_carlo(const RunConfig& config);

// Ground-truth dump: t, robot, quaternion wxyz, velocity, position.
void write_ground_truth_csv(const Scenario& scenario, const std::string& path);

}  // namespace viro
