#include "viro/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <thread>

namespace viro {

Metrics compute_metrics(const RobotState& estimate, const RobotState& truth) {
  if (std::abs(estimate.t - truth.t) > 1e-9) {
    throw std::invalid_argument("compute_metrics: timestamp misalignment");
  }
  Metrics m;
  m.pos_err_m = (estimate.position() - truth.position()).norm();
  m.ori_err_deg =
      so3_log(estimate.rotation() * truth.rotation().transpose()).norm() *
      180.0 / M_PI;

  const VecX err = compute_error(estimate, truth);
  VecX e6(6);
  e6 << err.head<3>(), err.segment<3>(6);
  MatX P6(6, 6);
  P6.topLeftCorner<3, 3>() = estimate.cov.block<3, 3>(0, 0);
  P6.topRightCorner<3, 3>() = estimate.cov.block<3, 3>(0, 6);
  P6.bottomLeftCorner<3, 3>() = estimate.cov.block<3, 3>(6, 0);
  P6.bottomRightCorner<3, 3>() = estimate.cov.block<3, 3>(6, 6);
  m.nees = e6.dot(P6.ldlt().solve(e6));
  return m;
}

namespace {

constexpr double kSigmaFloor = 1e-9;

struct FeatureTrack {
  std::vector<std::pair<double, Vec2>> obs;
  bool seen_this_epoch = false;
};

struct TrueClone {
  double t = 0.0;
  Mat3 R = Mat3::Identity();
  Vec3 p = Vec3::Zero();
};

struct StagedFeature {
  uint32_t feature_id = 0;
  Vec3 feat_est = Vec3::Zero();
};

struct RobotRuntime {
  TrajectoryParams traj;
  ImuStream imu;
  RobotState state;
  std::map<uint32_t, FeatureTrack> tracks;
  std::map<uint32_t, RangeWindow> windows;
  std::map<uint32_t, Vec3> anchor_guess;
  std::vector<TrueClone> true_clones;
  std::vector<RangeObservation> ranges;
  std::vector<StagedFeature> staged;
  std::vector<NeighborPacket> inbox;
};

class EpochRunner {
 public:
  EpochRunner(const RunConfig& config, int run_index)
      : cfg_(config),
        world_(build_world(config.scenario)),
        run_seed_(stream_seed(config.seed, static_cast<uint32_t>(run_index),
                              SensorKind::kWorld, 0x52554eULL)) {}

  RunResult run() {
    RunResult result;
    setup();
    const Scenario& sc = cfg_.scenario;
    const int spe = static_cast<int>(std::llround(sc.imu_rate / sc.cam_rate));
    const int epochs = static_cast<int>(std::llround(sc.duration * sc.cam_rate));
    const double imu_dt = 1.0 / sc.imu_rate;

    for (int k = 1; k <= epochs; ++k) {
      const double t_k = k / sc.cam_rate;
      for (auto& r : robots_) {
        for (int s = (k - 1) * spe; s < k * spe; ++s) {
          propagate(r.state, r.imu.samples[static_cast<size_t>(s)], imu_dt,
                    sc.imu_noise);
        }
        gather_measurements(r, k, t_k);
        try_initialize_anchors(r);
        stage_features(r, k);
      }
      if (cfg_.mode == RunMode::kCollaborative) exchange_packets(k);
      for (auto& r : robots_) {
        update_anchors(r);
        update_features(r);
        buffer_anchor_windows(r, t_k);
        roll_window(r, t_k);
        const Metrics m = compute_metrics(r.state, truth_state(r, t_k, k * spe - 1));
        result.rows.push_back({0, k, r.state.robot_id, m.pos_err_m,
                               m.ori_err_deg, m.nees});
        r.inbox.clear();
        r.staged.clear();
      }
    }

    for (const auto& r : robots_) {
      for (int l = 0; l < r.state.num_anchors(); ++l) {
        const uint32_t id = r.state.anchor_ids[static_cast<size_t>(l)];
        const Vec3 truth = anchor_truth(id);
        result.anchor_errors.emplace_back(
            id, (r.state.anchor_position(l) - truth).norm());
      }
    }
    result.packets_read = packets_read_;
    return result;
  }

 private:
  void setup() {
    const Scenario& sc = cfg_.scenario;
    cam_sigma_ = std::max(sc.camera.sigma() * cfg_.sim_noise_scale, kSigmaFloor);
    uwb_sigma_ = std::max(sc.uwb.sigma * cfg_.sim_noise_scale, kSigmaFloor);
    for (uint32_t i = 0; i < sc.robots.size(); ++i) {
      RobotRuntime r;
      r.traj = sc.robots[i];
      r.imu = simulate_imu(r.traj, scaled_noise(), sc.imu_rate, sc.duration,
                           run_seed_, i);
      const TrajectorySample s0 = sample_trajectory(r.traj, 0.0);
      r.state.robot_id = i;
      r.state.t = 0.0;
      r.state.imu = ExtendedPose(s0.R, {s0.v, s0.p});
      r.state.max_clones = sc.clone_window;
      r.state.cov = MatX::Zero(15, 15);
      r.state.cov.topLeftCorner<9, 9>() = 1e-3 * MatX::Identity(9, 9);
      r.state.cov.bottomRightCorner<6, 6>() = 1e-4 * MatX::Identity(6, 6);
      for (const auto& a : world_.anchors) {
        std::mt19937_64 rng(stream_seed(run_seed_, i, SensorKind::kAnchorGuess, a.id));
        std::normal_distribution<double> gauss(0.0, 1.0);
        Vec3 noise;
        for (int d = 0; d < 3; ++d) noise[d] = gauss(rng);
        r.anchor_guess[a.id] = a.position + sc.uwb.anchor_guess_sigma * noise;
      }
      robots_.push_back(std::move(r));
    }
  }

  NoiseParams scaled_noise() const {
    NoiseParams n = cfg_.scenario.imu_noise;
    const double s = std::max(cfg_.sim_noise_scale, 1e-12);
    n.sigma_accel *= s;
    n.sigma_gyro *= s;
    n.sigma_accel_walk *= s;
    n.sigma_gyro_walk *= s;
    return n;
  }

  Vec3 anchor_truth(uint32_t id) const {
    for (const auto& a : world_.anchors) {
      if (a.id == id) return a.position;
    }
    throw std::logic_error("unknown anchor id");
  }

  void gather_measurements(RobotRuntime& r, int epoch, double t_k) {
    const Scenario& sc = cfg_.scenario;
    const TrajectorySample truth = sample_trajectory(r.traj, t_k);
    r.ranges = simulate_uwb(truth, world_, sc.uwb, run_seed_, r.state.robot_id,
                            static_cast<uint64_t>(epoch), cfg_.sim_noise_scale);
    const auto cam_obs =
        simulate_camera(truth, world_, sc.camera, run_seed_, r.state.robot_id,
                        static_cast<uint64_t>(epoch), cfg_.sim_noise_scale);
    for (auto& [fid, track] : r.tracks) track.seen_this_epoch = false;
    for (const auto& obs : cam_obs) {
      auto& track = r.tracks[obs.feature_id];
      track.obs.emplace_back(obs.t, obs.z);
      track.seen_this_epoch = true;
    }
  }

  // Algorithm step 3: first-sight anchors are initialized from the range
  // window and augmented into the state.
  void try_initialize_anchors(RobotRuntime& r) {
    for (auto it = r.windows.begin(); it != r.windows.end();) {
      const uint32_t id = it->first;
      RangeWindow& window = it->second;
      if (r.state.anchor_index(id) >= 0) {
        it = r.windows.erase(it);
        continue;
      }
      if (window.size() < cfg_.scenario.init_window) {
        ++it;
        continue;
      }
      const auto guess = r.anchor_guess.find(id);
      const AnchorSolution sol = solve_anchor_position(
          window, cfg_.scenario.uwb.tag.bias,
          guess != r.anchor_guess.end() ? std::optional<Vec3>(guess->second)
                                        : std::nullopt);
      if (!sol.converged) {
        if (sol.degenerate) {
          ++it;  // keep buffering, the window slides
        } else {
          window.samples.clear();  // diverged: reset
          ++it;
        }
        continue;
      }
      std::vector<int> offsets;
      offsets.reserve(static_cast<size_t>(window.size()));
      for (const auto& s : window.samples) {
        offsets.push_back(clone_offset_at(r.state, s.t));
      }
      const auto init =
          init_covariance(window, sol.position, cfg_.scenario.uwb.tag.bias,
                          uwb_sigma_, r.state, offsets);
      if (!init) {
        ++it;
        continue;
      }
      augment_anchor(r.state, *init, id);
      it = r.windows.erase(it);
    }
  }

  static int clone_offset_at(const RobotState& state, double t) {
    for (int i = 0; i < state.num_clones(); ++i) {
      if (std::abs(state.clones[static_cast<size_t>(i)].t - t) < 1e-9) {
        return state.clone_error_offset(i);
      }
    }
    return -1;
  }

  static int clone_index_at(const RobotState& state, double t) {
    for (int i = 0; i < state.num_clones(); ++i) {
      if (std::abs(state.clones[static_cast<size_t>(i)].t - t) < 1e-9) return i;
    }
    return -2;
  }

  // A feature is processed on the shared cadence or as soon as its track
  // breaks; both triggers are synchronized across robots by the epoch
  // counter, which is what lets common features be fused in one round.
  void stage_features(RobotRuntime& r, int epoch) {
    const bool cadence = (epoch % cfg_.process_every) == 0;
    for (auto& [fid, track] : r.tracks) {
      if (track.obs.empty()) continue;
      if (!cadence && track.seen_this_epoch) continue;
      const auto views = usable_views(r.state, track);
      if (views.size() < 2) {
        if (!track.seen_this_epoch) track.obs.clear();
        continue;
      }
      const auto est = triangulate(views, cfg_.scenario.camera.extrinsics);
      if (!est) {
        if (!track.seen_this_epoch) track.obs.clear();
        continue;
      }
      r.staged.push_back({fid, *est});
    }
  }

  std::vector<TriangulationView> usable_views(const RobotState& state,
                                              const FeatureTrack& track) const {
    std::vector<TriangulationView> views;
    for (const auto& [t, z] : track.obs) {
      if (std::abs(t - state.t) < 1e-9) {
        views.push_back({state.rotation(), state.position(), z});
        continue;
      }
      const int idx = clone_index_at(state, t);
      if (idx >= 0) {
        const Clone& cl = state.clones[static_cast<size_t>(idx)];
        views.push_back({cl.rotation, cl.position, z});
      }
    }
    return views;
  }

  std::vector<std::pair<int, Vec2>> usable_obs(const RobotState& state,
                                               const FeatureTrack& track) const {
    std::vector<std::pair<int, Vec2>> obs;
    for (const auto& [t, z] : track.obs) {
      if (std::abs(t - state.t) < 1e-9) {
        obs.emplace_back(-1, z);
        continue;
      }
      const int idx = clone_index_at(state, t);
      if (idx >= 0) obs.emplace_back(idx, z);
    }
    return obs;
  }

  void exchange_packets(int epoch) {
    const auto links =
        sample_comm_graph(static_cast<int>(robots_.size()),
                          cfg_.scenario.p_link, static_cast<uint64_t>(epoch),
                          run_seed_);
    std::vector<std::vector<std::vector<uint8_t>>> outboxes(robots_.size());
    for (size_t i = 0; i < robots_.size(); ++i) {
      for (const auto& packet : build_packets(robots_[i], epoch)) {
        outboxes[i].push_back(encode_packet(packet));
      }
    }
    for (size_t i = 0; i < robots_.size(); ++i) {
      for (size_t j = 0; j < robots_.size(); ++j) {
        if (i == j || !links[i][j]) continue;
        for (const auto& bytes : outboxes[j]) {
          robots_[i].inbox.push_back(decode_packet(bytes));
          ++packets_read_;
        }
      }
    }
  }

  std::vector<NeighborPacket> build_packets(const RobotRuntime& r, int epoch) {
    std::vector<NeighborPacket> out;
    const TagExtrinsics& tag = cfg_.scenario.uwb.tag;
    for (const auto& obs : r.ranges) {
      const int idx = r.state.anchor_index(obs.anchor_id);
      if (idx < 0) continue;
      const auto H = range_jacobian(r.state, idx, tag);
      if (!H) continue;
      NeighborPacket p;
      p.epoch = static_cast<uint64_t>(epoch);
      p.robot_id = r.state.robot_id;
      p.kind = 0;
      p.target_id = obs.anchor_id;
      p.residual = VecX::Constant(1, obs.d - predict_range(r.state, idx, tag));
      p.jacobian = *H;
      p.product = *H * r.state.cov * H->transpose();
      out.push_back(std::move(p));
    }
    for (const auto& staged : r.staged) {
      const auto& track = r.tracks.at(staged.feature_id);
      const auto block =
          build_feature_block(r.state, usable_obs(r.state, track),
                              staged.feat_est, cfg_.scenario.camera.extrinsics);
      if (!block) continue;
      NeighborPacket p;
      p.epoch = static_cast<uint64_t>(epoch);
      p.robot_id = r.state.robot_id;
      p.kind = 1;
      p.target_id = staged.feature_id;
      p.residual = block->residual;
      p.jacobian = block->H_f;
      p.product = block->H_x * r.state.cov * block->H_x.transpose();
      out.push_back(std::move(p));
    }
    return out;
  }

  void update_anchors(RobotRuntime& r) {
    const TagExtrinsics& tag = cfg_.scenario.uwb.tag;
    UpdateOptions gated;
    gated.gate = true;
    for (const auto& obs : r.ranges) {
      const int idx = r.state.anchor_index(obs.anchor_id);
      if (idx < 0) continue;
      std::vector<NeighborPacket> packets;
      for (const auto& p : r.inbox) {
        if (p.kind == 0 && p.target_id == obs.anchor_id) packets.push_back(p);
      }
      if (!packets.empty()) {
        const StackedSystem sys = build_common_anchor_system(
            r.state, idx, tag, obs.d, uwb_sigma_, packets);
        if (sys.participants.empty()) continue;
        const CiWeights w = choose_weights(r.state, sys, cfg_.ci_weights);
        ci_update(r.state, sys, w);
      } else {
        const auto H = range_jacobian(r.state, idx, tag);
        if (!H) continue;
        const VecX residual =
            VecX::Constant(1, obs.d - predict_range(r.state, idx, tag));
        update_individual(r.state, residual, *H,
                          MatX::Constant(1, 1, uwb_sigma_ * uwb_sigma_), gated);
      }
    }
  }

  void update_features(RobotRuntime& r) {
    UpdateOptions gated;
    gated.gate = true;
    for (const auto& staged : r.staged) {
      auto track_it = r.tracks.find(staged.feature_id);
      if (track_it == r.tracks.end()) continue;
      const auto block =
          build_feature_block(r.state, usable_obs(r.state, track_it->second),
                              staged.feat_est, cfg_.scenario.camera.extrinsics);
      if (!block) {
        r.tracks.erase(track_it);
        continue;
      }
      std::vector<NeighborPacket> packets;
      for (const auto& p : r.inbox) {
        if (p.kind == 1 && p.target_id == staged.feature_id) packets.push_back(p);
      }
      if (!packets.empty()) {
        const auto sys =
            build_common_feature_system(r.state, *block, cam_sigma_, packets);
        if (sys) {
          const CiWeights w = choose_weights(r.state, *sys, cfg_.ci_weights);
          ci_update(r.state, *sys, w);
        }
      } else {
        const auto sys =
            build_common_feature_system(r.state, *block, cam_sigma_, {});
        if (sys) {
          update_individual(r.state, sys->residual, sys->jacobian_blocks[0],
                            sys->noise, gated);
        }
      }
      r.tracks.erase(track_it);
    }
  }

  void buffer_anchor_windows(RobotRuntime& r, double t_k) {
    const TagExtrinsics& tag = cfg_.scenario.uwb.tag;
    for (const auto& obs : r.ranges) {
      if (r.state.anchor_index(obs.anchor_id) >= 0) continue;
      RangeWindow& window = r.windows[obs.anchor_id];
      if (window.size() >= cfg_.scenario.init_window) {
        window.samples.erase(window.samples.begin());
      }
      RangeSample s;
      s.rotation = r.state.rotation();
      s.position = r.state.position();
      s.tag_global = s.position + s.rotation * tag.p_tag;
      s.range = obs.d;
      s.t = t_k;
      window.samples.push_back(s);
    }
  }

  void roll_window(RobotRuntime& r, double t_k) {
    if (r.state.num_clones() >= r.state.max_clones) {
      marginalize_oldest(r.state);
      r.true_clones.erase(r.true_clones.begin());
    }
    clone_pose(r.state, t_k);
    const TrajectorySample truth = sample_trajectory(r.traj, t_k);
    r.true_clones.push_back({t_k, truth.R, truth.p});
  }

  RobotState truth_state(const RobotRuntime& r, double t_k, int bias_index) const {
    const TrajectorySample s = sample_trajectory(r.traj, t_k);
    RobotState truth;
    truth.robot_id = r.state.robot_id;
    truth.t = t_k;
    std::vector<Vec3> cols{s.v, s.p};
    for (uint32_t id : r.state.anchor_ids) cols.push_back(anchor_truth(id));
    truth.imu = ExtendedPose(s.R, std::move(cols));
    truth.anchor_ids = r.state.anchor_ids;
    truth.biases = r.imu.true_biases[static_cast<size_t>(bias_index)];
    truth.max_clones = r.state.max_clones;
    for (const auto& tc : r.true_clones) {
      truth.clones.push_back({tc.R, tc.p, tc.t});
    }
    truth.cov = MatX::Identity(truth.dim(), truth.dim());
    return truth;
  }

  const RunConfig& cfg_;
  WorldModel world_;
  uint64_t run_seed_ = 0;
  double cam_sigma_ = 0.0;
  double uwb_sigma_ = 0.0;
  std::vector<RobotRuntime> robots_;
  uint64_t packets_read_ = 0;
};

}  // namespace

RunResult run_single(const RunConfig& config, int run_index) {
  RunResult result;
  try {
    EpochRunner runner(config, run_index);
    result = runner.run();
    for (auto& row : result.rows) row.run = run_index;
  } catch (const std::exception& e) {
    result.failed = true;
    result.error = e.what();
  }
  return result;
}

namespace {

void append_csv_rows(std::string& csv, const RunResult& result, RunMode mode) {
  char line[256];
  const char* mode_str = mode == RunMode::kCollaborative ? "collab" : "indep";
  for (const auto& row : result.rows) {
    std::snprintf(line, sizeof(line), "%d,%d,%u,%.17g,%.17g,%.17g,%s\n",
                  row.run, row.epoch, row.robot, row.pos_err_m,
                  row.ori_err_deg, row.nees, mode_str);
    csv += line;
  }
}

}  // namespace

McAggregate run_monte_carlo(const RunConfig& config) {
  std::vector<RunResult> results(static_cast<size_t>(config.mc_runs));
  const int hw = static_cast<int>(std::thread::hardware_concurrency());
  const int n_threads = std::max(
      1, std::min(config.mc_runs,
                  config.threads > 0 ? config.threads : std::max(hw, 1)));
  std::atomic<int> next{0};
  auto worker = [&]() {
    while (true) {
      const int idx = next.fetch_add(1);
      if (idx >= config.mc_runs) break;
      results[static_cast<size_t>(idx)] = run_single(config, idx);
    }
  };
  std::vector<std::thread> pool;
  for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
  for (auto& th : pool) th.join();

  McAggregate agg;
  const int n_robots = static_cast<int>(config.scenario.robots.size());
  const int epochs =
      static_cast<int>(std::llround(config.scenario.duration * config.scenario.cam_rate));

  // pos/ori squared-error and NEES accumulators per (epoch, robot)
  MatX pos_sq = MatX::Zero(epochs + 1, n_robots);
  MatX ori_sq = MatX::Zero(epochs + 1, n_robots);
  MatX nees_sum = MatX::Zero(epochs + 1, n_robots);
  std::map<uint32_t, std::pair<double, int>> anchor_acc;

  agg.metrics_csv = "run,epoch,robot,pos_err_m,ori_err_deg,nees,mode\n";
  for (const auto& result : results) {
    if (result.failed) {
      std::fprintf(stderr, "[viro] warn: run failed and was excluded: %s\n",
                   result.error.c_str());
      ++agg.runs_failed;
      continue;
    }
    ++agg.runs_completed;
    agg.packets_read += result.packets_read;
    append_csv_rows(agg.metrics_csv, result, config.mode);
    for (const auto& row : result.rows) {
      pos_sq(row.epoch, row.robot) += row.pos_err_m * row.pos_err_m;
      ori_sq(row.epoch, row.robot) += row.ori_err_deg * row.ori_err_deg;
      nees_sum(row.epoch, row.robot) += row.nees;
    }
    for (const auto& [id, err] : result.anchor_errors) {
      auto& acc = anchor_acc[id];
      acc.first += err;
      acc.second += 1;
    }
  }
  if (agg.runs_completed == 0) return agg;

  const double n_runs = agg.runs_completed;
  agg.robot_prmse_m.assign(static_cast<size_t>(n_robots), 0.0);
  agg.robot_ormse_deg.assign(static_cast<size_t>(n_robots), 0.0);
  double team_p = 0.0, team_o = 0.0, nees_total = 0.0;
  int in_band = 0, below_upper = 0;
  const double n_samples = n_runs * n_robots;
  const double lo_band =
      chi_squared_quantile(0.005, 6.0 * n_samples) / n_samples;
  const double hi_band =
      chi_squared_quantile(0.995, 6.0 * n_samples) / n_samples;

  std::string curves = "epoch,robot,prmse_m,ormse_deg,mean_nees\n";
  char line[256];
  for (int k = 1; k <= epochs; ++k) {
    double team_nees = 0.0;
    for (int i = 0; i < n_robots; ++i) {
      const double prmse = std::sqrt(pos_sq(k, i) / n_runs);
      const double ormse = std::sqrt(ori_sq(k, i) / n_runs);
      const double mean_nees = nees_sum(k, i) / n_runs;
      agg.robot_prmse_m[static_cast<size_t>(i)] += prmse;
      agg.robot_ormse_deg[static_cast<size_t>(i)] += ormse;
      team_p += prmse;
      team_o += ormse;
      team_nees += mean_nees;
      std::snprintf(line, sizeof(line), "%d,%d,%.17g,%.17g,%.17g\n", k, i,
                    prmse, ormse, mean_nees);
      curves += line;
    }
    team_nees /= n_robots;
    nees_total += team_nees;
    if (team_nees <= hi_band) ++below_upper;
    if (team_nees <= hi_band && team_nees >= lo_band) ++in_band;
  }
  for (int i = 0; i < n_robots; ++i) {
    agg.robot_prmse_m[static_cast<size_t>(i)] /= epochs;
    agg.robot_ormse_deg[static_cast<size_t>(i)] /= epochs;
  }
  agg.team_prmse_m = team_p / (epochs * n_robots);
  agg.team_ormse_deg = team_o / (epochs * n_robots);
  agg.mean_nees = nees_total / epochs;
  agg.nees_fraction_in_band = static_cast<double>(in_band) / epochs;
  agg.nees_fraction_below_upper = static_cast<double>(below_upper) / epochs;
  for (const auto& [id, acc] : anchor_acc) {
    if (agg.anchor_final_err_m.size() <= id) agg.anchor_final_err_m.resize(id + 1, 0.0);
    agg.anchor_final_err_m[id] = acc.first / acc.second;
  }

  if (!config.out_dir.empty()) {
    namespace fs = std::filesystem;
    fs::create_directories(config.out_dir);
    std::ofstream(fs::path(config.out_dir) / "metrics.csv") << agg.metrics_csv;
    std::ofstream(fs::path(config.out_dir) / "curves.csv") << curves;
    std::ofstream summary(fs::path(config.out_dir) / "summary.csv");
    summary << "mode,team_prmse_m,team_ormse_deg,mean_nees,nees_frac_in_band,"
               "nees_frac_below_upper,packets_read,runs_completed,runs_failed";
    for (size_t a = 0; a < agg.anchor_final_err_m.size(); ++a) {
      summary << ",anchor" << a << "_err_m";
    }
    summary << "\n";
    summary << (config.mode == RunMode::kCollaborative ? "collab" : "indep");
    std::snprintf(line, sizeof(line), ",%.17g,%.17g,%.17g,%.17g,%.17g",
                  agg.team_prmse_m, agg.team_ormse_deg, agg.mean_nees,
                  agg.nees_fraction_in_band, agg.nees_fraction_below_upper);
    summary << line << "," << agg.packets_read << "," << agg.runs_completed
            << "," << agg.runs_failed;
    for (double err : agg.anchor_final_err_m) {
      std::snprintf(line, sizeof(line), ",%.17g", err);
      summary << line;
    }
    summary << "\n";
  }
  return agg;
}

void write_ground_truth_csv(const Scenario& scenario, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write: " + path);
  out << "t,robot,qw,qx,qy,qz,vx,vy,vz,px,py,pz\n";
  const int epochs =
      static_cast<int>(std::llround(scenario.duration * scenario.cam_rate));
  char line[320];
  for (int k = 0; k <= epochs; ++k) {
    const double t = k / scenario.cam_rate;
    for (size_t i = 0; i < scenario.robots.size(); ++i) {
      const TrajectorySample s = sample_trajectory(scenario.robots[i], t);
      const Eigen::Quaterniond q(s.R);
      std::snprintf(line, sizeof(line),
                    "%.17g,%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,"
                    "%.17g,%.17g,%.17g\n",
                    t, i, q.w(), q.x(), q.y(), q.z(), s.v.x(), s.v.y(),
                    s.v.z(), s.p.x(), s.p.y(), s.p.z());
      out << line;
    }
  }
}

}  // namespace viro
