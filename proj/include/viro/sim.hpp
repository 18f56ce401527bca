#pragma once

#include <string>

#include "viro/propagation.hpp"
#include "viro/sensing.hpp"

namespace viro {

struct WorldModel {
  struct Anchor {
    uint32_t id = 0;
    Vec3 position = Vec3::Zero();
  };
  struct Feature {
    uint32_t id = 0;
    Vec3 position = Vec3::Zero();
  };
  std::vector<Anchor> anchors;
  std::vector<Feature> features;
};

// Closed-form trajectory: an ellipse with sinusoidal height, yaw tracking
// the loop, and small pitch/roll oscillations so the motion stays general
// (nonzero angular rate about several axes, nonplanar acceleration).
struct TrajectoryParams {
  Vec3 start = Vec3::Zero();
  double yaw0 = 0.0;
  double radius_x = 4.0;
  double radius_y = 3.0;
  double rate = 0.2;       // rad/s around the loop
  double phase = 0.0;
  double z_amp = 0.5;
  double z_rate = 0.4;
  double pitch_amp = 0.15;
  double pitch_rate = 0.7;
  double roll_amp = 0.15;
  double roll_rate = 0.9;
};

struct TrajectorySample {
  double t = 0.0;
  Mat3 R = Mat3::Identity();       // IMU -> global
  Vec3 v = Vec3::Zero();
  Vec3 p = Vec3::Zero();
  Vec3 omega_body = Vec3::Zero();  // rad/s in the IMU frame
  Vec3 accel_world = Vec3::Zero(); // p-double-dot
};

TrajectorySample sample_trajectory(const TrajectoryParams& params, double t);

struct CameraParams {
  double focal_px = 460.0;
  double pixel_sigma = 1.0;
  double fov_deg = 90.0;
  double min_depth = 0.3;
  double max_depth = 20.0;
  CameraExtrinsics extrinsics;
  double sigma() const { return pixel_sigma / focal_px; }
};

struct UwbParams {
  double sigma = 0.1;
  double max_range = 30.0;
  TagExtrinsics tag;
  double anchor_guess_sigma = 0.1;  // initial-iterate perturbation level
};

struct Scenario {
  std::string name = "traj_a";
  double duration = 40.0;
  double imu_rate = 100.0;
  double cam_rate = 10.0;
  double uwb_rate = 10.0;
  double p_link = 0.70;
  uint64_t seed = 1;
  int clone_window = 10;
  int init_window = 50;
  int num_features = 200;
  Vec3 workspace_min = Vec3(-2.0, -2.0, -0.5);
  Vec3 workspace_max = Vec3(22.0, 17.0, 3.5);
  CameraParams camera;
  UwbParams uwb;
  NoiseParams imu_noise;
  std::vector<WorldModel::Anchor> anchors;
  std::vector<TrajectoryParams> robots;
};

// Four robots and three anchors at the published starting poses.
Scenario default_scenario();

Scenario load_scenario(const std::string& path);
void save_scenario(const Scenario& scenario, const std::string& path);

// Features scattered over workspace walls, ceiling, and interior,
// deterministic under the scenario seed.
WorldModel build_world(const Scenario& scenario);

// Deterministic per-stream RNG seeding: every draw is reproducible from
// (master seed, robot id, sensor kind, epoch).
enum class SensorKind : uint32_t {
  kImu = 1,
  kCamera = 2,
  kUwb = 3,
  kComm = 4,
  kBias = 5,
  kWorld = 6,
  kAnchorGuess = 7,
};
uint64_t stream_seed(uint64_t master, uint32_t robot, SensorKind kind,
                     uint64_t epoch);

struct ImuStream {
  std::vector<ImuSample> samples;
  std::vector<ImuBiases> true_biases;  // aligned with samples
};

// a_m = R^T (p_ddot - g) + b_a + n_a, w_m = w + b_w + n_w; biases start at
// zero and random-walk; discrete sigma = sigma_c * sqrt(rate).
ImuStream simulate_imu(const TrajectoryParams& traj, const NoiseParams& noise,
                       double rate, double duration, uint64_t master,
                       uint32_t robot);

// In-frustum features with depth in [min, max], 1-pixel-equivalent noise.
std::vector<FeatureObservation> simulate_camera(
    const TrajectorySample& pose, const WorldModel& world,
    const CameraParams& camera, uint64_t master, uint32_t robot,
    uint64_t epoch, double noise_scale = 1.0);

std::vector<RangeObservation> simulate_uwb(const TrajectorySample& pose,
                                           const WorldModel& world,
                                           const UwbParams& uwb,
                                           uint64_t master, uint32_t robot,
                                           uint64_t epoch,
                                           double noise_scale = 1.0);

// Symmetric per-epoch link matrix; each unordered pair is up independently
// with probability p_link.
std::vector<std::vector<bool>> sample_comm_graph(int n_robots, double p_link,
                                                 uint64_t epoch,
                                                 uint64_t master);

}  // namespace viro
