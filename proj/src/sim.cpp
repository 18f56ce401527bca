#include "viro/sim.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

#include "json.hpp"

namespace viro {

namespace {

Mat3 rot_x(double a) {
  Mat3 m;
  m << 1, 0, 0, 0, std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a);
  return m;
}
Mat3 rot_y(double a) {
  Mat3 m;
  m << std::cos(a), 0, std::sin(a), 0, 1, 0, -std::sin(a), 0, std::cos(a);
  return m;
}
Mat3 rot_z(double a) {
  Mat3 m;
  m << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
  return m;
}

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

uint64_t stream_seed(uint64_t master, uint32_t robot, SensorKind kind,
                     uint64_t epoch) {
  uint64_t h = splitmix64(master);
  h = splitmix64(h ^ (static_cast<uint64_t>(robot) + 0x51ULL));
  h = splitmix64(h ^ (static_cast<uint64_t>(kind) << 32));
  return splitmix64(h ^ epoch);
}

TrajectorySample sample_trajectory(const TrajectoryParams& tp, double t) {
  TrajectorySample s;
  s.t = t;

  const double a = tp.rate * t + tp.phase;
  const double ca = std::cos(a), sa = std::sin(a);
  const double c0 = std::cos(tp.phase), s0 = std::sin(tp.phase);
  s.p = tp.start + Vec3(tp.radius_x * (ca - c0), tp.radius_y * (sa - s0),
                        tp.z_amp * std::sin(tp.z_rate * t));
  s.v = Vec3(-tp.radius_x * tp.rate * sa, tp.radius_y * tp.rate * ca,
             tp.z_amp * tp.z_rate * std::cos(tp.z_rate * t));
  s.accel_world =
      Vec3(-tp.radius_x * tp.rate * tp.rate * ca,
           -tp.radius_y * tp.rate * tp.rate * sa,
           -tp.z_amp * tp.z_rate * tp.z_rate * std::sin(tp.z_rate * t));

  const double yaw = tp.yaw0 + tp.rate * t;
  const double pitch = tp.pitch_amp * std::sin(tp.pitch_rate * t);
  const double roll = tp.roll_amp * std::sin(tp.roll_rate * t + 0.7);
  s.R = rot_z(yaw) * rot_y(pitch) * rot_x(roll);

  // Body rates from the ZYX Euler chain: R = Rz Ry Rx, Rdot = R skew(w).
  const double yaw_dot = tp.rate;
  const double pitch_dot = tp.pitch_amp * tp.pitch_rate * std::cos(tp.pitch_rate * t);
  const double roll_dot = tp.roll_amp * tp.roll_rate * std::cos(tp.roll_rate * t + 0.7);
  s.omega_body = Vec3::UnitX() * roll_dot +
                 rot_x(roll).transpose() *
                     (Vec3::UnitY() * pitch_dot +
                      rot_y(pitch).transpose() * Vec3::UnitZ() * yaw_dot);
  return s;
}

Scenario default_scenario() {
  Scenario sc;
  sc.anchors = {{0, Vec3(0.0, 0.0, 0.0)},
                {1, Vec3(0.0, 15.0, 2.0)},
                {2, Vec3(5.0, 15.0, 2.0)}};
  // Published starting poses; phases chosen so the loops stay inside the
  // workspace and overlap pairwise for shared features.
  TrajectoryParams r0;
  r0.start = Vec3(14.0, 4.0, 0.0);
  r0.yaw0 = 0.0;
  r0.rate = 0.20;
  TrajectoryParams r1;
  r1.start = Vec3(14.0, 11.0, 0.0);
  r1.yaw0 = M_PI;
  r1.rate = 0.22;
  r1.z_rate = 0.5;
  TrajectoryParams r2;
  r2.start = Vec3(6.0, 4.0, 0.0);
  r2.yaw0 = 0.0;
  r2.rate = 0.18;
  r2.phase = M_PI;
  r2.pitch_rate = 0.8;
  TrajectoryParams r3;
  r3.start = Vec3(6.0, 11.0, 0.0);
  r3.yaw0 = M_PI;
  r3.rate = 0.21;
  r3.phase = M_PI;
  r3.roll_rate = 1.1;
  sc.robots = {r0, r1, r2, r3};
  return sc;
}

namespace {

using nlohmann::json;

json vec_to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }
Vec3 vec_from_json(const json& j) { return Vec3(j.at(0), j.at(1), j.at(2)); }

}  // namespace

void save_scenario(const Scenario& sc, const std::string& path) {
  json j;
  j["name"] = sc.name;
  j["duration_s"] = sc.duration;
  j["rates_hz"] = {{"imu", sc.imu_rate}, {"camera", sc.cam_rate}, {"uwb", sc.uwb_rate}};
  j["p_link"] = sc.p_link;
  j["seed"] = sc.seed;
  j["clone_window"] = sc.clone_window;
  j["init_window"] = sc.init_window;
  j["num_features"] = sc.num_features;
  j["workspace"] = {{"min", vec_to_json(sc.workspace_min)},
                    {"max", vec_to_json(sc.workspace_max)}};
  j["camera"] = {{"focal_px", sc.camera.focal_px},
                 {"pixel_sigma", sc.camera.pixel_sigma},
                 {"fov_deg", sc.camera.fov_deg},
                 {"min_depth", sc.camera.min_depth},
                 {"max_depth", sc.camera.max_depth},
                 {"p_CI", vec_to_json(sc.camera.extrinsics.p_CI)}};
  j["uwb"] = {{"sigma", sc.uwb.sigma},
              {"max_range", sc.uwb.max_range},
              {"tag_offset", vec_to_json(sc.uwb.tag.p_tag)},
              {"bias", sc.uwb.tag.bias},
              {"anchor_guess_sigma", sc.uwb.anchor_guess_sigma}};
  j["imu_noise"] = {{"sigma_accel", vec_to_json(sc.imu_noise.sigma_accel)},
                    {"sigma_gyro", vec_to_json(sc.imu_noise.sigma_gyro)},
                    {"sigma_accel_walk", vec_to_json(sc.imu_noise.sigma_accel_walk)},
                    {"sigma_gyro_walk", vec_to_json(sc.imu_noise.sigma_gyro_walk)}};
  j["anchors"] = json::array();
  for (const auto& a : sc.anchors) {
    j["anchors"].push_back({{"id", a.id}, {"position", vec_to_json(a.position)}});
  }
  j["robots"] = json::array();
  for (const auto& r : sc.robots) {
    j["robots"].push_back({{"start", vec_to_json(r.start)},
                           {"yaw0", r.yaw0},
                           {"radius_x", r.radius_x},
                           {"radius_y", r.radius_y},
                           {"rate", r.rate},
                           {"phase", r.phase},
                           {"z_amp", r.z_amp},
                           {"z_rate", r.z_rate},
                           {"pitch_amp", r.pitch_amp},
                           {"pitch_rate", r.pitch_rate},
                           {"roll_amp", r.roll_amp},
                           {"roll_rate", r.roll_rate}});
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write scenario: " + path);
  out << j.dump(2) << "\n";
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read scenario: " + path);
  json j;
  in >> j;

  Scenario sc;
  sc.name = j.value("name", sc.name);
  sc.duration = j.value("duration_s", sc.duration);
  if (j.contains("rates_hz")) {
    sc.imu_rate = j["rates_hz"].value("imu", sc.imu_rate);
    sc.cam_rate = j["rates_hz"].value("camera", sc.cam_rate);
    sc.uwb_rate = j["rates_hz"].value("uwb", sc.uwb_rate);
  }
  sc.p_link = j.value("p_link", sc.p_link);
  sc.seed = j.value("seed", sc.seed);
  sc.clone_window = j.value("clone_window", sc.clone_window);
  sc.init_window = j.value("init_window", sc.init_window);
  sc.num_features = j.value("num_features", sc.num_features);
  if (j.contains("workspace")) {
    sc.workspace_min = vec_from_json(j["workspace"]["min"]);
    sc.workspace_max = vec_from_json(j["workspace"]["max"]);
  }
  if (j.contains("camera")) {
    const auto& c = j["camera"];
    sc.camera.focal_px = c.value("focal_px", sc.camera.focal_px);
    sc.camera.pixel_sigma = c.value("pixel_sigma", sc.camera.pixel_sigma);
    sc.camera.fov_deg = c.value("fov_deg", sc.camera.fov_deg);
    sc.camera.min_depth = c.value("min_depth", sc.camera.min_depth);
    sc.camera.max_depth = c.value("max_depth", sc.camera.max_depth);
    if (c.contains("p_CI")) sc.camera.extrinsics.p_CI = vec_from_json(c["p_CI"]);
  }
  if (j.contains("uwb")) {
    const auto& u = j["uwb"];
    sc.uwb.sigma = u.value("sigma", sc.uwb.sigma);
    sc.uwb.max_range = u.value("max_range", sc.uwb.max_range);
    if (u.contains("tag_offset")) sc.uwb.tag.p_tag = vec_from_json(u["tag_offset"]);
    sc.uwb.tag.bias = u.value("bias", sc.uwb.tag.bias);
    sc.uwb.anchor_guess_sigma = u.value("anchor_guess_sigma", sc.uwb.anchor_guess_sigma);
  }
  if (j.contains("imu_noise")) {
    const auto& n = j["imu_noise"];
    sc.imu_noise.sigma_accel = vec_from_json(n["sigma_accel"]);
    sc.imu_noise.sigma_gyro = vec_from_json(n["sigma_gyro"]);
    if (n.contains("sigma_accel_walk")) {
      sc.imu_noise.sigma_accel_walk = vec_from_json(n["sigma_accel_walk"]);
    }
    if (n.contains("sigma_gyro_walk")) {
      sc.imu_noise.sigma_gyro_walk = vec_from_json(n["sigma_gyro_walk"]);
    }
  }
  for (const auto& a : j.value("anchors", json::array())) {
    sc.anchors.push_back({a.at("id").get<uint32_t>(), vec_from_json(a.at("position"))});
  }
  for (const auto& r : j.value("robots", json::array())) {
    TrajectoryParams tp;
    tp.start = vec_from_json(r.at("start"));
    tp.yaw0 = r.value("yaw0", tp.yaw0);
    tp.radius_x = r.value("radius_x", tp.radius_x);
    tp.radius_y = r.value("radius_y", tp.radius_y);
    tp.rate = r.value("rate", tp.rate);
    tp.phase = r.value("phase", tp.phase);
    tp.z_amp = r.value("z_amp", tp.z_amp);
    tp.z_rate = r.value("z_rate", tp.z_rate);
    tp.pitch_amp = r.value("pitch_amp", tp.pitch_amp);
    tp.pitch_rate = r.value("pitch_rate", tp.pitch_rate);
    tp.roll_amp = r.value("roll_amp", tp.roll_amp);
    tp.roll_rate = r.value("roll_rate", tp.roll_rate);
    sc.robots.push_back(tp);
  }
  if (sc.anchors.empty() || sc.robots.empty()) {
    Scenario defaults = default_scenario();
    if (sc.anchors.empty()) sc.anchors = defaults.anchors;
    if (sc.robots.empty()) sc.robots = defaults.robots;
  }
  return sc;
}

WorldModel build_world(const Scenario& sc) {
  WorldModel world;
  world.anchors = sc.anchors;
  std::mt19937_64 rng(stream_seed(sc.seed, 0, SensorKind::kWorld, 0));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Vec3 lo = sc.workspace_min;
  const Vec3 hi = sc.workspace_max;
  const Vec3 span = hi - lo;
  for (int i = 0; i < sc.num_features; ++i) {
    Vec3 p;
    const double pick = unit(rng);
    const double u = unit(rng), v = unit(rng), w = unit(rng);
    if (pick < 0.35) {  // ceiling
      p = Vec3(lo.x() + u * span.x(), lo.y() + v * span.y(), hi.z());
    } else if (pick < 0.65) {  // one of the four walls, upper half
      const double z = lo.z() + (0.5 + 0.5 * w) * span.z();
      const int wall = static_cast<int>(v * 4.0) % 4;
      if (wall == 0) p = Vec3(lo.x(), lo.y() + u * span.y(), z);
      else if (wall == 1) p = Vec3(hi.x(), lo.y() + u * span.y(), z);
      else if (wall == 2) p = Vec3(lo.x() + u * span.x(), lo.y(), z);
      else p = Vec3(lo.x() + u * span.x(), hi.y(), z);
    } else {  // interior, above the flight band
      p = Vec3(lo.x() + u * span.x(), lo.y() + v * span.y(),
               lo.z() + (0.4 + 0.6 * w) * span.z());
    }
    world.features.push_back({static_cast<uint32_t>(i), p});
  }
  return world;
}

ImuStream simulate_imu(const TrajectoryParams& traj, const NoiseParams& noise,
                       double rate, double duration, uint64_t master,
                       uint32_t robot) {
  ImuStream stream;
  const double dt = 1.0 / rate;
  const int n = static_cast<int>(std::llround(duration * rate));
  const double sqrt_rate = std::sqrt(rate);
  const double sqrt_dt = std::sqrt(dt);
  ImuBiases bias;  // starts at zero, random walk
  stream.samples.reserve(static_cast<size_t>(n));
  stream.true_biases.reserve(static_cast<size_t>(n));
  for (int k = 0; k < n; ++k) {
    const double t = (k + 1) * dt;
    const TrajectorySample s = sample_trajectory(traj, t);
    std::mt19937_64 rng(stream_seed(master, robot, SensorKind::kImu,
                                    static_cast<uint64_t>(k)));
    std::normal_distribution<double> gauss(0.0, 1.0);
    Vec3 n_w, n_a, w_w, w_a;
    for (int i = 0; i < 3; ++i) n_w[i] = gauss(rng);
    for (int i = 0; i < 3; ++i) n_a[i] = gauss(rng);
    for (int i = 0; i < 3; ++i) w_w[i] = gauss(rng);
    for (int i = 0; i < 3; ++i) w_a[i] = gauss(rng);

    ImuSample m;
    m.t = t;
    m.omega_m = s.omega_body + bias.gyro +
                sqrt_rate * noise.sigma_gyro.cwiseProduct(n_w);
    m.accel_m = s.R.transpose() * (s.accel_world - gravity()) + bias.accel +
                sqrt_rate * noise.sigma_accel.cwiseProduct(n_a);
    stream.samples.push_back(m);
    stream.true_biases.push_back(bias);

    bias.gyro += sqrt_dt * noise.sigma_gyro_walk.cwiseProduct(w_w);
    bias.accel += sqrt_dt * noise.sigma_accel_walk.cwiseProduct(w_a);
  }
  return stream;
}

std::vector<FeatureObservation> simulate_camera(
    const TrajectorySample& pose, const WorldModel& world,
    const CameraParams& camera, uint64_t master, uint32_t robot,
    uint64_t epoch, double noise_scale) {
  std::vector<FeatureObservation> out;
  std::mt19937_64 rng(stream_seed(master, robot, SensorKind::kCamera, epoch));
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double half_tan = std::tan(0.5 * camera.fov_deg * M_PI / 180.0);
  for (const auto& f : world.features) {
    const Vec3 p_cam =
        to_camera_frame(pose.R, pose.p, f.position, camera.extrinsics);
    if (p_cam.z() < camera.min_depth || p_cam.z() > camera.max_depth) continue;
    const auto z = project(p_cam);
    if (!z || std::abs((*z).x()) > half_tan || std::abs((*z).y()) > half_tan) {
      continue;
    }
    FeatureObservation obs;
    obs.robot_id = robot;
    obs.feature_id = f.id;
    obs.t = pose.t;
    obs.z = *z + noise_scale * camera.sigma() * Vec2(gauss(rng), gauss(rng));
    out.push_back(obs);
  }
  return out;
}

std::vector<RangeObservation> simulate_uwb(const TrajectorySample& pose,
                                           const WorldModel& world,
                                           const UwbParams& uwb,
                                           uint64_t master, uint32_t robot,
                                           uint64_t epoch, double noise_scale) {
  std::vector<RangeObservation> out;
  std::mt19937_64 rng(stream_seed(master, robot, SensorKind::kUwb, epoch));
  std::normal_distribution<double> gauss(0.0, 1.0);
  const Vec3 tag_global = pose.p + pose.R * uwb.tag.p_tag;
  for (const auto& a : world.anchors) {
    const double d_true = (tag_global - a.position).norm();
    if (d_true > uwb.max_range) continue;
    RangeObservation obs;
    obs.robot_id = robot;
    obs.anchor_id = a.id;
    obs.t = pose.t;
    obs.d = d_true + uwb.tag.bias + noise_scale * uwb.sigma * gauss(rng);
    out.push_back(obs);
  }
  return out;
}

std::vector<std::vector<bool>> sample_comm_graph(int n_robots, double p_link,
                                                 uint64_t epoch,
                                                 uint64_t master) {
  std::vector<std::vector<bool>> links(
      static_cast<size_t>(n_robots),
      std::vector<bool>(static_cast<size_t>(n_robots), false));
  std::mt19937_64 rng(stream_seed(master, 0, SensorKind::kComm, epoch));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < n_robots; ++i) {
    for (int j = i + 1; j < n_robots; ++j) {
      const bool up = unit(rng) < p_link;
      links[static_cast<size_t>(i)][static_cast<size_t>(j)] = up;
      links[static_cast<size_t>(j)][static_cast<size_t>(i)] = up;
    }
  }
  return links;
}

}  // namespace viro
