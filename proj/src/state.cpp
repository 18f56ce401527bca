#include "viro/state.hpp"

#include <cstring>
#include <stdexcept>

namespace viro {

int RobotState::anchor_index(uint32_t anchor_id) const {
  for (size_t l = 0; l < anchor_ids.size(); ++l) {
    if (anchor_ids[l] == anchor_id) return static_cast<int>(l);
  }
  return -1;
}

void clone_pose(RobotState& state, double t) {
  if (state.num_clones() >= state.max_clones) {
    throw std::runtime_error("clone_pose: window full, marginalize first");
  }
  if (!state.clones.empty() && t <= state.clones.back().t) {
    throw std::runtime_error("clone_pose: timestamps must increase");
  }

  const int d = state.dim();
  const int h = state.clone_offset();  // rows above the clone section
  const int c = d - h;                 // existing clone rows

  // Rows of the new clone twist: theta duplicates rows 0..2, p rows 6..8.
  MatX jp(6, d);
  jp.topRows<3>() = state.cov.topRows<3>();
  jp.bottomRows<3>() = state.cov.middleRows<3>(6);
  MatX jpjt(6, 6);
  jpjt.topLeftCorner<3, 3>() = state.cov.block<3, 3>(0, 0);
  jpjt.topRightCorner<3, 3>() = state.cov.block<3, 3>(0, 6);
  jpjt.bottomLeftCorner<3, 3>() = state.cov.block<3, 3>(6, 0);
  jpjt.bottomRightCorner<3, 3>() = state.cov.block<3, 3>(6, 6);

  MatX grown = MatX::Zero(d + 6, d + 6);
  grown.topLeftCorner(h, h) = state.cov.topLeftCorner(h, h);
  grown.block(0, h, h, 6) = jp.leftCols(h).transpose();
  grown.block(h, 0, 6, h) = jp.leftCols(h);
  grown.block(h, h, 6, 6) = jpjt;
  if (c > 0) {
    grown.block(0, h + 6, h, c) = state.cov.block(0, h, h, c);
    grown.block(h + 6, 0, c, h) = state.cov.block(h, 0, c, h);
    grown.block(h, h + 6, 6, c) = jp.rightCols(c);
    grown.block(h + 6, h, c, 6) = jp.rightCols(c).transpose();
    grown.bottomRightCorner(c, c) = state.cov.bottomRightCorner(c, c);
  }

  state.clones.push_back({state.rotation(), state.position(), t});
  state.cov = std::move(grown);
  state.symmetrize();
}

void marginalize_oldest(RobotState& state) {
  if (state.clones.empty()) {
    throw std::runtime_error("marginalize_oldest: empty window");
  }
  const int d = state.dim();
  state.clones.erase(state.clones.begin());
  // Oldest clone lives in the last 6 rows/columns of the error state.
  state.cov = state.cov.topLeftCorner(d - 6, d - 6).eval();
}

void apply_correction(RobotState& state, const VecX& epsilon) {
  if (epsilon.size() != state.dim()) {
    throw std::invalid_argument("apply_correction: dimension mismatch");
  }
  state.imu = sek3_compose(sek3_exp(epsilon.head(state.imu_dof())), state.imu);
  state.biases.gyro += epsilon.segment<3>(state.bias_offset());
  state.biases.accel += epsilon.segment<3>(state.bias_offset() + 3);
  for (int i = 0; i < state.num_clones(); ++i) {
    const int off = state.clone_error_offset(i);
    VecX xi(6);
    xi << epsilon.segment<3>(off), epsilon.segment<3>(off + 3);
    const ExtendedPose delta = sek3_exp(xi);
    Clone& cl = state.clones[static_cast<size_t>(i)];
    cl.position = delta.rotation * cl.position + delta.columns[0];
    cl.rotation = delta.rotation * cl.rotation;
  }
}

VecX compute_error(const RobotState& state_hat, const RobotState& state_true) {
  if (state_hat.dim() != state_true.dim() ||
      state_hat.anchor_ids != state_true.anchor_ids) {
    throw std::invalid_argument("compute_error: state layout mismatch");
  }
  VecX err(state_hat.dim());
  err.head(state_hat.imu_dof()) =
      sek3_log(sek3_compose(state_hat.imu, sek3_inverse(state_true.imu)));
  err.segment<3>(state_hat.bias_offset()) =
      state_hat.biases.gyro - state_true.biases.gyro;
  err.segment<3>(state_hat.bias_offset() + 3) =
      state_hat.biases.accel - state_true.biases.accel;
  for (int i = 0; i < state_hat.num_clones(); ++i) {
    const Clone& a = state_hat.clones[static_cast<size_t>(i)];
    const Clone& b = state_true.clones[static_cast<size_t>(i)];
    const ExtendedPose ea(a.rotation, {a.position});
    const ExtendedPose eb(b.rotation, {b.position});
    err.segment<6>(state_hat.clone_error_offset(i)) =
        sek3_log(sek3_compose(ea, sek3_inverse(eb)));
  }
  return err;
}

namespace {

template <typename T>
void put(std::vector<uint8_t>& out, const T& v) {
  const auto* p = reinterpret_cast<const uint8_t*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

template <typename T>
T take(const std::vector<uint8_t>& in, size_t& pos) {
  if (pos + sizeof(T) > in.size()) {
    throw std::runtime_error("snapshot: truncated record");
  }
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

}  // namespace

std::vector<uint8_t> serialize_snapshot(const RobotState& state) {
  std::vector<uint8_t> out;
  put<uint64_t>(out, 0);  // patched below
  put<uint32_t>(out, state.robot_id);
  put<double>(out, state.t);
  put<uint32_t>(out, static_cast<uint32_t>(state.dim()));
  put<uint32_t>(out, static_cast<uint32_t>(state.anchor_ids.size()));
  for (uint32_t id : state.anchor_ids) put<uint32_t>(out, id);
  const MatX pose = state.imu.as_matrix();
  for (int r = 0; r < pose.rows(); ++r) {
    for (int c = 0; c < pose.cols(); ++c) put<double>(out, pose(r, c));
  }
  for (int i = 0; i < 3; ++i) put<double>(out, state.biases.gyro[i]);
  for (int i = 0; i < 3; ++i) put<double>(out, state.biases.accel[i]);
  put<uint32_t>(out, static_cast<uint32_t>(state.clones.size()));
  for (const Clone& cl : state.clones) {
    put<double>(out, cl.t);
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) put<double>(out, cl.rotation(r, c));
    }
    for (int i = 0; i < 3; ++i) put<double>(out, cl.position[i]);
  }
  for (int r = 0; r < state.cov.rows(); ++r) {
    for (int c = 0; c <= r; ++c) put<double>(out, state.cov(r, c));
  }
  const uint64_t len = out.size() - sizeof(uint64_t);
  std::memcpy(out.data(), &len, sizeof(uint64_t));
  return out;
}

RobotState deserialize_snapshot(const std::vector<uint8_t>& bytes) {
  size_t pos = 0;
  const auto len = take<uint64_t>(bytes, pos);
  if (len + sizeof(uint64_t) != bytes.size()) {
    throw std::runtime_error("snapshot: length prefix mismatch");
  }
  RobotState state;
  state.robot_id = take<uint32_t>(bytes, pos);
  state.t = take<double>(bytes, pos);
  const auto dim = take<uint32_t>(bytes, pos);
  const auto n_anchors = take<uint32_t>(bytes, pos);
  state.anchor_ids.resize(n_anchors);
  for (auto& id : state.anchor_ids) id = take<uint32_t>(bytes, pos);
  const int K = 2 + static_cast<int>(n_anchors);
  MatX pose(3 + K, 3 + K);
  for (int r = 0; r < pose.rows(); ++r) {
    for (int c = 0; c < pose.cols(); ++c) pose(r, c) = take<double>(bytes, pos);
  }
  state.imu.rotation = pose.topLeftCorner<3, 3>();
  state.imu.columns.clear();
  for (int j = 0; j < K; ++j) state.imu.columns.push_back(pose.block<3, 1>(0, 3 + j));
  for (int i = 0; i < 3; ++i) state.biases.gyro[i] = take<double>(bytes, pos);
  for (int i = 0; i < 3; ++i) state.biases.accel[i] = take<double>(bytes, pos);
  const auto n_clones = take<uint32_t>(bytes, pos);
  state.clones.resize(n_clones);
  for (Clone& cl : state.clones) {
    cl.t = take<double>(bytes, pos);
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) cl.rotation(r, c) = take<double>(bytes, pos);
    }
    for (int i = 0; i < 3; ++i) cl.position[i] = take<double>(bytes, pos);
  }
  state.max_clones = std::max(state.max_clones, static_cast<int>(n_clones));
  state.cov = MatX::Zero(dim, dim);
  for (uint32_t r = 0; r < dim; ++r) {
    for (uint32_t c = 0; c <= r; ++c) {
      state.cov(r, c) = take<double>(bytes, pos);
      state.cov(c, r) = state.cov(r, c);
    }
  }
  if (static_cast<int>(dim) != state.dim()) {
    throw std::runtime_error("snapshot: inconsistent dimensions");
  }
  return state;
}

}  // namespace viro
