#include "viro/fusion.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <cstdio>
#include <cstring>
#include <stdexcept>

namespace viro {

double chi_squared_quantile(double probability, double dof) {
  return boost::math::quantile(boost::math::chi_squared(dof), probability);
}

namespace {

bool innovation_usable(const MatX& S, double max_condition, double* eigmin) {
  Eigen::SelfAdjointEigenSolver<MatX> es(S);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (eigmin != nullptr) *eigmin = lo;
  return lo > 0.0 && hi / lo < max_condition;
}

}  // namespace

UpdateStatus update_individual(RobotState& state, const VecX& residual,
                               const MatX& H, const MatX& R_meas,
                               const UpdateOptions& opts) {
  if (H.cols() != state.dim() || H.rows() != residual.size()) {
    throw std::invalid_argument("update_individual: dimension mismatch");
  }
  const MatX PHt = state.cov * H.transpose();
  const MatX S = H * PHt + R_meas;
  if (!innovation_usable(S, opts.max_condition, nullptr)) {
    std::fprintf(stderr,
                 "[viro] warn: robot %u skipped update, singular innovation\n",
                 state.robot_id);
    return UpdateStatus::kSkippedSingular;
  }
  const Eigen::LDLT<MatX> ldlt(S);
  if (opts.gate) {
    const double mahal = residual.dot(ldlt.solve(residual));
    if (mahal > chi_squared_quantile(opts.gate_probability,
                                     static_cast<double>(residual.size()))) {
      return UpdateStatus::kGated;
    }
  }
  const MatX K = (ldlt.solve(PHt.transpose())).transpose();
  apply_correction(state, K * residual);
  state.cov -= PHt * ldlt.solve(PHt.transpose());
  state.symmetrize();
  return UpdateStatus::kApplied;
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
    throw std::runtime_error("packet: truncated record");
  }
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

}  // namespace

std::vector<uint8_t> encode_packet(const NeighborPacket& p) {
  std::vector<uint8_t> out;
  put<uint64_t>(out, 0);
  put<uint64_t>(out, p.epoch);
  put<uint32_t>(out, p.robot_id);
  put<uint8_t>(out, p.kind);
  put<uint32_t>(out, p.target_id);
  put<uint32_t>(out, static_cast<uint32_t>(p.residual.size()));
  for (int i = 0; i < p.residual.size(); ++i) put<double>(out, p.residual[i]);
  put<uint32_t>(out, static_cast<uint32_t>(p.jacobian.rows()));
  put<uint32_t>(out, static_cast<uint32_t>(p.jacobian.cols()));
  for (int r = 0; r < p.jacobian.rows(); ++r) {
    for (int c = 0; c < p.jacobian.cols(); ++c) put<double>(out, p.jacobian(r, c));
  }
  put<uint32_t>(out, static_cast<uint32_t>(p.product.rows()));
  for (int r = 0; r < p.product.rows(); ++r) {
    for (int c = 0; c <= r; ++c) put<double>(out, p.product(r, c));
  }
  const uint64_t len = out.size() - sizeof(uint64_t);
  std::memcpy(out.data(), &len, sizeof(uint64_t));
  return out;
}

NeighborPacket decode_packet(const std::vector<uint8_t>& bytes) {
  size_t pos = 0;
  const auto len = take<uint64_t>(bytes, pos);
  if (len + sizeof(uint64_t) != bytes.size()) {
    throw std::runtime_error("packet: length prefix mismatch");
  }
  NeighborPacket p;
  p.epoch = take<uint64_t>(bytes, pos);
  p.robot_id = take<uint32_t>(bytes, pos);
  p.kind = take<uint8_t>(bytes, pos);
  p.target_id = take<uint32_t>(bytes, pos);
  const auto nr = take<uint32_t>(bytes, pos);
  p.residual.resize(nr);
  for (uint32_t i = 0; i < nr; ++i) p.residual[i] = take<double>(bytes, pos);
  const auto jr = take<uint32_t>(bytes, pos);
  const auto jc = take<uint32_t>(bytes, pos);
  p.jacobian.resize(jr, jc);
  for (uint32_t r = 0; r < jr; ++r) {
    for (uint32_t c = 0; c < jc; ++c) p.jacobian(r, c) = take<double>(bytes, pos);
  }
  const auto pn = take<uint32_t>(bytes, pos);
  p.product.resize(pn, pn);
  for (uint32_t r = 0; r < pn; ++r) {
    for (uint32_t c = 0; c <= r; ++c) {
      p.product(r, c) = take<double>(bytes, pos);
      p.product(c, r) = p.product(r, c);
    }
  }
  return p;
}

StackedSystem build_common_anchor_system(
    const RobotState& ego, int anchor_index, const TagExtrinsics& tag,
    double measured_range, double sigma_range,
    const std::vector<NeighborPacket>& packets) {
  StackedSystem sys;
  const auto H = range_jacobian(ego, anchor_index, tag);
  if (!H) return sys;  // coincident geometry, caller skips

  const uint32_t anchor_id = ego.anchor_ids[static_cast<size_t>(anchor_index)];
  sys.participants.push_back(ego.robot_id);
  sys.jacobian_blocks.emplace_back(*H);
  std::vector<double> residuals{measured_range -
                                predict_range(ego, anchor_index, tag)};
  for (const auto& p : packets) {
    if (p.kind != 0 || p.target_id != anchor_id || p.residual.size() != 1) {
      continue;
    }
    sys.participants.push_back(p.robot_id);
    sys.jacobian_blocks.push_back(p.jacobian);
    sys.neighbor_products.push_back(p.product);
    residuals.push_back(p.residual[0]);
  }
  sys.residual = Eigen::Map<const VecX>(residuals.data(),
                                        static_cast<long>(residuals.size()));
  sys.noise = sigma_range * sigma_range *
              MatX::Identity(sys.residual.size(), sys.residual.size());
  return sys;
}

std::optional<FeatureBlock> build_feature_block(
    const RobotState& state, const std::vector<std::pair<int, Vec2>>& obs,
    const Vec3& feat_est, const CameraExtrinsics& cam) {
  std::vector<FeatureJacobian> rows;
  std::vector<Vec2> residuals;
  for (const auto& [clone_index, z] : obs) {
    auto jac = feature_jacobians(state, clone_index, feat_est, cam);
    if (!jac) continue;
    residuals.push_back(z - jac->predicted);
    rows.push_back(std::move(*jac));
  }
  if (rows.empty()) return std::nullopt;
  FeatureBlock block;
  const int n = static_cast<int>(rows.size());
  block.residual.resize(2 * n);
  block.H_x.resize(2 * n, state.dim());
  block.H_f.resize(2 * n, 3);
  for (int i = 0; i < n; ++i) {
    block.residual.segment<2>(2 * i) = residuals[static_cast<size_t>(i)];
    block.H_x.middleRows<2>(2 * i) = rows[static_cast<size_t>(i)].H_x;
    block.H_f.middleRows<2>(2 * i) = rows[static_cast<size_t>(i)].H_f;
  }
  return block;
}

std::optional<StackedSystem> build_common_feature_system(
    const RobotState& ego, const FeatureBlock& ego_block, double sigma_cam,
    const std::vector<NeighborPacket>& packets) {
  const long r0 = ego_block.residual.size();
  long rows = r0;
  for (const auto& p : packets) rows += p.residual.size();
  if (rows <= 3) return std::nullopt;

  MatX Hf_stack(rows, 3);
  VecX z_stack(rows);
  Hf_stack.topRows(r0) = ego_block.H_f;
  z_stack.head(r0) = ego_block.residual;
  long off = r0;
  for (const auto& p : packets) {
    Hf_stack.middleRows(off, p.residual.size()) = p.jacobian;
    z_stack.segment(off, p.residual.size()) = p.residual;
    off += p.residual.size();
  }

  // Left null space of the stacked feature Jacobian.
  const Eigen::HouseholderQR<MatX> qr(Hf_stack);
  const MatX Q = qr.householderQ();
  const MatX N = Q.rightCols(rows - 3);

  StackedSystem sys;
  sys.participants.push_back(ego.robot_id);
  sys.jacobian_blocks.emplace_back(N.topRows(r0).transpose() * ego_block.H_x);
  off = r0;
  for (const auto& p : packets) {
    const MatX Nj = N.middleRows(off, p.residual.size());
    sys.participants.push_back(p.robot_id);
    sys.jacobian_blocks.emplace_back();  // only the product crosses the wire
    sys.neighbor_products.push_back(Nj.transpose() * p.product * Nj);
    off += p.residual.size();
  }
  sys.residual = N.transpose() * z_stack;
  sys.noise = sigma_cam * sigma_cam * MatX::Identity(rows - 3, rows - 3);
  return sys;
}

namespace {

struct CiPrep {
  long r = 0;
  VecX y;
  MatX Rn;
  std::vector<MatX> hph;  // per participant
  MatX PHt;               // Pbar * H_ego^T
};

CiPrep prepare_ci(const RobotState& state, const StackedSystem& sys) {
  CiPrep prep;
  const size_t n = sys.participants.size();
  if (n == 0 || sys.jacobian_blocks.empty()) {
    throw std::invalid_argument("ci_update: empty system");
  }
  if (sys.neighbor_products.size() != n - 1) {
    throw std::invalid_argument("ci_update: missing neighbor products");
  }
  const MatX& H0 = sys.jacobian_blocks[0];
  prep.r = H0.rows();
  if (sys.residual.size() == prep.r) {
    prep.y = sys.residual;
    prep.Rn = sys.noise;
  } else if (sys.residual.size() == static_cast<long>(n) * prep.r) {
    // Per-participant residual blocks are summed into one innovation of
    // the ego block's row dimension; the noise term enters once.
    prep.y = VecX::Zero(prep.r);
    for (size_t j = 0; j < n; ++j) {
      prep.y += sys.residual.segment(static_cast<long>(j) * prep.r, prep.r);
    }
    prep.Rn = sys.noise.topLeftCorner(prep.r, prep.r);
  } else {
    throw std::invalid_argument("ci_update: residual/block shape mismatch");
  }
  prep.PHt = state.cov * H0.transpose();
  prep.hph.push_back(H0 * prep.PHt);
  for (const MatX& prod : sys.neighbor_products) {
    if (prod.rows() != prep.r || prod.cols() != prep.r) {
      throw std::invalid_argument("ci_update: product shape mismatch");
    }
    prep.hph.push_back(prod);
  }
  return prep;
}

MatX ci_innovation(const CiPrep& prep, const std::vector<double>& omega) {
  MatX S = prep.Rn;
  for (size_t j = 0; j < prep.hph.size(); ++j) {
    S += prep.hph[j] / omega[j];
  }
  return S;
}

}  // namespace

UpdateStatus ci_update(RobotState& state, const StackedSystem& system,
                       const CiWeights& weights, const UpdateOptions& opts) {
  const CiPrep prep = prepare_ci(state, system);
  if (weights.omega.size() != system.participants.size()) {
    throw std::invalid_argument("ci_update: weight count mismatch");
  }
  double sum = 0.0;
  for (double w : weights.omega) {
    if (w <= 0.0) throw std::invalid_argument("ci_update: weights must be > 0");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-12) {
    throw std::invalid_argument("ci_update: weights must sum to 1");
  }

  const double wi = weights.omega[0];
  const MatX S = ci_innovation(prep, weights.omega);
  if (!innovation_usable(S, opts.max_condition, nullptr)) {
    std::fprintf(stderr,
                 "[viro] warn: robot %u skipped CI update, singular S\n",
                 state.robot_id);
    return UpdateStatus::kSkippedSingular;
  }
  const Eigen::LDLT<MatX> ldlt(S);
  const VecX eps = prep.PHt * ldlt.solve(prep.y) / wi;
  apply_correction(state, eps);
  state.cov = state.cov / wi -
              prep.PHt * ldlt.solve(prep.PHt.transpose()) / (wi * wi);
  state.symmetrize();
  return UpdateStatus::kApplied;
}

CiWeights choose_weights(const RobotState& ego, const StackedSystem& system,
                         WeightMode mode) {
  const size_t n = system.participants.size();
  CiWeights w;
  w.omega.assign(n, 1.0 / static_cast<double>(n));
  if (mode == WeightMode::kEqual || n == 1) return w;

  const CiPrep prep = prepare_ci(ego, system);
  const double trace_p = ego.cov.trace();
  const MatX C2 = prep.PHt.transpose() * prep.PHt;  // H P^2 H^T

  auto objective = [&](const std::vector<double>& omega) {
    const MatX S = ci_innovation(prep, omega);
    Eigen::SelfAdjointEigenSolver<MatX> es(S);
    if (es.eigenvalues().minCoeff() <= 0.0) {
      return std::numeric_limits<double>::infinity();
    }
    const double w0 = omega[0];
    return trace_p / w0 - S.ldlt().solve(C2).trace() / (w0 * w0);
  };

  constexpr double kMinW = 1e-3;
  std::vector<double> best = w.omega;
  double best_val = objective(best);

  if (n == 2) {
    // Golden-section over the ego weight.
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = kMinW, b = 1.0 - kMinW;
    double c = b - gr * (b - a), d = a + gr * (b - a);
    auto eval = [&](double w0) { return objective({w0, 1.0 - w0}); };
    double fc = eval(c), fd = eval(d);
    for (int it = 0; it < 60; ++it) {
      if (fc < fd) {
        b = d;
        d = c;
        fd = fc;
        c = b - gr * (b - a);
        fc = eval(c);
      } else {
        a = c;
        c = d;
        fc = fd;
        d = a + gr * (b - a);
        fd = eval(d);
      }
    }
    const double w0 = (a + b) / 2.0;
    if (eval(w0) < best_val) best = {w0, 1.0 - w0};
  } else {
    // Projected gradient descent from the equal point.
    std::vector<double> cur = best;
    double step = 0.1;
    for (int it = 0; it < 80; ++it) {
      std::vector<double> grad(n);
      const double f0 = objective(cur);
      const double h = 1e-6;
      for (size_t j = 0; j < n; ++j) {
        auto probe = cur;
        probe[j] += h;
        const double s = 1.0 + h;
        for (auto& x : probe) x /= s;
        grad[j] = (objective(probe) - f0) / h;
      }
      auto next = cur;
      for (size_t j = 0; j < n; ++j) next[j] -= step * grad[j];
      double total = 0.0;
      for (auto& x : next) {
        x = std::max(x, kMinW);
        total += x;
      }
      for (auto& x : next) x /= total;
      if (objective(next) < f0) {
        cur = next;
        step *= 1.2;
      } else {
        step *= 0.5;
        if (step < 1e-6) break;
      }
    }
    if (objective(cur) < best_val) best = cur;
  }
  w.omega = best;
  return w;
}

}  // namespace viro
