#pragma once

// Marker-based inverse kinematics with bone scaling. Per-frame poses come
// from damped Gauss-Newton warm-started along the trial; bone scales from a
// global Gauss-Newton pass over all frames. The two alternate.

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include <Eigen/Cholesky>

#include "gaitdyn/signal.hpp"
#include "gaitdyn/skeleton.hpp"
#include "gaitdyn/trial.hpp"

namespace gaitdyn {

struct KinefitConfig {
  int pose_iterations = 50;
  int warm_pose_iterations = 20;
  double step_tolerance = 1e-12;
  double lambda_init = 1e-3;
  int outer_rounds = 3;
  double rms_tolerance = 1e-5;  // m
  bool fit_scales = true;
  int scale_iterations = 10;
  double scale_min = 0.5, scale_max = 2.0;
  double failure_rms = 0.2;  // m
  int min_markers = 4;
};

struct KinematicFit {
  MatX poses;  // T x N
  std::vector<Vec3> scales;
  double marker_rms = 0.0;  // m
  VecX frame_rms;  // per frame, m; NaN on interpolated frames
  std::vector<int> interpolated_frames;
  std::vector<double> round_rms;  // after each alternation round
};

class KinematicFitError : public DiagnosticError {
 public:
  KinematicFitError(const std::string& what, KinematicFit best)
      : DiagnosticError(what), best_(std::move(best)) {}
  const KinematicFit& best() const { return best_; }

 private:
  KinematicFit best_;
};

namespace detail {

struct MarkerSet {
  std::vector<int> index;
  std::vector<Vec3> position;
};

inline MarkerSet observed_markers(const Frame& f) {
  MarkerSet s;
  for (std::size_t i = 0; i < f.markers.size(); ++i)
    if (f.markers[i]) {
      s.index.push_back(static_cast<int>(i));
      s.position.push_back(*f.markers[i]);
    }
  return s;
}

inline VecX marker_residual(const Skeleton& skel, const KinematicState& ks, const MarkerSet& obs) {
  VecX r(3 * obs.index.size());
  for (std::size_t k = 0; k < obs.index.size(); ++k)
    r.segment<3>(3 * k) = marker_position(skel, ks, obs.index[k]) - obs.position[k];
  return r;
}

/// Levenberg iterations on one frame; returns the final squared residual.
inline double solve_frame(const Skeleton& skel, const MarkerSet& obs, VecX& q, int iterations,
                          const KinefitConfig& cfg) {
  const int n = skel.dofs();
  KinematicState ks = kinematic_state(skel, q);
  VecX r = marker_residual(skel, ks, obs);
  double cost = r.squaredNorm();
  double lambda = cfg.lambda_init;
  MatX jac(r.size(), n);
  for (int it = 0; it < iterations; ++it) {
    for (std::size_t k = 0; k < obs.index.size(); ++k)
      jac.middleRows<3>(3 * k) = marker_jacobian(skel, ks, obs.index[k]);
    const MatX jtj = jac.transpose() * jac;
    const VecX g = jac.transpose() * r;
    bool accepted = false;
    VecX step;
    for (int tries = 0; tries < 12 && !accepted; ++tries) {
      MatX h = jtj;
      h.diagonal().array() += lambda;
      step = -h.ldlt().solve(g);
      VecX trial = q + step;
      KinematicState ks2 = kinematic_state(skel, trial);
      VecX r2 = marker_residual(skel, ks2, obs);
      const double c2 = r2.squaredNorm();
      if (c2 <= cost) {
        q = trial;
        ks = std::move(ks2);
        r = std::move(r2);
        cost = c2;
        lambda = std::max(lambda / 10.0, 1e-12);
        accepted = true;
      } else {
        lambda *= 10.0;
      }
    }
    if (!accepted || step.norm() < cfg.step_tolerance) break;
  }
  return cost;
}

}  // namespace detail

/// Per-frame pose solve with fixed skeleton. Frames with fewer than
/// `min_markers` observations are filled by linear interpolation of their
/// solved neighbours. `init` (T x N) seeds each frame when given; otherwise
/// frames are chained from the previous solution.
inline KinematicFit solve_poses(const Skeleton& skel, const Trial& trial,
                                const KinefitConfig& cfg = {},
                                const std::optional<MatX>& init = std::nullopt) {
  check_trial_matches(skel, trial);
  const int n = trial.frame_count();
  const int dofs = skel.dofs();
  KinematicFit fit;
  fit.poses = MatX::Zero(n, dofs);
  fit.scales = skel.scales();
  fit.frame_rms = VecX::Constant(n, std::nan(""));
  std::vector<bool> solved(n, false);
  std::optional<VecX> prev;
  double total = 0.0;
  long count = 0;
  for (int t = 0; t < n; ++t) {
    const auto obs = detail::observed_markers(trial.frames[t]);
    if (static_cast<int>(obs.index.size()) < cfg.min_markers) continue;
    VecX q;
    int iterations = cfg.warm_pose_iterations;
    if (init) {
      q = init->row(t).transpose();
    } else if (prev) {
      q = *prev;
    } else {
      q = VecX::Zero(dofs);
      if (skel.floating_base()) {
        Vec3 centroid = Vec3::Zero();
        for (const auto& p : obs.position) centroid += p;
        q.segment<3>(3) = centroid / static_cast<double>(obs.position.size());
      }
      iterations = cfg.pose_iterations;
    }
    const double cost = detail::solve_frame(skel, obs, q, iterations, cfg);
    fit.poses.row(t) = q.transpose();
    fit.frame_rms[t] = std::sqrt(cost / obs.index.size());
    total += cost;
    count += static_cast<long>(obs.index.size());
    solved[t] = true;
    prev = q;
  }
  require(count > 0, "inverse kinematics needs at least " + std::to_string(cfg.min_markers) +
                         " observed markers on some frame");
  for (int t = 0; t < n; ++t) {
    if (solved[t]) continue;
    fit.interpolated_frames.push_back(t);
    int a = t - 1, b = t + 1;
    while (a >= 0 && !solved[a]) --a;
    while (b < n && !solved[b]) ++b;
    if (a < 0) {
      fit.poses.row(t) = fit.poses.row(b);
    } else if (b >= n) {
      fit.poses.row(t) = fit.poses.row(a);
    } else {
      const double w = static_cast<double>(t - a) / (b - a);
      fit.poses.row(t) = (1.0 - w) * fit.poses.row(a) + w * fit.poses.row(b);
    }
  }
  fit.marker_rms = std::sqrt(total / count);
  return fit;
}

/// Marker RMS of `poses` on `skel` over all observed markers of the
/// non-interpolated frames.
inline double marker_rms(const Skeleton& skel, const Trial& trial, const MatX& poses,
                         const std::vector<int>& skip = {}) {
  double total = 0.0;
  long count = 0;
  for (int t = 0; t < trial.frame_count(); ++t) {
    if (std::binary_search(skip.begin(), skip.end(), t)) continue;
    const auto obs = detail::observed_markers(trial.frames[t]);
    if (obs.index.empty()) continue;
    total += detail::marker_residual(skel, kinematic_state(skel, Pose(poses.row(t).transpose())), obs)
                 .squaredNorm();
    count += static_cast<long>(obs.index.size());
  }
  return count ? std::sqrt(total / count) : 0.0;
}

struct ScaleSolve {
  std::vector<Vec3> scales;
  MatX poses;
};

/// Gauss-Newton over all per-body scale components using every frame's
/// residuals. Each step eliminates the per-frame pose corrections (Schur
/// complement), so scales and poses move together; the scale Jacobian is a
/// forward difference, the pose Jacobian analytic. Levenberg damping,
/// projection onto the scale bounds.
inline ScaleSolve solve_scales(const Skeleton& skel, const Trial& trial, const MatX& poses,
                               const std::vector<int>& skip, const KinefitConfig& cfg = {}) {
  const int nb = skel.body_count();
  const int np = 3 * nb;
  const int nq = skel.dofs();
  const int frames = trial.frame_count();
  auto pack = [&](const std::vector<Vec3>& s) {
    VecX p(np);
    for (int b = 0; b < nb; ++b) p.segment<3>(3 * b) = s[b];
    return p;
  };
  auto unpack = [&](const VecX& p) {
    std::vector<Vec3> s(nb);
    for (int b = 0; b < nb; ++b) s[b] = p.segment<3>(3 * b);
    return s;
  };
  std::vector<detail::MarkerSet> obs(frames);
  for (int t = 0; t < frames; ++t)
    if (!std::binary_search(skip.begin(), skip.end(), t))
      obs[t] = detail::observed_markers(trial.frames[t]);
  auto cost_of = [&](const VecX& p, const MatX& q) {
    const Skeleton s = skel.with_scales(unpack(p));
    double c = 0.0;
    for (int t = 0; t < frames; ++t)
      if (!obs[t].index.empty())
        c += detail::marker_residual(s, kinematic_state(s, Pose(q.row(t).transpose())), obs[t])
                 .squaredNorm();
    return c;
  };
  VecX p = pack(skel.scales());
  MatX q = poses;
  double cost = cost_of(p, q);
  double lambda = cfg.lambda_init;
  struct FrameBlocks {
    MatX jqtjq, jqtjs;
    VecX jqtr;
  };
  for (int it = 0; it < cfg.scale_iterations; ++it) {
    MatX jstjs = MatX::Zero(np, np);
    VecX jstr = VecX::Zero(np);
    std::vector<FrameBlocks> blocks(frames);
    const Skeleton base = skel.with_scales(unpack(p));
    std::vector<Skeleton> bumped;
    const double h = 1e-7;
    for (int j = 0; j < np; ++j) {
      VecX pj = p;
      pj[j] += h;
      bumped.push_back(skel.with_scales(unpack(pj)));
    }
    for (int t = 0; t < frames; ++t) {
      if (obs[t].index.empty()) continue;
      const Pose qt = q.row(t).transpose();
      const KinematicState ks = kinematic_state(base, qt);
      const VecX r = detail::marker_residual(base, ks, obs[t]);
      MatX js(r.size(), np), jq(r.size(), nq);
      for (int j = 0; j < np; ++j)
        js.col(j) =
            (detail::marker_residual(bumped[j], kinematic_state(bumped[j], qt), obs[t]) - r) / h;
      for (std::size_t k = 0; k < obs[t].index.size(); ++k)
        jq.middleRows(3 * k, 3) = marker_jacobian(base, ks, obs[t].index[k]);
      jstjs.noalias() += js.transpose() * js;
      jstr.noalias() += js.transpose() * r;
      blocks[t] = {jq.transpose() * jq, jq.transpose() * js, jq.transpose() * r};
    }
    bool accepted = false;
    double step_norm = 0.0;
    for (int tries = 0; tries < 12 && !accepted; ++tries) {
      std::vector<Eigen::LDLT<MatX>> inv(frames);
      MatX reduced = jstjs;
      reduced.diagonal().array() += lambda;
      VecX g = jstr;
      for (int t = 0; t < frames; ++t) {
        if (obs[t].index.empty()) continue;
        MatX a = blocks[t].jqtjq;
        a.diagonal().array() += lambda;
        inv[t].compute(a);
        reduced.noalias() -= blocks[t].jqtjs.transpose() * inv[t].solve(blocks[t].jqtjs);
        g.noalias() -= blocks[t].jqtjs.transpose() * inv[t].solve(blocks[t].jqtr);
      }
      const VecX trial_p =
          (p - reduced.ldlt().solve(g)).cwiseMax(cfg.scale_min).cwiseMin(cfg.scale_max);
      const VecX ds = trial_p - p;
      MatX trial_q = q;
      for (int t = 0; t < frames; ++t)
        if (!obs[t].index.empty())
          trial_q.row(t) -= inv[t].solve(blocks[t].jqtr + blocks[t].jqtjs * ds).transpose();
      const double c2 = cost_of(trial_p, trial_q);
      if (c2 <= cost) {
        step_norm = ds.norm();
        p = trial_p;
        q = std::move(trial_q);
        cost = c2;
        lambda = std::max(lambda / 10.0, 1e-12);
        accepted = true;
      } else {
        lambda *= 10.0;
      }
    }
    if (!accepted || step_norm < 1e-10) break;
  }
  return {unpack(p), std::move(q)};
}

/// Alternating pose / scale fit. Scales start from the skeleton's own
/// scales. Marker RMS is non-increasing across rounds; a round that would
/// increase it is discarded and the loop stops.
inline KinematicFit fit_kinematics(const Skeleton& skel, const Trial& trial,
                                   const KinefitConfig& cfg = {}) {
  KinematicFit fit = solve_poses(skel, trial, cfg);
  fit.round_rms.push_back(fit.marker_rms);
  if (cfg.fit_scales) {
    for (int round = 0; round < cfg.outer_rounds; ++round) {
      const ScaleSolve step = solve_scales(skel.with_scales(fit.scales), trial, fit.poses,
                                           fit.interpolated_frames, cfg);
      KinematicFit next = solve_poses(skel.with_scales(step.scales), trial, cfg, step.poses);
      if (next.marker_rms > fit.marker_rms) break;
      const double gain = fit.marker_rms - next.marker_rms;
      next.round_rms = fit.round_rms;
      next.round_rms.push_back(next.marker_rms);
      fit = std::move(next);
      if (gain < cfg.rms_tolerance) break;
    }
  }
  if (!(fit.marker_rms <= cfg.failure_rms))
    throw KinematicFitError("inverse kinematics did not converge: marker RMS " +
                                format_double(fit.marker_rms) + " m",
                            fit);
  return fit;
}

struct PoseDerivatives {
  MatX qd, qdd;  // T x N
};

/// qdd: second central differences then the zero-phase low-pass; qd: first
/// central differences, same filter.
inline PoseDerivatives pose_derivatives(const MatX& poses, double dt,
                                        double cutoff_hz = kStandardCutoffHz,
                                        int order = kStandardFilterOrder) {
  TimeSeries q{dt, poses};
  return {butterworth_lowpass(central_difference1(q), cutoff_hz, order).samples,
          butterworth_lowpass(central_difference2(q), cutoff_hz, order).samples};
}

}  // namespace gaitdyn
