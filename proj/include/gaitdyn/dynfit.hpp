// Inverse dynamics, root residuals and the joint pose / scale / mass fit.
//
// The fit minimizes the least-squares objective
//   sum_t |markers(q_t, s) - o_t|^2 + sum_{t in D} |w_dyn * tau_t[0:6]|^2
// where D holds interior frames (central differences defined) whose forces are
// observed. Velocities and accelerations inside the objective are plain
// central differences of the pose series, so each dynamics residual couples
// three neighbouring frames.
#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <json.hpp>

#include "gaitdyn/comfit.hpp"
#include "gaitdyn/common.hpp"
#include "gaitdyn/kinefit.hpp"
#include "gaitdyn/skeleton.hpp"
#include "gaitdyn/skeleton_io.hpp"
#include "gaitdyn/trial.hpp"

namespace gaitdyn {

inline constexpr double kHicksLinearBW = 0.05;
inline constexpr double kHicksAngularBWh = 0.1;

struct InverseDynamics {
  VecX tau;       // joint torques, root entries zeroed on a floating base
  Vec6 residual;  // tau[0:6] before zeroing: root rotational then translational
};

/// tau = RNEA(q, qd, qdd) - sum_c J_c^T w_c. On a floating base the first six
/// entries are the residual and are reported separately.
inline InverseDynamics inverse_dynamics(const Skeleton& skel, const KinematicState& ks,
                                        const VecX& qd, const VecX& qdd, const VecX& wrenches) {
  InverseDynamics out;
  out.tau = rnea(skel, ks, qd, qdd) - contact_generalized_forces(skel, ks, wrenches);
  out.residual.setZero();
  if (skel.floating_base()) {
    out.residual = out.tau.head<6>();
    out.tau.head<6>().setZero();
  }
  return out;
}

inline InverseDynamics inverse_dynamics(const Skeleton& skel, const Pose& q, const VecX& qd,
                                        const VecX& qdd, const VecX& wrenches) {
  return inverse_dynamics(skel, kinematic_state(skel, q), qd, qdd, wrenches);
}

struct QualityReport {
  double marker_rms_cm = 0.0;
  double linear_residual_bw = 0.0;
  double angular_residual_bwh = 0.0;
  bool passes_hicks = true;
};

/// RMS of the per-frame residual norms over the frames listed, normalized by
/// body weight and body weight times height.
inline QualityReport quality_report(double marker_rms_m, const MatX& residual_linear,
                                    const MatX& residual_angular, const std::vector<int>& frames,
                                    const SubjectMeta& subject) {
  QualityReport q;
  q.marker_rms_cm = 100.0 * marker_rms_m;
  double lin = 0.0, ang = 0.0;
  for (int t : frames) {
    lin += residual_linear.row(t).squaredNorm();
    ang += residual_angular.row(t).squaredNorm();
  }
  const double n = std::max<std::size_t>(frames.size(), 1);
  const double bw = subject.mass_kg * kGravity;
  q.linear_residual_bw = std::sqrt(lin / n) / bw;
  q.angular_residual_bwh = std::sqrt(ang / n) / (bw * subject.height_m);
  q.passes_hicks = q.linear_residual_bw <= kHicksLinearBW && q.angular_residual_bwh <= kHicksAngularBWh;
  return q;
}

struct DynfitConfig {
  double w_dyn = 1e-3;          // m per N
  int max_outer = 10;
  double rel_tolerance = 1e-5;
  int pose_iterations = 3;
  int scale_iterations = 2;
  double fd_relative = 1e-6;
  double lambda_init = 1e-3;
  double mass_bound = 0.3;      // total mass within +-30% of the subject's
  bool fit_poses = true;
  bool fit_scales = true;
  bool fit_mass = true;
};

struct DynamicsFit {
  Skeleton skeleton;            // scales and masses of the fit
  double dt = 0.0;
  MatX poses, qd, qdd;          // T x N
  MatX tau;                     // T x N, root entries zero, NaN on frames without forces
  MatX residual_linear;         // T x 3 (N), NaN on frames without forces
  MatX residual_angular;        // T x 3 (N m), NaN on frames without forces
  std::vector<int> unobserved;
  std::vector<int> dynamics_frames;
  double marker_rms = 0.0;      // m
  std::vector<double> objective_history;
  std::vector<std::string> warnings;
  QualityReport quality;
};

namespace detail {

/// Velocities and accelerations inside the objective: central differences,
/// end frames copy their neighbour.
inline void difference_poses(const MatX& poses, double dt, MatX& qd, MatX& qdd) {
  TimeSeries s{dt, poses};
  qd = central_difference1(s).samples;
  qdd = central_difference2(s).samples;
}

class DynProblem {
 public:
  DynProblem(const Trial& trial, const std::vector<int>& unobserved, const DynfitConfig& cfg)
      : trial_(trial), cfg_(cfg), dt_(trial.dt) {
    const int n = trial.frame_count();
    std::vector<bool> hidden(n, false);
    for (int u : unobserved) hidden.at(u) = true;
    obs_.resize(n);
    for (int t = 0; t < n; ++t) obs_[t] = observed_markers(trial.frames[t]);
    for (int t = 1; t + 1 < n; ++t)
      if (!hidden[t]) dyn_.push_back(t);
  }

  const std::vector<int>& dyn_frames() const { return dyn_; }
  const MarkerSet& markers(int t) const { return obs_[t]; }
  int frames() const { return trial_.frame_count(); }

  /// w_dyn * tau[0:6] of frame t from its own and its neighbours' poses.
  Vec6 dyn_residual(const Skeleton& skel, const MatX& p, int t) const {
    return frame_residual(skel, p.row(t - 1).transpose(), p.row(t).transpose(),
                          p.row(t + 1).transpose(), t);
  }

  Vec6 frame_residual(const Skeleton& skel, const VecX& prev, const VecX& q, const VecX& next,
                      int t) const {
    const VecX qd = (next - prev) / (2.0 * dt_);
    const VecX qdd = (next - 2.0 * q + prev) / (dt_ * dt_);
    const KinematicState ks = kinematic_state(skel, q);
    const VecX tau =
        rnea(skel, ks, qd, qdd) - contact_generalized_forces(skel, ks, trial_.frames[t].wrenches);
    return cfg_.w_dyn * tau.head<6>();
  }

  VecX marker_residual_at(const Skeleton& skel, const MatX& p, int t) const {
    if (obs_[t].index.empty()) return VecX();
    return marker_residual(skel, kinematic_state(skel, Pose(p.row(t).transpose())), obs_[t]);
  }

  double marker_cost(const Skeleton& skel, const MatX& p) const {
    double c = 0.0;
    for (int t = 0; t < frames(); ++t) c += marker_residual_at(skel, p, t).squaredNorm();
    return c;
  }

  double dyn_cost(const Skeleton& skel, const MatX& p) const {
    double c = 0.0;
    for (int t : dyn_) c += dyn_residual(skel, p, t).squaredNorm();
    return c;
  }

  double objective(const Skeleton& skel, const MatX& p) const {
    return marker_cost(skel, p) + dyn_cost(skel, p);
  }

  /// Full residual vector, markers first then dynamics, fixed layout.
  VecX residual_vector(const Skeleton& skel, const MatX& p) const {
    std::vector<double> r;
    for (int t = 0; t < frames(); ++t) {
      const VecX m = marker_residual_at(skel, p, t);
      r.insert(r.end(), m.data(), m.data() + m.size());
    }
    for (int t : dyn_) {
      const Vec6 d = dyn_residual(skel, p, t);
      r.insert(r.end(), d.data(), d.data() + 6);
    }
    return Eigen::Map<VecX>(r.data(), static_cast<Eigen::Index>(r.size()));
  }

  /// Split of the root residual tau[0:6] into the weighted inertial part
  /// a_t (linear in total mass) and the force part b_t: residual = k a - b.
  void mass_terms(const Skeleton& skel, const MatX& p, std::vector<Vec6>& a,
                  std::vector<Vec6>& b) const {
    a.clear();
    b.clear();
    for (int t : dyn_) {
      const VecX prev = p.row(t - 1).transpose(), q = p.row(t).transpose(),
                 next = p.row(t + 1).transpose();
      const KinematicState ks = kinematic_state(skel, q);
      a.push_back(cfg_.w_dyn *
                  rnea(skel, ks, (next - prev) / (2.0 * dt_), (next - 2.0 * q + prev) / (dt_ * dt_))
                      .head<6>());
      b.push_back(cfg_.w_dyn *
                  contact_generalized_forces(skel, ks, trial_.frames[t].wrenches).head<6>());
    }
  }

 private:
  const Trial& trial_;
  DynfitConfig cfg_;
  double dt_;
  std::vector<MarkerSet> obs_;
  std::vector<int> dyn_;
};

inline double fd_step(double x, double rel) { return rel * std::max(1.0, std::abs(x)); }

/// Multiplier on the current masses that keeps total mass within the bound.
inline double clamp_mass_factor(const Skeleton& skel, double k, double nominal_mass,
                                const DynfitConfig& cfg) {
  const double total = skel.total_mass();
  return std::clamp(k, (1.0 - cfg.mass_bound) * nominal_mass / total,
                    (1.0 + cfg.mass_bound) * nominal_mass / total);
}

/// One damped Gauss-Newton pass over all poses. With `nominal_mass` set, a
/// total-mass factor rides along as one extra unknown bordering the banded
/// system: poses alone would otherwise bend to absorb a wrong mass. Returns
/// false when no step was accepted. Coordinates outside `active` (when
/// given) stay fixed.
inline bool pose_step(const DynProblem& prob, Skeleton& skel, MatX& poses, double& cost,
                      double& lambda, const DynfitConfig& cfg,
                      Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>& solver, bool& analyzed,
                      std::optional<double> nominal_mass,
                      const std::vector<bool>* active = nullptr) {
  const int n = prob.frames();
  const int nq = skel.dofs();
  const Eigen::Index nx = static_cast<Eigen::Index>(n) * nq;
  const Eigen::Index size = nx + (nominal_mass ? 1 : 0);
  // blocks[d][t] couples frame t with frame t + d, d = 0, 1, 2
  std::vector<std::vector<MatX>> blocks(3, std::vector<MatX>(n, MatX::Zero(nq, nq)));
  MatX border = MatX::Zero(nq, n);  // mass column against each frame's poses
  double border_diag = 0.0;
  VecX g = VecX::Zero(size);

  for (int t = 0; t < n; ++t) {
    const auto& obs = prob.markers(t);
    if (obs.index.empty()) continue;
    const Pose q = poses.row(t).transpose();
    const KinematicState ks = kinematic_state(skel, q);
    const VecX r = marker_residual(skel, ks, obs);
    MatX jac(r.size(), nq);
    for (std::size_t k = 0; k < obs.index.size(); ++k)
      jac.middleRows(3 * k, 3) = marker_jacobian(skel, ks, obs.index[k]);
    blocks[0][t].noalias() += jac.transpose() * jac;
    g.segment(static_cast<Eigen::Index>(t) * nq, nq).noalias() += jac.transpose() * r;
  }

  std::vector<Vec6> inertial, force;
  if (nominal_mass) prob.mass_terms(skel, poses, inertial, force);
  std::size_t di = 0;
  for (int t : prob.dyn_frames()) {
    VecX frame[3] = {poses.row(t - 1).transpose(), poses.row(t).transpose(),
                     poses.row(t + 1).transpose()};
    const Vec6 r = prob.frame_residual(skel, frame[0], frame[1], frame[2], t);
    Mat6X jac[3];
    for (int s = 0; s < 3; ++s) {
      jac[s].resize(6, nq);
      for (int j = 0; j < nq; ++j) {
        const double h = fd_step(frame[s][j], cfg.fd_relative);
        const double keep = frame[s][j];
        frame[s][j] = keep + h;
        const Vec6 up = prob.frame_residual(skel, frame[0], frame[1], frame[2], t);
        frame[s][j] = keep - h;
        const Vec6 down = prob.frame_residual(skel, frame[0], frame[1], frame[2], t);
        frame[s][j] = keep;
        jac[s].col(j) = (up - down) / (2.0 * h);
      }
    }
    for (int a = 0; a < 3; ++a) {
      g.segment(static_cast<Eigen::Index>(t - 1 + a) * nq, nq).noalias() += jac[a].transpose() * r;
      for (int b = a; b < 3; ++b) blocks[b - a][t - 1 + a].noalias() += jac[a].transpose() * jac[b];
    }
    if (nominal_mass) {
      // d residual / d (mass factor) at factor 1 is the inertial part
      const Vec6& dk = inertial[di++];
      for (int a = 0; a < 3; ++a) border.col(t - 1 + a).noalias() += jac[a].transpose() * dk;
      border_diag += dk.squaredNorm();
      g[nx] += dk.dot(r);
    }
  }

  if (active)
    for (int t = 0; t < n; ++t)
      for (int i = 0; i < nq; ++i)
        if (!(*active)[i]) {
          g[static_cast<Eigen::Index>(t) * nq + i] = 0.0;
          for (int d = 0; d < 3; ++d) {
            if (t + d < n) blocks[d][t].row(i).setZero();
            if (t - d >= 0) blocks[d][t - d].col(i).setZero();
          }
          blocks[0][t](i, i) = 1.0;
        }

  double max_diag = border_diag;
  for (int t = 0; t < n; ++t) max_diag = std::max(max_diag, blocks[0][t].diagonal().maxCoeff());
  const double floor = std::max(max_diag * 1e-12, 1e-12);

  for (int tries = 0; tries < 12; ++tries) {
    std::vector<Eigen::Triplet<double>> entries;
    entries.reserve(static_cast<std::size_t>(n) * nq * (nq * 3 + 1));
    for (int d = 0; d < 3; ++d)
      for (int t = 0; t + d < n; ++t) {
        const MatX& blk = blocks[d][t];
        for (int i = 0; i < nq; ++i)
          for (int j = 0; j < nq; ++j) {
            const int row = (t + d) * nq + j, col = t * nq + i;  // lower triangle
            double v = blk(i, j);
            if (d == 0) {
              if (j < i) continue;
              if (i == j) v += lambda * std::max(v, floor);
            }
            entries.emplace_back(row, col, v);
          }
      }
    if (nominal_mass) {
      for (int t = 0; t < n; ++t)
        for (int i = 0; i < nq; ++i) entries.emplace_back(nx, t * nq + i, border(i, t));
      entries.emplace_back(nx, nx, border_diag + lambda * std::max(border_diag, floor));
    }
    Eigen::SparseMatrix<double> h(size, size);
    h.setFromTriplets(entries.begin(), entries.end());
    if (!analyzed) {
      solver.analyzePattern(h);
      analyzed = true;
    }
    solver.factorize(h);
    if (solver.info() != Eigen::Success) {
      lambda *= 10.0;
      continue;
    }
    const VecX step = -solver.solve(g);
    MatX trial = poses;
    for (int t = 0; t < n; ++t)
      trial.row(t) += step.segment(static_cast<Eigen::Index>(t) * nq, nq).transpose();
    Skeleton cand = skel;
    if (nominal_mass)
      cand = skel.with_mass_scale(clamp_mass_factor(skel, 1.0 + step[nx], *nominal_mass, cfg));
    const double c2 = prob.objective(cand, trial);
    if (c2 <= cost) {
      poses = std::move(trial);
      skel = std::move(cand);
      cost = c2;
      lambda = std::max(lambda / 10.0, 1e-12);
      return true;
    }
    lambda *= 10.0;
  }
  return false;
}

inline std::vector<Vec3> unpack_scales(const VecX& p) {
  std::vector<Vec3> s(p.size() / 3);
  for (std::size_t b = 0; b < s.size(); ++b) s[b] = p.segment<3>(3 * static_cast<Eigen::Index>(b));
  return s;
}

/// One damped Gauss-Newton pass over all scale components with central
/// difference Jacobians of the full residual vector.
inline bool scale_step(const DynProblem& prob, Skeleton& skel, const MatX& poses, double& cost,
                       double& lambda, const DynfitConfig& cfg, const KinefitConfig& bounds) {
  const int nb = skel.body_count();
  VecX p(3 * nb);
  for (int b = 0; b < nb; ++b) p.segment<3>(3 * b) = skel.scales()[b];
  const VecX r = prob.residual_vector(skel, poses);
  MatX jac(r.size(), p.size());
  for (int j = 0; j < p.size(); ++j) {
    const double h = fd_step(p[j], cfg.fd_relative);
    VecX up = p, down = p;
    up[j] += h;
    down[j] -= h;
    jac.col(j) = (prob.residual_vector(skel.with_scales(unpack_scales(up)), poses) -
                  prob.residual_vector(skel.with_scales(unpack_scales(down)), poses)) /
                 (2.0 * h);
  }
  const MatX jtj = jac.transpose() * jac;
  const VecX g = jac.transpose() * r;
  const double floor = std::max(jtj.diagonal().maxCoeff() * 1e-12, 1e-12);
  for (int tries = 0; tries < 12; ++tries) {
    MatX h = jtj;
    for (int i = 0; i < h.rows(); ++i) h(i, i) += lambda * std::max(jtj(i, i), floor);
    const VecX trial = (p - h.ldlt().solve(g)).cwiseMax(bounds.scale_min).cwiseMin(bounds.scale_max);
    const Skeleton cand = skel.with_scales(unpack_scales(trial));
    const double c2 = prob.objective(cand, poses);
    if (c2 <= cost) {
      skel = cand;
      cost = c2;
      lambda = std::max(lambda / 10.0, 1e-12);
      return true;
    }
    lambda *= 10.0;
  }
  return false;
}

/// Exact minimizer over a total mass factor k applied to the current masses,
/// clamped so total mass stays within the bound around the subject's.
inline bool mass_step(const DynProblem& prob, Skeleton& skel, const MatX& poses, double& cost,
                      double nominal_mass, const DynfitConfig& cfg) {
  std::vector<Vec6> a, b;
  prob.mass_terms(skel, poses, a, b);
  double ab = 0.0, aa = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i].dot(b[i]);
    aa += a[i].squaredNorm();
  }
  if (aa <= 0.0) return false;
  const double k = clamp_mass_factor(skel, ab / aa, nominal_mass, cfg);
  if (!(k > 0.0)) return false;
  const Skeleton cand = skel.with_mass_scale(k);
  const double c2 = prob.objective(cand, poses);
  if (c2 > cost) return false;
  skel = cand;
  cost = c2;
  return true;
}

}  // namespace detail

/// Fills derivatives, torques, residuals and quality for fixed poses and
/// skeleton.
inline DynamicsFit evaluate_dynamics(const Skeleton& skel, const Trial& trial, const MatX& poses,
                                     const std::vector<int>& unobserved, const DynfitConfig& cfg = {}) {
  check_trial_matches(skel, trial);
  const int n = trial.frame_count();
  if (poses.rows() != n || poses.cols() != skel.dofs())
    throw InputError("pose series must be T x dofs");
  DynamicsFit fit;
  fit.skeleton = skel;
  fit.dt = trial.dt;
  fit.poses = poses;
  fit.unobserved = unobserved;
  detail::difference_poses(poses, trial.dt, fit.qd, fit.qdd);
  fit.tau = MatX::Zero(n, skel.dofs());
  fit.residual_linear = MatX::Constant(n, 3, std::nan(""));
  fit.residual_angular = MatX::Constant(n, 3, std::nan(""));
  std::vector<bool> hidden(n, false);
  for (int u : unobserved) hidden.at(u) = true;
  for (int t = 0; t < n; ++t) {
    const KinematicState ks = kinematic_state(skel, Pose(poses.row(t).transpose()));
    const VecX qd = fit.qd.row(t).transpose(), qdd = fit.qdd.row(t).transpose();
    if (hidden[t]) {
      fit.tau.row(t).setConstant(std::nan(""));  // forces unknown
      continue;
    }
    const InverseDynamics id = inverse_dynamics(skel, ks, qd, qdd, trial.frames[t].wrenches);
    fit.tau.row(t) = id.tau.transpose();
    fit.residual_angular.row(t) = id.residual.head<3>().transpose();
    fit.residual_linear.row(t) = id.residual.tail<3>().transpose();
  }
  detail::DynProblem prob(trial, unobserved, cfg);
  fit.dynamics_frames = prob.dyn_frames();
  fit.marker_rms = marker_rms(skel, trial, poses, {});
  fit.quality =
      quality_report(fit.marker_rms, fit.residual_linear, fit.residual_angular, fit.dynamics_frames, trial.subject);
  return fit;
}

/// Objective value of a pose series under a skeleton (for tests and reports).
inline double dynamics_objective(const Skeleton& skel, const Trial& trial, const MatX& poses,
                                 const std::vector<int>& unobserved, const DynfitConfig& cfg = {}) {
  detail::DynProblem prob(trial, unobserved, cfg);
  return prob.objective(skel, poses);
}

/// Block-coordinate descent: poses, then scales, then total mass, repeated
/// up to max_outer rounds or until the relative improvement of a round is
/// below rel_tolerance.
inline DynamicsFit full_fit(const Skeleton& init_skel, const Trial& trial, const MatX& init_poses,
                            const std::vector<int>& unobserved, const DynfitConfig& cfg = {}) {
  check_trial_matches(init_skel, trial);
  if (!init_skel.floating_base()) throw InputError("dynamics fit needs a free root joint");
  if (trial.frame_count() < 3) throw InputError("dynamics fit needs at least 3 frames");
  if (init_poses.rows() != trial.frame_count() || init_poses.cols() != init_skel.dofs())
    throw InputError("initial poses must be T x dofs");
  check_unobserved(unobserved, trial.frame_count());
  detail::DynProblem prob(trial, unobserved, cfg);
  Skeleton skel = init_skel;
  MatX poses = init_poses;
  double cost = prob.objective(skel, poses);
  std::vector<double> history{cost};
  std::vector<std::string> warnings;
  double lambda_pose = cfg.lambda_init, lambda_scale = cfg.lambda_init;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver;
  bool analyzed = false;
  const KinefitConfig bounds;
  const std::optional<double> mass_unknown =
      cfg.fit_mass ? std::optional<double>(trial.subject.mass_kg) : std::nullopt;
  if (cfg.fit_poses && cfg.max_outer > 0) {
    // With rotations held, the objective is quadratic in the root
    // translations: one step removes a large initial offset that full
    // Gauss-Newton steps would otherwise chase with rotations.
    std::vector<bool> translation(skel.dofs(), false);
    for (int k = 3; k < 6; ++k) translation[skel.first_dof(0) + k] = true;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> first;
    bool first_analyzed = false;
    double lambda_first = 1e-9;
    detail::pose_step(prob, skel, poses, cost, lambda_first, cfg, first, first_analyzed, std::nullopt,
                      &translation);
  }
  bool converged = cfg.max_outer == 0;
  for (int round = 0; round < cfg.max_outer; ++round) {
    const double before = cost;
    if (cfg.fit_poses)
      for (int it = 0; it < cfg.pose_iterations; ++it)
        if (!detail::pose_step(prob, skel, poses, cost, lambda_pose, cfg, solver, analyzed,
                               mass_unknown)) {
          if (it == 0 && round == 0)
            warnings.push_back("pose block: damping exhausted without a decrease");
          break;
        }
    if (cfg.fit_scales)
      for (int it = 0; it < cfg.scale_iterations; ++it)
        if (!detail::scale_step(prob, skel, poses, cost, lambda_scale, cfg, bounds)) break;
    if (cfg.fit_mass) detail::mass_step(prob, skel, poses, cost, trial.subject.mass_kg, cfg);
    history.push_back(cost);
    if (before - cost <= cfg.rel_tolerance * std::max(before, 1e-300)) {
      converged = true;
      break;
    }
  }
  if (!converged)
    warnings.push_back("outer loop: " + std::to_string(cfg.max_outer) +
                       " rounds without reaching the relative tolerance");
  DynamicsFit fit = evaluate_dynamics(skel, trial, poses, unobserved, cfg);
  fit.objective_history = std::move(history);
  fit.warnings = std::move(warnings);
  return fit;
}

// ---------------------------------------------------------------------------
// Fit result file (JSON)

namespace detail {

inline nlohmann::json matrix_json(const MatX& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (int r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (int c = 0; c < m.cols(); ++c) {
      if (std::isfinite(m(r, c)))
        row.push_back(m(r, c));
      else
        row.push_back(nullptr);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

inline MatX json_matrix(const nlohmann::json& j, int cols, const char* what) {
  if (!j.is_array()) throw SchemaError(std::string(what) + " must be an array of rows");
  MatX m(static_cast<Eigen::Index>(j.size()), cols);
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (!j[r].is_array() || static_cast<int>(j[r].size()) != cols)
      throw SchemaError(std::string(what) + " row " + std::to_string(r) + " has the wrong width");
    for (int c = 0; c < cols; ++c)
      m(static_cast<Eigen::Index>(r), c) = j[r][c].is_null() ? std::nan("") : j[r][c].get<double>();
  }
  return m;
}

}  // namespace detail

inline nlohmann::json fit_to_json(const DynamicsFit& f) {
  return {{"format", "gaitdyn-fit"},
          {"version", 1},
          {"skeleton", skeleton_to_json(f.skeleton)},
          {"dt", f.dt},
          {"total_mass_kg", f.skeleton.total_mass()},
          {"unobserved_frames", f.unobserved},
          {"dynamics_frames", f.dynamics_frames},
          {"marker_rms_m", f.marker_rms},
          {"objective_history", f.objective_history},
          {"warnings", f.warnings},
          {"quality",
           {{"marker_rms_cm", f.quality.marker_rms_cm},
            {"linear_residual_bw", f.quality.linear_residual_bw},
            {"angular_residual_bwh", f.quality.angular_residual_bwh},
            {"passes_hicks", f.quality.passes_hicks}}},
          {"poses", detail::matrix_json(f.poses)},
          {"qd", detail::matrix_json(f.qd)},
          {"qdd", detail::matrix_json(f.qdd)},
          {"tau", detail::matrix_json(f.tau)},
          {"residual_linear", detail::matrix_json(f.residual_linear)},
          {"residual_angular", detail::matrix_json(f.residual_angular)}};
}

inline DynamicsFit fit_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format") != "gaitdyn-fit" || j.at("version") != 1)
      throw SchemaError("not a version 1 gaitdyn-fit document");
    DynamicsFit f;
    f.skeleton = skeleton_from_json(j.at("skeleton"));
    f.dt = j.at("dt").get<double>();
    f.unobserved = j.at("unobserved_frames").get<std::vector<int>>();
    f.dynamics_frames = j.at("dynamics_frames").get<std::vector<int>>();
    f.marker_rms = j.at("marker_rms_m").get<double>();
    f.objective_history = j.at("objective_history").get<std::vector<double>>();
    f.warnings = j.at("warnings").get<std::vector<std::string>>();
    const auto& q = j.at("quality");
    f.quality.marker_rms_cm = q.at("marker_rms_cm").get<double>();
    f.quality.linear_residual_bw = q.at("linear_residual_bw").get<double>();
    f.quality.angular_residual_bwh = q.at("angular_residual_bwh").get<double>();
    f.quality.passes_hicks = q.at("passes_hicks").get<bool>();
    const int n = f.skeleton.dofs();
    f.poses = detail::json_matrix(j.at("poses"), n, "poses");
    f.qd = detail::json_matrix(j.at("qd"), n, "qd");
    f.qdd = detail::json_matrix(j.at("qdd"), n, "qdd");
    f.tau = detail::json_matrix(j.at("tau"), n, "tau");
    f.residual_linear = detail::json_matrix(j.at("residual_linear"), 3, "residual_linear");
    f.residual_angular = detail::json_matrix(j.at("residual_angular"), 3, "residual_angular");
    const auto t = f.poses.rows();
    if (f.qd.rows() != t || f.qdd.rows() != t || f.tau.rows() != t ||
        f.residual_linear.rows() != t || f.residual_angular.rows() != t)
      throw SchemaError("fit series have different lengths");
    return f;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("fit file: ") + e.what());
  }
}

inline void save_fit(const DynamicsFit& f, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write fit file " + path);
  out << fit_to_json(f).dump(1) << "\n";
}

inline DynamicsFit load_fit(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open fit file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(e.what(), 0);
  }
  return fit_from_json(j);
}

}  // namespace gaitdyn
