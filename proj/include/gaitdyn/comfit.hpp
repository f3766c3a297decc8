// Linear least-squares initialization of the center-of-mass trajectory,
// inverse mass and unobserved-frame accelerations, and the root-translation
// adjustment that makes a pose series follow the fitted trajectory.
//
// Frames are 0-based. Under semi-explicit Euler
//   zd[t+1] = zd[t] + dt * zdd[t],   z[t+1] = z[t] + dt * zd[t+1]
// so z[t] = z[0] + t dt zd[0] + sum_{k<t} (t-k) dt^2 zdd[k]. On observed frames
// zdd[k] = mu f[k] + g; on unobserved frames zdd[k] is an unknown total
// acceleration (gravity included), pulled toward zero by rows alpha * I.
//
// Unknown vector: [z0 (3), zd0 (3), mu, zdd_u0 (3), zdd_u1 (3), ...].
// Rows: 3 per frame (x, y, z of frame t at rows 3t..3t+2), then 3 per
// unobserved frame.
#pragma once

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SparseCore>

#include "gaitdyn/common.hpp"
#include "gaitdyn/skeleton.hpp"
#include "gaitdyn/trial.hpp"

namespace gaitdyn {

inline constexpr double kDefaultComAlpha = 1e-3;
inline constexpr double kMinInverseMass = 1.0 / 200.0;
inline constexpr double kMaxInverseMass = 1.0 / 20.0;

using SparseMat = Eigen::SparseMatrix<double>;

struct ComSolution {
  Vec3 z0 = Vec3::Zero();
  Vec3 zd0 = Vec3::Zero();
  double mu = 0.0;
  std::vector<int> unobserved;     // U, sorted frame indices
  std::vector<Vec3> acc_unobserved;
  MatX fitted_traj;                // T x 3
  double alpha = kDefaultComAlpha;
  double dt = 0.0;
  bool mu_clamped = false;
  std::vector<std::string> warnings;
};

struct LinearSystem {
  SparseMat a;
  VecX b;
};

/// Sorted, duplicate-free, in-range check of U against T frames.
inline void check_unobserved(const std::vector<int>& u, int frames) {
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (u[i] < 0 || u[i] >= frames)
      throw InputError("unobserved frame " + std::to_string(u[i]) + " outside [0, " +
                       std::to_string(frames - 1) + "]");
    if (i > 0 && u[i] <= u[i - 1])
      throw InputError("unobserved frames must be sorted and unique");
  }
}

/// Sum of contact forces per frame (T x 3). Unobserved frames come out as
/// whatever the trial stores; callers ignore them.
inline MatX total_contact_force(const Trial& trial) {
  const int c = static_cast<int>(trial.contact_names.size());
  MatX f = MatX::Zero(trial.frame_count(), 3);
  for (int t = 0; t < trial.frame_count(); ++t)
    for (int k = 0; k < c; ++k) f.row(t) += trial.frames[t].wrenches.segment<3>(6 * k + 3).transpose();
  return f;
}

namespace detail {

inline void check_com_inputs(const MatX& forces, const std::vector<int>& u, double alpha,
                             double dt) {
  const int n = static_cast<int>(forces.rows());
  require(forces.cols() == 3, "forces must be T x 3");
  if (n < 2) throw InputError("center-of-mass fit needs at least 2 frames");
  require(dt > 0.0 && std::isfinite(dt), "dt must be positive");
  require(alpha >= 0.0 && std::isfinite(alpha), "alpha must be non-negative");
  check_unobserved(u, n);
  std::vector<bool> hidden(n, false);
  for (int k : u) hidden[k] = true;
  for (int t = 0; t < n; ++t)
    if (!hidden[t] && !forces.row(t).allFinite())
      throw InputError("force missing on observed frame " + std::to_string(t));
  const long unknowns = 7 + 3 * static_cast<long>(u.size());
  if (alpha == 0.0 && 3L * n < unknowns)
    throw InputError("underdetermined: " + std::to_string(3L * n) + " trajectory rows for " +
                     std::to_string(unknowns) + " unknowns");
}

/// Per-axis pieces: coefficient of mu (T x 3) and gravity offset (T x 3),
/// both sum_{k<t, k not in U} (t-k) dt^2 (.)_k, via running sums.
inline void integrate_observed(const MatX& forces, const std::vector<bool>& hidden,
                               const Vec3& g, double dt, MatX& mu_col, MatX& offset) {
  const int n = static_cast<int>(forces.rows());
  mu_col = MatX::Zero(n, 3);
  offset = MatX::Zero(n, 3);
  Eigen::RowVector3d vf = Eigen::RowVector3d::Zero(), vg = Eigen::RowVector3d::Zero();
  Eigen::RowVector3d pf = Eigen::RowVector3d::Zero(), pg = Eigen::RowVector3d::Zero();
  for (int t = 1; t < n; ++t) {
    if (!hidden[t - 1]) {
      vf += dt * forces.row(t - 1);
      vg += dt * g.transpose();
    }
    pf += dt * vf;
    pg += dt * vg;
    mu_col.row(t) = pf;
    offset.row(t) = pg;
  }
}

inline std::vector<bool> hidden_mask(int n, const std::vector<int>& u) {
  std::vector<bool> h(n, false);
  for (int k : u) h[k] = true;
  return h;
}

}  // namespace detail

/// Sparse A and b such that the first 3T entries of A zeta + b are the
/// integrated trajectory and the last 3|U| are alpha * zdd_u.
inline LinearSystem build_linear_system(const MatX& forces, const std::vector<int>& u,
                                        double alpha, double dt, const Vec3& g = kGravityVector) {
  detail::check_com_inputs(forces, u, alpha, dt);
  const int n = static_cast<int>(forces.rows());
  const int nu = static_cast<int>(u.size());
  const auto hidden = detail::hidden_mask(n, u);
  MatX mu_col, offset;
  detail::integrate_observed(forces, hidden, g, dt, mu_col, offset);

  std::vector<Eigen::Triplet<double>> entries;
  for (int t = 0; t < n; ++t)
    for (int a = 0; a < 3; ++a) {
      const int row = 3 * t + a;
      entries.emplace_back(row, a, 1.0);
      if (t > 0) entries.emplace_back(row, 3 + a, t * dt);
      if (mu_col(t, a) != 0.0) entries.emplace_back(row, 6, mu_col(t, a));
      for (int i = 0; i < nu && u[i] < t; ++i)
        entries.emplace_back(row, 7 + 3 * i + a, (t - u[i]) * dt * dt);
    }
  if (alpha != 0.0)
    for (int i = 0; i < 3 * nu; ++i) entries.emplace_back(3 * n + i, 7 + i, alpha);
  LinearSystem sys;
  sys.a.resize(3 * (n + nu), 7 + 3 * nu);
  sys.a.setFromTriplets(entries.begin(), entries.end());
  sys.b = VecX::Zero(3 * (n + nu));
  for (int t = 0; t < n; ++t) sys.b.segment<3>(3 * t) = offset.row(t).transpose();
  return sys;
}

/// Step-by-step semi-explicit Euler of the solution's own unknowns.
inline MatX integrate_com(const ComSolution& s, const MatX& forces, int frames,
                          const Vec3& g = kGravityVector) {
  MatX z(frames, 3);
  Vec3 pos = s.z0, vel = s.zd0;
  std::size_t next = 0;
  for (int t = 0; t < frames; ++t) {
    z.row(t) = pos.transpose();
    Vec3 acc;
    if (next < s.unobserved.size() && s.unobserved[next] == t)
      acc = s.acc_unobserved[next++];
    else
      acc = s.mu * forces.row(t).transpose() + g;
    vel += s.dt * acc;
    pos += s.dt * vel;
  }
  return z;
}

namespace detail {

inline std::string describe_null_directions(const MatX& at, const std::vector<int>& u, double tol) {
  Eigen::SelfAdjointEigenSolver<MatX> eig(at.transpose() * at);
  std::ostringstream os;
  const char* names[] = {"z0", "zd0"};
  int shown = 0;
  for (int j = 0; j < eig.eigenvalues().size() && shown < 5; ++j) {
    if (eig.eigenvalues()[j] > tol * tol) break;
    const VecX v = eig.eigenvectors().col(j);
    Eigen::Index top;
    v.cwiseAbs().maxCoeff(&top);
    os << (shown ? "; " : "") << "null direction " << shown + 1 << " dominated by ";
    if (top < 2)
      os << names[top];
    else
      os << "acc of unobserved frame " << u[top - 2];
    ++shown;
  }
  return os.str();
}

}  // namespace detail

/// Least-squares fit of the trajectory to kinematic CoMs `z` (T x 3).
///
/// The system separates per axis except for the shared mu column, so it is
/// solved as one rank-revealing decomposition of the per-axis block
/// [1, t dt, (t-u) dt^2 ..., alpha I] and a closed form for mu on the
/// orthogonal complement. This is the minimum-norm least-squares solution of
/// the full system. A rank-deficient per-axis block raises DiagnosticError;
/// an unidentifiable mu (all forces zero) takes the pseudo-inverse value 0
/// and is then clamped.
inline ComSolution solve_com(const MatX& forces, const MatX& z, const std::vector<int>& u,
                             double alpha = kDefaultComAlpha, double dt = 0.01,
                             const Vec3& g = kGravityVector) {
  detail::check_com_inputs(forces, u, alpha, dt);
  const int n = static_cast<int>(forces.rows());
  const int nu = static_cast<int>(u.size());
  if (z.rows() != n || z.cols() != 3) throw InputError("kinematic CoM series must be T x 3");
  if (!z.allFinite()) throw InputError("kinematic CoM series has non-finite entries");
  const auto hidden = detail::hidden_mask(n, u);
  MatX mu_col, offset;
  detail::integrate_observed(forces, hidden, g, dt, mu_col, offset);

  const int rows = n + nu;
  const int cols = 2 + nu;
  MatX at = MatX::Zero(rows, cols);
  for (int t = 0; t < n; ++t) {
    at(t, 0) = 1.0;
    at(t, 1) = t * dt;
    for (int i = 0; i < nu && u[i] < t; ++i) at(t, 2 + i) = (t - u[i]) * dt * dt;
  }
  for (int i = 0; i < nu; ++i) at(n + i, 2 + i) = alpha;

  Eigen::CompleteOrthogonalDecomposition<MatX> cod(at);
  const double tol = cod.threshold() * std::max(1.0, cod.maxPivot());
  if (cod.rank() < cols)
    throw DiagnosticError("center-of-mass system is rank deficient (rank " +
                          std::to_string(cod.rank()) + " of " + std::to_string(cols) +
                          "): " + detail::describe_null_directions(at, u, tol));

  MatX y = MatX::Zero(rows, 3), c = MatX::Zero(rows, 3);
  y.topRows(n) = z - offset;
  c.topRows(n) = mu_col;
  const MatX py = y - at * cod.solve(y);
  const MatX pc = c - at * cod.solve(c);
  const double denom = pc.squaredNorm();
  ComSolution s;
  s.alpha = alpha;
  s.dt = dt;
  s.unobserved = u;
  const double scale = std::max(1.0, c.squaredNorm());
  s.mu = denom > 1e-24 * scale ? (pc.array() * py.array()).sum() / denom : 0.0;
  if (s.mu < kMinInverseMass || s.mu > kMaxInverseMass) {
    std::ostringstream os;
    os << "inverse mass " << format_double(s.mu) << " 1/kg clamped to ["
       << format_double(kMinInverseMass) << ", " << format_double(kMaxInverseMass) << "]";
    s.warnings.push_back(os.str());
    s.mu = std::clamp(s.mu, kMinInverseMass, kMaxInverseMass);
    s.mu_clamped = true;
  }
  const MatX sol = cod.solve(y - s.mu * c);
  s.z0 = sol.row(0).transpose();
  s.zd0 = sol.row(1).transpose();
  for (int i = 0; i < nu; ++i) s.acc_unobserved.push_back(sol.row(2 + i).transpose());
  s.fitted_traj = integrate_com(s, forces, n, g);
  return s;
}

/// Unknown vector in the documented layout.
inline VecX com_unknowns(const ComSolution& s) {
  VecX zeta(7 + 3 * s.acc_unobserved.size());
  zeta << s.z0, s.zd0, s.mu, VecX::Zero(3 * s.acc_unobserved.size());
  for (std::size_t i = 0; i < s.acc_unobserved.size(); ++i)
    zeta.segment<3>(7 + 3 * i) = s.acc_unobserved[i];
  return zeta;
}

/// Trial front end: forces from the trial, U = frames without observed
/// forces, z = kinematic CoM series.
inline ComSolution solve_com(const Trial& trial, const MatX& z, double alpha = kDefaultComAlpha,
                             const Vec3& g = kGravityVector) {
  return solve_com(total_contact_force(trial), z, unobserved_frames(trial), alpha, trial.dt, g);
}

/// CoM of every pose row (T x 3).
inline MatX com_series(const Skeleton& skel, const MatX& poses) {
  MatX z(poses.rows(), 3);
  for (int t = 0; t < poses.rows(); ++t)
    z.row(t) = center_of_mass(skel, Pose(poses.row(t).transpose())).transpose();
  return z;
}

/// Shift the root translation of every frame by fitted_traj - CoM(q). The
/// free joint's translations are world-aligned, so the CoM moves one-to-one.
inline MatX adjust_root_translation(const Skeleton& skel, const MatX& poses, const MatX& fitted) {
  if (!skel.floating_base()) throw InputError("root adjustment needs a free root joint");
  if (poses.rows() != fitted.rows() || fitted.cols() != 3)
    throw InputError("fitted trajectory length must match the pose series");
  MatX out = poses;
  const MatX z = com_series(skel, poses);
  out.middleCols(3, 3) += fitted - z;
  return out;
}

inline MatX adjust_root_translation(const Skeleton& skel, const MatX& poses,
                                    const ComSolution& s) {
  return adjust_root_translation(skel, poses, s.fitted_traj);
}

/// Matrix Market coordinate dump of A, followed by b as an array section:
///   %%MatrixMarket matrix coordinate real general
///   % gaitdyn com-system A
///   rows cols nnz
///   i j value          (1-based, column-major order)
///   %%MatrixMarket matrix array real general
///   % gaitdyn com-system b
///   rows 1
///   value              (one per line)
inline void write_matrix_market(const LinearSystem& sys, std::ostream& os) {
  os << "%%MatrixMarket matrix coordinate real general\n% gaitdyn com-system A\n";
  os << sys.a.rows() << ' ' << sys.a.cols() << ' ' << sys.a.nonZeros() << '\n';
  for (int k = 0; k < sys.a.outerSize(); ++k)
    for (SparseMat::InnerIterator it(sys.a, k); it; ++it)
      os << it.row() + 1 << ' ' << it.col() + 1 << ' ' << format_double(it.value()) << '\n';
  os << "%%MatrixMarket matrix array real general\n% gaitdyn com-system b\n";
  os << sys.b.size() << " 1\n";
  for (Eigen::Index i = 0; i < sys.b.size(); ++i) os << format_double(sys.b[i]) << '\n';
}

}  // namespace gaitdyn
