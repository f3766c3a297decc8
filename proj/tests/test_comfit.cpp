#include <algorithm>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "gaitdyn/comfit.hpp"
#include "gaitdyn/synthgen.hpp"

namespace gaitdyn {
namespace {

// Independent step-by-step integrator over the documented unknown layout.
MatX brute_force(const VecX& zeta, const MatX& forces, const std::vector<int>& u, double dt) {
  const int n = static_cast<int>(forces.rows());
  MatX z(n, 3);
  Vec3 pos = zeta.segment<3>(0), vel = zeta.segment<3>(3);
  for (int t = 0; t < n; ++t) {
    z.row(t) = pos.transpose();
    auto it = std::find(u.begin(), u.end(), t);
    Vec3 acc = it == u.end() ? Vec3(zeta[6] * forces.row(t).transpose() + kGravityVector)
                             : Vec3(zeta.segment<3>(7 + 3 * (it - u.begin())));
    vel = vel + dt * acc;
    pos = pos + dt * vel;
  }
  return z;
}

VecX flatten(const MatX& z) {
  VecX v(z.size());
  for (int t = 0; t < z.rows(); ++t) v.segment<3>(3 * t) = z.row(t).transpose();
  return v;
}

MatX random_forces(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> d(0.0, 300.0);
  MatX f(n, 3);
  for (int t = 0; t < n; ++t) f.row(t) << d(rng), 700.0 + d(rng), d(rng);
  return f;
}

TEST(ComSystem, ThreeFrameFreeFlightBlocks) {
  MatX f = MatX::Zero(3, 3);
  LinearSystem s = build_linear_system(f, {}, kDefaultComAlpha, 0.01);
  const MatX a(s.a);
  ASSERT_EQ(a.cols(), 7);
  ASSERT_EQ(a.rows(), 9);
  EXPECT_TRUE((a.block<3, 3>(6, 3).isApprox(0.02 * Mat3::Identity(), 1e-15)));
  EXPECT_NEAR(s.b[6], 0.0, 1e-18);
  EXPECT_NEAR(s.b[7], -2.943e-3, 1e-15);
  EXPECT_NEAR(s.b[8], 0.0, 1e-18);
}

TEST(ComSystem, UnobservedColumnIsTriangularRamp) {
  // second frame hidden, T = 4
  MatX f = MatX::Constant(4, 3, 100.0);
  const double dt = 0.01;
  LinearSystem s = build_linear_system(f, {1}, 0.5, dt);
  const MatX a(s.a);
  ASSERT_EQ(a.cols(), 10);
  ASSERT_EQ(a.rows(), 15);
  const double d2 = dt * dt;
  for (int t = 0; t < 4; ++t) {
    const double expect = t <= 1 ? 0.0 : (t - 1) * d2;
    const Mat3 block = a.block(3 * t, 7, 3, 3);
    EXPECT_LT((block - expect * Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-18) << t;
  }
  EXPECT_TRUE(Mat3(a.block(12, 7, 3, 3)).isApprox(0.5 * Mat3::Identity()));
  EXPECT_TRUE(a.block(12, 0, 3, 7).isZero(0.0));
  EXPECT_TRUE(s.b.tail<3>().isZero(0.0));
}

TEST(ComSystem, MatchesBruteForceIntegrator) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n01;
  const int n = 60;
  const double dt = 0.01;
  const std::vector<int> u = {0, 7, 8, 9, 30, 59};
  MatX f = random_forces(n, rng);
  LinearSystem s = build_linear_system(f, u, 0.3, dt);
  for (int rep = 0; rep < 5; ++rep) {
    VecX zeta(7 + 3 * u.size());
    for (int i = 0; i < zeta.size(); ++i) zeta[i] = n01(rng);
    zeta[6] = 0.014;
    const VecX top = (s.a * zeta + s.b).head(3 * n);
    EXPECT_LT((top - flatten(brute_force(zeta, f, u, dt))).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT(((s.a * zeta + s.b).tail(3 * u.size()) - 0.3 * zeta.tail(3 * u.size()))
                  .cwiseAbs()
                  .maxCoeff(),
              1e-15);
  }
}

TEST(ComSystem, EveryColumnIsTheIntegratorResponse) {
  std::mt19937_64 rng(6);
  const int n = 25;
  const double dt = 0.01;
  const std::vector<int> u = {3, 4, 12};
  MatX f = random_forces(n, rng);
  const MatX a(build_linear_system(f, u, 0.0, dt).a);
  VecX base = VecX::Zero(7 + 3 * u.size());
  const VecX z0 = flatten(brute_force(base, f, u, dt));
  for (int j = 0; j < base.size(); ++j) {
    VecX e = base;
    e[j] = 1.0;
    const VecX col = flatten(brute_force(e, f, u, dt)) - z0;
    EXPECT_LT((a.col(j).head(3 * n) - col).cwiseAbs().maxCoeff(), 1e-10) << "column " << j;
  }
}

TEST(ComSystem, UnderdeterminedIsInputError) {
  MatX f = MatX::Zero(3, 3);
  EXPECT_THROW(build_linear_system(f, {0, 1, 2}, 0.0, 0.01), InputError);
  EXPECT_THROW(build_linear_system(f, {1, 1}, 0.1, 0.01), InputError);
  EXPECT_THROW(build_linear_system(f, {3}, 0.1, 0.01), InputError);
  MatX g = f;
  g(1, 1) = std::nan("");
  EXPECT_THROW(build_linear_system(g, {}, 0.1, 0.01), InputError);
  EXPECT_NO_THROW(build_linear_system(g, {1}, 0.1, 0.01));
}

struct Scene {
  MatX forces;
  MatX z;
  VecX zeta;
  std::vector<int> hidden;
  double dt = 0.01;
};

// Euler-consistent CoM path driven by synthgen walking forces, with the true
// total acceleration as the unknown on hidden frames.
Scene walking_scene(double seconds, int hide_every) {
  ScenarioConfig c;
  c.duration_s = seconds;
  SyntheticTrial s = generate(c);
  Scene sc;
  sc.dt = s.truth.dt;
  sc.forces = total_contact_force(s.trial);
  const double mass = s.truth.skeleton.total_mass();
  if (hide_every > 0) {
    Trial t = s.trial;
    sc.hidden = hide_forces(t, {hide_every, 1}).frames;
  }
  sc.zeta = VecX(7 + 3 * sc.hidden.size());
  sc.zeta << 0.1, 0.95, -0.02, 1.2, 0.03, 0.01, 1.0 / mass, VecX::Zero(3 * sc.hidden.size());
  for (std::size_t i = 0; i < sc.hidden.size(); ++i)
    sc.zeta.segment<3>(7 + 3 * i) = sc.forces.row(sc.hidden[i]).transpose() / mass + kGravityVector;
  sc.z = brute_force(sc.zeta, sc.forces, sc.hidden, sc.dt);
  return sc;
}

double rms(const MatX& a, const MatX& b) {
  return std::sqrt((a - b).squaredNorm() / a.rows());
}

TEST(ComSolve, NoiselessFullyObservedIsExact) {
  Scene sc = walking_scene(3.0, 0);
  ComSolution s = solve_com(sc.forces, sc.z, {}, kDefaultComAlpha, sc.dt);
  const VecX got = com_unknowns(s);
  for (int i = 0; i < 7; ++i)
    EXPECT_NEAR(got[i], sc.zeta[i], 1e-6 * std::max(std::abs(sc.zeta[i]), 1e-3)) << i;
  EXPECT_LT(rms(s.fitted_traj, sc.z), 1e-8);
  EXPECT_FALSE(s.mu_clamped);
}

TEST(ComSolve, HiddenFifthRecoversTrajectoryAndMass) {
  Scene sc = walking_scene(6.0, 3);
  const double frac = static_cast<double>(sc.hidden.size()) / sc.z.rows();
  EXPECT_GT(frac, 0.15);
  EXPECT_LT(frac, 0.25);
  ComSolution s = solve_com(sc.forces, sc.z, sc.hidden, 1e-3, sc.dt);
  EXPECT_LT(rms(s.fitted_traj, sc.z), 1e-3);
  EXPECT_NEAR(s.mu, sc.zeta[6], 0.01 * sc.zeta[6]);
}

TEST(ComSolve, FittedTrajectoryIsItsOwnIntegration) {
  Scene sc = walking_scene(2.0, 2);
  std::mt19937_64 rng(8);
  std::normal_distribution<double> noise(0.0, 0.01);
  MatX z = sc.z;
  for (int i = 0; i < z.size(); ++i) z.data()[i] += noise(rng);
  ComSolution s = solve_com(sc.forces, z, sc.hidden, 1e-3, sc.dt);
  EXPECT_LT((s.fitted_traj - brute_force(com_unknowns(s), sc.forces, sc.hidden, sc.dt))
                .cwiseAbs()
                .maxCoeff(),
            1e-9);
}

TEST(ComSolve, LargeAlphaKillsHiddenAccelerationAndDegradesFit) {
  Scene sc = walking_scene(3.0, 2);
  ASSERT_FALSE(sc.hidden.empty());
  double prev = -1.0;
  for (double alpha : {0.0, 1e-3, 1e-1, 1.0, 1e2, 1e6}) {
    ComSolution s = solve_com(sc.forces, sc.z, sc.hidden, alpha, sc.dt);
    LinearSystem sys = build_linear_system(sc.forces, sc.hidden, alpha, sc.dt);
    VecX target = VecX::Zero(sys.b.size());
    target.head(sc.z.size()) = flatten(sc.z);
    const double fit = (sys.a * com_unknowns(s) + sys.b - target).head(sc.z.size()).norm();
    EXPECT_GE(fit, prev - 1e-12) << alpha;
    prev = fit;
    if (alpha == 1e6)
      for (const Vec3& a : s.acc_unobserved) EXPECT_LT(a.norm(), 1e-6);
  }
}

TEST(ComSolve, FreeFlightIsGravityParabola) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n01;
  const int n = 40;
  const double dt = 0.01;
  MatX z(n, 3);
  for (int t = 0; t < n; ++t) z.row(t) << 0.5 * t * dt + 0.01 * n01(rng), 1.0 + 0.01 * n01(rng), 0.0;
  ComSolution s = solve_com(MatX::Zero(n, 3), z, {}, kDefaultComAlpha, dt);
  EXPECT_TRUE(s.mu_clamped);
  EXPECT_FALSE(s.warnings.empty());
  for (int t = 1; t + 1 < n; ++t) {
    const Vec3 d2 = (s.fitted_traj.row(t + 1) - 2 * s.fitted_traj.row(t) + s.fitted_traj.row(t - 1))
                        .transpose() /
                    (dt * dt);
    EXPECT_LT((d2 - kGravityVector).norm(), 1e-8);
  }
}

TEST(ComSolve, LastFrameHiddenWithoutRegularizationIsDiagnosed) {
  Scene sc = walking_scene(1.0, 0);
  const int last = static_cast<int>(sc.z.rows()) - 1;
  try {
    solve_com(sc.forces, sc.z, {last}, 0.0, sc.dt);
    FAIL() << "expected a diagnostic";
  } catch (const DiagnosticError& e) {
    EXPECT_NE(std::string(e.what()).find("frame " + std::to_string(last)), std::string::npos)
        << e.what();
  }
  EXPECT_NO_THROW(solve_com(sc.forces, sc.z, {last}, 1e-3, sc.dt));
}

TEST(ComSolve, MassClampedWithWarning) {
  Scene sc = walking_scene(2.0, 0);
  ComSolution s = solve_com(sc.forces * 0.1, sc.z, {}, kDefaultComAlpha, sc.dt);
  EXPECT_TRUE(s.mu_clamped);
  EXPECT_DOUBLE_EQ(s.mu, kMaxInverseMass);
  ASSERT_EQ(s.warnings.size(), 1u);
}

TEST(ComSolve, RevealingForcesDoesNotHurtOnMedian) {
  std::vector<double> diffs;
  Scene sc = walking_scene(4.0, 1);
  const std::vector<int> big = sc.hidden;
  const std::vector<int> small(big.begin(), big.begin() + big.size() / 2);
  for (int seed = 0; seed < 50; ++seed) {
    std::mt19937_64 rng(100 + seed);
    std::normal_distribution<double> noise(0.0, 0.005);
    MatX z = sc.z;
    for (int i = 0; i < z.size(); ++i) z.data()[i] += noise(rng);
    const double eb = rms(solve_com(sc.forces, z, big, 1e-3, sc.dt).fitted_traj, sc.z);
    const double es = rms(solve_com(sc.forces, z, small, 1e-3, sc.dt).fitted_traj, sc.z);
    diffs.push_back(eb - es);
  }
  std::nth_element(diffs.begin(), diffs.begin() + 25, diffs.end());
  EXPECT_GE(diffs[25], 0.0);
}

TEST(ComSolve, TrialFrontEndUsesObservationMask) {
  ScenarioConfig c;
  c.duration_s = 3.0;
  SyntheticTrial syn = generate(c);
  Trial t = syn.trial;
  hide_forces(t, {2, 1});
  const MatX z = syn.truth.com;
  ComSolution a = solve_com(t, z);
  ComSolution b = solve_com(total_contact_force(t), z, unobserved_frames(t), kDefaultComAlpha, t.dt);
  EXPECT_EQ(a.unobserved, unobserved_frames(t));
  EXPECT_EQ(a.fitted_traj, b.fitted_traj);
  EXPECT_NEAR(a.mu, 1.0 / 70.0, 0.02 / 70.0);
}

TEST(RootAdjust, ZeroOffsetLeavesPosesAlone) {
  ScenarioConfig c;
  c.duration_s = 0.5;
  SyntheticTrial s = generate(c);
  const MatX z = com_series(s.truth.skeleton, s.truth.q);
  const MatX q = adjust_root_translation(s.truth.skeleton, s.truth.q, z);
  EXPECT_LT((q - s.truth.q).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(RootAdjust, ConstantOffsetMovesRootOnly) {
  ScenarioConfig c;
  c.duration_s = 0.5;
  SyntheticTrial s = generate(c);
  MatX z = com_series(s.truth.skeleton, s.truth.q);
  z.col(0).array() += 0.1;
  const MatX q = adjust_root_translation(s.truth.skeleton, s.truth.q, z);
  EXPECT_LT((q.col(3).array() - s.truth.q.col(3).array() - 0.1).abs().maxCoeff(), 1e-12);
  EXPECT_EQ(q.leftCols(3), s.truth.q.leftCols(3));
  EXPECT_EQ(q.rightCols(q.cols() - 6), s.truth.q.rightCols(q.cols() - 6));
  EXPECT_LT((q.middleCols(4, 2) - s.truth.q.middleCols(4, 2)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(RootAdjust, RecomputedComFollowsFit) {
  Scene sc = walking_scene(2.0, 3);
  ScenarioConfig c;
  c.duration_s = 2.0;
  SyntheticTrial s = generate(c);
  ComSolution sol = solve_com(sc.forces, s.truth.com, sc.hidden, 1e-3, sc.dt);
  const MatX q = adjust_root_translation(s.truth.skeleton, s.truth.q, sol);
  EXPECT_LT((com_series(s.truth.skeleton, q) - sol.fitted_traj).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_THROW(adjust_root_translation(builtin_model("pendulum2"), MatX::Zero(3, 2),
                                       MatX::Zero(3, 3)),
               InputError);
}

TEST(MatrixMarket, DumpParsesBack) {
  std::mt19937_64 rng(10);
  MatX f = random_forces(6, rng);
  LinearSystem sys = build_linear_system(f, {2}, 0.2, 0.01);
  std::ostringstream os;
  write_matrix_market(sys, os);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "%%MatrixMarket matrix coordinate real general");
  std::getline(is, line);
  long rows, cols, nnz;
  is >> rows >> cols >> nnz;
  ASSERT_EQ(rows, 21);
  ASSERT_EQ(cols, 10);
  MatX a = MatX::Zero(rows, cols);
  for (long k = 0; k < nnz; ++k) {
    long i, j;
    double v;
    is >> i >> j >> v;
    a(i - 1, j - 1) = v;
  }
  EXPECT_EQ(a, MatX(sys.a));
  std::getline(is, line);
  std::getline(is, line);
  EXPECT_EQ(line, "%%MatrixMarket matrix array real general");
  std::getline(is, line);
  long br, bc;
  is >> br >> bc;
  ASSERT_EQ(br, 21);
  VecX b(br);
  for (long i = 0; i < br; ++i) is >> b[i];
  EXPECT_EQ(b, sys.b);
}

}  // namespace
}  // namespace gaitdyn
