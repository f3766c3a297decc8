#include <cmath>
#include <random>

#include <Eigen/Geometry>
#include <gtest/gtest.h>

#include "gaitdyn/models.hpp"
#include "gaitdyn/skeleton.hpp"
#include "gaitdyn/skeleton_io.hpp"
#include "test_util.hpp"

namespace gaitdyn {
namespace {

using testing::random_pose;
using testing::random_vector;

// Composes one homogeneous transform per joint, without the primitive-link
// expansion used by the library.
std::vector<Eigen::Affine3d> naive_fk(const Skeleton& skel, const VecX& q) {
  std::vector<Eigen::Affine3d> out(skel.body_count());
  for (int b = 0; b < skel.body_count(); ++b) {
    const Body& body = skel.bodies()[b];
    const Joint& j = body.joint;
    Eigen::Affine3d parent = Eigen::Affine3d::Identity();
    Vec3 off = j.offset;
    if (j.parent >= 0) {
      parent = out[j.parent];
      off = off.cwiseProduct(skel.bodies()[j.parent].scale);
    }
    const int d = skel.first_dof(b);
    Eigen::Affine3d motion = Eigen::Affine3d::Identity();
    switch (j.type) {
      case JointType::Free:
        motion = Eigen::Translation3d(q.segment<3>(d + 3)) *
                 Eigen::AngleAxisd(q[d], Vec3::UnitX()) *
                 Eigen::AngleAxisd(q[d + 1], Vec3::UnitY()) *
                 Eigen::AngleAxisd(q[d + 2], Vec3::UnitZ());
        break;
      case JointType::Revolute:
        motion = Eigen::AngleAxisd(q[d], j.axis);
        break;
      case JointType::Prismatic:
        motion = Eigen::Translation3d(j.axis * q[d]);
        break;
    }
    out[b] = parent * Eigen::Translation3d(off) * motion;
  }
  return out;
}

struct PendulumParams {
  double m1 = 1.0, m2 = 0.8, l1 = 1.0, c1 = 0.5, c2 = 0.4;
  double i1 = 0.0845, i2 = 0.0433, g = 9.81;
};

// Lagrangian equations of the planar double pendulum: tau = M qdd + h + G.
Eigen::Matrix2d pendulum_mass(const PendulumParams& p, double q2) {
  const double c = std::cos(q2);
  Eigen::Matrix2d m;
  m(0, 0) = p.i1 + p.i2 + p.m1 * p.c1 * p.c1 +
            p.m2 * (p.l1 * p.l1 + p.c2 * p.c2 + 2 * p.l1 * p.c2 * c);
  m(0, 1) = m(1, 0) = p.i2 + p.m2 * (p.c2 * p.c2 + p.l1 * p.c2 * c);
  m(1, 1) = p.i2 + p.m2 * p.c2 * p.c2;
  return m;
}

Eigen::Vector2d pendulum_tau(const PendulumParams& p, const Eigen::Vector2d& q,
                             const Eigen::Vector2d& qd,
                             const Eigen::Vector2d& qdd) {
  const double hcoef = -p.m2 * p.l1 * p.c2 * std::sin(q[1]);
  Eigen::Vector2d h(hcoef * (2 * qd[0] * qd[1] + qd[1] * qd[1]),
                    -hcoef * qd[0] * qd[0]);
  Eigen::Vector2d grav(
      p.m1 * p.g * p.c1 * std::cos(q[0]) +
          p.m2 * p.g * (p.l1 * std::cos(q[0]) + p.c2 * std::cos(q[0] + q[1])),
      p.m2 * p.g * p.c2 * std::cos(q[0] + q[1]));
  return pendulum_mass(p, q[1]) * qdd + h + grav;
}

TEST(ForwardKinematics, PendulumZeroConfiguration) {
  Skeleton skel = make_pendulum2();
  auto tf = forward_kinematics(skel, VecX::Zero(2));
  EXPECT_TRUE(tf[0].rotation.isIdentity(0.0));
  EXPECT_TRUE(tf[1].rotation.isIdentity(0.0));
  EXPECT_EQ(tf[1].translation, Vec3(1.0, 0.0, 0.0));
}

TEST(ForwardKinematics, FreeBoxPureTranslation) {
  Skeleton skel = make_freebox6();
  VecX q(6);
  q << 0, 0, 0, 1, 2, 3;
  auto tf = forward_kinematics(skel, q);
  EXPECT_EQ(tf[0].translation, Vec3(1, 2, 3));
  EXPECT_TRUE(tf[0].rotation.isIdentity(0.0));
}

TEST(ForwardKinematics, DimensionMismatchThrows) {
  Skeleton skel = make_biped12();
  EXPECT_THROW(forward_kinematics(skel, VecX::Zero(5)), InputError);
}

TEST(ForwardKinematics, MatchesNaiveCompositionOnBiped) {
  std::mt19937_64 rng(11);
  Skeleton base = make_biped12();
  std::uniform_real_distribution<double> su(0.7, 1.4);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Vec3> scales;
    for (int b = 0; b < base.body_count(); ++b)
      scales.emplace_back(su(rng), su(rng), su(rng));
    Skeleton skel = base.with_scales(scales);
    VecX q = random_pose(skel, rng);
    auto tf = forward_kinematics(skel, q);
    auto oracle = naive_fk(skel, q);
    for (int b = 0; b < skel.body_count(); ++b) {
      EXPECT_LT((tf[b].translation - oracle[b].translation()).norm(), 1e-12);
      EXPECT_LT((tf[b].rotation - oracle[b].linear()).norm(), 1e-12);
    }
    auto markers = virtual_markers(skel, q);
    for (int m = 0; m < skel.marker_count(); ++m) {
      const MarkerDef& md = skel.markers()[m];
      Vec3 expect = oracle[md.body] * md.offset.cwiseProduct(scales[md.body]);
      EXPECT_LT((markers[m] - expect).norm(), 1e-12);
    }
  }
}

TEST(VirtualMarkers, ZeroOffsetIsBodyOrigin) {
  std::mt19937_64 rng(3);
  Skeleton skel = make_biped12().with_marker({"origin", 2, Vec3::Zero()});
  VecX q = random_pose(skel, rng);
  auto markers = virtual_markers(skel, q);
  auto tf = forward_kinematics(skel, q);
  EXPECT_LT((markers.back() - tf[2].translation).norm(), 1e-15);
}

TEST(VirtualMarkers, ComponentwiseScaling) {
  Skeleton skel = make_freebox6().with_marker({"probe", 0, Vec3(0.1, 0, 0)});
  skel = skel.with_scales({Vec3(2, 1, 1)});
  auto markers = virtual_markers(skel, VecX::Zero(6));
  EXPECT_NEAR(markers.back().x(), 0.2, 1e-15);
  EXPECT_EQ(markers.back().y(), 0.0);
  EXPECT_EQ(markers.back().z(), 0.0);
}

TEST(VirtualMarkers, AppendedMarkerDoesNotDisturbOthers) {
  std::mt19937_64 rng(5);
  for (const auto& skel : builtin_models()) {
    Skeleton extra = skel.with_marker({"extra", skel.body_count() - 1, Vec3::Zero()});
    VecX q = random_pose(skel, rng);
    auto a = virtual_markers(skel, q);
    auto b = virtual_markers(extra, q);
    for (int m = 0; m < skel.marker_count(); ++m) EXPECT_EQ(a[m], b[m]);
    EXPECT_EQ(center_of_mass(skel, q), center_of_mass(extra, q));
    auto ta = forward_kinematics(skel, q);
    auto tb = forward_kinematics(extra, q);
    for (int i = 0; i < skel.body_count(); ++i)
      EXPECT_EQ(ta[i].translation, tb[i].translation);
  }
}

TEST(CenterOfMass, SingleBodyAndSymmetry) {
  Skeleton box = make_freebox6();
  VecX q(6);
  q << 0.1, 0.2, 0.3, 1, 2, 3;
  EXPECT_LT((center_of_mass(box, q) - Vec3(1, 2, 3)).norm(), 1e-15);

  std::vector<Body> bodies(2);
  bodies[0].name = "a";
  bodies[0].joint = {"root", JointType::Free, -1, Vec3::Zero(), Vec3::UnitZ()};
  bodies[0].inertia = Mat3::Identity() * 1e-6;
  bodies[1].name = "b";
  bodies[1].joint = {"slide", JointType::Prismatic, 0, Vec3(1, 0, 0), Vec3::UnitY()};
  bodies[1].inertia = Mat3::Identity() * 1e-6;
  Skeleton pair("pair", bodies, {}, {}, Vec3(0, -kGravity, 0), 1.0, 2.0);
  EXPECT_LT((center_of_mass(pair, VecX::Zero(7)) - Vec3(0.5, 0, 0)).norm(), 1e-15);
}

TEST(CenterOfMass, JacobianMatchesFiniteDifferences) {
  std::mt19937_64 rng(7);
  const double h = 1e-6;
  for (const auto& skel : builtin_models()) {
    for (int trial = 0; trial < 20; ++trial) {
      VecX q = random_pose(skel, rng);
      Mat3X jac = com_jacobian(skel, q);
      for (int k = 0; k < skel.dofs(); ++k) {
        VecX qp = q, qm = q;
        qp[k] += h;
        qm[k] -= h;
        Vec3 fd = (center_of_mass(skel, qp) - center_of_mass(skel, qm)) / (2 * h);
        EXPECT_LT((jac.col(k) - fd).cwiseAbs().maxCoeff(), 1e-6) << skel.name();
      }
    }
  }
}

TEST(MarkerJacobian, MatchesFiniteDifferences) {
  std::mt19937_64 rng(8);
  const double h = 1e-6;
  Skeleton skel = make_biped12();
  for (int trial = 0; trial < 10; ++trial) {
    VecX q = random_pose(skel, rng);
    KinematicState ks = kinematic_state(skel, q);
    for (int m = 0; m < skel.marker_count(); ++m) {
      Mat3X jac = marker_jacobian(skel, ks, m);
      for (int k = 0; k < skel.dofs(); ++k) {
        VecX qp = q, qm = q;
        qp[k] += h;
        qm[k] -= h;
        Vec3 fd = (virtual_markers(skel, qp)[m] - virtual_markers(skel, qm)[m]) / (2 * h);
        EXPECT_LT((jac.col(k) - fd).cwiseAbs().maxCoeff(), 1e-5);
      }
    }
  }
}

TEST(MassMatrix, FreeBoxTranslationalBlock) {
  Skeleton box = make_freebox6();
  MatX m = mass_matrix(box, VecX::Zero(6));
  EXPECT_LT((m.bottomRightCorner(3, 3) - 10.0 * Mat3::Identity()).norm(), 1e-12);
}

TEST(MassMatrix, PendulumMatchesLagrangianFormula) {
  std::mt19937_64 rng(13);
  Skeleton skel = make_pendulum2();
  PendulumParams p;
  for (int trial = 0; trial < 100; ++trial) {
    VecX q = random_pose(skel, rng, 3.0);
    MatX m = mass_matrix(skel, q);
    EXPECT_LT((m - pendulum_mass(p, q[1])).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(MassMatrix, SymmetricPositiveDefinite) {
  std::mt19937_64 rng(17);
  for (const auto& skel : builtin_models()) {
    for (int trial = 0; trial < 1000; ++trial) {
      VecX q = random_pose(skel, rng, 2.0);
      MatX m = mass_matrix(skel, q);
      ASSERT_LT((m - m.transpose()).cwiseAbs().maxCoeff(), 1e-10);
      Eigen::SelfAdjointEigenSolver<MatX> es(m);
      ASSERT_GT(es.eigenvalues().minCoeff(), 0.0) << skel.name();
    }
  }
}

TEST(BiasForces, ZeroWithoutVelocityOrGravity) {
  std::mt19937_64 rng(19);
  for (const auto& model : builtin_models()) {
    Skeleton skel = model.with_gravity(Vec3::Zero());
    VecX c = bias_forces(skel, random_pose(skel, rng), VecX::Zero(skel.dofs()));
    EXPECT_LT(c.cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(BiasForces, StaticBoxSignConvention) {
  Skeleton box = make_freebox6();
  VecX c = bias_forces(box, VecX::Zero(6), VecX::Zero(6));
  EXPECT_NEAR(c[4], 10.0 * -9.81, 1e-12);
  EXPECT_NEAR(c[3], 0.0, 1e-12);
  EXPECT_NEAR(c[5], 0.0, 1e-12);
}

TEST(BiasForces, PendulumMatchesLagrangianOracle) {
  std::mt19937_64 rng(23);
  Skeleton skel = make_pendulum2();
  PendulumParams p;
  for (int trial = 0; trial < 200; ++trial) {
    VecX q = random_pose(skel, rng, 3.0);
    VecX qd = random_vector(2, rng, 3.0);
    VecX qdd = random_vector(2, rng, 5.0);
    VecX tau = mass_matrix(skel, q) * qdd - bias_forces(skel, q, qd);
    Eigen::Vector2d expect = pendulum_tau(p, q, qd, qdd);
    EXPECT_LT((tau - expect).cwiseAbs().maxCoeff(), 1e-8);
    // acceleration implied by the oracle under zero torque
    Eigen::Vector2d oracle_acc = pendulum_mass(p, q[1]).ldlt().solve(
        -pendulum_tau(p, q, qd, Eigen::Vector2d::Zero()));
    VecX acc = forward_dynamics(skel, q, qd, VecX::Zero(2), VecX());
    EXPECT_LT((acc - oracle_acc).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(BiasForces, PendulumEnergyDrift) {
  Skeleton skel = make_pendulum2();
  auto energy = [&](const VecX& q, const VecX& qd) {
    KinematicState ks = kinematic_state(skel, q);
    double potential = 0.0;
    for (int b = 0; b < skel.body_count(); ++b)
      potential -= skel.bodies()[b].mass * skel.gravity().dot(body_com_world(skel, ks, b));
    return 0.5 * qd.dot(mass_matrix(skel, ks) * qd) + potential;
  };
  auto deriv = [&](const VecX& x) {
    VecX q = x.head(2), qd = x.tail(2);
    VecX out(4);
    out << qd, forward_dynamics(skel, q, qd, VecX::Zero(2), VecX());
    return out;
  };
  VecX x(4);
  x << 0.3, -0.5, 0.0, 0.0;
  const double e0 = energy(x.head(2), x.tail(2));
  const double dt = 1e-3;
  for (int i = 0; i < 1000; ++i) {
    VecX k1 = deriv(x), k2 = deriv(x + 0.5 * dt * k1), k3 = deriv(x + 0.5 * dt * k2),
         k4 = deriv(x + dt * k3);
    x += dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  const double e1 = energy(x.head(2), x.tail(2));
  EXPECT_LT(std::abs(e1 - e0) / std::abs(e0), 1e-4);
}

TEST(ContactJacobian, FreeBoxIdentityLinearBlock) {
  Skeleton box = make_freebox6();
  Mat6X j = contact_jacobian(box, VecX::Zero(6), 0);
  EXPECT_TRUE(j.block(3, 3, 3, 3).isIdentity(0.0));
}

TEST(ContactJacobian, InvalidBodyThrows) {
  Skeleton skel = make_biped12();
  EXPECT_THROW(contact_jacobian(skel, VecX::Zero(12), 2), InputError);
  EXPECT_THROW(contact_jacobian(skel, VecX::Zero(12), 42), InputError);
}

TEST(ContactJacobian, MatchesFiniteDifferencesOfFootPose) {
  std::mt19937_64 rng(29);
  const double h = 1e-6;
  for (const auto& skel : builtin_models()) {
    for (int c : skel.contact_bodies()) {
      for (int trial = 0; trial < 10; ++trial) {
        VecX q = random_pose(skel, rng);
        Mat6X jac = contact_jacobian(skel, q, c);
        Mat3 rot = forward_kinematics(skel, q)[c].rotation;
        for (int k = 0; k < skel.dofs(); ++k) {
          VecX qp = q, qm = q;
          qp[k] += h;
          qm[k] -= h;
          auto tp = forward_kinematics(skel, qp)[c];
          auto tm = forward_kinematics(skel, qm)[c];
          Vec3 lin = (tp.translation - tm.translation) / (2 * h);
          Mat3 w = (tp.rotation - tm.rotation) / (2 * h) * rot.transpose();
          Vec3 ang(w(2, 1), w(0, 2), w(1, 0));
          EXPECT_LT((jac.col(k).head<3>() - ang).cwiseAbs().maxCoeff(), 1e-5);
          EXPECT_LT((jac.col(k).tail<3>() - lin).cwiseAbs().maxCoeff(), 1e-5);
        }
      }
    }
  }
}

TEST(ContactJacobian, SupportingWrenchZeroesRootResidual) {
  Skeleton box = make_freebox6();
  VecX w(6);
  w << 0, 0, 0, 0, 10.0 * 9.81, 0;
  VecX q = VecX::Zero(6);
  VecX tau = rnea(box, q, VecX::Zero(6), VecX::Zero(6)) -
             contact_jacobian(box, q, 0).transpose() * w;
  EXPECT_LT(tau.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Builtins, Shapes) {
  Skeleton biped = builtin_model("biped12");
  EXPECT_EQ(biped.dofs(), 12);
  EXPECT_EQ(biped.contact_bodies().size(), 2u);
  EXPECT_GE(biped.marker_count(), 12);
  EXPECT_NEAR(biped.total_mass(), 70.0, 1e-9);
  EXPECT_EQ(builtin_model("pendulum2").dofs(), 2);
  EXPECT_EQ(builtin_model("freebox6").dofs(), 6);
  EXPECT_THROW(builtin_model("nope"), InputError);
}

TEST(Builtins, ShippedFilesReproduceConstructors) {
  for (const auto& name : builtin_model_names()) {
    Skeleton loaded = load_skeleton(testing::source_path("models/" + name + ".skel.json"));
    EXPECT_TRUE(loaded == builtin_model(name)) << name;
  }
}

TEST(SkeletonFile, RejectsBadDocuments) {
  auto j = skeleton_to_json(make_biped12());
  j["bodies"][1]["mass"] = -1.0;
  EXPECT_THROW(skeleton_from_json(j), SchemaError);
  auto k = skeleton_to_json(make_biped12());
  k["markers"][0]["body"] = "missing";
  EXPECT_THROW(skeleton_from_json(k), SchemaError);
}

TEST(Scaling, InertiaFollowsMassDistribution) {
  // a uniform box scaled by s has the inertia of the box with scaled sides
  Skeleton box = make_freebox6().with_scales({Vec3(2.0, 0.5, 1.5)});
  Mat3 expect = detail::box_inertia(10.0, 0.8, 0.15, 0.3);
  EXPECT_LT((box.scaled_inertia(0) - expect).norm(), 1e-12);
}

}  // namespace
}  // namespace gaitdyn
