#pragma once

// Reference skeletons used throughout the test suite and the synthetic
// benchmark. Each ships as a constructor here and as a file under models/.

#include <string>
#include <tuple>
#include <vector>

#include "gaitdyn/skeleton.hpp"

namespace gaitdyn {

namespace detail {

inline Mat3 diag_inertia(double ixx, double iyy, double izz) {
  return Vec3(ixx, iyy, izz).asDiagonal();
}

/// Solid cylinder with its long axis along y.
inline Mat3 rod_inertia(double mass, double length, double radius) {
  const double side = mass * (3.0 * radius * radius + length * length) / 12.0;
  return diag_inertia(side, 0.5 * mass * radius * radius, side);
}

inline Mat3 box_inertia(double mass, double x, double y, double z) {
  return diag_inertia(mass * (y * y + z * z) / 12.0,
                      mass * (x * x + z * z) / 12.0,
                      mass * (x * x + y * y) / 12.0);
}

}  // namespace detail

/// Planar double pendulum hanging from the world origin; links lie along +x
/// at q = 0 and rotate about z.
inline Skeleton make_pendulum2() {
  std::vector<Body> bodies(2);
  bodies[0].name = "link1";
  bodies[0].joint = {"shoulder", JointType::Revolute, -1, Vec3::Zero(), Vec3::UnitZ()};
  bodies[0].mass = 1.0;
  bodies[0].com_offset = Vec3(0.5, 0.0, 0.0);
  bodies[0].inertia = detail::diag_inertia(0.002, 0.0835, 0.0845);
  bodies[1].name = "link2";
  bodies[1].joint = {"elbow", JointType::Revolute, 0, Vec3(1.0, 0.0, 0.0), Vec3::UnitZ()};
  bodies[1].mass = 0.8;
  bodies[1].com_offset = Vec3(0.4, 0.0, 0.0);
  bodies[1].inertia = detail::diag_inertia(0.0015, 0.0427, 0.0433);
  std::vector<MarkerDef> markers = {
      {"elbow_tip", 0, Vec3(1.0, 0.0, 0.0)},
      {"link1_mid", 0, Vec3(0.5, 0.05, 0.0)},
      {"hand_tip", 1, Vec3(0.8, 0.0, 0.0)},
      {"link2_mid", 1, Vec3(0.4, 0.05, 0.0)},
  };
  return Skeleton("pendulum2", std::move(bodies), std::move(markers), {},
                  Vec3(0.0, -kGravity, 0.0), 1.8, 1.8);
}

/// Single rigid box on a free joint; the box is its own contact body.
inline Skeleton make_freebox6() {
  std::vector<Body> bodies(1);
  bodies[0].name = "box";
  bodies[0].joint = {"root", JointType::Free, -1, Vec3::Zero(), Vec3::UnitZ()};
  bodies[0].mass = 10.0;
  bodies[0].inertia = detail::box_inertia(10.0, 0.4, 0.3, 0.2);
  std::vector<MarkerDef> markers;
  int k = 0;
  for (double x : {-0.2, 0.2})
    for (double y : {-0.15, 0.15})
      for (double z : {-0.1, 0.1})
        markers.push_back({"corner" + std::to_string(k++), 0, Vec3(x, y, z)});
  return Skeleton("freebox6", std::move(bodies), std::move(markers), {0},
                  Vec3(0.0, -kGravity, 0.0), 0.3, 10.0);
}

/// Lower-body biped: 6-DOF pelvis (carrying the lumped upper body) plus hip,
/// knee and ankle pitch per leg. x forward, y up, z toward the right side.
/// Segment dimensions scale with height, masses with total mass.
inline Skeleton make_biped12(double height = 1.75, double mass = 70.0) {
  const double h = height / 1.75;
  const double thigh_len = 0.43 * h;
  const double shank_len = 0.43 * h;
  const double hip_width = 0.09 * h;
  const double m_hat = 0.678 * mass, m_thigh = 0.1 * mass,
               m_shank = 0.0465 * mass, m_foot = 0.0145 * mass;

  std::vector<Body> bodies;
  Body pelvis;
  pelvis.name = "pelvis";
  pelvis.joint = {"root", JointType::Free, -1, Vec3::Zero(), Vec3::UnitZ()};
  pelvis.mass = m_hat;
  pelvis.com_offset = Vec3(0.0, 0.30 * h, 0.0);
  pelvis.inertia = detail::box_inertia(m_hat, 0.25 * h, 0.75 * h, 0.35 * h);
  bodies.push_back(pelvis);

  auto add_leg = [&](const std::string& side, double sign) {
    const int base = static_cast<int>(bodies.size());
    Body thigh;
    thigh.name = side + "_thigh";
    thigh.joint = {side + "_hip", JointType::Revolute, 0,
                   Vec3(0.0, -0.05 * h, sign * hip_width), Vec3::UnitZ()};
    thigh.mass = m_thigh;
    thigh.com_offset = Vec3(0.0, -0.433 * thigh_len, 0.0);
    thigh.inertia = detail::rod_inertia(m_thigh, thigh_len, 0.06 * h);
    bodies.push_back(thigh);
    Body shank;
    shank.name = side + "_shank";
    shank.joint = {side + "_knee", JointType::Revolute, base,
                   Vec3(0.0, -thigh_len, 0.0), Vec3::UnitZ()};
    shank.mass = m_shank;
    shank.com_offset = Vec3(0.0, -0.433 * shank_len, 0.0);
    shank.inertia = detail::rod_inertia(m_shank, shank_len, 0.045 * h);
    bodies.push_back(shank);
    Body foot;
    foot.name = side + "_foot";
    foot.joint = {side + "_ankle", JointType::Revolute, base + 1,
                  Vec3(0.0, -shank_len, 0.0), Vec3::UnitZ()};
    foot.mass = m_foot;
    foot.com_offset = Vec3(0.05 * h, -0.04 * h, 0.0);
    foot.inertia = detail::box_inertia(m_foot, 0.22 * h, 0.07 * h, 0.09 * h);
    bodies.push_back(foot);
  };
  add_leg("l", -1.0);
  add_leg("r", 1.0);

  std::vector<MarkerDef> markers = {
      {"RASI", 0, Vec3(0.12, 0.02, 0.12) * h},
      {"LASI", 0, Vec3(0.12, 0.02, -0.12) * h},
      {"RPSI", 0, Vec3(-0.10, 0.06, 0.05) * h},
      {"LPSI", 0, Vec3(-0.10, 0.06, -0.05) * h},
      {"STRN", 0, Vec3(0.10, 0.40, 0.0) * h},
      {"C7", 0, Vec3(-0.08, 0.55, 0.01) * h},
  };
  for (const auto& [side, sign, base] :
       {std::tuple{std::string("L"), -1.0, 1}, std::tuple{std::string("R"), 1.0, 4}}) {
    markers.push_back({side + "THI", base, Vec3(0.03, -0.20, sign * 0.08) * h});
    markers.push_back({side + "KNE", base, Vec3(0.0, -0.42, sign * 0.06) * h});
    markers.push_back({side + "TIB", base + 1, Vec3(0.03, -0.20, sign * 0.05) * h});
    markers.push_back({side + "ANK", base + 1, Vec3(-0.01, -0.42, sign * 0.045) * h});
    markers.push_back({side + "HEE", base + 2, Vec3(-0.05, -0.05, 0.01 * sign) * h});
    markers.push_back({side + "TOE", base + 2, Vec3(0.16, -0.06, 0.02 * sign) * h});
  }
  return Skeleton("biped12", std::move(bodies), std::move(markers), {3, 6},
                  Vec3(0.0, -kGravity, 0.0), height, mass);
}

inline std::vector<std::string> builtin_model_names() {
  return {"pendulum2", "freebox6", "biped12"};
}

inline Skeleton builtin_model(const std::string& name) {
  if (name == "pendulum2") return make_pendulum2();
  if (name == "freebox6") return make_freebox6();
  if (name == "biped12") return make_biped12();
  throw InputError("unknown builtin model '" + name + "'");
}

inline std::vector<Skeleton> builtin_models() {
  std::vector<Skeleton> out;
  for (const auto& n : builtin_model_names()) out.push_back(builtin_model(n));
  return out;
}

}  // namespace gaitdyn
