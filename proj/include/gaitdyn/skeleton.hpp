#pragma once

// Articulated rigid-body model. Every joint is expanded into a chain of
// one-DOF primitive links (revolute or prismatic); kinematics and dynamics
// run over that chain entirely in world coordinates, with spatial vectors
// ordered (angular; linear) and referenced to the world origin.

#include <algorithm>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include "gaitdyn/common.hpp"

namespace gaitdyn {

enum class JointType { Free, Revolute, Prismatic };

inline int joint_dof_count(JointType t) { return t == JointType::Free ? 6 : 1; }

inline const char* to_string(JointType t) {
  switch (t) {
    case JointType::Free: return "free";
    case JointType::Revolute: return "revolute";
    case JointType::Prismatic: return "prismatic";
  }
  return "?";
}

struct Joint {
  std::string name;
  JointType type = JointType::Revolute;
  int parent = -1;              // parent body index, -1 = world
  Vec3 offset = Vec3::Zero();   // joint origin in the parent body frame, pre-scaling
  Vec3 axis = Vec3::UnitZ();    // unit axis for 1-DOF joints, parent-aligned frame
};

struct Body {
  std::string name;
  Joint joint;                  // joint connecting this body to its parent
  Vec3 scale = Vec3::Ones();
  double mass = 1.0;
  Mat3 inertia = Mat3::Identity();  // about the body CoM, body axes, unscaled geometry
  Vec3 com_offset = Vec3::Zero();   // pre-scaling
};

struct MarkerDef {
  std::string name;
  int body = 0;
  Vec3 offset = Vec3::Zero();   // pre-scaling
};

/// Joint coordinates of one frame.
using Pose = VecX;

/// Rigid transform of a body in world coordinates.
struct Transform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
};

namespace detail {

struct Link {
  int parent = -1;       // parent link, -1 = world
  int dof = 0;
  bool prismatic = false;
  Vec3 axis = Vec3::UnitZ();
  int joint_body = -1;   // set on the first link of a joint: owner of the offset
  int body = -1;         // set on the last link of a joint: the massive body
};

}  // namespace detail

class Skeleton {
 public:
  Skeleton() = default;

  Skeleton(std::string name, std::vector<Body> bodies,
           std::vector<MarkerDef> markers, std::vector<int> contact_bodies,
           Vec3 gravity, double height, double nominal_mass)
      : name_(std::move(name)),
        bodies_(std::move(bodies)),
        markers_(std::move(markers)),
        contacts_(std::move(contact_bodies)),
        gravity_(std::move(gravity)),
        height_(height),
        nominal_mass_(nominal_mass) {
    validate();
    expand();
  }

  const std::string& name() const { return name_; }
  const std::vector<Body>& bodies() const { return bodies_; }
  const std::vector<MarkerDef>& markers() const { return markers_; }
  const std::vector<int>& contact_bodies() const { return contacts_; }
  const Vec3& gravity() const { return gravity_; }
  double height() const { return height_; }
  double nominal_mass() const { return nominal_mass_; }
  int dofs() const { return dofs_; }
  int body_count() const { return static_cast<int>(bodies_.size()); }
  int marker_count() const { return static_cast<int>(markers_.size()); }
  bool floating_base() const {
    return !bodies_.empty() && bodies_[0].joint.type == JointType::Free;
  }

  double total_mass() const {
    double m = 0.0;
    for (const auto& b : bodies_) m += b.mass;
    return m;
  }

  int body_index(const std::string& name) const {
    for (int i = 0; i < body_count(); ++i)
      if (bodies_[i].name == name) return i;
    throw InputError("unknown body '" + name + "'");
  }

  /// First generalized coordinate of body i's joint.
  int first_dof(int body) const { return first_dof_.at(body); }

  /// Inertia about the CoM with the body's scale applied to its mass
  /// distribution: second moment S*Sigma*S, Sigma = tr(I)/2 - I.
  Mat3 scaled_inertia(int body) const {
    const Body& b = bodies_[body];
    Mat3 sigma = 0.5 * b.inertia.trace() * Mat3::Identity() - b.inertia;
    Mat3 s = b.scale.asDiagonal();
    Mat3 sig2 = s * sigma * s;
    return sig2.trace() * Mat3::Identity() - sig2;
  }

  Skeleton with_scales(const std::vector<Vec3>& scales) const {
    require(static_cast<int>(scales.size()) == body_count(),
            "scale count must equal body count");
    Skeleton out = *this;
    for (int i = 0; i < body_count(); ++i) out.bodies_[i].scale = scales[i];
    out.validate();
    return out;
  }

  std::vector<Vec3> scales() const {
    std::vector<Vec3> s;
    for (const auto& b : bodies_) s.push_back(b.scale);
    return s;
  }

  /// Multiplies every body mass (and hence inertia) by `factor`.
  Skeleton with_mass_scale(double factor) const {
    require(factor > 0.0, "mass scale must be positive");
    Skeleton out = *this;
    for (auto& b : out.bodies_) {
      b.mass *= factor;
      b.inertia *= factor;
    }
    return out;
  }

  Skeleton with_gravity(const Vec3& g) const {
    Skeleton out = *this;
    out.gravity_ = g;
    return out;
  }

  /// Copy with an extra marker appended.
  Skeleton with_marker(MarkerDef m) const {
    Skeleton out = *this;
    out.markers_.push_back(std::move(m));
    out.validate();
    return out;
  }

  const std::vector<detail::Link>& links() const { return links_; }
  /// Index of the last primitive link of each body.
  int body_link(int body) const { return body_link_[body]; }

  friend bool operator==(const Skeleton& a, const Skeleton& b) {
    if (a.name_ != b.name_ || a.gravity_ != b.gravity_ ||
        a.height_ != b.height_ || a.nominal_mass_ != b.nominal_mass_ ||
        a.contacts_ != b.contacts_ || a.bodies_.size() != b.bodies_.size() ||
        a.markers_.size() != b.markers_.size())
      return false;
    for (std::size_t i = 0; i < a.bodies_.size(); ++i) {
      const Body& x = a.bodies_[i];
      const Body& y = b.bodies_[i];
      if (x.name != y.name || x.scale != y.scale || x.mass != y.mass ||
          x.inertia != y.inertia || x.com_offset != y.com_offset ||
          x.joint.name != y.joint.name || x.joint.type != y.joint.type ||
          x.joint.parent != y.joint.parent || x.joint.offset != y.joint.offset ||
          x.joint.axis != y.joint.axis)
        return false;
    }
    for (std::size_t i = 0; i < a.markers_.size(); ++i) {
      const MarkerDef& x = a.markers_[i];
      const MarkerDef& y = b.markers_[i];
      if (x.name != y.name || x.body != y.body || x.offset != y.offset)
        return false;
    }
    return true;
  }

 private:
  void validate() const {
    require(!bodies_.empty(), "skeleton needs at least one body");
    require(height_ > 0.0 && nominal_mass_ > 0.0,
            "subject height and nominal mass must be positive");
    require(gravity_.allFinite(), "gravity must be finite");
    for (int i = 0; i < body_count(); ++i) {
      const Body& b = bodies_[i];
      require(b.joint.parent < i, "joint parent must precede its child body ('" +
                                      b.name + "')");
      require(i == 0 ? b.joint.parent == -1 : b.joint.parent >= 0,
              "only body 0 attaches to the world");
      require(b.joint.type != JointType::Free || i == 0,
              "only the root joint may be free");
      require(b.mass > 0.0, "body mass must be positive ('" + b.name + "')");
      require((b.scale.array() > 0.0).all(), "body scales must be positive");
      require(b.inertia.allFinite() &&
                  (b.inertia - b.inertia.transpose()).norm() <=
                      1e-12 * (1.0 + b.inertia.norm()),
              "inertia must be symmetric ('" + b.name + "')");
      Eigen::SelfAdjointEigenSolver<Mat3> es(b.inertia);
      require(es.eigenvalues().minCoeff() > 0.0,
              "inertia must be positive definite ('" + b.name + "')");
      require(b.joint.offset.allFinite() && b.com_offset.allFinite(),
              "offsets must be finite");
      if (b.joint.type != JointType::Free)
        require(std::abs(b.joint.axis.norm() - 1.0) < 1e-9,
                "joint axis must be unit length");
    }
    for (const auto& m : markers_) {
      require(m.body >= 0 && m.body < body_count(),
              "marker '" + m.name + "' references a missing body");
      require(m.offset.allFinite(), "marker offset must be finite");
    }
    for (int c : contacts_)
      require(c >= 0 && c < body_count(), "invalid contact body index");
  }

  void expand() {
    links_.clear();
    body_link_.assign(bodies_.size(), -1);
    first_dof_.assign(bodies_.size(), 0);
    int dof = 0;
    for (int i = 0; i < body_count(); ++i) {
      const Joint& j = bodies_[i].joint;
      int parent_link = j.parent < 0 ? -1 : body_link_[j.parent];
      first_dof_[i] = dof;
      std::vector<detail::Link> chain;
      if (j.type == JointType::Free) {
        // translation in the parent frame first, then intrinsic X-Y-Z Euler
        // rotation; coordinates are ordered rotation (3) then translation (3)
        for (int k = 0; k < 3; ++k)
          chain.push_back({-1, dof + 3 + k, true, Vec3::Unit(k), -1, -1});
        for (int k = 0; k < 3; ++k)
          chain.push_back({-1, dof + k, false, Vec3::Unit(k), -1, -1});
      } else {
        chain.push_back(
            {-1, dof, j.type == JointType::Prismatic, j.axis, -1, -1});
      }
      dof += joint_dof_count(j.type);
      chain.front().joint_body = i;
      chain.back().body = i;
      for (auto& l : chain) {
        l.parent = parent_link;
        links_.push_back(l);
        parent_link = static_cast<int>(links_.size()) - 1;
      }
      body_link_[i] = parent_link;
    }
    dofs_ = dof;
  }

  std::string name_;
  std::vector<Body> bodies_;
  std::vector<MarkerDef> markers_;
  std::vector<int> contacts_;
  Vec3 gravity_ = Vec3(0.0, -kGravity, 0.0);
  double height_ = 1.0;
  double nominal_mass_ = 1.0;
  int dofs_ = 0;
  std::vector<detail::Link> links_;
  std::vector<int> body_link_;
  std::vector<int> first_dof_;
};

/// World-frame quantities of every primitive link for one configuration.
struct KinematicState {
  std::vector<Mat3> rotation;    // link frame orientation
  std::vector<Vec3> origin;      // link frame origin
  std::vector<Vec3> axis;        // world joint axis
  std::vector<Vec3> pivot;       // point on a revolute axis

  /// Motion subspace column (angular; linear at the world origin).
  Vec6 motion(const Skeleton& skel, int link) const {
    Vec6 s;
    if (skel.links()[link].prismatic) {
      s << Vec3::Zero(), axis[link];
    } else {
      s << axis[link], pivot[link].cross(axis[link]);
    }
    return s;
  }
};

inline void check_pose(const Skeleton& skel, const VecX& q, const char* what) {
  if (q.size() != skel.dofs())
    throw InputError(std::string(what) + " has length " +
                     std::to_string(q.size()) + ", expected " +
                     std::to_string(skel.dofs()));
}

inline KinematicState kinematic_state(const Skeleton& skel, const Pose& q) {
  check_pose(skel, q, "pose");
  const auto& links = skel.links();
  const std::size_t n = links.size();
  KinematicState ks;
  ks.rotation.resize(n);
  ks.origin.resize(n);
  ks.axis.resize(n);
  ks.pivot.resize(n);
  for (std::size_t l = 0; l < n; ++l) {
    const auto& link = links[l];
    Mat3 rot = link.parent < 0 ? Mat3::Identity() : ks.rotation[link.parent];
    Vec3 pos = link.parent < 0 ? Vec3::Zero() : ks.origin[link.parent];
    if (link.joint_body >= 0) {
      const Joint& j = skel.bodies()[link.joint_body].joint;
      Vec3 off = j.offset;
      if (j.parent >= 0) off = off.cwiseProduct(skel.bodies()[j.parent].scale);
      pos += rot * off;
    }
    const double x = q[link.dof];
    ks.axis[l] = rot * link.axis;
    ks.pivot[l] = pos;
    if (link.prismatic) {
      pos += ks.axis[l] * x;
    } else {
      rot = rot * Eigen::AngleAxisd(x, link.axis).toRotationMatrix();
    }
    ks.rotation[l] = rot;
    ks.origin[l] = pos;
  }
  return ks;
}

/// One world transform per body.
inline std::vector<Transform> forward_kinematics(const Skeleton& skel,
                                                 const Pose& q) {
  KinematicState ks = kinematic_state(skel, q);
  std::vector<Transform> out(skel.body_count());
  for (int b = 0; b < skel.body_count(); ++b) {
    int l = skel.body_link(b);
    out[b] = {ks.rotation[l], ks.origin[l]};
  }
  return out;
}

inline Vec3 marker_position(const Skeleton& skel, const KinematicState& ks,
                            int marker) {
  const MarkerDef& m = skel.markers()[marker];
  int l = skel.body_link(m.body);
  return ks.rotation[l] * m.offset.cwiseProduct(skel.bodies()[m.body].scale) +
         ks.origin[l];
}

inline std::vector<Vec3> virtual_markers(const Skeleton& skel, const Pose& q) {
  KinematicState ks = kinematic_state(skel, q);
  std::vector<Vec3> out(skel.marker_count());
  for (int i = 0; i < skel.marker_count(); ++i)
    out[i] = marker_position(skel, ks, i);
  return out;
}

/// 3xN Jacobian of a world point rigidly attached to `body`.
inline Mat3X point_jacobian(const Skeleton& skel, const KinematicState& ks,
                            int body, const Vec3& point) {
  Mat3X jac = Mat3X::Zero(3, skel.dofs());
  for (int l = skel.body_link(body); l >= 0; l = skel.links()[l].parent) {
    const auto& link = skel.links()[l];
    jac.col(link.dof) = link.prismatic
                            ? ks.axis[l]
                            : Vec3(ks.axis[l].cross(point - ks.pivot[l]));
  }
  return jac;
}

inline Mat3X marker_jacobian(const Skeleton& skel, const KinematicState& ks,
                             int marker) {
  return point_jacobian(skel, ks, skel.markers()[marker].body,
                        marker_position(skel, ks, marker));
}

inline Vec3 body_com_world(const Skeleton& skel, const KinematicState& ks,
                           int body) {
  const Body& b = skel.bodies()[body];
  int l = skel.body_link(body);
  return ks.rotation[l] * b.com_offset.cwiseProduct(b.scale) + ks.origin[l];
}

inline Vec3 center_of_mass(const Skeleton& skel, const KinematicState& ks) {
  Vec3 acc = Vec3::Zero();
  double m = 0.0;
  for (int b = 0; b < skel.body_count(); ++b) {
    acc += skel.bodies()[b].mass * body_com_world(skel, ks, b);
    m += skel.bodies()[b].mass;
  }
  return acc / m;
}

inline Vec3 center_of_mass(const Skeleton& skel, const Pose& q) {
  return center_of_mass(skel, kinematic_state(skel, q));
}

/// dCoM/dq, 3xN.
inline Mat3X com_jacobian(const Skeleton& skel, const Pose& q) {
  KinematicState ks = kinematic_state(skel, q);
  const auto& links = skel.links();
  const std::size_t n = links.size();
  // subtree mass and mass-weighted CoM sum per link
  std::vector<double> msub(n, 0.0);
  std::vector<Vec3> csub(n, Vec3::Zero());
  for (int l = static_cast<int>(n) - 1; l >= 0; --l) {
    if (links[l].body >= 0) {
      double m = skel.bodies()[links[l].body].mass;
      msub[l] += m;
      csub[l] += m * body_com_world(skel, ks, links[l].body);
    }
    if (links[l].parent >= 0) {
      msub[links[l].parent] += msub[l];
      csub[links[l].parent] += csub[l];
    }
  }
  const double total = skel.total_mass();
  Mat3X jac = Mat3X::Zero(3, skel.dofs());
  for (std::size_t l = 0; l < n; ++l) {
    Vec3 col = links[l].prismatic
                   ? Vec3(msub[l] * ks.axis[l])
                   : Vec3(ks.axis[l].cross(csub[l] - msub[l] * ks.pivot[l]));
    jac.col(links[l].dof) += col / total;
  }
  return jac;
}

namespace detail {

/// Spatial inertia of a body about the world origin.
inline Mat6 spatial_inertia(const Skeleton& skel, const KinematicState& ks,
                            int body) {
  const double m = skel.bodies()[body].mass;
  const int l = skel.body_link(body);
  Mat3 ic = ks.rotation[l] * skel.scaled_inertia(body) *
            ks.rotation[l].transpose();
  Mat3 cx = skew(body_com_world(skel, ks, body));
  Mat6 out;
  out.topLeftCorner<3, 3>() = ic + m * cx * cx.transpose();
  out.topRightCorner<3, 3>() = m * cx;
  out.bottomLeftCorner<3, 3>() = m * cx.transpose();
  out.bottomRightCorner<3, 3>() = m * Mat3::Identity();
  return out;
}

inline Vec6 cross_motion(const Vec6& v, const Vec6& m) {
  Vec6 out;
  out.head<3>() = v.head<3>().cross(m.head<3>());
  out.tail<3>() = v.head<3>().cross(m.tail<3>()) + v.tail<3>().cross(m.head<3>());
  return out;
}

inline Vec6 cross_force(const Vec6& v, const Vec6& f) {
  Vec6 out;
  out.head<3>() = v.head<3>().cross(f.head<3>()) + v.tail<3>().cross(f.tail<3>());
  out.tail<3>() = v.head<3>().cross(f.tail<3>());
  return out;
}

}  // namespace detail

/// Recursive Newton-Euler: generalized forces needed to realize (q, qd, qdd)
/// with no external contact forces, gravity included.
inline VecX rnea(const Skeleton& skel, const KinematicState& ks, const VecX& qd,
                 const VecX& qdd) {
  check_pose(skel, qd, "velocity");
  check_pose(skel, qdd, "acceleration");
  const auto& links = skel.links();
  const std::size_t n = links.size();
  std::vector<Vec6> vel(n), acc(n), force(n);
  Vec6 a0;
  a0 << Vec3::Zero(), -skel.gravity();
  for (std::size_t l = 0; l < n; ++l) {
    const auto& link = links[l];
    Vec6 s = ks.motion(skel, static_cast<int>(l));
    Vec6 vp = link.parent < 0 ? Vec6::Zero() : vel[link.parent];
    Vec6 ap = link.parent < 0 ? a0 : acc[link.parent];
    Vec6 vj = s * qd[link.dof];
    vel[l] = vp + vj;
    acc[l] = ap + s * qdd[link.dof] + detail::cross_motion(vel[l], vj);
    if (link.body >= 0) {
      Mat6 inertia = detail::spatial_inertia(skel, ks, link.body);
      force[l] = inertia * acc[l] +
                 detail::cross_force(vel[l], inertia * vel[l]);
    } else {
      force[l].setZero();
    }
  }
  VecX tau(skel.dofs());
  for (int l = static_cast<int>(n) - 1; l >= 0; --l) {
    tau[links[l].dof] = ks.motion(skel, l).dot(force[l]);
    if (links[l].parent >= 0) force[links[l].parent] += force[l];
  }
  return tau;
}

inline VecX rnea(const Skeleton& skel, const Pose& q, const VecX& qd,
                 const VecX& qdd) {
  return rnea(skel, kinematic_state(skel, q), qd, qdd);
}

/// Composite-rigid-body mass matrix.
inline MatX mass_matrix(const Skeleton& skel, const KinematicState& ks) {
  const auto& links = skel.links();
  const int n = static_cast<int>(links.size());
  std::vector<Mat6> composite(n, Mat6::Zero());
  for (int l = 0; l < n; ++l)
    if (links[l].body >= 0)
      composite[l] = detail::spatial_inertia(skel, ks, links[l].body);
  for (int l = n - 1; l >= 0; --l)
    if (links[l].parent >= 0) composite[links[l].parent] += composite[l];
  MatX mm = MatX::Zero(skel.dofs(), skel.dofs());
  for (int i = 0; i < n; ++i) {
    Vec6 f = composite[i] * ks.motion(skel, i);
    const int di = links[i].dof;
    mm(di, di) = ks.motion(skel, i).dot(f);
    for (int j = links[i].parent; j >= 0; j = links[j].parent) {
      const int dj = links[j].dof;
      mm(di, dj) = mm(dj, di) = ks.motion(skel, j).dot(f);
    }
  }
  return mm;
}

inline MatX mass_matrix(const Skeleton& skel, const Pose& q) {
  return mass_matrix(skel, kinematic_state(skel, q));
}

/// C(q, qd) in the convention tau = M qdd - C - J^T f: Coriolis, centrifugal
/// and gravity terms, entering with a negative sign.
inline VecX bias_forces(const Skeleton& skel, const Pose& q, const VecX& qd) {
  return -rnea(skel, q, qd, VecX::Zero(skel.dofs()));
}

/// 6xN Jacobian of the spatial velocity (angular; linear) of `body`'s origin,
/// world-aligned.
inline Mat6X contact_jacobian(const Skeleton& skel, const KinematicState& ks,
                              int body) {
  require(body >= 0 && body < skel.body_count(), "invalid body index");
  const Vec3 p = ks.origin[skel.body_link(body)];
  Mat6X jac = Mat6X::Zero(6, skel.dofs());
  for (int l = skel.body_link(body); l >= 0; l = skel.links()[l].parent) {
    Vec6 s = ks.motion(skel, l);
    Vec6 col;
    col << s.head<3>(), s.tail<3>() + s.head<3>().cross(p);
    jac.col(skel.links()[l].dof) = col;
  }
  return jac;
}

inline Mat6X contact_jacobian(const Skeleton& skel, const Pose& q, int body) {
  const auto& cb = skel.contact_bodies();
  require(std::find(cb.begin(), cb.end(), body) != cb.end(),
          "body " + std::to_string(body) + " is not a declared contact body");
  return contact_jacobian(skel, kinematic_state(skel, q), body);
}

/// Sum over contact bodies of J_c^T w_c. `wrenches` stacks one (moment; force)
/// 6-vector per declared contact body.
inline VecX contact_generalized_forces(const Skeleton& skel,
                                       const KinematicState& ks,
                                       const VecX& wrenches) {
  const auto& cb = skel.contact_bodies();
  require(wrenches.size() == 6 * static_cast<Eigen::Index>(cb.size()),
          "wrench vector must hold 6 values per contact body");
  VecX out = VecX::Zero(skel.dofs());
  for (std::size_t c = 0; c < cb.size(); ++c)
    out += contact_jacobian(skel, ks, cb[c]).transpose() *
           wrenches.segment<6>(6 * static_cast<Eigen::Index>(c));
  return out;
}

/// Solves M qdd = C + J^T f + tau for qdd.
inline VecX forward_dynamics(const Skeleton& skel, const Pose& q,
                             const VecX& qd, const VecX& tau,
                             const VecX& wrenches) {
  KinematicState ks = kinematic_state(skel, q);
  MatX mm = mass_matrix(skel, ks);
  VecX rhs = -rnea(skel, ks, qd, VecX::Zero(skel.dofs())) + tau +
             contact_generalized_forces(skel, ks, wrenches);
  return mm.llt().solve(rhs);
}

/// Position of a joint origin (the origin of the body it drives).
inline Vec3 joint_center(const Skeleton& skel, const KinematicState& ks,
                         int body) {
  return ks.origin[skel.body_link(body)];
}

}  // namespace gaitdyn
