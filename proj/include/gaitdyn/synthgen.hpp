#pragma once

// Synthetic trials with exact ground truth. Motions are analytic scripts, so
// q, qd and qdd are known in closed form; the root wrench demanded by inverse
// dynamics is handed to the stance feet, leaving zero residual by
// construction.

#include <cstdint>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <Eigen/LU>

#include "gaitdyn/models.hpp"
#include "gaitdyn/trial.hpp"

namespace gaitdyn {

enum class MotionKind { Standing, Walking, Hopping };

inline std::string to_string(MotionKind m) {
  switch (m) {
    case MotionKind::Standing: return "standing";
    case MotionKind::Walking: return "walking";
    default: return "hopping";
  }
}

inline MotionKind parse_motion(const std::string& s) {
  if (s == "standing") return MotionKind::Standing;
  if (s == "walking") return MotionKind::Walking;
  if (s == "hopping") return MotionKind::Hopping;
  throw InputError("unknown motion '" + s + "'");
}

struct ScenarioConfig {
  std::string model = "biped12";
  MotionKind motion = MotionKind::Walking;
  double duration_s = 10.0;
  double rate_hz = kStandardRateHz;
  double speed_mps = 1.2;  // walking speed, or belt speed on a treadmill
  bool treadmill = false;
  double period_s = 1.1;  // gait cycle or hop period
  double stance_fraction = 0.6;  // walking: per foot; hopping: share of the period
  double phase = 0.0;  // gait phase at t = 0 (rad)
  double marker_noise_m = 0.0;
  double force_noise_n = 0.0;
  double mass_kg = 70.0;
  double height_m = 1.75;
  std::vector<Vec3> scales;  // per body; empty means height_m / 1.75 everywhere
  std::string subject_id = "SYN01";
  std::uint64_t seed = 1;
};

struct GroundTruth {
  Skeleton skeleton;  // scaled, mass-adjusted subject model
  double dt = 0.01;
  double mass_scale = 1.0;  // skeleton masses relative to the builtin model
  MatX q, qd, qdd;  // T x N
  MatX wrenches;  // T x 6C, noiseless
  MatX tau;  // T x N, root rows zero
  MatX com, com_acc;  // T x 3
};

struct SyntheticTrial {
  Trial trial;
  GroundTruth truth;
};

class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

// One additive term of a per-DOF script. Bump is the clamped C2 pulse
// amp * max(0, (cos(w t + phi) - c) / (1 - c))^3.
struct ScriptTerm {
  enum Kind { Constant, Linear, Sine, Bump } kind = Constant;
  double amp = 0.0, omega = 0.0, phase = 0.0, c = 0.0;

  Vec3 eval(double t) const {  // value, first and second derivative
    switch (kind) {
      case Constant: return {amp, 0.0, 0.0};
      case Linear: return {amp * t, amp, 0.0};
      case Sine: {
        const double a = omega * t + phase;
        return {amp * std::sin(a), amp * omega * std::cos(a),
                -amp * omega * omega * std::sin(a)};
      }
      case Bump: {
        const double a = omega * t + phase;
        const double u = (std::cos(a) - c) / (1.0 - c);
        if (u <= 0.0) return Vec3::Zero();
        const double du = -omega * std::sin(a) / (1.0 - c);
        const double ddu = -omega * omega * std::cos(a) / (1.0 - c);
        return {amp * u * u * u, amp * 3.0 * u * u * du,
                amp * (6.0 * u * du * du + 3.0 * u * u * ddu)};
      }
    }
    return Vec3::Zero();
  }
};

// Vertical hop: yddot = -g + A sin^2(pi tau / Ts) on stance, -g in flight,
// A = 2 g P / Ts so velocity is periodic; v0 makes position periodic.
struct HopProfile {
  double period = 0.6, stance = 0.3, g = kGravity, base = 1.0;

  double amp() const { return 2.0 * g * period / stance; }
  // integrals of a(tau) from 0: velocity gain and position gain
  std::pair<double, double> integrals(double tau) const {
    const double a = amp(), w = 2.0 * std::numbers::pi / stance;
    const double ts = std::min(tau, stance);
    // sin^2(pi x / Ts) = (1 - cos(w x)) / 2
    double v = a * (ts / 2.0 - std::sin(w * ts) / (2.0 * w));
    double y = a * (ts * ts / 4.0 + (std::cos(w * ts) - 1.0) / (2.0 * w * w));
    if (tau > stance) y += v * (tau - stance);
    v -= g * tau;
    y -= 0.5 * g * tau * tau;
    return {v, y};
  }
  Vec3 eval(double t) const {
    const double tau = t - period * std::floor(t / period);
    const double v0 = -integrals(period).second / period;
    const auto [v, y] = integrals(tau);
    const double acc = tau < stance
                           ? -g + amp() * std::pow(std::sin(std::numbers::pi * tau / stance), 2)
                           : -g;
    return {base + v0 * tau + y, v0 + v, acc};
  }
};

inline double raised_cosine(double x, double width) {
  if (x <= 0.0) return 0.0;
  if (x >= width) return 1.0;
  return 0.5 * (1.0 - std::cos(std::numbers::pi * x / width));
}

inline double wrap_2pi(double a) {
  const double two_pi = 2.0 * std::numbers::pi;
  return a - two_pi * std::floor(a / two_pi);
}

}  // namespace detail

inline void validate_scenario(const ScenarioConfig& c) {
  require(c.model == "biped12", "synthetic scripts are defined for biped12 only");
  require(c.duration_s > 0.0 && c.rate_hz > 0.0, "duration and rate must be positive");
  require(c.marker_noise_m >= 0.0 && c.force_noise_n >= 0.0, "noise sigma must be >= 0");
  require(c.mass_kg > 0.0 && c.height_m > 0.0, "subject mass and height must be positive");
  require(c.period_s > 0.0, "period must be positive");
  if (c.motion == MotionKind::Walking)
    require(c.stance_fraction > 0.5 && c.stance_fraction < 1.0,
            "walking stance fraction must lie in (0.5, 1)");
  if (c.motion == MotionKind::Hopping)
    require(c.stance_fraction > 0.0 && c.stance_fraction < 1.0,
            "hop stance fraction must lie in (0, 1)");
  require(c.speed_mps >= 0.0, "speed must be non-negative");
}

inline Skeleton scenario_skeleton(const ScenarioConfig& c) {
  Skeleton nominal = builtin_model(c.model);
  std::vector<Vec3> scales = c.scales;
  if (scales.empty())
    scales.assign(nominal.body_count(), Vec3::Constant(c.height_m / nominal.height()));
  return nominal.with_scales(scales).with_mass_scale(c.mass_kg / nominal.total_mass());
}

/// Closed-form pose scripts and per-foot stance weights (sum 1 while any foot
/// bears load).
class MotionScript {
 public:
  MotionScript(const ScenarioConfig& c, const Skeleton& skel) : cfg_(c), terms_(skel.dofs()) {
    using T = detail::ScriptTerm;
    const double s = skel.bodies()[1].scale.y();
    leg_ = 0.86 * s;  // thigh + shank of the nominal model
    const double y0 = 0.97 * s;  // hip height with the sole at y = 0
    omega_ = 2.0 * std::numbers::pi / c.period_s;
    switch (c.motion) {
      case MotionKind::Standing:
        terms_[4].push_back({T::Constant, y0});
        terms_[7].push_back({T::Constant, -0.05});
        terms_[10].push_back({T::Constant, -0.05});
        break;
      case MotionKind::Hopping:
        hop_ = {c.period_s, c.stance_fraction * c.period_s, kGravity, y0 - 0.03};
        for (int d : {6, 9}) terms_[d].push_back({T::Constant, 0.15});
        for (int d : {7, 10}) terms_[d].push_back({T::Constant, -0.3});
        for (int d : {8, 11}) terms_[d].push_back({T::Constant, 0.15});
        break;
      case MotionKind::Walking: {
        const double beta = c.stance_fraction;
        const double ratio = c.speed_mps * beta * c.period_s / (2.0 * leg_);
        require(ratio < 0.9, "walking speed too high for the leg length and period");
        const double amp = std::asin(ratio) / std::sin(std::numbers::pi * beta);
        const double knee_c = std::cos(std::numbers::pi * (1.0 - beta));
        for (int side = 0; side < 2; ++side) {
          const double ph = c.phase + side * std::numbers::pi;
          const int hip = 6 + 3 * side;
          terms_[hip].push_back({T::Sine, amp, omega_, ph});
          terms_[hip + 1].push_back({T::Bump, -1.0, omega_, ph, knee_c});
          terms_[hip + 2].push_back({T::Sine, 0.1, omega_, ph + 0.5});
        }
        // root sway is symmetric about mid-stance so it adds no net ankle travel
        const double quarter = std::numbers::pi / 2;
        terms_[0].push_back({T::Sine, 0.02, omega_, c.phase + quarter});
        terms_[1].push_back({T::Sine, 0.03, omega_, c.phase + quarter});
        terms_[2].push_back({T::Sine, 0.03, 2.0 * omega_, 2.0 * c.phase + quarter});
        terms_[3].push_back({T::Linear, c.treadmill ? 0.0 : c.speed_mps});
        terms_[4].push_back({T::Constant, y0 - 0.02});
        terms_[4].push_back({T::Sine, 0.015, 2.0 * omega_, 2.0 * c.phase + std::numbers::pi / 2});
        terms_[5].push_back({T::Sine, 0.02, omega_, c.phase + std::numbers::pi / 2});
        break;
      }
    }
  }

  /// Rows: q, qd, qdd.
  Eigen::Matrix<double, 3, Eigen::Dynamic> eval(double t) const {
    Eigen::Matrix<double, 3, Eigen::Dynamic> out =
        Eigen::Matrix<double, 3, Eigen::Dynamic>::Zero(3, terms_.size());
    for (std::size_t d = 0; d < terms_.size(); ++d)
      for (const auto& term : terms_[d]) out.col(d) += term.eval(t);
    if (cfg_.motion == MotionKind::Hopping) out.col(4) = hop_.eval(t);
    return out;
  }

  /// Load share of each foot (left, right).
  Eigen::Vector2d weights(double t) const {
    switch (cfg_.motion) {
      case MotionKind::Standing: return {0.5, 0.5};
      case MotionKind::Hopping: {
        const double tau = t - cfg_.period_s * std::floor(t / cfg_.period_s);
        return tau < hop_.stance ? Eigen::Vector2d(0.5, 0.5) : Eigen::Vector2d::Zero();
      }
      case MotionKind::Walking: {
        const double beta = cfg_.stance_fraction;
        const double ramp = (beta - 0.5) * cfg_.period_s;  // double-support time
        Eigen::Vector2d w;
        for (int side = 0; side < 2; ++side) {
          const double psi = detail::wrap_2pi(omega_ * t + cfg_.phase + side * std::numbers::pi);
          const double lo = std::numbers::pi * (1.0 - beta), hi = std::numbers::pi * (1.0 + beta);
          w[side] = psi < lo || psi > hi ? 0.0
                                         : detail::raised_cosine((psi - lo) / omega_, ramp) *
                                               detail::raised_cosine((hi - psi) / omega_, ramp);
        }
        const double sum = w.sum();
        return sum > 1e-12 ? Eigen::Vector2d(w / sum) : Eigen::Vector2d(0.5, 0.5);
      }
    }
    return {0.5, 0.5};
  }

 private:
  ScenarioConfig cfg_;
  std::vector<std::vector<detail::ScriptTerm>> terms_;
  detail::HopProfile hop_;
  double leg_ = 0.0, omega_ = 0.0;
};

using ScriptFn = std::function<Eigen::Matrix<double, 3, Eigen::Dynamic>(double)>;
using WeightFn = std::function<Eigen::Vector2d(double)>;

/// Ground truth for an arbitrary script on `skel`: `script(t)` returns rows
/// (q, qd, qdd) and `weights(t)` the load share of each contact body (all
/// zero in flight).
inline GroundTruth synthesize_truth(const Skeleton& skel, int frames, double dt,
                                    const ScriptFn& script, const WeightFn& weights) {
  const int n = frames, dofs = skel.dofs();
  const auto& contacts = skel.contact_bodies();
  const int nc = static_cast<int>(contacts.size());
  require(nc == 2, "synthetic force assignment needs two contact bodies");
  const double mass = skel.total_mass();
  GroundTruth gt{skel, dt, 1.0, MatX(n, dofs), MatX(n, dofs), MatX(n, dofs), MatX::Zero(n, 6 * nc),
                 MatX(n, dofs), MatX(n, 3), MatX(n, 3)};
  for (int t = 0; t < n; ++t) {
    const auto s = script(t * dt);
    const VecX q = s.row(0).transpose(), qd = s.row(1).transpose(), qdd = s.row(2).transpose();
    const KinematicState ks = kinematic_state(skel, q);
    const VecX id = rnea(skel, ks, qd, qdd);
    const Vec6 root = id.head<6>();
    const Eigen::Vector2d w = weights(t * dt);
    VecX wrench = VecX::Zero(6 * nc);
    if (w.sum() > 0.0) {
      for (int c = 0; c < nc; ++c) {
        if (w[c] == 0.0) continue;
        const Mat6 g = contact_jacobian(skel, ks, contacts[c]).leftCols<6>().transpose();
        wrench.segment<6>(6 * c) = g.partialPivLu().solve(w[c] * root);
      }
    } else if (root.norm() > 1e-6 * mass * kGravity) {
      throw GenerationError("frame " + std::to_string(t) +
                            " needs external force but no foot is in stance");
    }
    VecX tau = id - contact_generalized_forces(skel, ks, wrench);
    tau.head<6>().setZero();
    gt.q.row(t) = q.transpose();
    gt.qd.row(t) = qd.transpose();
    gt.qdd.row(t) = qdd.transpose();
    gt.wrenches.row(t) = wrench.transpose();
    gt.tau.row(t) = tau.transpose();
    gt.com.row(t) = center_of_mass(skel, ks).transpose();
    Vec3 force = Vec3::Zero();
    for (int c = 0; c < nc; ++c) force += wrench.segment<3>(6 * c + 3);
    gt.com_acc.row(t) = (force / mass + skel.gravity()).transpose();
  }
  return gt;
}

/// Builds the trial and its exact ground truth.
inline SyntheticTrial generate(const ScenarioConfig& cfg) {
  validate_scenario(cfg);
  const Skeleton skel = scenario_skeleton(cfg);
  const MotionScript script(cfg, skel);
  const int n = static_cast<int>(std::lround(cfg.duration_s * cfg.rate_hz));
  require(n >= kMinTrialFrames, "scenario shorter than the minimum trial length");
  const auto& contacts = skel.contact_bodies();
  const int nc = static_cast<int>(contacts.size());
  const double dt = 1.0 / cfg.rate_hz;
  GroundTruth gt = synthesize_truth(
      skel, n, dt, [&](double t) { return script.eval(t); },
      [&](double t) { return script.weights(t); });
  gt.mass_scale = cfg.mass_kg / builtin_model(cfg.model).total_mass();

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> n01;
  Trial trial;
  trial.subject_id = cfg.subject_id;
  trial.skeleton = cfg.model;
  trial.subject.mass_kg = cfg.mass_kg;
  trial.subject.height_m = cfg.height_m;
  trial.dt = dt;
  trial.activity = cfg.motion == MotionKind::Walking   ? Activity::Walking
                   : cfg.motion == MotionKind::Hopping ? Activity::Jumping
                                                       : Activity::Standing;
  trial.treadmill = cfg.treadmill;
  for (const auto& m : skel.markers()) trial.marker_names.push_back(m.name);
  for (int c : contacts) trial.contact_names.push_back(skel.bodies()[c].name);
  trial.frames.resize(n);
  for (int t = 0; t < n; ++t) {
    Frame& f = trial.frames[t];
    const auto markers = virtual_markers(skel, Pose(gt.q.row(t).transpose()));
    for (const auto& m : markers) {
      Vec3 p = m;
      if (cfg.marker_noise_m > 0.0)
        for (int k = 0; k < 3; ++k) p[k] += cfg.marker_noise_m * n01(rng);
      f.markers.emplace_back(p);
    }
    f.wrenches = gt.wrenches.row(t).transpose();
    if (cfg.force_noise_n > 0.0)
      for (int c = 0; c < nc; ++c)
        for (int k = 0; k < 6; ++k)
          // moment channels get the force noise over a 5 cm lever
          f.wrenches[6 * c + k] += (k < 3 ? 0.05 : 1.0) * cfg.force_noise_n * n01(rng);
  }
  validate_trial(trial);
  return {std::move(trial), std::move(gt)};
}

// ---------------------------------------------------------------------------
// Hiding forces

struct HidePolicy {
  int every_kth_step = 3;
  int foot = 1;  // contact index: 0 left, 1 right
  int min_step_frames = 5;
  ContactThreshold threshold;
};

struct HiddenForces {
  std::vector<int> frames;  // frames moved into U, ascending
  MatX wrenches;  // their original wrench rows
  std::vector<std::pair<int, int>> steps;  // all detected steps [first, last]
  std::vector<int> hidden_steps;  // 1-based step numbers that were hidden
};

/// A step is a maximal run of frames with the foot loaded lasting at least
/// `min_step_frames`.
inline std::vector<std::pair<int, int>> detect_steps(const Trial& trial, int foot,
                                                     int min_frames,
                                                     const ContactThreshold& th = {}) {
  const double bw = trial.subject.body_weight();
  std::vector<std::pair<int, int>> steps;
  const int n = trial.frame_count();
  int t = 0;
  while (t < n) {
    auto loaded = [&](int k) {
      return trial.frames[k].force_observed && foot_loaded(trial.frames[k], bw, th)[foot];
    };
    if (!loaded(t)) {
      ++t;
      continue;
    }
    int e = t;
    while (e + 1 < n && loaded(e + 1)) ++e;
    if (e - t + 1 >= min_frames) steps.emplace_back(t, e);
    t = e + 1;
  }
  return steps;
}

inline HiddenForces hide_forces(Trial& trial, const HidePolicy& policy) {
  require(policy.every_kth_step >= 1, "k must be at least 1");
  require(trial.contact_count() == 2 && policy.foot >= 0 && policy.foot < 2,
          "hiding steps needs two contact bodies and a valid foot");
  for (const auto& f : trial.frames)
    require(f.force_observed, "hide_forces expects a fully observed trial");
  HiddenForces out;
  out.steps = detect_steps(trial, policy.foot, policy.min_step_frames, policy.threshold);
  for (std::size_t s = 0; s < out.steps.size(); ++s) {
    if ((s + 1) % policy.every_kth_step) continue;
    out.hidden_steps.push_back(static_cast<int>(s + 1));
    for (int t = out.steps[s].first; t <= out.steps[s].second; ++t) out.frames.push_back(t);
  }
  out.wrenches.resize(static_cast<Eigen::Index>(out.frames.size()), 6 * trial.contact_count());
  for (std::size_t i = 0; i < out.frames.size(); ++i) {
    Frame& f = trial.frames[out.frames[i]];
    out.wrenches.row(i) = f.wrenches.transpose();
    f.wrenches.setZero();
    f.force_observed = false;
  }
  return out;
}

// ---------------------------------------------------------------------------
// .truth companion file

namespace detail {

inline std::vector<std::string> truth_columns(const Skeleton& skel) {
  std::vector<std::string> cols{"time"};
  for (const char* block : {"q", "qd", "qdd", "tau"})
    for (int d = 0; d < skel.dofs(); ++d) cols.push_back(std::string(block) + std::to_string(d));
  for (int c : skel.contact_bodies())
    for (const char* s : kWrenchSuffix) cols.push_back(skel.bodies()[c].name + "_" + s);
  for (const char* s : {"com_x", "com_y", "com_z", "comacc_x", "comacc_y", "comacc_z"})
    cols.push_back(s);
  return cols;
}

}  // namespace detail

inline void write_truth(const GroundTruth& gt, std::ostream& out) {
  const Skeleton& skel = gt.skeleton;
  const int n = static_cast<int>(gt.q.rows());
  out << "# gaitdyn-truth 1\n";
  out << "model: " << skel.name() << "\n";
  out << "mass_scale: " << format_double(gt.mass_scale) << "\n";
  out << "scales:";
  for (const auto& s : skel.scales())
    out << " " << format_double(s.x()) << "," << format_double(s.y()) << "," << format_double(s.z());
  out << "\n";
  out << "dt: " << format_double(gt.dt) << "\n";
  out << "frames: " << n << "\n";
  out << "---\n";
  out << detail::join(detail::truth_columns(skel), ',') << "\n";
  for (int t = 0; t < n; ++t) {
    std::string row = format_double(t * gt.dt);
    auto put = [&](const auto& m) {
      for (Eigen::Index k = 0; k < m.cols(); ++k) row += "," + format_double(m(t, k));
    };
    put(gt.q);
    put(gt.qd);
    put(gt.qdd);
    put(gt.tau);
    put(gt.wrenches);
    put(gt.com);
    put(gt.com_acc);
    out << row << "\n";
  }
}

inline GroundTruth read_truth(std::istream& in) {
  std::string line;
  std::size_t ln = 0;
  auto next = [&]() {
    if (!std::getline(in, line)) throw ParseError("unexpected end of file", ln + 1);
    ++ln;
    if (!line.empty() && line.back() == '\r') line.pop_back();
  };
  auto value = [&](const std::string& key) {
    next();
    if (line.rfind(key + ":", 0) != 0) throw ParseError("expected '" + key + ":'", ln);
    std::string v = line.substr(key.size() + 1);
    if (!v.empty() && v[0] == ' ') v.erase(0, 1);
    return v;
  };
  next();
  if (line != "# gaitdyn-truth 1") throw ParseError("missing '# gaitdyn-truth 1' header", ln);
  Skeleton nominal = [&] {
    const std::string model = value("model");
    try {
      return builtin_model(model);
    } catch (const InputError& e) {
      throw ParseError(e.what(), ln);
    }
  }();
  const double mass_scale = parse_double(value("mass_scale"), ln);
  std::vector<Vec3> scales;
  const std::string scale_text = value("scales");
  for (auto tok : split_view(scale_text, ' ')) {
    auto xyz = split_view(tok, ',');
    if (xyz.size() != 3) throw ParseError("scales must be x,y,z triplets", ln);
    scales.emplace_back(parse_double(xyz[0], ln), parse_double(xyz[1], ln), parse_double(xyz[2], ln));
  }
  const double dt = parse_double(value("dt"), ln);
  const int frames = static_cast<int>(parse_double(value("frames"), ln));
  next();
  if (line != "---") throw ParseError("expected '---'", ln);
  GroundTruth gt{[&] {
                   try {
                     return nominal.with_scales(scales).with_mass_scale(mass_scale);
                   } catch (const InputError& e) {
                     throw ParseError(e.what(), ln);
                   }
                 }(),
                 dt, mass_scale, MatX(frames, nominal.dofs()), MatX(frames, nominal.dofs()),
                 MatX(frames, nominal.dofs()), MatX(frames, 6 * nominal.contact_bodies().size()),
                 MatX(frames, nominal.dofs()), MatX(frames, 3), MatX(frames, 3)};
  const auto cols = detail::truth_columns(gt.skeleton);
  next();
  if (line != detail::join(cols, ',')) throw ParseError("column header mismatch", ln);
  for (int t = 0; t < frames; ++t) {
    next();
    const auto cells = split_view(line, ',');
    if (cells.size() != cols.size()) throw ParseError("wrong number of cells", ln);
    std::size_t c = 1;
    auto get = [&](MatX& m) {
      for (Eigen::Index k = 0; k < m.cols(); ++k) m(t, k) = parse_double(cells[c++], ln);
    };
    get(gt.q);
    get(gt.qd);
    get(gt.qdd);
    get(gt.tau);
    get(gt.wrenches);
    get(gt.com);
    get(gt.com_acc);
  }
  return gt;
}

inline void save_truth(const GroundTruth& gt, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write truth file " + path);
  write_truth(gt, out);
}

inline GroundTruth load_truth(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open truth file " + path);
  return read_truth(in);
}

}  // namespace gaitdyn
