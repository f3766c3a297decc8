// Reference predictors for the force-from-motion task: the F = ma analytical
// baseline and a two-layer MLP trained with mini-batch RMSprop, plus the
// completion step that turns predicted wrenches into CoM accelerations and
// joint torques.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "gaitdyn/common.hpp"
#include "gaitdyn/comfit.hpp"
#include "gaitdyn/dynfit.hpp"
#include "gaitdyn/kinefit.hpp"
#include "gaitdyn/signal.hpp"
#include "gaitdyn/skeleton.hpp"
#include "gaitdyn/trial.hpp"

namespace gaitdyn {

/// Wrenches, CoM acceleration and torques of one trial, from a predictor or
/// from ground truth. Wrench rows stack (moment; force) per contact.
struct Prediction {
  double dt = 0.0;
  double cutoff_hz = kStandardCutoffHz;
  MatX wrenches;   // T x 6C
  MatX com_acc;    // T x 3
  MatX qdd;        // T x N
  MatX tau;        // T x N, root entries zero
  MatX residual_angular;  // T x 3, root moment no wrench explains
};

/// Filtered derivatives, then root-translation accelerations shifted so the
/// CoM acceleration equals sum(f)/m + g, then inverse dynamics. The root
/// translations are world-aligned, so shifting their accelerations by d
/// moves every body's acceleration, and the linear root residual, by m d.
inline Prediction complete_prediction(const Skeleton& skel, const MatX& poses, double dt,
                                      const MatX& wrenches, double cutoff_hz = kStandardCutoffHz,
                                      int order = kStandardFilterOrder) {
  if (!skel.floating_base()) throw InputError("completion needs a free root joint");
  const int n = static_cast<int>(poses.rows());
  const int c = static_cast<int>(skel.contact_bodies().size());
  if (wrenches.rows() != n || wrenches.cols() != 6 * c)
    throw InputError("predicted wrenches must be T x " + std::to_string(6 * c));
  const PoseDerivatives d = pose_derivatives(poses, dt, cutoff_hz, order);
  const double mass = skel.total_mass();
  const Vec3 g = skel.gravity();
  Prediction p;
  p.dt = dt;
  p.cutoff_hz = cutoff_hz;
  p.wrenches = wrenches;
  p.qdd = d.qdd;
  p.com_acc.resize(n, 3);
  p.tau.resize(n, skel.dofs());
  p.residual_angular.resize(n, 3);
  for (int t = 0; t < n; ++t) {
    const KinematicState ks = kinematic_state(skel, Pose(poses.row(t).transpose()));
    const VecX w = wrenches.row(t).transpose();
    const VecX qd = d.qd.row(t).transpose();
    VecX qdd = d.qdd.row(t).transpose();
    const Vec3 lin = inverse_dynamics(skel, ks, qd, qdd, w).residual.tail<3>();
    qdd.segment<3>(3) -= lin / mass;
    Vec3 total = Vec3::Zero();
    for (int k = 0; k < c; ++k) total += w.segment<3>(6 * k + 3);
    p.com_acc.row(t) = (total / mass + g).transpose();
    p.qdd.row(t) = qdd.transpose();
    const InverseDynamics id = inverse_dynamics(skel, ks, qd, qdd, w);
    p.tau.row(t) = id.tau.transpose();
    p.residual_angular.row(t) = id.residual.head<3>().transpose();
  }
  return p;
}

// ---------------------------------------------------------------------------
// Analytical baseline

/// F = m (zdd - g) with zdd from filtered second differences of the
/// kinematic CoM; split evenly in double support, all on the stance foot in
/// single support, zero in flight; moments zero. Two contacts, left first.
inline MatX analytical_wrenches(const Skeleton& skel, const MatX& poses, double dt,
                                const std::vector<ContactPhase>& phases, double mass,
                                double cutoff_hz = kStandardCutoffHz,
                                int order = kStandardFilterOrder) {
  if (skel.contact_bodies().size() != 2)
    throw InputError("analytical baseline expects two contact bodies");
  if (static_cast<Eigen::Index>(phases.size()) != poses.rows())
    throw InputError("one contact phase per frame required");
  const MatX zdd =
      butterworth_lowpass(central_difference2(TimeSeries{dt, com_series(skel, poses)}), cutoff_hz, order)
          .samples;
  const Vec3 g = skel.gravity();
  MatX w = MatX::Zero(poses.rows(), 12);
  for (int t = 0; t < poses.rows(); ++t) {
    const Vec3 f = mass * (zdd.row(t).transpose() - g);
    switch (phases[t]) {
      case ContactPhase::Double:
        w.block<1, 3>(t, 3) = 0.5 * f.transpose();
        w.block<1, 3>(t, 9) = 0.5 * f.transpose();
        break;
      case ContactPhase::SingleLeft: w.block<1, 3>(t, 3) = f.transpose(); break;
      case ContactPhase::SingleRight: w.block<1, 3>(t, 9) = f.transpose(); break;
      case ContactPhase::Flight: break;
    }
  }
  return w;
}

inline std::vector<ContactPhase> contact_phases(const Trial& trial) {
  std::vector<ContactPhase> p;
  for (const auto& f : trial.frames) p.push_back(classify_contact(f, trial.subject.body_weight()));
  return p;
}

inline Prediction analytical_predict(const Skeleton& skel, const MatX& poses, double dt,
                                     const std::vector<ContactPhase>& phases,
                                     double cutoff_hz = kStandardCutoffHz) {
  const MatX w = analytical_wrenches(skel, poses, dt, phases, skel.total_mass(), cutoff_hz);
  return complete_prediction(skel, poses, dt, w, cutoff_hz);
}

// ---------------------------------------------------------------------------
// Features

struct FeatureConfig {
  int history = 50;
  int stride = 5;
  double cutoff_hz = kStandardCutoffHz;
  int filter_order = kStandardFilterOrder;
};

/// q, filtered qdd, and each non-root joint center in the root body frame.
inline int frame_feature_dim(const Skeleton& skel) {
  return 2 * skel.dofs() + 3 * (skel.body_count() - 1);
}

inline MatX frame_features(const Skeleton& skel, const MatX& poses, double dt,
                           const FeatureConfig& cfg = {}) {
  const int n = static_cast<int>(poses.rows());
  const int nq = skel.dofs();
  const PoseDerivatives d = pose_derivatives(poses, dt, cfg.cutoff_hz, cfg.filter_order);
  MatX f(n, frame_feature_dim(skel));
  for (int t = 0; t < n; ++t) {
    const KinematicState ks = kinematic_state(skel, Pose(poses.row(t).transpose()));
    f.block(t, 0, 1, nq) = poses.row(t);
    f.block(t, nq, 1, nq) = d.qdd.row(t);
    const int root = skel.body_link(0);
    const Mat3 rt = ks.rotation[root].transpose();
    for (int b = 1; b < skel.body_count(); ++b)
      f.block<1, 3>(t, 2 * nq + 3 * (b - 1)) =
          (rt * (joint_center(skel, ks, b) - ks.origin[root])).transpose();
  }
  return f;
}

/// Frames t, t - stride, ..., clamped at 0; never later than t.
inline std::vector<int> window_frames(int t, const FeatureConfig& cfg) {
  std::vector<int> w;
  for (int k = 0; k < cfg.history / cfg.stride; ++k) w.push_back(std::max(0, t - k * cfg.stride));
  return w;
}

inline MatX window_features(const MatX& per_frame, const FeatureConfig& cfg) {
  require(cfg.stride > 0 && cfg.history >= cfg.stride, "history must be at least one stride");
  const int slots = cfg.history / cfg.stride;
  const int d = static_cast<int>(per_frame.cols());
  MatX x(per_frame.rows(), static_cast<Eigen::Index>(slots) * d);
  for (int t = 0; t < per_frame.rows(); ++t) {
    const auto frames = window_frames(t, cfg);
    for (int k = 0; k < slots; ++k) x.block(t, k * d, 1, d) = per_frame.row(frames[k]);
  }
  return x;
}

struct Dataset {
  MatX x;  // samples x inputs
  MatX y;  // samples x outputs (mass-normalized wrenches)
};

/// Appends every frame with observed, valid forces. Targets are wrenches
/// divided by `mass`.
inline void append_samples(Dataset& ds, const Skeleton& skel, const Trial& trial, const MatX& poses,
                           double mass, const FeatureConfig& cfg = {}) {
  const MatX x = window_features(frame_features(skel, poses, trial.dt, cfg), cfg);
  std::vector<int> keep;
  for (int t = 0; t < trial.frame_count(); ++t)
    if (trial.frames[t].force_observed && trial.frames[t].grf_valid) keep.push_back(t);
  const Eigen::Index old = ds.x.rows();
  const Eigen::Index out = trial.frames.empty() ? 0 : trial.frames[0].wrenches.size();
  if (old == 0) {
    ds.x.resize(0, x.cols());
    ds.y.resize(0, out);
  }
  require(ds.x.cols() == x.cols() && ds.y.cols() == out, "dataset width mismatch");
  ds.x.conservativeResize(old + static_cast<Eigen::Index>(keep.size()), Eigen::NoChange);
  ds.y.conservativeResize(old + static_cast<Eigen::Index>(keep.size()), Eigen::NoChange);
  for (std::size_t i = 0; i < keep.size(); ++i) {
    ds.x.row(old + static_cast<Eigen::Index>(i)) = x.row(keep[i]);
    ds.y.row(old + static_cast<Eigen::Index>(i)) = trial.frames[keep[i]].wrenches.transpose() / mass;
  }
}

// ---------------------------------------------------------------------------
// MLP

struct MlpHyper {
  int hidden = 512;
  double lr = 1e-4;
  double decay = 0.9;
  double eps = 1e-8;
  int batch = 32;
  int epochs = 10;
  std::uint64_t seed = 7;
};

struct MlpModel {
  FeatureConfig features;
  std::uint64_t seed = 0;
  MatX w1;  // hidden x in
  VecX b1;
  MatX w2;  // out x hidden
  VecX b2;
  VecX x_mean, x_std, y_mean, y_std;

  int inputs() const { return static_cast<int>(w1.cols()); }
  int hidden() const { return static_cast<int>(w1.rows()); }
  int outputs() const { return static_cast<int>(w2.rows()); }
};

struct MlpGradients {
  MatX w1;
  VecX b1;
  MatX w2;
  VecX b2;
};

namespace detail {

inline MatX sigmoid(const MatX& z) { return (1.0 + (-z.array()).exp()).inverse().matrix(); }

/// Forward pass on normalized inputs (rows are samples).
inline MatX mlp_forward(const MlpModel& m, const MatX& x, MatX* hidden = nullptr) {
  MatX h = sigmoid((x * m.w1.transpose()).rowwise() + m.b1.transpose());
  MatX y = (h * m.w2.transpose()).rowwise() + m.b2.transpose();
  if (hidden) *hidden = std::move(h);
  return y;
}

inline double mse(const MatX& y, const MatX& target) {
  return (y - target).squaredNorm() / static_cast<double>(y.size());
}

inline VecX column_std(const MatX& a, const VecX& mean) {
  VecX s(a.cols());
  for (int j = 0; j < a.cols(); ++j) {
    const double v = (a.col(j).array() - mean[j]).square().sum() / std::max<Eigen::Index>(a.rows(), 1);
    s[j] = v > 1e-24 ? std::sqrt(v) : 1.0;
  }
  return s;
}

inline MatX normalize(const MatX& a, const VecX& mean, const VecX& std) {
  return ((a.rowwise() - mean.transpose()).array().rowwise() / std.transpose().array()).matrix();
}

}  // namespace detail

/// Mean squared error on normalized inputs/targets and its gradients.
inline double mlp_loss_and_gradients(const MlpModel& m, const MatX& x, const MatX& target,
                                     MlpGradients* grad) {
  MatX h;
  const MatX y = detail::mlp_forward(m, x, &h);
  const double loss = detail::mse(y, target);
  if (grad) {
    const MatX dy = 2.0 * (y - target) / static_cast<double>(y.size());
    grad->w2 = dy.transpose() * h;
    grad->b2 = dy.colwise().sum().transpose();
    const MatX dz = ((dy * m.w2).array() * h.array() * (1.0 - h.array())).matrix();
    grad->w1 = dz.transpose() * x;
    grad->b1 = dz.colwise().sum().transpose();
  }
  return loss;
}

/// Uniform +-1/sqrt(fan_in) initialization for weights and biases.
inline MlpModel init_mlp(int inputs, int hidden, int outputs, std::uint64_t seed) {
  MlpModel m;
  m.seed = seed;
  std::mt19937_64 rng(seed);
  auto fill = [&](auto& a, int fan_in) {
    std::uniform_real_distribution<double> u(-1.0 / std::sqrt(fan_in), 1.0 / std::sqrt(fan_in));
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = u(rng);
  };
  m.w1.resize(hidden, inputs);
  m.b1.resize(hidden);
  m.w2.resize(outputs, hidden);
  m.b2.resize(outputs);
  fill(m.w1, inputs);
  fill(m.b1, inputs);
  fill(m.w2, hidden);
  fill(m.b2, hidden);
  m.x_mean = VecX::Zero(inputs);
  m.x_std = VecX::Ones(inputs);
  m.y_mean = VecX::Zero(outputs);
  m.y_std = VecX::Ones(outputs);
  return m;
}

struct TrainResult {
  MlpModel model;
  std::vector<double> loss_history;  // full-set normalized MSE: before training, then per epoch
};

/// Z-scores inputs and targets with this dataset's statistics, then runs
/// mini-batch RMSprop on the mean squared error.
inline TrainResult train_mlp(const Dataset& ds, const MlpHyper& hyper = {},
                             const FeatureConfig& features = {}) {
  if (ds.x.rows() == 0) throw InputError("training set is empty");
  if (ds.x.rows() != ds.y.rows()) throw InputError("inputs and targets differ in length");
  if (!ds.x.allFinite() || !ds.y.allFinite()) throw InputError("training data has non-finite values");
  require(hyper.batch > 0 && hyper.epochs >= 0 && hyper.hidden > 0, "bad MLP hyperparameters");
  TrainResult r;
  MlpModel& m = r.model;
  m = init_mlp(static_cast<int>(ds.x.cols()), hyper.hidden, static_cast<int>(ds.y.cols()), hyper.seed);
  m.features = features;
  m.x_mean = ds.x.colwise().mean().transpose();
  m.x_std = detail::column_std(ds.x, m.x_mean);
  m.y_mean = ds.y.colwise().mean().transpose();
  m.y_std = detail::column_std(ds.y, m.y_mean);
  const MatX x = detail::normalize(ds.x, m.x_mean, m.x_std);
  const MatX y = detail::normalize(ds.y, m.y_mean, m.y_std);

  MlpGradients acc{MatX::Zero(m.w1.rows(), m.w1.cols()), VecX::Zero(m.b1.size()),
                   MatX::Zero(m.w2.rows(), m.w2.cols()), VecX::Zero(m.b2.size())};
  auto rms_update = [&](auto& param, auto& cache, const auto& g) {
    cache.array() = hyper.decay * cache.array() + (1.0 - hyper.decay) * g.array().square();
    param.array() -= hyper.lr * g.array() / (cache.array().sqrt() + hyper.eps);
  };
  r.loss_history.push_back(mlp_loss_and_gradients(m, x, y, nullptr));
  std::mt19937_64 rng(hyper.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<int> order(static_cast<std::size_t>(x.rows()));
  std::iota(order.begin(), order.end(), 0);
  MlpGradients g;
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += hyper.batch) {
      const std::size_t end = std::min(order.size(), start + hyper.batch);
      MatX bx(static_cast<Eigen::Index>(end - start), x.cols());
      MatX by(static_cast<Eigen::Index>(end - start), y.cols());
      for (std::size_t i = start; i < end; ++i) {
        bx.row(static_cast<Eigen::Index>(i - start)) = x.row(order[i]);
        by.row(static_cast<Eigen::Index>(i - start)) = y.row(order[i]);
      }
      const double loss = mlp_loss_and_gradients(m, bx, by, &g);
      if (!std::isfinite(loss))
        throw DiagnosticError("MLP loss became non-finite in epoch " + std::to_string(epoch + 1) +
                              " at sample " + std::to_string(start) +
                              "; learning rate too high or inputs badly normalized");
      rms_update(m.w1, acc.w1, g.w1);
      rms_update(m.b1, acc.b1, g.b1);
      rms_update(m.w2, acc.w2, g.w2);
      rms_update(m.b2, acc.b2, g.b2);
    }
    r.loss_history.push_back(mlp_loss_and_gradients(m, x, y, nullptr));
  }
  return r;
}

/// Raw (unnormalized) inputs in, mass-normalized wrenches out.
inline MatX mlp_predict(const MlpModel& m, const MatX& raw_inputs) {
  if (raw_inputs.cols() != m.inputs())
    throw InputError("model expects " + std::to_string(m.inputs()) + " inputs, got " +
                     std::to_string(raw_inputs.cols()));
  const MatX y = detail::mlp_forward(m, detail::normalize(raw_inputs, m.x_mean, m.x_std));
  return ((y.array().rowwise() * m.y_std.transpose().array()).rowwise() +
          m.y_mean.transpose().array())
      .matrix();
}

/// Predicted wrenches scaled by the skeleton's mass, then completed.
inline Prediction mlp_predict_and_complete(const MlpModel& m, const Skeleton& skel,
                                           const MatX& poses, double dt) {
  const MatX x = window_features(frame_features(skel, poses, dt, m.features), m.features);
  const MatX w = mlp_predict(m, x) * skel.total_mass();
  return complete_prediction(skel, poses, dt, w, m.features.cutoff_hz, m.features.filter_order);
}

// ---------------------------------------------------------------------------
// Model file: "# gaitdyn-mlp 1" then one "key values..." line per field.

inline void write_mlp(const MlpModel& m, std::ostream& os) {
  auto row = [&](const char* key, const auto& a) {
    os << key;
    for (Eigen::Index i = 0; i < a.size(); ++i) os << ' ' << format_double(a.data()[i]);
    os << '\n';
  };
  os << "# gaitdyn-mlp 1\n";
  os << "inputs " << m.inputs() << "\nhidden " << m.hidden() << "\noutputs " << m.outputs() << '\n';
  os << "activation sigmoid\nseed " << m.seed << '\n';
  os << "history " << m.features.history << "\nstride " << m.features.stride << '\n';
  os << "cutoff_hz " << format_double(m.features.cutoff_hz) << "\nfilter_order "
     << m.features.filter_order << '\n';
  row("x_mean", m.x_mean);
  row("x_std", m.x_std);
  row("y_mean", m.y_mean);
  row("y_std", m.y_std);
  // row-major weights
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> w1 = m.w1, w2 = m.w2;
  row("w1", w1);
  row("b1", m.b1);
  row("w2", w2);
  row("b2", m.b2);
}

inline MlpModel read_mlp(std::istream& is) {
  std::string line;
  int lineno = 0;
  auto next = [&](const std::string& key) {
    if (!std::getline(is, line)) throw ParseError("missing '" + key + "' line", lineno + 1);
    ++lineno;
    const auto sp = line.find(' ');
    if (line.substr(0, sp) != key)
      throw ParseError("expected '" + key + "', found '" + line.substr(0, sp) + "'", lineno);
    return sp == std::string::npos ? std::string() : line.substr(sp + 1);
  };
  auto integer = [&](const std::string& key) {
    const std::string v = next(key);
    try {
      std::size_t used = 0;
      const long long x = std::stoll(v, &used);
      if (used != v.size() || x < 0) throw std::invalid_argument(v);
      return x;
    } catch (const std::exception&) {
      throw ParseError("bad integer for '" + key + "'", lineno);
    }
  };
  auto values = [&](const std::string& key, Eigen::Index count) {
    const std::string v = next(key);
    VecX out(count);
    Eigen::Index k = 0;
    for (auto tok : split_view(v, ' ')) {
      if (k >= count) throw ParseError("too many values for '" + key + "'", lineno);
      out[k++] = parse_double(tok, lineno);
    }
    if (k != count) throw ParseError("too few values for '" + key + "'", lineno);
    return out;
  };
  if (!std::getline(is, line) || line != "# gaitdyn-mlp 1")
    throw ParseError("not a version 1 gaitdyn-mlp file", 1);
  ++lineno;
  const auto in = integer("inputs"), hid = integer("hidden"), out = integer("outputs");
  if (in == 0 || hid == 0 || out == 0) throw ParseError("zero layer size", lineno);
  if (next("activation") != "sigmoid") throw ParseError("unsupported activation", lineno);
  MlpModel m;
  m.seed = static_cast<std::uint64_t>(integer("seed"));
  m.features.history = static_cast<int>(integer("history"));
  m.features.stride = static_cast<int>(integer("stride"));
  m.features.cutoff_hz = parse_double(next("cutoff_hz"), lineno);
  m.features.filter_order = static_cast<int>(integer("filter_order"));
  m.x_mean = values("x_mean", in);
  m.x_std = values("x_std", in);
  m.y_mean = values("y_mean", out);
  m.y_std = values("y_std", out);
  const VecX w1 = values("w1", in * hid);
  m.b1 = values("b1", hid);
  const VecX w2 = values("w2", hid * out);
  m.b2 = values("b2", out);
  m.w1 = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      w1.data(), hid, in);
  m.w2 = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      w2.data(), out, hid);
  if (std::getline(is, line) && !line.empty())
    throw ParseError("trailing data after model", lineno + 1);
  return m;
}

inline void save_mlp(const MlpModel& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write model file " + path);
  write_mlp(m, out);
}

inline MlpModel load_mlp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open model file " + path);
  return read_mlp(in);
}

// ---------------------------------------------------------------------------
// Prediction file: "# gaitdyn-pred 1", key lines, "---", then a CSV table.

struct PredictionFile {
  Prediction prediction;
  double mass_kg = 0.0;
  std::string activity = "other";
  std::vector<int> scored;  // frames to score; empty means all
};

namespace detail {

inline std::vector<std::string> prediction_columns(int contacts, int dofs) {
  std::vector<std::string> cols{"time", "scored"};
  for (int c = 0; c < contacts; ++c)
    for (const char* s : kWrenchSuffix) cols.push_back("c" + std::to_string(c) + "_" + s);
  for (const char* s : {"comacc_x", "comacc_y", "comacc_z"}) cols.push_back(s);
  for (const char* block : {"qdd", "tau"})
    for (int d = 0; d < dofs; ++d) cols.push_back(std::string(block) + std::to_string(d));
  for (const char* s : {"resang_x", "resang_y", "resang_z"}) cols.push_back(s);
  return cols;
}

}  // namespace detail

inline void write_prediction(const PredictionFile& f, std::ostream& out) {
  const Prediction& p = f.prediction;
  const int n = static_cast<int>(p.wrenches.rows());
  const int contacts = static_cast<int>(p.wrenches.cols() / 6);
  const int dofs = static_cast<int>(p.tau.cols());
  std::vector<char> scored(n, f.scored.empty() ? 1 : 0);
  for (int t : f.scored) {
    if (t < 0 || t >= n) throw InputError("scored frame out of range");
    scored[t] = 1;
  }
  out << "# gaitdyn-pred 1\n";
  out << "dt: " << format_double(p.dt) << "\ncutoff_hz: " << format_double(p.cutoff_hz) << "\n";
  out << "mass_kg: " << format_double(f.mass_kg) << "\nactivity: " << f.activity << "\n";
  out << "frames: " << n << "\ncontacts: " << contacts << "\ndofs: " << dofs << "\n---\n";
  out << detail::join(detail::prediction_columns(contacts, dofs), ',') << "\n";
  for (int t = 0; t < n; ++t) {
    std::string row = format_double(t * p.dt) + "," + (scored[t] ? "1" : "0");
    for (const MatX* m : {&p.wrenches, &p.com_acc, &p.qdd, &p.tau, &p.residual_angular})
      for (Eigen::Index k = 0; k < m->cols(); ++k) row += "," + format_double((*m)(t, k));
    out << row << "\n";
  }
}

inline PredictionFile read_prediction(std::istream& in) {
  std::string line;
  std::size_t ln = 0;
  auto next = [&]() {
    if (!std::getline(in, line)) throw ParseError("unexpected end of file", ln + 1);
    ++ln;
    if (!line.empty() && line.back() == '\r') line.pop_back();
  };
  auto value = [&](const std::string& key) {
    next();
    if (line.rfind(key + ": ", 0) != 0) throw ParseError("expected '" + key + ":'", ln);
    return line.substr(key.size() + 2);
  };
  auto count = [&](const std::string& key) {
    const double v = parse_double(value(key), ln);
    if (v < 0 || v != std::floor(v) || v > 1e8) throw ParseError("bad count for '" + key + "'", ln);
    return static_cast<int>(v);
  };
  next();
  if (line != "# gaitdyn-pred 1") throw ParseError("missing '# gaitdyn-pred 1' header", ln);
  PredictionFile f;
  Prediction& p = f.prediction;
  p.dt = parse_double(value("dt"), ln);
  p.cutoff_hz = parse_double(value("cutoff_hz"), ln);
  f.mass_kg = parse_double(value("mass_kg"), ln);
  f.activity = value("activity");
  const int n = count("frames"), contacts = count("contacts"), dofs = count("dofs");
  if (!(p.dt > 0.0) || !(f.mass_kg > 0.0)) throw ParseError("dt and mass must be positive", ln);
  next();
  if (line != "---") throw ParseError("expected '---'", ln);
  next();
  const auto cols = detail::prediction_columns(contacts, dofs);
  if (line != detail::join(cols, ',')) throw ParseError("column header mismatch", ln);
  p.wrenches.resize(n, 6 * contacts);
  p.com_acc.resize(n, 3);
  p.qdd.resize(n, dofs);
  p.tau.resize(n, dofs);
  p.residual_angular.resize(n, 3);
  bool all = true;
  for (int t = 0; t < n; ++t) {
    next();
    const auto cells = split_view(line, ',');
    if (cells.size() != cols.size()) throw ParseError("wrong number of cells", ln);
    if (cells[1] == "1")
      f.scored.push_back(t);
    else if (cells[1] == "0")
      all = false;
    else
      throw ParseError("scored must be 0 or 1", ln);
    std::size_t c = 2;
    for (MatX* m : {&p.wrenches, &p.com_acc, &p.qdd, &p.tau, &p.residual_angular})
      for (Eigen::Index k = 0; k < m->cols(); ++k) (*m)(t, k) = parse_double(cells[c++], ln);
  }
  if (all) f.scored.clear();
  if (std::getline(in, line) && !line.empty()) throw ParseError("trailing data", ln + 1);
  return f;
}

inline void save_prediction(const PredictionFile& f, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write prediction file " + path);
  write_prediction(f, out);
}

inline PredictionFile load_prediction(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open prediction file " + path);
  return read_prediction(in);
}

}  // namespace gaitdyn
