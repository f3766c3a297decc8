// Benchmark metrics, the filter-cutoff sweep and the hidden-step ablation.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <map>
#include <random>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "gaitdyn/baselines.hpp"
#include "gaitdyn/comfit.hpp"
#include "gaitdyn/common.hpp"
#include "gaitdyn/dynfit.hpp"
#include "gaitdyn/kinefit.hpp"
#include "gaitdyn/signal.hpp"
#include "gaitdyn/synthgen.hpp"
#include "gaitdyn/trial.hpp"

namespace gaitdyn {

// ---------------------------------------------------------------------------
// Metrics

/// Running sums behind the four metrics. Moments, forces and torques are
/// divided by the subject mass before they are added, so pooling trials of
/// different subjects gives per-kg averages over all frames.
struct MetricSums {
  double com = 0.0;
  double grm = 0.0;
  double grf = 0.0;
  double torque = 0.0;
  long frames = 0;
  long torque_entries = 0;

  MetricSums& operator+=(const MetricSums& o) {
    com += o.com;
    grm += o.grm;
    grf += o.grf;
    torque += o.torque;
    frames += o.frames;
    torque_entries += o.torque_entries;
    return *this;
  }
};

struct MetricValues {
  double com_acc_err = 0.0;  // m/s^2
  double grm_err = 0.0;      // N m / kg
  double grf_err = 0.0;      // N / kg
  double torque_err = 0.0;   // N m / kg
  long frames = 0;
};

inline MetricValues metric_values(const MetricSums& s) {
  MetricValues v;
  v.frames = s.frames;
  if (s.frames > 0) {
    v.com_acc_err = s.com / s.frames;
    v.grm_err = s.grm / s.frames;
    v.grf_err = s.grf / s.frames;
  }
  if (s.torque_entries > 0) v.torque_err = s.torque / s.torque_entries;
  return v;
}

struct EvalReport {
  MetricValues all;
  std::map<std::string, MetricValues> per_activity;
  double cutoff_hz = kStandardCutoffHz;
};

/// Per-activity metric sums. Merging is plain addition, so any grouping or
/// order of partial accumulators gives the same report up to rounding.
class EvalAccumulator {
 public:
  explicit EvalAccumulator(double cutoff_hz = kStandardCutoffHz) : cutoff_hz_(cutoff_hz) {}

  /// `frames` selects the scored frames; empty means all. Torque entries
  /// are the non-root joint coordinates.
  void add(const Prediction& pred, const Prediction& truth, double mass_kg,
           const std::string& activity = "other", const std::vector<int>& frames = {},
           int root_dofs = 6) {
    if (pred.wrenches.rows() != truth.wrenches.rows() || pred.wrenches.cols() != truth.wrenches.cols() ||
        pred.com_acc.rows() != truth.com_acc.rows() || pred.tau.rows() != truth.tau.rows() ||
        pred.tau.cols() != truth.tau.cols() || pred.com_acc.rows() != pred.wrenches.rows() ||
        pred.tau.rows() != pred.wrenches.rows())
      throw InputError("prediction and ground truth differ in length or width");
    if (pred.dt != truth.dt) throw InputError("prediction and ground truth differ in dt");
    if (pred.cutoff_hz != truth.cutoff_hz)
      throw InputError("prediction filtered at " + format_double(pred.cutoff_hz) +
                       " Hz but ground truth at " + format_double(truth.cutoff_hz) + " Hz");
    if (pred.cutoff_hz != cutoff_hz_)
      throw InputError("series filtered at " + format_double(pred.cutoff_hz) +
                       " Hz added to a " + format_double(cutoff_hz_) + " Hz report");
    if (!(mass_kg > 0.0)) throw InputError("subject mass must be positive");
    if (pred.wrenches.cols() % 6 != 0) throw InputError("wrench width must be a multiple of 6");
    const int n = static_cast<int>(pred.wrenches.rows());
    std::vector<int> all;
    if (frames.empty()) {
      all.resize(n);
      for (int t = 0; t < n; ++t) all[t] = t;
    }
    const std::vector<int>& use = frames.empty() ? all : frames;
    const int contacts = static_cast<int>(pred.wrenches.cols() / 6);
    const int joints = static_cast<int>(pred.tau.cols()) - root_dofs;
    MetricSums s;
    VecX dm(3 * contacts), df(3 * contacts);
    for (int t : use) {
      if (t < 0 || t >= n) throw InputError("scored frame " + std::to_string(t) + " out of range");
      const VecX dw = (pred.wrenches.row(t) - truth.wrenches.row(t)).transpose();
      for (int c = 0; c < contacts; ++c) {
        dm.segment<3>(3 * c) = dw.segment<3>(6 * c);
        df.segment<3>(3 * c) = dw.segment<3>(6 * c + 3);
      }
      s.com += (pred.com_acc.row(t) - truth.com_acc.row(t)).norm();
      s.grm += dm.norm() / mass_kg;
      s.grf += df.norm() / mass_kg;
      if (joints > 0)
        s.torque += (pred.tau.row(t).tail(joints) - truth.tau.row(t).tail(joints)).cwiseAbs().sum() /
                    mass_kg;
      s.frames += 1;
      s.torque_entries += std::max(joints, 0);
    }
    if (!std::isfinite(s.com + s.grm + s.grf + s.torque))
      throw InputError("non-finite values on scored frames");
    sums_[activity] += s;
  }

  void merge(const EvalAccumulator& o) {
    if (o.cutoff_hz_ != cutoff_hz_) throw InputError("cannot merge reports with different cutoffs");
    for (const auto& [k, v] : o.sums_) sums_[k] += v;
  }

  MetricSums total() const {
    MetricSums s;
    for (const auto& [k, v] : sums_) s += v;
    return s;
  }

  EvalReport report() const {
    EvalReport r;
    r.cutoff_hz = cutoff_hz_;
    r.all = metric_values(total());
    for (const auto& [k, v] : sums_) r.per_activity[k] = metric_values(v);
    return r;
  }

  double cutoff_hz() const { return cutoff_hz_; }

 private:
  double cutoff_hz_;
  std::map<std::string, MetricSums> sums_;
};

inline EvalReport evaluate(const Prediction& pred, const Prediction& truth, const SubjectMeta& subject,
                           const std::string& activity = "other", const std::vector<int>& frames = {}) {
  EvalAccumulator acc(pred.cutoff_hz);
  acc.add(pred, truth, subject.mass_kg, activity, frames);
  return acc.report();
}

/// Frames whose force-plate data is present and valid.
inline std::vector<int> scored_frames(const Trial& trial) {
  std::vector<int> out;
  for (int t = 0; t < trial.frame_count(); ++t)
    if (trial.frames[t].force_observed && trial.frames[t].grf_valid) out.push_back(t);
  return out;
}

inline MatX trial_wrenches(const Trial& trial) {
  const int n = trial.frame_count();
  MatX w(n, 6 * trial.contact_count());
  for (int t = 0; t < n; ++t) w.row(t) = trial.frames[t].wrenches.transpose();
  return w;
}

/// Ground truth with the same smoothing a predictor sees: wrenches low-passed
/// at `cutoff_hz`, then completed like a prediction.
inline Prediction reference_prediction(const Skeleton& skel, const MatX& poses, double dt,
                                       const MatX& wrenches, double cutoff_hz = kStandardCutoffHz) {
  if (!wrenches.allFinite())
    throw InputError("reference wrenches must be finite on every frame (hidden frames store zeros)");
  const MatX filtered =
      butterworth_lowpass(TimeSeries{dt, wrenches}, cutoff_hz, kStandardFilterOrder).samples;
  return complete_prediction(skel, poses, dt, filtered, cutoff_hz);
}

inline void write_report_csv(const EvalReport& r, std::ostream& os) {
  os << "scope,frames,com_acc_err_m_per_s2,grm_err_Nm_per_kg,grf_err_N_per_kg,torque_err_Nm_per_kg,"
        "cutoff_hz\n";
  auto row = [&](const std::string& scope, const MetricValues& v) {
    os << scope << ',' << v.frames << ',' << format_double(v.com_acc_err) << ','
       << format_double(v.grm_err) << ',' << format_double(v.grf_err) << ','
       << format_double(v.torque_err) << ',' << format_double(r.cutoff_hz) << '\n';
  };
  row("all", r.all);
  for (const auto& [k, v] : r.per_activity) row(k, v);
}

// ---------------------------------------------------------------------------
// Filter sweep

struct SweepInput {
  Skeleton skeleton;
  Trial trial;
  MatX poses;
};

struct SweepRow {
  double cutoff_hz = 0.0;
  double grf_err = 0.0;
};

/// Analytical baseline against force-plate truth, both re-filtered at each
/// cutoff.
inline std::vector<SweepRow> filter_sweep(const std::vector<SweepInput>& inputs,
                                          const std::vector<double>& cutoffs) {
  if (cutoffs.empty()) throw InputError("filter sweep needs at least one cutoff");
  for (std::size_t i = 1; i < cutoffs.size(); ++i)
    if (!(cutoffs[i] > cutoffs[i - 1])) throw InputError("cutoffs must be strictly ascending");
  for (const auto& in : inputs)
    if (!(cutoffs.front() > 0.0) || !(cutoffs.back() < 0.5 / in.trial.dt))
      throw InputError("cutoffs must lie in (0, Nyquist) for every trial");
  std::vector<SweepRow> rows;
  for (double fc : cutoffs) {
    EvalAccumulator acc(fc);
    for (const auto& in : inputs) {
      const Prediction truth = reference_prediction(in.skeleton, in.poses, in.trial.dt,
                                                    trial_wrenches(in.trial), fc);
      const Prediction pred =
          analytical_predict(in.skeleton, in.poses, in.trial.dt, contact_phases(in.trial), fc);
      acc.add(pred, truth, in.trial.subject.mass_kg, to_string(in.trial.activity),
              scored_frames(in.trial));
    }
    rows.push_back({fc, acc.report().all.grf_err});
  }
  return rows;
}

inline void write_sweep_csv(const std::vector<SweepRow>& rows, std::ostream& os) {
  os << "cutoff_hz,grf_err_N_per_kg\n";
  for (const auto& r : rows) os << format_double(r.cutoff_hz) << ',' << format_double(r.grf_err) << '\n';
}

// ---------------------------------------------------------------------------
// Ablation

struct AblationConfig {
  HidePolicy hide;          // every_kth_step = 0 hides nothing
  double alpha = kDefaultComAlpha;
  KinefitConfig kinefit;
  DynfitConfig dynfit;
};

struct AblationRow {
  std::string method;
  double linear_residual_n = 0.0;    // mean norm over scored frames
  double angular_residual_nm = 0.0;  // mean norm over scored frames
  double marker_rms_cm = 0.0;
  int frames = 0;
};

struct BoundaryJump {
  int frame = 0;
  double piecewise = 0.0;  // m/s, CoM velocity change across the frame
  double oracle = 0.0;
};

struct AblationResult {
  std::vector<AblationRow> rows;  // oracle, ours, piecewise
  std::vector<std::pair<int, int>> steps;
  std::vector<int> hidden_frames;
  std::vector<std::pair<int, int>> segments;  // observed runs fitted by the piecewise method
  std::vector<BoundaryJump> jumps;
  MatX knee_trace;  // T x 4: time_s, oracle, ours, piecewise (N m), NaN on hidden frames
  std::uint64_t marker_hash = 0;
};

/// FNV-1a over the marker stream; a missing marker hashes as one zero byte.
inline std::uint64_t marker_stream_hash(const Trial& trial) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&](unsigned char b) { h = (h ^ b) * 1099511628211ULL; };
  for (const auto& f : trial.frames)
    for (const auto& m : f.markers) {
      mix(m ? 1 : 0);
      if (!m) continue;
      for (int k = 0; k < 3; ++k) {
        const double v = (*m)[k];
        unsigned char bytes[sizeof(double)];
        std::memcpy(bytes, &v, sizeof v);
        for (unsigned char b : bytes) mix(b);
      }
    }
  return h;
}

/// Maximal runs of frames with observed forces.
inline std::vector<std::pair<int, int>> observed_runs(const Trial& trial) {
  std::vector<std::pair<int, int>> runs;
  for (int t = 0; t < trial.frame_count();) {
    if (!trial.frames[t].force_observed) {
      ++t;
      continue;
    }
    int e = t;
    while (e + 1 < trial.frame_count() && trial.frames[e + 1].force_observed) ++e;
    runs.push_back({t, e});
    t = e + 1;
  }
  return runs;
}

namespace detail {

inline Trial slice_trial(const Trial& trial, int first, int last) {
  Trial out = trial;
  out.frames.assign(trial.frames.begin() + first, trial.frames.begin() + last + 1);
  out.start_frame = trial.start_frame + first;
  return out;
}

inline AblationRow ablation_row(const std::string& method, const DynamicsFit& eval,
                                const std::vector<int>& frames) {
  AblationRow r;
  r.method = method;
  r.frames = static_cast<int>(frames.size());
  for (int t : frames) {
    r.linear_residual_n += eval.residual_linear.row(t).norm();
    r.angular_residual_nm += eval.residual_angular.row(t).norm();
  }
  if (!frames.empty()) {
    r.linear_residual_n /= frames.size();
    r.angular_residual_nm /= frames.size();
  }
  r.marker_rms_cm = 100.0 * eval.marker_rms;
  return r;
}

inline double velocity_jump(const MatX& com, int t, double dt) {
  if (t < 1 || t + 1 >= com.rows()) return 0.0;
  return (com.row(t + 1) - 2.0 * com.row(t) + com.row(t - 1)).norm() / dt;
}

}  // namespace detail

/// Oracle (all forces), ours (comfit + dynfit with the hidden frames in U)
/// and piecewise (separate fits on every observed run, stitched back with
/// kinematic poses on the hidden frames). Every method is scored on the
/// same frames: observed frames whose neighbours exist, against the
/// recorded forces.
inline AblationResult run_ablation(const Skeleton& nominal, const Trial& full, const AblationConfig& cfg = {}) {
  validate_trial(full);
  if (!unobserved_frames(full).empty())
    throw InputError("ablation needs a trial with every force frame observed");
  AblationResult res;
  res.steps = detect_steps(full, cfg.hide.foot, cfg.hide.min_step_frames, cfg.hide.threshold);
  if (res.steps.size() < 3)
    throw InputError("ablation needs at least 3 steps on the chosen foot, found " +
                     std::to_string(res.steps.size()));

  const KinematicFit kin = fit_kinematics(nominal, full, cfg.kinefit);
  const Skeleton skel = nominal.with_scales(kin.scales);

  Trial hidden = full;
  if (cfg.hide.every_kth_step > 0) res.hidden_frames = hide_forces(hidden, cfg.hide).frames;
  const std::vector<int>& u = res.hidden_frames;

  const std::uint64_t h_oracle = marker_stream_hash(full);
  const std::uint64_t h_ours = marker_stream_hash(hidden);
  if (h_oracle != h_ours) throw std::logic_error("ablation pipelines saw different marker streams");
  res.marker_hash = h_oracle;

  const MatX z = com_series(skel, kin.poses);
  const ComSolution com_oracle = solve_com(full, z, cfg.alpha);
  const DynamicsFit oracle =
      full_fit(skel, full, adjust_root_translation(skel, kin.poses, com_oracle), {}, cfg.dynfit);
  const ComSolution com_ours = solve_com(hidden, z, cfg.alpha);
  const DynamicsFit ours =
      full_fit(skel, hidden, adjust_root_translation(skel, kin.poses, com_ours), u, cfg.dynfit);

  MatX stitched = kin.poses;
  res.segments = observed_runs(hidden);
  for (const auto& [a, b] : res.segments) {
    if (b - a + 1 < 3) continue;
    const Trial seg = detail::slice_trial(hidden, a, b);
    const MatX seg_poses = kin.poses.middleRows(a, b - a + 1);
    const ComSolution c = solve_com(seg, z.middleRows(a, b - a + 1), cfg.alpha);
    DynfitConfig dc = cfg.dynfit;
    dc.fit_scales = false;
    dc.fit_mass = false;
    const DynamicsFit f = full_fit(skel, seg, adjust_root_translation(skel, seg_poses, c), {}, dc);
    stitched.middleRows(a, b - a + 1) = f.poses;
  }

  const DynamicsFit e_oracle = evaluate_dynamics(oracle.skeleton, hidden, oracle.poses, u, cfg.dynfit);
  const DynamicsFit e_ours = evaluate_dynamics(ours.skeleton, hidden, ours.poses, u, cfg.dynfit);
  const DynamicsFit e_piece = evaluate_dynamics(skel, hidden, stitched, u, cfg.dynfit);
  const std::vector<int>& frames = e_ours.dynamics_frames;
  res.rows = {detail::ablation_row("oracle", e_oracle, frames), detail::ablation_row("ours", e_ours, frames),
              detail::ablation_row("piecewise", e_piece, frames)};

  const MatX z_oracle = com_series(oracle.skeleton, oracle.poses);
  const MatX z_piece = com_series(skel, stitched);
  for (const auto& [a, b] : res.segments)
    for (int t : {a, b}) {
      if (t == 0 || t + 1 == full.frame_count()) continue;
      res.jumps.push_back({t, detail::velocity_jump(z_piece, t, full.dt),
                           detail::velocity_jump(z_oracle, t, full.dt)});
    }

  int knee = -1;
  for (int b = 0; b < skel.body_count(); ++b)
    if (skel.bodies()[b].joint.name == "r_knee") knee = skel.first_dof(b);
  const int n = full.frame_count();
  res.knee_trace = MatX::Constant(n, 4, std::nan(""));
  for (int t = 0; t < n; ++t) {
    res.knee_trace(t, 0) = t * full.dt;
    if (knee < 0) continue;
    res.knee_trace(t, 1) = e_oracle.tau(t, knee);
    res.knee_trace(t, 2) = e_ours.tau(t, knee);
    res.knee_trace(t, 3) = e_piece.tau(t, knee);
  }
  return res;
}

inline void write_ablation_csv(const AblationResult& r, std::ostream& os) {
  os << "method,linear_residual_N,angular_residual_Nm,marker_rms_cm,frames\n";
  for (const auto& row : r.rows)
    os << row.method << ',' << format_double(row.linear_residual_n) << ','
       << format_double(row.angular_residual_nm) << ',' << format_double(row.marker_rms_cm) << ','
       << row.frames << '\n';
}

inline void write_knee_trace_csv(const AblationResult& r, std::ostream& os) {
  os << "time_s,oracle_Nm,ours_Nm,piecewise_Nm\n";
  for (int t = 0; t < r.knee_trace.rows(); ++t) {
    for (int c = 0; c < 4; ++c) {
      const double v = r.knee_trace(t, c);
      os << (c ? "," : "") << (std::isnan(v) ? std::string() : format_double(v));
    }
    os << '\n';
  }
}

// ---------------------------------------------------------------------------
// Synthetic baseline corpus

struct CorpusConfig {
  int subjects = 20;
  double duration_s = 20.0;
  double marker_noise_m = 0.0;
  double force_noise_n = 0.0;
  std::uint64_t seed = 1;
};

/// One walking scenario per subject with height, mass, speed and gait
/// period drawn from adult ranges.
inline std::vector<ScenarioConfig> corpus_scenarios(const CorpusConfig& cfg) {
  if (cfg.subjects < 3) throw InputError("a corpus needs at least 3 subjects");
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<ScenarioConfig> out;
  for (int i = 0; i < cfg.subjects; ++i) {
    ScenarioConfig c;
    c.duration_s = cfg.duration_s;
    c.height_m = 1.55 + 0.4 * u(rng);
    c.mass_kg = 50.0 + 45.0 * u(rng);
    c.speed_mps = 0.9 + 0.7 * u(rng);
    c.period_s = 0.95 + 0.3 * u(rng);
    c.phase = 6.283185307179586 * u(rng);
    c.marker_noise_m = cfg.marker_noise_m;
    c.force_noise_n = cfg.force_noise_n;
    char id[16];
    std::snprintf(id, sizeof id, "SYN%02d", i + 1);
    c.subject_id = id;
    c.seed = cfg.seed * 1000 + static_cast<std::uint64_t>(i);
    out.push_back(c);
  }
  return out;
}

struct BaselineComparison {
  SubjectSplit split;
  std::vector<double> loss_history;
  EvalReport analytical;
  EvalReport mlp;
  EvalReport oracle;  // true wrenches pushed through the same completion
  MlpModel model;
};

/// Trains the MLP on the train subjects' ground-truth poses and recorded
/// forces, then scores both baselines and a perfect predictor on the test
/// subjects.
inline BaselineComparison compare_baselines(const std::vector<SyntheticTrial>& corpus,
                                            const SubjectSplit& split, const MlpHyper& hyper = {},
                                            const FeatureConfig& features = {}) {
  BaselineComparison out;
  out.split = split;
  Dataset train;
  for (const auto& s : corpus)
    if (split.assignment.at(s.trial.subject_id) == "train")
      append_samples(train, s.truth.skeleton, s.trial, s.truth.q, s.truth.skeleton.total_mass(),
                     features);
  TrainResult tr = train_mlp(train, hyper, features);
  out.loss_history = tr.loss_history;
  out.model = std::move(tr.model);
  EvalAccumulator ana(features.cutoff_hz), mlp(features.cutoff_hz), orc(features.cutoff_hz);
  for (const auto& s : corpus) {
    if (split.assignment.at(s.trial.subject_id) != "test") continue;
    const Skeleton& skel = s.truth.skeleton;
    const double dt = s.trial.dt;
    const Prediction truth =
        reference_prediction(skel, s.truth.q, dt, trial_wrenches(s.trial), features.cutoff_hz);
    const std::vector<int> frames = scored_frames(s.trial);
    const std::string act = to_string(s.trial.activity);
    const double mass = s.trial.subject.mass_kg;
    ana.add(analytical_predict(skel, s.truth.q, dt, contact_phases(s.trial), features.cutoff_hz), truth,
            mass, act, frames);
    mlp.add(mlp_predict_and_complete(out.model, skel, s.truth.q, dt), truth, mass, act, frames);
    orc.add(complete_prediction(skel, s.truth.q, dt, truth.wrenches, features.cutoff_hz), truth, mass,
            act, frames);
  }
  out.analytical = ana.report();
  out.mlp = mlp.report();
  out.oracle = orc.report();
  return out;
}

}  // namespace gaitdyn
