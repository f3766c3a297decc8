#include <map>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "gaitdyn/synthgen.hpp"

namespace gaitdyn {
namespace {

ScenarioConfig walking(double seconds = 4.0) {
  ScenarioConfig c;
  c.duration_s = seconds;
  return c;
}

// Eq. of motion check done directly with RNEA and the contact Jacobians.
double identity_error(const GroundTruth& gt) {
  double worst = 0.0;
  for (int t = 0; t < gt.q.rows(); ++t) {
    const VecX q = gt.q.row(t).transpose();
    const KinematicState ks = kinematic_state(gt.skeleton, q);
    VecX lhs = rnea(gt.skeleton, ks, gt.qd.row(t).transpose(), gt.qdd.row(t).transpose()) -
               contact_generalized_forces(gt.skeleton, ks, gt.wrenches.row(t).transpose());
    worst = std::max(worst, (lhs - gt.tau.row(t).transpose()).cwiseAbs().maxCoeff());
  }
  return worst;
}

TEST(Synthgen, EquationOfMotionHoldsForEveryScript) {
  for (MotionKind m : {MotionKind::Standing, MotionKind::Walking, MotionKind::Hopping}) {
    ScenarioConfig c = walking(3.0);
    c.motion = m;
    c.period_s = m == MotionKind::Hopping ? 0.6 : 1.1;
    c.stance_fraction = m == MotionKind::Hopping ? 0.5 : 0.6;
    for (bool treadmill : {false, true}) {
      c.treadmill = treadmill;
      SyntheticTrial s = generate(c);
      EXPECT_LT(identity_error(s.truth), 1e-9) << to_string(m);
      validate_trial(s.trial);
      check_trial_matches(builtin_model("biped12"), s.trial);
    }
  }
}

TEST(Synthgen, ScriptDerivativesMatchFiniteDifferences) {
  for (MotionKind m : {MotionKind::Walking, MotionKind::Hopping}) {
    ScenarioConfig c = walking();
    c.motion = m;
    c.period_s = m == MotionKind::Hopping ? 0.6 : 1.1;
    c.stance_fraction = m == MotionKind::Hopping ? 0.5 : 0.6;
    const Skeleton skel = scenario_skeleton(c);
    MotionScript script(c, skel);
    const double h = 1e-5;
    for (double t : {0.013, 0.21, 0.377, 0.52, 0.81, 1.07}) {
      auto a = script.eval(t - h), b = script.eval(t + h), mid = script.eval(t);
      EXPECT_LT(((b.row(0) - a.row(0)) / (2 * h) - mid.row(1)).cwiseAbs().maxCoeff(), 1e-6);
      EXPECT_LT(((b.row(1) - a.row(1)) / (2 * h) - mid.row(2)).cwiseAbs().maxCoeff(), 1e-4);
    }
  }
}

TEST(Synthgen, HopIsPeriodic) {
  ScenarioConfig c = walking();
  c.motion = MotionKind::Hopping;
  c.period_s = 0.6;
  c.stance_fraction = 0.5;
  MotionScript script(c, scenario_skeleton(c));
  for (double t : {0.0, 0.1, 0.45}) {
    auto a = script.eval(t), b = script.eval(t + 0.6 - 1e-12);
    EXPECT_NEAR(a(0, 4), b(0, 4), 1e-9);
    EXPECT_NEAR(a(1, 4), b(1, 4), 1e-9);
  }
}

TEST(Synthgen, StandingCarriesBodyWeight) {
  ScenarioConfig c = walking(1.0);
  c.motion = MotionKind::Standing;
  SyntheticTrial s = generate(c);
  for (const auto& f : s.trial.frames)
    EXPECT_NEAR(f.wrenches[4] + f.wrenches[10], 686.7, 1e-9);
}

TEST(Synthgen, FlightFramesCarryNoForce) {
  ScenarioConfig c = walking(2.0);
  c.motion = MotionKind::Hopping;
  c.period_s = 0.6;
  c.stance_fraction = 0.5;
  SyntheticTrial s = generate(c);
  int flight = 0;
  for (int t = 0; t < s.trial.frame_count(); ++t) {
    const double tau = t * s.truth.dt - 0.6 * std::floor(t * s.truth.dt / 0.6);
    if (tau > 0.3 + 1e-9) {
      ++flight;
      EXPECT_EQ(s.truth.wrenches.row(t).norm(), 0.0);
    }
  }
  EXPECT_GT(flight, 50);
}

TEST(Synthgen, ForceDuringFlightIsAnError) {
  const Skeleton skel = builtin_model("biped12");
  auto script = [&](double t) {
    Eigen::Matrix<double, 3, Eigen::Dynamic> s =
        Eigen::Matrix<double, 3, Eigen::Dynamic>::Zero(3, skel.dofs());
    s(0, 4) = 1.0 + 0.1 * t;  // hovering
    return s;
  };
  auto weights = [](double) { return Eigen::Vector2d::Zero(); };
  EXPECT_THROW(synthesize_truth(skel, 20, 0.01, script, weights), GenerationError);
}

TEST(Synthgen, DeterministicGivenSeed) {
  ScenarioConfig c = walking(2.0);
  c.marker_noise_m = 0.005;
  c.force_noise_n = 20.0;
  c.seed = 77;
  std::ostringstream a, b;
  write_trial(generate(c).trial, a);
  write_trial(generate(c).trial, b);
  EXPECT_EQ(a.str(), b.str());
  c.seed = 78;
  std::ostringstream d;
  write_trial(generate(c).trial, d);
  EXPECT_NE(a.str(), d.str());
}

TEST(Synthgen, NoiseHasRequestedSpread) {
  ScenarioConfig c = walking(5.0);
  c.marker_noise_m = 0.005;
  c.force_noise_n = 20.0;
  SyntheticTrial s = generate(c);
  double sm = 0, sf = 0;
  long nm = 0, nf = 0;
  for (int t = 0; t < s.trial.frame_count(); ++t) {
    const auto clean = virtual_markers(s.truth.skeleton, Pose(s.truth.q.row(t).transpose()));
    for (int i = 0; i < s.truth.skeleton.marker_count(); ++i, nm += 3)
      sm += (*s.trial.frames[t].markers[i] - clean[i]).squaredNorm();
    for (int k : {3, 4, 5, 9, 10, 11}) {
      ++nf;
      sf += std::pow(s.trial.frames[t].wrenches[k] - s.truth.wrenches(t, k), 2);
    }
  }
  EXPECT_NEAR(std::sqrt(sm / nm), 0.005, 0.0002);
  EXPECT_NEAR(std::sqrt(sf / nf), 20.0, 1.0);
}

TEST(Synthgen, TreadmillSpeedMatchesBelt) {
  ScenarioConfig c = walking(8.0);
  c.treadmill = true;
  c.speed_mps = 1.2;
  SyntheticTrial s = generate(c);
  EXPECT_NEAR(average_trial_speed(s.truth.skeleton, s.trial, s.truth.q), 1.2, 0.1);
  c.treadmill = false;
  SyntheticTrial o = generate(c);
  EXPECT_NEAR(average_trial_speed(o.truth.skeleton, o.trial, o.truth.q), 1.2, 0.1);
}

TEST(Synthgen, ContactPhasesPartitionFrames) {
  SyntheticTrial s = generate(walking(6.0));
  std::map<ContactPhase, int> count;
  for (const auto& f : s.trial.frames)
    ++count[classify_contact(f, s.trial.subject.body_weight())];
  int total = 0;
  for (const auto& [p, k] : count) total += k;
  EXPECT_EQ(total, s.trial.frame_count());
  EXPECT_GT(count[ContactPhase::Double], 0);
  EXPECT_GT(count[ContactPhase::SingleLeft], 0);
  EXPECT_GT(count[ContactPhase::SingleRight], 0);
  EXPECT_EQ(count[ContactPhase::Flight], 0);
}

TEST(HideForces, EveryThirdOfNineSteps) {
  // the right foot has just lifted off at t = 0, so nine full stances fit
  ScenarioConfig c = walking(9.0 * 1.1 + 0.2);
  c.phase = 0.6 * std::numbers::pi + 0.05;
  SyntheticTrial s = generate(c);
  Trial t = s.trial;
  HiddenForces h = hide_forces(t, {3, 1});
  ASSERT_EQ(h.steps.size(), 9u);
  EXPECT_EQ(h.hidden_steps, (std::vector<int>{3, 6, 9}));
  EXPECT_EQ(unobserved_frames(t), h.frames);
  for (std::size_t i = 0; i < h.frames.size(); ++i) {
    EXPECT_TRUE(t.frames[h.frames[i]].wrenches.isZero(0.0));
    EXPECT_EQ(h.wrenches.row(i), s.trial.frames[h.frames[i]].wrenches.transpose());
  }
}

TEST(HideForces, KOneHidesAllStanceAndPartitions) {
  SyntheticTrial s = generate(walking(5.0));
  const auto steps = detect_steps(s.trial, 1, 5);
  std::set<int> stance;
  for (auto [a, b] : steps)
    for (int t = a; t <= b; ++t) stance.insert(t);
  for (int k : {1, 2, 3}) {
    Trial t = s.trial;
    HiddenForces h = hide_forces(t, {k, 1});
    std::set<int> hidden(h.frames.begin(), h.frames.end());
    std::set<int> visible;
    for (int f : stance)
      if (t.frames[f].force_observed) visible.insert(f);
    std::set<int> both;
    std::set_union(hidden.begin(), hidden.end(), visible.begin(), visible.end(),
                   std::inserter(both, both.begin()));
    EXPECT_EQ(both, stance);
    EXPECT_EQ(hidden.size() + visible.size(), stance.size());
    if (k == 1) EXPECT_EQ(hidden, stance);
  }
}

TEST(Truth, RoundTrip) {
  ScenarioConfig c = walking(0.5);
  c.scales.assign(7, Vec3(1.02, 0.97, 1.01));
  c.mass_kg = 64.0;
  SyntheticTrial s = generate(c);
  std::ostringstream os;
  write_truth(s.truth, os);
  std::istringstream is(os.str());
  GroundTruth back = read_truth(is);
  EXPECT_TRUE(back.skeleton == s.truth.skeleton);
  EXPECT_EQ(back.q, s.truth.q);
  EXPECT_EQ(back.tau, s.truth.tau);
  EXPECT_EQ(back.wrenches, s.truth.wrenches);
  EXPECT_EQ(back.com_acc, s.truth.com_acc);
  std::ostringstream again;
  write_truth(back, again);
  EXPECT_EQ(again.str(), os.str());
}

}  // namespace
}  // namespace gaitdyn
