#pragma once

// Kinematic fit, CoM fit and dynamics fit of one trial, in that order.

#include <string>
#include <vector>

#include "gaitdyn/comfit.hpp"
#include "gaitdyn/dynfit.hpp"
#include "gaitdyn/kinefit.hpp"

namespace gaitdyn {

struct PipelineConfig {
  KinefitConfig kinefit;
  double alpha = kDefaultComAlpha;
  DynfitConfig dynfit;
};

struct PipelineResult {
  KinematicFit kinematics;
  ComSolution com;
  DynamicsFit dynamics;
  std::vector<std::string> warnings;  // prefixed with the stage that raised them
};

/// Frames without observed forces become the unknown-acceleration set of
/// both the CoM fit and the dynamics fit.
inline PipelineResult fit_trial(const Skeleton& nominal, const Trial& trial, const PipelineConfig& cfg = {}) {
  PipelineResult r;
  r.kinematics = fit_kinematics(nominal, trial, cfg.kinefit);
  for (int t : r.kinematics.interpolated_frames)
    r.warnings.push_back("kinematics: frame " + std::to_string(t) + " interpolated");
  const Skeleton skel = nominal.with_scales(r.kinematics.scales);
  r.com = solve_com(trial, com_series(skel, r.kinematics.poses), cfg.alpha);
  for (const auto& w : r.com.warnings) r.warnings.push_back("com: " + w);
  r.dynamics = full_fit(skel, trial, adjust_root_translation(skel, r.kinematics.poses, r.com),
                        unobserved_frames(trial), cfg.dynfit);
  for (const auto& w : r.dynamics.warnings) r.warnings.push_back("dynamics: " + w);
  return r;
}

}  // namespace gaitdyn
