// gaitdyn command-line driver. See docs/cli.md.
#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <Eigen/Core>
#include <json.hpp>

#include "gaitdyn/baselines.hpp"
#include "gaitdyn/bench.hpp"
#include "gaitdyn/comfit.hpp"
#include "gaitdyn/dynfit.hpp"
#include "gaitdyn/kinefit.hpp"
#include "gaitdyn/pipeline.hpp"
#include "gaitdyn/skeleton_io.hpp"
#include "gaitdyn/synthgen.hpp"
#include "gaitdyn/trial.hpp"

#ifndef GAITDYN_VERSION
#define GAITDYN_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using namespace gaitdyn;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;
constexpr int kExitConvergence = 2;

std::string fnv_hex(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) h = (h ^ c) * 1099511628211ULL;
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

/// Everything a run reads and writes, for manifest.json.
struct Run {
  std::string command;
  fs::path out;
  bool deterministic = false;
  nlohmann::json options = nlohmann::json::object();
  nlohmann::json inputs = nlohmann::json::array();
  std::vector<std::string> outputs;
  std::vector<std::string> warnings;

  void input(const std::string& path) {
    inputs.push_back({{"path", path}, {"fnv1a64", fnv_hex(read_file(path))}});
  }
  /// Path of an output file; names never leave the output directory.
  std::string output(const std::string& name) {
    if (name.empty() || name.find('/') != std::string::npos || name.find('\\') != std::string::npos ||
        name == "." || name == "..")
      throw InputError("output name '" + name + "' must be a plain file name");
    outputs.push_back(name);
    return (out / name).string();
  }
  void write_text(const std::string& name, const std::string& text) {
    std::ofstream f(output(name), std::ios::binary);
    if (!f) throw InputError("cannot write " + (out / name).string());
    f << text;
  }
  void finish() const {
    nlohmann::json files = nlohmann::json::array();
    for (const auto& name : outputs)
      files.push_back({{"path", name}, {"fnv1a64", fnv_hex(read_file((out / name).string()))}});
    nlohmann::json m = {{"tool", "gaitdyn"},
                        {"version", GAITDYN_VERSION},
                        {"command", command},
                        {"deterministic", deterministic},
                        {"threads", 1},
                        {"options", options},
                        {"inputs", inputs},
                        {"outputs", files},
                        {"warnings", warnings}};
    std::ofstream f(out / "manifest.json", std::ios::binary);
    f << m.dump(2) << "\n";
  }
};

Skeleton skeleton_arg(const std::string& s) {
  for (const auto& n : builtin_model_names())
    if (n == s) return builtin_model(s);
  return load_skeleton(s);
}

std::vector<double> list_arg(const std::string& s, const char* what) {
  std::vector<double> v;
  for (auto tok : split_view(s, ',')) {
    try {
      v.push_back(parse_double(tok, 0));
    } catch (const ParseError&) {
      throw InputError(std::string("bad number in ") + what + ": '" + std::string(tok) + "'");
    }
  }
  return v;
}

/// Skeleton and pose series from a ground-truth or fit file.
struct PoseSource {
  Skeleton skeleton;
  MatX poses;
};

PoseSource poses_arg(Run& run, const std::string& truth, const std::string& fit) {
  if (truth.empty() == fit.empty()) throw InputError("give exactly one of --truth or --fit");
  if (!truth.empty()) {
    run.input(truth);
    GroundTruth gt = load_truth(truth);
    return {gt.skeleton, gt.q};
  }
  run.input(fit);
  DynamicsFit f = load_fit(fit);
  return {f.skeleton, f.poses};
}

void check_rows(const Trial& trial, const MatX& poses) {
  if (poses.rows() != trial.frame_count())
    throw InputError("pose series has " + std::to_string(poses.rows()) + " frames, trial has " +
                     std::to_string(trial.frame_count()));
}

/// `<stem>.trial` files in a directory, sorted by name.
std::vector<fs::path> corpus_trials(const std::string& dir) {
  if (!fs::is_directory(dir)) throw InputError("corpus directory " + dir + " not found");
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".trial") out.push_back(e.path());
  std::sort(out.begin(), out.end());
  if (out.empty()) throw InputError("no .trial files in " + dir);
  return out;
}

// ---------------------------------------------------------------------------

struct GenArgs {
  std::string motion = "walking";
  double duration = 10.0, rate = kStandardRateHz, speed = 1.2, period = 1.1, stance = 0.6;
  double marker_noise = 0.0, force_noise = 0.0, mass = 70.0, height = 1.75;
  std::string subject = "SYN01", name = "trial";
  std::uint64_t seed = 1;
  bool treadmill = false;
  int hide_every = 0, hide_foot = 1, corpus = 0;
};

int run_gen(Run& run, const GenArgs& a) {
  run.options = {{"motion", a.motion},   {"duration", a.duration},         {"rate", a.rate},
                 {"speed", a.speed},     {"period", a.period},             {"stance", a.stance},
                 {"marker_noise", a.marker_noise}, {"force_noise", a.force_noise},
                 {"mass", a.mass},       {"height", a.height},             {"subject", a.subject},
                 {"seed", a.seed},       {"treadmill", a.treadmill},       {"name", a.name},
                 {"hide_every", a.hide_every}, {"hide_foot", a.hide_foot}, {"corpus", a.corpus}};
  std::vector<std::pair<std::string, ScenarioConfig>> jobs;
  if (a.corpus > 0) {
    CorpusConfig cc;
    cc.subjects = a.corpus;
    cc.duration_s = a.duration;
    cc.marker_noise_m = a.marker_noise;
    cc.force_noise_n = a.force_noise;
    cc.seed = a.seed;
    for (auto& c : corpus_scenarios(cc)) jobs.push_back({c.subject_id, c});
  } else {
    ScenarioConfig c;
    c.motion = parse_motion(a.motion);
    c.duration_s = a.duration;
    c.rate_hz = a.rate;
    c.speed_mps = a.speed;
    c.treadmill = a.treadmill;
    c.period_s = a.period;
    c.stance_fraction = a.stance;
    c.marker_noise_m = a.marker_noise;
    c.force_noise_n = a.force_noise;
    c.mass_kg = a.mass;
    c.height_m = a.height;
    c.subject_id = a.subject;
    c.seed = a.seed;
    jobs.push_back({a.name, c});
  }
  for (auto& [name, c] : jobs) {
    SyntheticTrial s = generate(c);
    if (a.hide_every > 0) {
      const HiddenForces h = hide_forces(s.trial, {a.hide_every, a.hide_foot});
      if (h.frames.empty()) run.warnings.push_back(name + ": no step was hidden");
    }
    save_trial(s.trial, run.output(name + ".trial"));
    save_truth(s.truth, run.output(name + ".truth"));
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct FitArgs {
  std::string trial, skeleton = "biped12";
  double alpha = kDefaultComAlpha, w_dyn = 1e-3, tolerance = 1e-5;
  int max_outer = 10;
  bool fixed_mass = false, fixed_scales = false, dump_system = false;
};

int run_fit(Run& run, const FitArgs& a) {
  run.options = {{"trial", a.trial},         {"skeleton", a.skeleton},       {"alpha", a.alpha},
                 {"w_dyn", a.w_dyn},         {"tolerance", a.tolerance},     {"max_outer", a.max_outer},
                 {"fixed_mass", a.fixed_mass}, {"fixed_scales", a.fixed_scales},
                 {"dump_system", a.dump_system}};
  run.input(a.trial);
  const Trial trial = load_trial(a.trial);
  const Skeleton nominal = skeleton_arg(a.skeleton);
  PipelineConfig cfg;
  cfg.alpha = a.alpha;
  cfg.dynfit.w_dyn = a.w_dyn;
  cfg.dynfit.max_outer = a.max_outer;
  cfg.dynfit.rel_tolerance = a.tolerance;
  cfg.dynfit.fit_mass = !a.fixed_mass;
  cfg.dynfit.fit_scales = !a.fixed_scales;
  const PipelineResult r = fit_trial(nominal, trial, cfg);
  run.warnings.insert(run.warnings.end(), r.warnings.begin(), r.warnings.end());
  if (a.dump_system) {
    std::ostringstream mm;
    write_matrix_market(build_linear_system(total_contact_force(trial), r.com.unobserved, a.alpha, trial.dt),
                        mm);
    run.write_text("com_system.mtx", mm.str());
  }
  const DynamicsFit& fit = r.dynamics;
  save_fit(fit, run.output("fit.json"));
  const QualityReport& q = fit.quality;
  std::ostringstream csv;
  csv << "marker_rms_cm,linear_residual_bw,angular_residual_bwh,passes_hicks,total_mass_kg\n"
      << format_double(q.marker_rms_cm) << ',' << format_double(q.linear_residual_bw) << ','
      << format_double(q.angular_residual_bwh) << ',' << (q.passes_hicks ? "true" : "false") << ','
      << format_double(fit.skeleton.total_mass()) << '\n';
  run.write_text("quality.csv", csv.str());
  if (!q.passes_hicks) run.warnings.push_back("quality: residuals exceed the Hicks thresholds");
  return run.warnings.empty() ? kExitOk : kExitConvergence;
}

// ---------------------------------------------------------------------------

struct BaselineArgs {
  std::string trial, truth, fit, model, corpus, split, name;
  double cutoff = kStandardCutoffHz;
  MlpHyper hyper;
  FeatureConfig features;
};

int run_predict(Run& run, const BaselineArgs& a, const std::string& kind) {
  run.options = {{"kind", kind},   {"trial", a.trial}, {"truth", a.truth},   {"fit", a.fit},
                 {"model", a.model}, {"cutoff", a.cutoff}, {"name", a.name}};
  run.input(a.trial);
  const Trial trial = load_trial(a.trial);
  const PoseSource src = poses_arg(run, a.truth, a.fit);
  check_rows(trial, src.poses);
  PredictionFile f;
  f.mass_kg = trial.subject.mass_kg;
  f.activity = to_string(trial.activity);
  if (kind == "analytical") {
    f.prediction = analytical_predict(src.skeleton, src.poses, trial.dt, contact_phases(trial), a.cutoff);
  } else if (kind == "reference") {
    f.prediction = reference_prediction(src.skeleton, src.poses, trial.dt, trial_wrenches(trial), a.cutoff);
    f.scored = scored_frames(trial);
    if (f.scored.empty()) throw InputError("trial has no observed, valid force frames to score");
    if (static_cast<int>(f.scored.size()) == trial.frame_count()) f.scored.clear();
  } else {
    run.input(a.model);
    const MlpModel m = load_mlp(a.model);
    f.prediction = mlp_predict_and_complete(m, src.skeleton, src.poses, trial.dt);
  }
  save_prediction(f, run.output((a.name.empty() ? kind : a.name) + ".pred.csv"));
  return kExitOk;
}

int run_train(Run& run, const BaselineArgs& a) {
  const MlpHyper& h = a.hyper;
  run.options = {{"corpus", a.corpus}, {"split", a.split},   {"hidden", h.hidden},
                 {"lr", h.lr},         {"decay", h.decay},   {"eps", h.eps},
                 {"batch", h.batch},   {"epochs", h.epochs}, {"seed", h.seed},
                 {"history", a.features.history}, {"stride", a.features.stride},
                 {"cutoff", a.features.cutoff_hz}};
  run.input(a.split);
  const SubjectSplit split = load_split(a.split);
  Dataset train;
  int used = 0;
  for (const auto& path : corpus_trials(a.corpus)) {
    fs::path truth_path = path;
    truth_path.replace_extension(".truth");
    run.input(path.string());
    const Trial trial = load_trial(path.string());
    const auto it = split.assignment.find(trial.subject_id);
    if (it == split.assignment.end())
      throw InputError("subject " + trial.subject_id + " is missing from the split");
    if (it->second != "train") continue;
    run.input(truth_path.string());
    const GroundTruth gt = load_truth(truth_path.string());
    check_rows(trial, gt.q);
    append_samples(train, gt.skeleton, trial, gt.q, gt.skeleton.total_mass(), a.features);
    ++used;
  }
  if (used == 0) throw InputError("no training trials in " + a.corpus);
  const TrainResult r = train_mlp(train, a.hyper, a.features);
  save_mlp(r.model, run.output("model.txt"));
  std::ostringstream csv;
  csv << "epoch,loss\n";
  for (std::size_t e = 0; e < r.loss_history.size(); ++e)
    csv << e << ',' << format_double(r.loss_history[e]) << '\n';
  run.write_text("loss.csv", csv.str());
  if (!(r.loss_history.back() < r.loss_history.front()))
    run.warnings.push_back("training loss did not decrease");
  return run.warnings.empty() ? kExitOk : kExitConvergence;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::vector<std::string> pred, reference;
};

int run_eval(Run& run, const EvalArgs& a) {
  run.options = {{"pred", a.pred}, {"reference", a.reference}};
  if (a.pred.size() != a.reference.size())
    throw InputError("--pred and --reference need the same number of files");
  std::unique_ptr<EvalAccumulator> acc;
  for (std::size_t i = 0; i < a.pred.size(); ++i) {
    run.input(a.pred[i]);
    run.input(a.reference[i]);
    const PredictionFile p = load_prediction(a.pred[i]);
    const PredictionFile r = load_prediction(a.reference[i]);
    if (!acc) acc = std::make_unique<EvalAccumulator>(r.prediction.cutoff_hz);
    acc->add(p.prediction, r.prediction, r.mass_kg, r.activity, r.scored);
  }
  std::ostringstream csv;
  write_report_csv(acc->report(), csv);
  run.write_text("report.csv", csv.str());
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct AblateArgs {
  std::string trial, skeleton = "biped12";
  int every = 3, foot = 1, min_step_frames = 5;
  double alpha = kDefaultComAlpha;
};

int run_ablate(Run& run, const AblateArgs& a) {
  run.options = {{"trial", a.trial}, {"skeleton", a.skeleton}, {"every", a.every}, {"foot", a.foot},
                 {"min_step_frames", a.min_step_frames}, {"alpha", a.alpha}};
  run.input(a.trial);
  const Trial trial = load_trial(a.trial);
  AblationConfig cfg;
  cfg.hide.every_kth_step = a.every;
  cfg.hide.foot = a.foot;
  cfg.hide.min_step_frames = a.min_step_frames;
  cfg.alpha = a.alpha;
  const AblationResult r = run_ablation(skeleton_arg(a.skeleton), trial, cfg);
  std::ostringstream table, trace, jumps;
  write_ablation_csv(r, table);
  write_knee_trace_csv(r, trace);
  jumps << "frame,piecewise_dv_m_per_s,oracle_dv_m_per_s\n";
  for (const auto& j : r.jumps)
    jumps << j.frame << ',' << format_double(j.piecewise) << ',' << format_double(j.oracle) << '\n';
  run.write_text("ablation.csv", table.str());
  run.write_text("knee_trace.csv", trace.str());
  run.write_text("boundary_jumps.csv", jumps.str());
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct SweepArgs {
  std::vector<std::string> trials, truths;
  std::string cutoffs = "5,10,15,20,25,30,35,40";
};

int run_sweep(Run& run, const SweepArgs& a) {
  run.options = {{"trial", a.trials}, {"truth", a.truths}, {"cutoffs", a.cutoffs}};
  if (a.trials.size() != a.truths.size()) throw InputError("--trial and --truth need the same count");
  std::vector<SweepInput> in;
  for (std::size_t i = 0; i < a.trials.size(); ++i) {
    run.input(a.trials[i]);
    run.input(a.truths[i]);
    Trial t = load_trial(a.trials[i]);
    GroundTruth gt = load_truth(a.truths[i]);
    check_rows(t, gt.q);
    in.push_back({gt.skeleton, std::move(t), gt.q});
  }
  std::ostringstream csv;
  write_sweep_csv(filter_sweep(in, list_arg(a.cutoffs, "--cutoffs")), csv);
  run.write_text("sweep.csv", csv.str());
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct SplitArgs {
  std::string corpus;
  std::vector<std::string> trials;
  std::string ratios = "0.9,0.05,0.05";
  std::uint64_t seed = 1;
};

int run_split(Run& run, const SplitArgs& a) {
  run.options = {{"corpus", a.corpus}, {"trials", a.trials}, {"ratios", a.ratios}, {"seed", a.seed}};
  std::vector<std::string> paths = a.trials;
  if (!a.corpus.empty())
    for (const auto& p : corpus_trials(a.corpus)) paths.push_back(p.string());
  if (paths.empty()) throw InputError("give --corpus or --trials");
  std::vector<std::string> ids;
  for (const auto& p : paths) {
    run.input(p);
    ids.push_back(load_trial(p).subject_id);
  }
  const auto r = list_arg(a.ratios, "--ratios");
  if (r.size() != 3) throw InputError("--ratios needs three values");
  save_split(subject_split(ids, {r[0], r[1], r[2]}, a.seed), run.output("split.json"));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gaitdyn: physically consistent gait dynamics from markers and force plates"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "TOML file mirroring the flags; flags given on the command line win");
  bool deterministic = false;
  app.add_flag("--deterministic", deterministic, "single-threaded, byte-reproducible run");
  std::string out;
  auto add_out = [&](CLI::App* s) { s->add_option("--out", out, "output directory")->required(); };

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "generate synthetic trials with ground truth");
  add_out(g);
  g->add_option("--motion", gen.motion, "walking, standing or hopping");
  g->add_option("--duration", gen.duration, "seconds");
  g->add_option("--rate", gen.rate, "capture rate (Hz)");
  g->add_option("--speed", gen.speed, "walking or belt speed (m/s)");
  g->add_option("--period", gen.period, "gait cycle or hop period (s)");
  g->add_option("--stance", gen.stance, "stance fraction of the period");
  g->add_option("--marker-noise", gen.marker_noise, "marker noise sigma (m)");
  g->add_option("--force-noise", gen.force_noise, "force-plate noise sigma (N)");
  g->add_option("--mass", gen.mass, "subject mass (kg)");
  g->add_option("--height", gen.height, "subject height (m)");
  g->add_option("--subject", gen.subject, "subject id");
  g->add_option("--seed", gen.seed, "random seed");
  g->add_flag("--treadmill", gen.treadmill, "belt instead of overground");
  g->add_option("--name", gen.name, "output file stem");
  g->add_option("--hide-every", gen.hide_every, "hide forces of every k-th step (0: none)");
  g->add_option("--hide-foot", gen.hide_foot, "foot whose steps are hidden (0 left, 1 right)");
  g->add_option("--corpus", gen.corpus, "generate this many walking subjects instead of one trial");

  FitArgs fit;
  auto* f = app.add_subcommand("fit", "kinematic, CoM and dynamics fit of one trial");
  add_out(f);
  f->add_option("--trial", fit.trial, ".trial file")->required();
  f->add_option("--skeleton", fit.skeleton, "builtin model name or skeleton JSON path");
  f->add_option("--alpha", fit.alpha, "CoM acceleration regularization");
  f->add_option("--w-dyn", fit.w_dyn, "dynamics residual weight (m/N)");
  f->add_option("--max-outer", fit.max_outer, "outer rounds");
  f->add_option("--tolerance", fit.tolerance, "relative objective improvement to stop");
  f->add_flag("--fixed-mass", fit.fixed_mass, "keep the subject mass");
  f->add_flag("--fixed-scales", fit.fixed_scales, "keep the kinematic scales");
  f->add_flag("--dump-system", fit.dump_system, "write the CoM linear system as Matrix Market");

  BaselineArgs base;
  auto* b = app.add_subcommand("baseline", "reference predictors");
  b->require_subcommand(1);
  auto add_predict = [&](const char* name, const char* help) {
    auto* s = b->add_subcommand(name, help);
    add_out(s);
    s->add_option("--trial", base.trial, ".trial file")->required();
    s->add_option("--truth", base.truth, "pose source: .truth file");
    s->add_option("--fit", base.fit, "pose source: fit JSON");
    s->add_option("--name", base.name, "output stem (default: the predictor name)");
    return s;
  };
  auto* b_ana = add_predict("analytical", "F = ma baseline");
  b_ana->add_option("--cutoff", base.cutoff, "filter cutoff (Hz)");
  auto* b_ref = add_predict("reference", "recorded forces, filtered and completed, for scoring");
  b_ref->add_option("--cutoff", base.cutoff, "filter cutoff (Hz)");
  auto* b_mlp = add_predict("mlp", "MLP baseline prediction");
  b_mlp->add_option("--model", base.model, "model file")->required();
  auto* b_train = b->add_subcommand("train", "train the MLP on the train split of a corpus");
  add_out(b_train);
  b_train->add_option("--corpus", base.corpus, "directory of .trial/.truth pairs")->required();
  b_train->add_option("--split", base.split, "split JSON")->required();
  b_train->add_option("--hidden", base.hyper.hidden, "hidden units");
  b_train->add_option("--lr", base.hyper.lr, "RMSprop learning rate");
  b_train->add_option("--decay", base.hyper.decay, "RMSprop accumulator decay");
  b_train->add_option("--eps", base.hyper.eps, "RMSprop epsilon");
  b_train->add_option("--batch", base.hyper.batch, "mini-batch size");
  b_train->add_option("--epochs", base.hyper.epochs, "epochs");
  b_train->add_option("--seed", base.hyper.seed, "initialization and shuffle seed");
  b_train->add_option("--history", base.features.history, "window length (frames)");
  b_train->add_option("--stride", base.features.stride, "window stride (frames)");
  b_train->add_option("--cutoff", base.features.cutoff_hz, "filter cutoff (Hz)");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "benchmark metrics of predictions against references");
  add_out(e);
  e->add_option("--pred", ev.pred, "prediction files")->required()->delimiter(',');
  e->add_option("--reference", ev.reference, "reference files, same order")->required()->delimiter(',');

  AblateArgs ab;
  auto* a = app.add_subcommand("ablate", "hidden-step ablation: oracle, ours, piecewise");
  add_out(a);
  a->add_option("--trial", ab.trial, ".trial file with every force observed")->required();
  a->add_option("--skeleton", ab.skeleton, "builtin model name or skeleton JSON path");
  a->add_option("--every", ab.every, "hide every k-th step (0: none)");
  a->add_option("--foot", ab.foot, "foot whose steps are hidden (0 left, 1 right)");
  a->add_option("--min-step-frames", ab.min_step_frames, "shortest contact run counted as a step");
  a->add_option("--alpha", ab.alpha, "CoM acceleration regularization");

  SweepArgs sw;
  auto* s = app.add_subcommand("sweep", "analytical-baseline GRF error against filter cutoff");
  add_out(s);
  s->add_option("--trial", sw.trials, ".trial files")->required()->delimiter(',');
  s->add_option("--truth", sw.truths, "matching .truth files")->required()->delimiter(',');
  s->add_option("--cutoffs", sw.cutoffs, "ascending cutoffs (Hz), comma separated");

  SplitArgs sp;
  auto* p = app.add_subcommand("split", "subject-level train/dev/test split");
  add_out(p);
  p->add_option("--corpus", sp.corpus, "directory of .trial files");
  p->add_option("--trials", sp.trials, ".trial files")->delimiter(',');
  p->add_option("--ratios", sp.ratios, "train,dev,test");
  p->add_option("--seed", sp.seed, "shuffle seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kExitOk : kExitInvalid;
  }

  Run run;
  run.deterministic = deterministic;
  run.out = out;
  Eigen::setNbThreads(1);
  try {
    std::error_code ec;
    fs::create_directories(run.out, ec);
    if (ec || !fs::is_directory(run.out)) throw InputError("cannot create output directory " + out);
    int code = kExitOk;
    if (g->parsed()) {
      run.command = "gen";
      code = run_gen(run, gen);
    } else if (f->parsed()) {
      run.command = "fit";
      code = run_fit(run, fit);
    } else if (b_ana->parsed()) {
      run.command = "baseline analytical";
      code = run_predict(run, base, "analytical");
    } else if (b_ref->parsed()) {
      run.command = "baseline reference";
      code = run_predict(run, base, "reference");
    } else if (b_mlp->parsed()) {
      run.command = "baseline mlp";
      code = run_predict(run, base, "mlp");
    } else if (b_train->parsed()) {
      run.command = "baseline train";
      code = run_train(run, base);
    } else if (e->parsed()) {
      run.command = "eval";
      code = run_eval(run, ev);
    } else if (a->parsed()) {
      run.command = "ablate";
      code = run_ablate(run, ab);
    } else if (s->parsed()) {
      run.command = "sweep";
      code = run_sweep(run, sw);
    } else if (p->parsed()) {
      run.command = "split";
      code = run_split(run, sp);
    }
    run.finish();
    for (const auto& w : run.warnings) std::cerr << "warning: " << w << "\n";
    return code;
  } catch (const KinematicFitError& err) {
    std::cerr << "convergence failure: " << err.what() << "\n";
    return kExitConvergence;
  } catch (const DiagnosticError& err) {
    std::cerr << "convergence failure: " << err.what() << "\n";
    return kExitConvergence;
  } catch (const ParseError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitInvalid;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitInvalid;
  }
}
