#pragma once

// Motion trials: data model, the .trial text format (docs/trial-format.md),
// segmentation, contact phases, trial speed and subject splits.

#include <algorithm>
#include <array>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gaitdyn/signal.hpp"
#include "gaitdyn/skeleton.hpp"

namespace gaitdyn {

enum class Activity {
  Walking,
  Running,
  Stairs,
  SitToStand,
  Jumping,
  Squatting,
  Standing,
  Transition,
  Other
};

inline constexpr std::array<const char*, 9> kActivityNames = {
    "walking",  "running",   "stairs",     "sit_to_stand", "jumping",
    "squatting", "standing", "transition", "other"};

inline std::string to_string(Activity a) { return kActivityNames[static_cast<int>(a)]; }

inline Activity parse_activity(const std::string& s) {
  for (std::size_t i = 0; i < kActivityNames.size(); ++i)
    if (s == kActivityNames[i]) return static_cast<Activity>(i);
  throw InputError("unknown activity label '" + s + "'");
}

enum class Sex { Female, Male, Other };

inline std::string to_string(Sex s) {
  switch (s) {
    case Sex::Female: return "female";
    case Sex::Male: return "male";
    default: return "other";
  }
}

inline Sex parse_sex(const std::string& s) {
  if (s == "female") return Sex::Female;
  if (s == "male") return Sex::Male;
  if (s == "other") return Sex::Other;
  throw InputError("unknown sex '" + s + "'");
}

struct SubjectMeta {
  double mass_kg = 70.0;
  double height_m = 1.75;
  std::optional<double> age;
  std::optional<Sex> sex;

  double body_weight() const { return mass_kg * kGravity; }
  bool operator==(const SubjectMeta&) const = default;
};

struct Frame {
  std::vector<std::optional<Vec3>> markers;  // aligned with Trial::marker_names
  VecX wrenches;  // 6 per contact body: (moment; force) at the body origin
  bool force_observed = true;
  bool grf_valid = true;

  Vec6 wrench(int contact) const { return wrenches.segment<6>(6 * contact); }
  int observed_marker_count() const {
    return static_cast<int>(std::count_if(markers.begin(), markers.end(),
                                          [](const auto& m) { return m.has_value(); }));
  }
};

// Unobserved wrenches may hold NaN, so equality treats NaN as equal to NaN.
inline bool operator==(const Frame& a, const Frame& b) {
  if (a.markers != b.markers || a.force_observed != b.force_observed ||
      a.grf_valid != b.grf_valid || a.wrenches.size() != b.wrenches.size())
    return false;
  for (Eigen::Index i = 0; i < a.wrenches.size(); ++i) {
    const double x = a.wrenches[i], y = b.wrenches[i];
    if (!(x == y || (std::isnan(x) && std::isnan(y)))) return false;
  }
  return true;
}

struct Trial {
  std::string subject_id;
  std::string skeleton;  // skeleton name or path the trial was captured against
  SubjectMeta subject;
  double dt = 0.01;
  Activity activity = Activity::Other;
  bool treadmill = false;
  int start_frame = 0;  // index of frame 0 within the source recording
  std::vector<std::string> marker_names;
  std::vector<std::string> contact_names;
  std::vector<Frame> frames;

  int frame_count() const { return static_cast<int>(frames.size()); }
  int contact_count() const { return static_cast<int>(contact_names.size()); }
  bool operator==(const Trial&) const = default;
};

/// Structural checks shared by the loader and by every consumer.
inline void validate_trial(const Trial& trial) {
  require(trial.dt > 0.0 && std::isfinite(trial.dt), "trial dt must be positive");
  require(trial.subject.mass_kg > 0.0 && trial.subject.height_m > 0.0,
          "subject mass and height must be positive");
  require(trial.start_frame >= 0, "start frame must be non-negative");
  const std::size_t nm = trial.marker_names.size();
  const Eigen::Index nw = 6 * static_cast<Eigen::Index>(trial.contact_names.size());
  for (std::size_t t = 0; t < trial.frames.size(); ++t) {
    const Frame& f = trial.frames[t];
    if (f.markers.size() != nm)
      throw SchemaError("frame " + std::to_string(t) + " has " +
                        std::to_string(f.markers.size()) + " markers, expected " +
                        std::to_string(nm));
    if (f.wrenches.size() != nw)
      throw SchemaError("frame " + std::to_string(t) + " wrench size mismatch");
    for (const auto& m : f.markers)
      require(!m || m->allFinite(), "marker positions must be finite");
    require(!f.force_observed || f.wrenches.allFinite(),
            "observed frame " + std::to_string(t) + " has a non-finite wrench");
  }
}

/// Checks that the trial's marker and contact columns line up with `skel`.
inline void check_trial_matches(const Skeleton& skel, const Trial& trial) {
  if (static_cast<int>(trial.marker_names.size()) != skel.marker_count())
    throw SchemaError("trial has " + std::to_string(trial.marker_names.size()) +
                      " markers, skeleton '" + skel.name() + "' has " +
                      std::to_string(skel.marker_count()));
  for (int i = 0; i < skel.marker_count(); ++i)
    if (trial.marker_names[i] != skel.markers()[i].name)
      throw SchemaError("marker " + std::to_string(i) + " is '" + trial.marker_names[i] +
                        "', skeleton expects '" + skel.markers()[i].name + "'");
  const auto& cb = skel.contact_bodies();
  if (trial.contact_names.size() != cb.size())
    throw SchemaError("contact body count differs from skeleton");
  for (std::size_t i = 0; i < cb.size(); ++i)
    if (trial.contact_names[i] != skel.bodies()[cb[i]].name)
      throw SchemaError("contact body '" + trial.contact_names[i] + "' does not match skeleton");
}

/// Marker observations as a T x 3M matrix with NaN for occluded markers.
inline MatX marker_matrix(const Trial& trial) {
  const int nm = static_cast<int>(trial.marker_names.size());
  MatX out(trial.frame_count(), 3 * nm);
  for (int t = 0; t < trial.frame_count(); ++t)
    for (int i = 0; i < nm; ++i) {
      const auto& m = trial.frames[t].markers[i];
      out.block<1, 3>(t, 3 * i) =
          m ? Eigen::RowVector3d(m->transpose()) : Eigen::RowVector3d::Constant(std::nan(""));
    }
  return out;
}

// ---------------------------------------------------------------------------
// .trial text format

namespace detail {

inline const std::array<const char*, 6> kWrenchSuffix = {"mx", "my", "mz", "fx", "fy", "fz"};

inline std::string join(const std::vector<std::string>& v, char sep) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += sep;
    out += v[i];
  }
  return out;
}

inline std::vector<std::string> trial_columns(const Trial& trial) {
  std::vector<std::string> cols{"time"};
  for (const auto& m : trial.marker_names)
    for (const char* ax : {"x", "y", "z"}) cols.push_back(m + "_" + ax);
  for (const auto& c : trial.contact_names)
    for (const char* s : kWrenchSuffix) cols.push_back(c + "_" + s);
  cols.push_back("force_observed");
  cols.push_back("grf_valid");
  return cols;
}

inline bool valid_name(const std::string& s) {
  if (s.empty()) return false;
  return std::all_of(s.begin(), s.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
  });
}

}  // namespace detail

inline void write_trial(const Trial& trial, std::ostream& out) {
  validate_trial(trial);
  for (const auto& n : trial.marker_names)
    require(detail::valid_name(n), "invalid marker name '" + n + "'");
  for (const auto& n : trial.contact_names)
    require(detail::valid_name(n), "invalid contact name '" + n + "'");
  require(detail::valid_name(trial.subject_id), "invalid subject id");
  require(detail::valid_name(trial.skeleton), "invalid skeleton reference");
  out << "# gaitdyn-trial 1\n";
  out << "subject_id: " << trial.subject_id << "\n";
  out << "skeleton: " << trial.skeleton << "\n";
  out << "activity: " << to_string(trial.activity) << "\n";
  out << "treadmill: " << (trial.treadmill ? "true" : "false") << "\n";
  out << "mass_kg: " << format_double(trial.subject.mass_kg) << "\n";
  out << "height_m: " << format_double(trial.subject.height_m) << "\n";
  if (trial.subject.age) out << "age: " << format_double(*trial.subject.age) << "\n";
  if (trial.subject.sex) out << "sex: " << to_string(*trial.subject.sex) << "\n";
  out << "dt: " << format_double(trial.dt) << "\n";
  out << "start_frame: " << trial.start_frame << "\n";
  out << "markers: " << detail::join(trial.marker_names, ',') << "\n";
  out << "contacts: " << detail::join(trial.contact_names, ',') << "\n";
  out << "frames: " << trial.frame_count() << "\n";
  out << "---\n";
  out << detail::join(detail::trial_columns(trial), ',') << "\n";
  std::string row;
  for (int t = 0; t < trial.frame_count(); ++t) {
    const Frame& f = trial.frames[t];
    row = format_double((trial.start_frame + t) * trial.dt);
    for (const auto& m : f.markers)
      for (int k = 0; k < 3; ++k) {
        row += ',';
        if (m) row += format_double((*m)[k]);
      }
    for (Eigen::Index k = 0; k < f.wrenches.size(); ++k) {
      row += ',';
      if (!std::isnan(f.wrenches[k])) row += format_double(f.wrenches[k]);
    }
    row += f.force_observed ? ",1" : ",0";
    row += f.grf_valid ? ",1" : ",0";
    out << row << "\n";
  }
}

inline Trial read_trial(std::istream& in) {
  Trial trial;
  std::string line;
  std::size_t ln = 0;
  auto next = [&]() {
    if (!std::getline(in, line)) throw ParseError("unexpected end of file", ln + 1);
    ++ln;
    if (!line.empty() && line.back() == '\r') line.pop_back();
  };
  next();
  if (line != "# gaitdyn-trial 1") throw ParseError("missing '# gaitdyn-trial 1' header", ln);

  std::map<std::string, std::pair<std::string, std::size_t>> header;
  for (;;) {
    next();
    if (line == "---") break;
    const auto colon = line.find(": ");
    if (colon == std::string::npos) throw ParseError("expected 'key: value'", ln);
    std::string key = line.substr(0, colon);
    if (header.count(key)) throw ParseError("duplicate header key '" + key + "'", ln);
    header[key] = {line.substr(colon + 2), ln};
  }
  static const std::set<std::string> known = {
      "subject_id", "skeleton", "activity", "treadmill", "mass_kg", "height_m", "age",
      "sex",        "dt",       "start_frame", "markers", "contacts", "frames"};
  for (const auto& [k, v] : header)
    if (!known.count(k)) throw ParseError("unknown header key '" + k + "'", v.second);
  auto field = [&](const std::string& key) -> const std::pair<std::string, std::size_t>& {
    auto it = header.find(key);
    if (it == header.end()) throw ParseError("missing header key '" + key + "'", ln);
    return it->second;
  };
  auto as_int = [](const std::pair<std::string, std::size_t>& f) {
    int v = 0;
    auto r = std::from_chars(f.first.data(), f.first.data() + f.first.size(), v);
    if (r.ec != std::errc() || r.ptr != f.first.data() + f.first.size())
      throw ParseError("bad integer '" + f.first + "'", f.second);
    return v;
  };
  auto names = [](const std::string& s) {
    std::vector<std::string> out;
    if (s.empty()) return out;
    for (auto v : split_view(s, ',')) out.emplace_back(v);
    return out;
  };
  try {
    trial.subject_id = field("subject_id").first;
    trial.skeleton = field("skeleton").first;
    trial.activity = parse_activity(field("activity").first);
    trial.subject.sex = header.count("sex")
                            ? std::optional<Sex>(parse_sex(header["sex"].first))
                            : std::nullopt;
  } catch (const InputError& e) {
    throw ParseError(e.what(), ln);
  }
  const auto& tm = field("treadmill");
  if (tm.first != "true" && tm.first != "false")
    throw ParseError("treadmill must be true or false", tm.second);
  trial.treadmill = tm.first == "true";
  trial.subject.mass_kg = parse_double(field("mass_kg").first, field("mass_kg").second);
  trial.subject.height_m = parse_double(field("height_m").first, field("height_m").second);
  if (header.count("age")) trial.subject.age = parse_double(header["age"].first, header["age"].second);
  trial.dt = parse_double(field("dt").first, field("dt").second);
  trial.start_frame = as_int(field("start_frame"));
  trial.marker_names = names(field("markers").first);
  trial.contact_names = names(field("contacts").first);
  const int frames = as_int(field("frames"));
  if (frames < 0) throw ParseError("negative frame count", field("frames").second);

  next();
  const auto cols = detail::trial_columns(trial);
  if (line != detail::join(cols, ','))
    throw ParseError("column header does not match the declared markers and contacts", ln);

  const int nm = static_cast<int>(trial.marker_names.size());
  const int nc = trial.contact_count();
  trial.frames.reserve(frames);
  for (int t = 0; t < frames; ++t) {
    next();
    const auto cells = split_view(line, ',');
    if (cells.size() != cols.size())
      throw ParseError("expected " + std::to_string(cols.size()) + " cells, found " +
                           std::to_string(cells.size()),
                       ln);
    const double time = parse_double(cells[0], ln);
    const double expect = (trial.start_frame + t) * trial.dt;
    if (std::abs(time - expect) > 1e-9 * std::max(1.0, std::abs(expect)))
      throw ParseError("time column disagrees with dt and start_frame", ln);
    Frame f;
    f.markers.resize(nm);
    std::size_t c = 1;
    for (int i = 0; i < nm; ++i, c += 3) {
      const int empty = cells[c].empty() + cells[c + 1].empty() + cells[c + 2].empty();
      if (empty == 3) continue;
      if (empty != 0) throw ParseError("partially occluded marker '" + trial.marker_names[i] + "'", ln);
      Vec3 p(parse_double(cells[c], ln), parse_double(cells[c + 1], ln),
             parse_double(cells[c + 2], ln));
      if (!p.allFinite()) throw ParseError("non-finite marker position", ln);
      f.markers[i] = p;
    }
    f.wrenches.resize(6 * nc);
    for (int k = 0; k < 6 * nc; ++k, ++c)
      f.wrenches[k] = cells[c].empty() ? std::nan("") : parse_double(cells[c], ln);
    auto flag = [&](std::string_view s) {
      if (s == "1") return true;
      if (s == "0") return false;
      throw ParseError("flag must be 0 or 1", ln);
    };
    f.force_observed = flag(cells[c]);
    f.grf_valid = flag(cells[c + 1]);
    if (f.force_observed && !f.wrenches.allFinite())
      throw ParseError("observed frame has a missing or non-finite wrench", ln);
    trial.frames.push_back(std::move(f));
  }
  if (std::getline(in, line) && !line.empty())
    throw ParseError("trailing data after the declared frames", ln + 1);
  try {
    validate_trial(trial);
  } catch (const InputError& e) {
    throw SchemaError(e.what());
  }
  return trial;
}

inline Trial load_trial(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open trial file " + path);
  return read_trial(in);
}

inline void save_trial(const Trial& trial, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write trial file " + path);
  write_trial(trial, out);
}

// ---------------------------------------------------------------------------
// Segmentation

inline constexpr int kMaxSegmentFrames = 2000;
inline constexpr int kMinTrialFrames = 12;

struct DroppedFrames {
  std::string subject_id;
  int start_frame = 0;  // in the source recording
  int frames = 0;
};

struct Segmentation {
  std::vector<Trial> segments;
  std::vector<DroppedFrames> dropped;
};

/// Cuts a trial into consecutive pieces of at most `max_len` frames. A piece
/// shorter than the minimum trial length is dropped and reported.
inline Segmentation segment_trial(const Trial& trial, int max_len = kMaxSegmentFrames) {
  require(max_len >= kMinTrialFrames, "segment length must be at least the minimum trial length");
  Segmentation out;
  for (int s = 0; s < trial.frame_count(); s += max_len) {
    const int len = std::min(max_len, trial.frame_count() - s);
    if (len < kMinTrialFrames) {
      out.dropped.push_back({trial.subject_id, trial.start_frame + s, len});
      continue;
    }
    Trial seg = trial;
    seg.frames.assign(trial.frames.begin() + s, trial.frames.begin() + s + len);
    seg.start_frame = trial.start_frame + s;
    out.segments.push_back(std::move(seg));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Contact phases

enum class ContactPhase { Double, SingleLeft, SingleRight, Flight };

inline std::string to_string(ContactPhase p) {
  switch (p) {
    case ContactPhase::Double: return "double";
    case ContactPhase::SingleLeft: return "single_left";
    case ContactPhase::SingleRight: return "single_right";
    default: return "flight";
  }
}

/// A foot is loaded when its vertical force exceeds
/// max(floor_n, bw_fraction * body weight).
struct ContactThreshold {
  double floor_n = 10.0;
  double bw_fraction = 0.02;

  double newtons(double body_weight_n) const {
    return std::max(floor_n, bw_fraction * body_weight_n);
  }
};

/// Frames whose forces are unobserved.
inline std::vector<int> unobserved_frames(const Trial& trial) {
  std::vector<int> u;
  for (int t = 0; t < trial.frame_count(); ++t)
    if (!trial.frames[t].force_observed) u.push_back(t);
  return u;
}

/// Vertical is +y. Contact 0 is the left foot and contact 1 the right.
inline std::array<bool, 2> foot_loaded(const Frame& frame, double body_weight_n,
                                       const ContactThreshold& th = {}) {
  require(frame.wrenches.size() == 12, "contact classification needs exactly two contact bodies");
  require(frame.wrenches.allFinite(), "contact classification needs finite wrenches");
  const double limit = th.newtons(body_weight_n);
  return {frame.wrenches[4] > limit, frame.wrenches[10] > limit};
}

inline ContactPhase classify_contact(const Frame& frame, double body_weight_n,
                                     const ContactThreshold& th = {}) {
  const auto on = foot_loaded(frame, body_weight_n, th);
  if (on[0] && on[1]) return ContactPhase::Double;
  if (on[0]) return ContactPhase::SingleLeft;
  if (on[1]) return ContactPhase::SingleRight;
  return ContactPhase::Flight;
}

// ---------------------------------------------------------------------------
// Trial speed

/// Overground: mean norm of the filtered CoM velocity. Treadmill: mean over
/// stance phases of horizontal ankle joint center travel divided by stance
/// duration, averaged per side and then across sides. `poses` is T x N.
inline double average_trial_speed(const Skeleton& skel, const Trial& trial, const MatX& poses,
                                  const ContactThreshold& th = {}) {
  validate_trial(trial);
  require(poses.rows() == trial.frame_count() && poses.cols() == skel.dofs(),
          "poses must be frames x dofs");
  const int n = trial.frame_count();
  require(n >= 3, "trial speed needs at least 3 frames");
  if (!trial.treadmill) {
    TimeSeries com{trial.dt, MatX(n, 3)};
    for (int t = 0; t < n; ++t) com.samples.row(t) = center_of_mass(skel, Pose(poses.row(t).transpose())).transpose();
    TimeSeries v = central_difference1(com);
    if (kStandardCutoffHz < 0.5 / trial.dt) v = butterworth_lowpass(v, kStandardCutoffHz);
    return v.samples.rowwise().norm().mean();
  }
  require(trial.contact_count() == 2, "treadmill speed needs two contact bodies");
  const double bw = trial.subject.body_weight();
  double side_sum = 0.0;
  int sides = 0;
  for (int side = 0; side < 2; ++side) {
    const int body = skel.contact_bodies()[side];
    double sum = 0.0;
    int count = 0;
    int t = 0;
    while (t < n) {
      auto loaded = [&](int k) {
        const Frame& f = trial.frames[k];
        return f.force_observed && foot_loaded(f, bw, th)[side];
      };
      if (!loaded(t)) {
        ++t;
        continue;
      }
      int e = t;
      while (e + 1 < n && loaded(e + 1)) ++e;
      if (e > t) {
        auto ankle = [&](int k) {
          return joint_center(skel, kinematic_state(skel, Pose(poses.row(k).transpose())), body);
        };
        Vec3 d = ankle(e) - ankle(t);
        d.y() = 0.0;
        sum += d.norm() / ((e - t) * trial.dt);
        ++count;
      }
      t = e + 1;
    }
    if (count) {
      side_sum += sum / count;
      ++sides;
    }
  }
  if (!sides) throw DiagnosticError("no stance phase detected on treadmill trial");
  return side_sum / sides;
}

// ---------------------------------------------------------------------------
// Subject splits

struct SubjectSplit {
  std::uint64_t seed = 0;
  std::array<double, 3> ratios{0.90, 0.05, 0.05};
  std::map<std::string, std::string> assignment;  // subject -> train|dev|test

  std::vector<std::string> subjects_in(const std::string& split) const {
    std::vector<std::string> out;
    for (const auto& [s, a] : assignment)
      if (a == split) out.push_back(s);
    return out;
  }
  bool operator==(const SubjectSplit&) const = default;
};

/// Partitions subjects (never trials) into train/dev/test. Subjects are
/// sorted, shuffled by a seeded Fisher-Yates pass over mt19937_64 output and
/// cut by rounded ratios, with at least one subject in each split.
inline SubjectSplit subject_split(const std::vector<std::string>& subject_ids,
                                  std::array<double, 3> ratios, std::uint64_t seed) {
  std::set<std::string> uniq(subject_ids.begin(), subject_ids.end());
  require(uniq.size() >= 3, "subject split needs at least 3 distinct subjects");
  require(std::all_of(ratios.begin(), ratios.end(), [](double r) { return r > 0.0; }) &&
              std::abs(ratios[0] + ratios[1] + ratios[2] - 1.0) < 1e-9,
          "split ratios must be positive and sum to 1");
  std::vector<std::string> ids(uniq.begin(), uniq.end());
  std::mt19937_64 rng(seed);
  for (std::size_t i = ids.size() - 1; i > 0; --i) std::swap(ids[i], ids[rng() % (i + 1)]);
  const int n = static_cast<int>(ids.size());
  int dev = std::max(1, static_cast<int>(std::lround(ratios[1] * n)));
  int test = std::max(1, static_cast<int>(std::lround(ratios[2] * n)));
  while (n - dev - test < 1) (dev >= test ? dev : test)--;
  SubjectSplit out;
  out.seed = seed;
  out.ratios = ratios;
  for (int i = 0; i < n; ++i)
    out.assignment[ids[i]] = i < n - dev - test ? "train" : (i < n - test ? "dev" : "test");
  return out;
}

inline SubjectSplit subject_split(const std::vector<Trial>& trials,
                                  std::array<double, 3> ratios, std::uint64_t seed) {
  std::vector<std::string> ids;
  for (const auto& t : trials) ids.push_back(t.subject_id);
  return subject_split(ids, ratios, seed);
}

inline nlohmann::json split_to_json(const SubjectSplit& s) {
  nlohmann::json counts = {{"train", s.subjects_in("train").size()},
                           {"dev", s.subjects_in("dev").size()},
                           {"test", s.subjects_in("test").size()}};
  return {{"format", "gaitdyn-split"},
          {"version", 1},
          {"seed", s.seed},
          {"ratios", s.ratios},
          {"counts", counts},
          {"subjects", s.assignment}};
}

inline SubjectSplit split_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format") != "gaitdyn-split" || j.at("version") != 1)
      throw SchemaError("not a version 1 gaitdyn-split document");
    SubjectSplit s;
    s.seed = j.at("seed").get<std::uint64_t>();
    s.ratios = j.at("ratios").get<std::array<double, 3>>();
    s.assignment = j.at("subjects").get<std::map<std::string, std::string>>();
    for (const auto& [k, v] : s.assignment)
      if (v != "train" && v != "dev" && v != "test")
        throw SchemaError("subject '" + k + "' assigned to unknown split '" + v + "'");
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("split document: ") + e.what());
  }
}

inline void save_split(const SubjectSplit& s, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write split file " + path);
  out << split_to_json(s).dump(2) << "\n";
}

inline SubjectSplit load_split(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open split file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(e.what(), 0);
  }
  return split_from_json(j);
}

}  // namespace gaitdyn
