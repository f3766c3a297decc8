#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "gaitdyn/models.hpp"
#include "gaitdyn/trial.hpp"
#include "test_util.hpp"

namespace gaitdyn {
namespace {

Trial random_trial(const Skeleton& skel, int frames, std::mt19937_64& rng) {
  std::normal_distribution<double> n01;
  std::uniform_real_distribution<double> u01;
  Trial t;
  t.subject_id = "S07";
  t.skeleton = skel.name();
  t.subject = {71.5, 1.81, 33.0, Sex::Female};
  t.dt = 0.01;
  t.activity = Activity::Running;
  t.treadmill = true;
  t.start_frame = 40;
  for (const auto& m : skel.markers()) t.marker_names.push_back(m.name);
  for (int c : skel.contact_bodies()) t.contact_names.push_back(skel.bodies()[c].name);
  for (int k = 0; k < frames; ++k) {
    Frame f;
    for (int i = 0; i < skel.marker_count(); ++i) {
      if (u01(rng) < 0.1) {
        f.markers.emplace_back();
      } else {
        f.markers.emplace_back(Vec3(n01(rng), n01(rng), n01(rng)) / 3.0);
      }
    }
    f.force_observed = u01(rng) > 0.2;
    f.grf_valid = u01(rng) > 0.1;
    f.wrenches = testing::random_vector(6 * t.contact_count(), rng, 300.0);
    if (!f.force_observed && u01(rng) < 0.5) f.wrenches.setConstant(std::nan(""));
    t.frames.push_back(std::move(f));
  }
  return t;
}

Trial blank_trial(int frames) {
  Trial t;
  t.subject_id = "S01";
  t.skeleton = "biped12";
  t.contact_names = {"l_foot", "r_foot"};
  t.frames.assign(frames, Frame{{}, VecX::Zero(12), true, true});
  return t;
}

std::string serialize(const Trial& t) {
  std::ostringstream os;
  write_trial(t, os);
  return os.str();
}

Trial parse(const std::string& s) {
  std::istringstream is(s);
  return read_trial(is);
}

TEST(TrialFormat, RoundTripRandomTrials) {
  std::mt19937_64 rng(5);
  const Skeleton skel = make_biped12();
  for (int rep = 0; rep < 20; ++rep) {
    Trial t = random_trial(skel, 30 + rep, rng);
    if (rep % 2) {
      t.subject.age.reset();
      t.subject.sex.reset();
    }
    const std::string text = serialize(t);
    Trial back = parse(text);
    EXPECT_EQ(back, t);
    EXPECT_EQ(serialize(back), text);
  }
}

TEST(TrialFormat, GoldenFileLoadsAndRoundTrips) {
  const std::string path = testing::source_path("tests/data/walk_short.trial");
  Trial t = load_trial(path);
  EXPECT_EQ(t.frame_count(), 120);
  EXPECT_EQ(t.contact_count(), 2);
  check_trial_matches(make_biped12(), t);
  std::ifstream in(path, std::ios::binary);
  std::stringstream raw;
  raw << in.rdbuf();
  EXPECT_EQ(serialize(t), raw.str());
}

TEST(TrialFormat, NanForceOnObservedFrameRejected) {
  std::mt19937_64 rng(6);
  Trial t = random_trial(make_biped12(), 5, rng);
  for (auto& f : t.frames) f.force_observed = true, f.wrenches.setOnes();
  std::string text = serialize(t);
  // blank the first wrench cell of the last row
  const auto row = text.rfind('\n', text.size() - 2) + 1;
  const std::string line = text.substr(row);
  auto cells = split_view(line, ',');
  const std::size_t first_wrench = 1 + 3 * t.marker_names.size();
  std::string edited;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) edited += ',';
    edited += i == first_wrench ? "nan" : std::string(cells[i]);
  }
  try {
    parse(text.substr(0, row) + edited);
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    const std::size_t header_lines = 16;  // magic, 13 keys, separator, columns
    EXPECT_EQ(e.line(), header_lines + t.frame_count());
  }
}

TEST(TrialFormat, MalformedInputsReportLine) {
  std::mt19937_64 rng(7);
  Trial t = random_trial(make_freebox6(), 4, rng);
  const std::string good = serialize(t);
  auto expect_line = [&](std::string text, std::size_t line) {
    try {
      parse(text);
      FAIL() << "accepted malformed text";
    } catch (const ParseError& e) {
      EXPECT_EQ(e.line(), line) << e.what();
    }
  };
  expect_line("# something else\n", 1);
  std::string bad_key = good;
  bad_key.replace(bad_key.find("mass_kg"), 7, "mass_lb");
  expect_line(bad_key, 6);
  std::string short_row = good.substr(0, good.size() - 1);
  short_row = short_row.substr(0, short_row.rfind(',')) + "\n";
  expect_line(short_row, 16 + 4);
  std::string bad_number = good;
  bad_number.replace(bad_number.find("dt: 0.01"), 8, "dt: 0.0x");
  expect_line(bad_number, 10);
}

TEST(TrialFormat, MarkerMismatchIsSchemaError) {
  std::mt19937_64 rng(8);
  Trial t = random_trial(make_freebox6(), 3, rng);
  EXPECT_THROW(check_trial_matches(make_biped12(), t), SchemaError);
  t.frames[1].markers.pop_back();
  EXPECT_THROW(validate_trial(t), SchemaError);
}

TEST(Segmentation, Examples) {
  auto sizes = [](const Segmentation& s) {
    std::vector<int> v;
    for (const auto& t : s.segments) v.push_back(t.frame_count());
    return v;
  };
  Segmentation a = segment_trial(blank_trial(4500));
  EXPECT_EQ(sizes(a), (std::vector<int>{2000, 2000, 500}));
  EXPECT_TRUE(a.dropped.empty());
  Segmentation b = segment_trial(blank_trial(2000));
  ASSERT_EQ(b.segments.size(), 1u);
  EXPECT_EQ(b.segments[0], blank_trial(2000));
  Segmentation c = segment_trial(blank_trial(2005));
  EXPECT_EQ(sizes(c), (std::vector<int>{2000}));
  ASSERT_EQ(c.dropped.size(), 1u);
  EXPECT_EQ(c.dropped[0].frames, 5);
  EXPECT_EQ(c.dropped[0].start_frame, 2000);
  EXPECT_EQ(segment_trial(blank_trial(11)).segments.size(), 0u);
}

TEST(Segmentation, ConcatenationIsSourcePrefix) {
  std::mt19937_64 rng(9);
  const Skeleton skel = make_freebox6();
  for (int n : {12, 13, 57, 100, 131}) {
    Trial t = random_trial(skel, n, rng);
    Segmentation s = segment_trial(t, 20);
    std::vector<Frame> joined;
    int dropped = 0;
    for (const auto& seg : s.segments) {
      EXPECT_EQ(seg.start_frame, t.start_frame + static_cast<int>(joined.size()));
      EXPECT_LE(seg.frame_count(), 20);
      EXPECT_GE(seg.frame_count(), kMinTrialFrames);
      joined.insert(joined.end(), seg.frames.begin(), seg.frames.end());
    }
    for (const auto& d : s.dropped) dropped += d.frames;
    EXPECT_EQ(static_cast<int>(joined.size()) + dropped, n);
    EXPECT_TRUE(std::equal(joined.begin(), joined.end(), t.frames.begin()));
  }
}

Frame feet(double left_fy, double right_fy) {
  Frame f{{}, VecX::Zero(12), true, true};
  f.wrenches[4] = left_fy;
  f.wrenches[10] = right_fy;
  return f;
}

TEST(ContactPhase, Examples) {
  EXPECT_EQ(classify_contact(feet(0, 0), 700), ContactPhase::Flight);
  EXPECT_EQ(classify_contact(feet(400, 0), 700), ContactPhase::SingleLeft);
  EXPECT_EQ(classify_contact(feet(0, 400), 700), ContactPhase::SingleRight);
  EXPECT_EQ(classify_contact(feet(300, 350), 700), ContactPhase::Double);
  // threshold is max(10 N, 2% BW): 14 N here
  EXPECT_EQ(classify_contact(feet(13, 15), 700), ContactPhase::SingleRight);
  EXPECT_EQ(classify_contact(feet(11, 0), 100), ContactPhase::SingleLeft);
  Frame three{{}, VecX::Zero(18), true, true};
  EXPECT_THROW(classify_contact(three, 700), InputError);
}

TEST(TrialSpeed, StationaryAndConstantVelocity) {
  const Skeleton skel = make_biped12();
  Trial t = blank_trial(50);
  for (const auto& m : skel.markers()) t.marker_names.push_back(m.name);
  for (auto& f : t.frames) f.markers.resize(skel.marker_count());
  std::mt19937_64 rng(10);
  const VecX q0 = testing::random_pose(skel, rng, 0.3);
  MatX poses = q0.transpose().replicate(50, 1);
  EXPECT_NEAR(average_trial_speed(skel, t, poses), 0.0, 1e-12);
  for (int k = 0; k < 50; ++k) poses(k, 3) += 1.5 * k * t.dt;
  EXPECT_NEAR(average_trial_speed(skel, t, poses), 1.5, 1e-9);
}

TEST(TrialSpeed, TreadmillWithoutStanceIsDiagnostic) {
  const Skeleton skel = make_biped12();
  Trial t = blank_trial(20);
  t.treadmill = true;
  MatX poses = MatX::Zero(20, skel.dofs());
  EXPECT_THROW(average_trial_speed(skel, t, poses), DiagnosticError);
}

std::vector<std::string> subject_names(int n) {
  std::vector<std::string> v;
  for (int i = 0; i < n; ++i) v.push_back("S" + std::to_string(100 + i));
  return v;
}

TEST(SubjectSplit, TwentySubjects) {
  SubjectSplit s = subject_split(subject_names(20), {0.90, 0.05, 0.05}, 1);
  EXPECT_EQ(s.subjects_in("train").size(), 18u);
  EXPECT_EQ(s.subjects_in("dev").size(), 1u);
  EXPECT_EQ(s.subjects_in("test").size(), 1u);
}

TEST(SubjectSplit, DeterministicPartition) {
  std::vector<std::string> trials_by_subject;
  for (const auto& s : subject_names(13))
    for (int k = 0; k < 3; ++k) trials_by_subject.push_back(s);
  for (std::uint64_t seed : {0ull, 7ull, 12345ull}) {
    SubjectSplit a = subject_split(trials_by_subject, {0.8, 0.1, 0.1}, seed);
    SubjectSplit b = subject_split(trials_by_subject, {0.8, 0.1, 0.1}, seed);
    EXPECT_EQ(a, b);
    EXPECT_EQ(a.assignment.size(), 13u);
    for (const auto& s : trials_by_subject) EXPECT_EQ(a.assignment.count(s), 1u);
  }
  EXPECT_NE(subject_split(subject_names(40), {0.9, 0.05, 0.05}, 1),
            subject_split(subject_names(40), {0.9, 0.05, 0.05}, 2));
}

TEST(SubjectSplit, TooFewSubjects) {
  EXPECT_THROW(subject_split(std::vector<std::string>{"a", "b", "a"}, {0.9, 0.05, 0.05}, 0),
               InputError);
  SubjectSplit s = subject_split(subject_names(3), {0.9, 0.05, 0.05}, 0);
  EXPECT_EQ(s.subjects_in("train").size(), 1u);
}

TEST(SubjectSplit, JsonRoundTrip) {
  SubjectSplit s = subject_split(subject_names(9), {0.6, 0.2, 0.2}, 99);
  EXPECT_EQ(split_from_json(nlohmann::json::parse(split_to_json(s).dump())), s);
  nlohmann::json bad = split_to_json(s);
  bad["subjects"]["S100"] = "holdout";
  EXPECT_THROW(split_from_json(bad), SchemaError);
}

}  // namespace
}  // namespace gaitdyn
