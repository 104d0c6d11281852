// Corpus plumbing: key=value files, segment labels, manifests, session
// loading, session-level splitting, and the synthetic corpus generator.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "dann/dataset.hpp"
#include "dann/kv.hpp"
#include "dann/manifest.hpp"
#include "dann/synthetic.hpp"
#include "dann/tensor_io.hpp"
#include "dann/wav.hpp"

using dann::KeyValueFile;
using dann::RngState;
using dann::Segment;
using dann::SessionManifest;
using dann::Split;
using dann::SyntheticSpec;
using dann::Tensor;

namespace fs = std::filesystem;

namespace {

/// Scratch directory wiped on construction and destruction.
struct TempDir {
  explicit TempDir(const char* name)
      : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& rel) const {
    return (path / rel).string();
  }
  fs::path path;
};

void write_text(const std::string& path, const std::string& body) {
  std::ofstream out(path);
  out << body;
}

}  // namespace

// --- key=value files ----------------------------------------------------

TEST_CASE("key=value parsing: comments, trimming, typed access") {
  std::stringstream in(
      "# a comment line\n"
      "name = corpus one \n"
      "count=42\n"
      "ratio = 0.25\n"
      "flag = true\n"
      "tags = a, b , c\n"
      "vec = 1.0 2.0, 3.0\n");
  const KeyValueFile kv = KeyValueFile::parse(in, "test");
  CHECK(kv.get_string("name", "") == "corpus one");
  CHECK(kv.get_int("count", 0) == 42);
  CHECK(kv.get_double("ratio", 0.0) == 0.25);
  CHECK(kv.get_bool("flag", false));
  CHECK(kv.get_list("tags") == std::vector<std::string>({"a", "b", "c"}));
  CHECK(kv.get_doubles("vec") == std::vector<double>({1.0, 2.0, 3.0}));
  CHECK(kv.get_string("missing", "fallback") == "fallback");
  CHECK_THROWS_AS(kv.require_string("missing"), dann::ConfigError);
}

TEST_CASE("key=value parsing errors name the key or line") {
  std::stringstream dup("a = 1\na = 2\n");
  CHECK_THROWS_WITH(KeyValueFile::parse(dup, "f"),
                    Catch::Matchers::ContainsSubstring("line 2"));
  std::stringstream bad("count = twelve\n");
  const KeyValueFile kv = KeyValueFile::parse(bad, "f");
  CHECK_THROWS_WITH(kv.get_int("count", 0),
                    Catch::Matchers::ContainsSubstring("count"));
  CHECK_THROWS_AS(kv.get_double("count", 0.0), dann::ConfigError);
}

// --- segment labels -----------------------------------------------------

TEST_CASE("segments round-trip and reject malformed lines") {
  TempDir dir("dann_test_segments");
  const std::string path = dir.file("a.seg");
  const std::vector<Segment> segs = {
      {0.1, 0.5, dann::kChild}, {0.55, 1.25, dann::kAdult}};
  dann::write_segments(path, segs);
  const auto loaded = dann::load_segments(path);
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0].start_sec == 0.1);
  CHECK(loaded[0].end_sec == 0.5);
  CHECK(loaded[0].label == dann::kChild);
  CHECK(loaded[1].label == dann::kAdult);

  write_text(path, "0.1 0.5 robot\n");
  CHECK_THROWS_WITH(dann::load_segments(path),
                    Catch::Matchers::ContainsSubstring("robot"));
  write_text(path, "0.1 0.5 child\n0.9 0.6 adult\n");
  CHECK_THROWS_WITH(dann::load_segments(path),
                    Catch::Matchers::ContainsSubstring("line 2"));
  write_text(path, "0.1 child\n");
  CHECK_THROWS_AS(dann::load_segments(path), dann::ParseError);
}

TEST_CASE("frame labels follow the exactly-one-covering-segment rule") {
  // Frame i's center is at (i+1) * 0.02 s.
  const std::vector<Segment> segs = {
      {0.1, 0.5, dann::kChild}, {0.5, 1.0, dann::kAdult}};
  const auto labels = dann::frame_labels(60, segs);
  REQUIRE(labels.size() == 60);
  for (std::size_t i = 0; i < 60; ++i) {
    const double t = static_cast<double>(i) * 0.02 + 0.02;
    int expect = -1;
    if (t >= 0.1 && t < 0.5) expect = dann::kChild;
    if (t >= 0.5 && t < 1.0) expect = dann::kAdult;
    CAPTURE(i, t);
    CHECK(labels[i] == expect);
  }
  CHECK(labels[0] == -1);   // before the first segment
  CHECK(labels[4] == dann::kChild);   // center exactly at 0.1
  CHECK(labels[24] == dann::kAdult);  // center exactly at the 0.5 boundary
  CHECK(labels[59] == -1);  // past the last segment

  // Overlap means ambiguity, so the frame goes unlabeled.
  const std::vector<Segment> overlap = {
      {0.0, 0.6, dann::kChild}, {0.4, 1.0, dann::kAdult}};
  const auto amb = dann::frame_labels(40, overlap);
  for (std::size_t i = 0; i < 40; ++i) {
    const double t = static_cast<double>(i) * 0.02 + 0.02;
    const bool in_both = t >= 0.4 && t < 0.6;
    CHECK((amb[i] == -1) == in_both);
  }
}

// --- manifests ------------------------------------------------------------

TEST_CASE("manifest round-trip with feature-path rows") {
  TempDir dir("dann_test_manifest");
  write_text(dir.file("a.dtns"), "placeholder");
  write_text(dir.file("a.seg"), "0.0 1.0 child\n");
  write_text(dir.file("b.wav"), "placeholder");
  write_text(dir.file("b.seg"), "0.0 1.0 adult\n");
  dann::write_manifest(dir.file("manifest.tsv"),
                       {{"a", "src", "feat:a.dtns", "a.seg", Split::kTrain},
                        {"b", "tgt", "b.wav", "b.seg", Split::kTest}});
  const auto rows = dann::load_manifest(dir.file("manifest.tsv"));
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].session_id == "a");
  CHECK(rows[0].domain_tag == "src");
  CHECK(rows[0].is_feature);
  CHECK(rows[0].audio == dir.file("a.dtns"));
  CHECK(rows[0].split == Split::kTrain);
  CHECK_FALSE(rows[1].is_feature);
  CHECK(rows[1].audio == dir.file("b.wav"));
  CHECK(rows[1].split == Split::kTest);
}

TEST_CASE("manifest validation failures") {
  TempDir dir("dann_test_manifest_bad");
  write_text(dir.file("a.dtns"), "x");
  write_text(dir.file("a.seg"), "0.0 1.0 child\n");
  const std::string header = "session\tdomain\taudio\tlabels\tsplit\n";

  const std::string path = dir.file("manifest.tsv");
  write_text(path, "");
  CHECK(dann::load_manifest(path).empty());

  write_text(path, "wrong\theader\n");
  CHECK_THROWS_AS(dann::load_manifest(path), dann::ParseError);

  write_text(path, header +
                       "a\tsrc\tfeat:a.dtns\ta.seg\ttrain\n"
                       "a\tsrc\tfeat:a.dtns\ta.seg\ttest\n");
  CHECK_THROWS_WITH(dann::load_manifest(path),
                    Catch::Matchers::ContainsSubstring("'a'"));

  write_text(path, header + "b\tsrc\tfeat:missing.dtns\ta.seg\ttrain\n");
  CHECK_THROWS_WITH(dann::load_manifest(path),
                    Catch::Matchers::ContainsSubstring("missing.dtns"));

  write_text(path, header + "b\tsrc\tfeat:a.dtns\ta.seg\n");
  CHECK_THROWS_WITH(dann::load_manifest(path),
                    Catch::Matchers::ContainsSubstring("line 2"));

  write_text(path, header + "b\tsrc\tfeat:a.dtns\ta.seg\tdev\n");
  CHECK_THROWS_WITH(dann::load_manifest(path),
                    Catch::Matchers::ContainsSubstring("dev"));
}

// --- session loading ------------------------------------------------------

TEST_CASE("load_session from precomputed features applies cmvn and splices") {
  TempDir dir("dann_test_load_feat");
  RngState rng(5);
  Tensor feats({100, 23});
  for (double& v : feats.values()) v = 1.5 + 0.5 * rng.normal();
  dann::save_tensor(dir.file("s.dtns"), feats);
  write_text(dir.file("s.seg"), "0.0 1.2 child\n1.2 2.5 adult\n");
  dann::write_manifest(dir.file("m.tsv"),
                       {{"s", "src", "feat:s.dtns", "s.seg", Split::kTrain}});

  const auto sessions = dann::load_sessions(dann::load_manifest(dir.file("m.tsv")));
  REQUIRE(sessions.size() == 1);
  const auto& s = sessions[0];
  CHECK(s.session_id == "s");
  CHECK(s.n_frames == 100);
  CHECK_FALSE(s.too_short);
  REQUIRE(s.samples.size() == 5);  // centers 15, 30, 45, 60, 75 all labeled

  // Reproduce the expected windows by normalizing a copy by hand.
  Tensor expect = feats;
  dann::cmvn_session(expect);
  const std::size_t centers[5] = {15, 30, 45, 60, 75};
  for (std::size_t k = 0; k < 5; ++k) {
    CHECK(s.samples[k].center == centers[k]);
    const int want_label =
        (static_cast<double>(centers[k]) * 0.02 + 0.02) < 1.2 ? dann::kChild
                                                              : dann::kAdult;
    CHECK(s.samples[k].label == want_label);
    for (std::size_t r = 0; r < 31; ++r) {
      for (std::size_t j = 0; j < 23; ++j) {
        CHECK(s.samples[k].window(r, j) == expect(centers[k] - 15 + r, j));
      }
    }
  }
}

TEST_CASE("load_session rejects rank-1 feature files and tiny sessions") {
  TempDir dir("dann_test_load_bad");
  dann::save_tensor(dir.file("v.dtns"), Tensor({7}, {1, 2, 3, 4, 5, 6, 7}));
  write_text(dir.file("v.seg"), "0.0 1.0 child\n");
  SessionManifest m;
  m.session_id = "v";
  m.domain_tag = "src";
  m.audio = dir.file("v.dtns");
  m.is_feature = true;
  m.labels = dir.file("v.seg");
  CHECK_THROWS_AS(dann::load_session(m), dann::FormatError);

  dann::save_tensor(dir.file("v.dtns"), Tensor({1, 23}));
  CHECK_THROWS_WITH(dann::load_session(m),
                    Catch::Matchers::ContainsSubstring("'v'"));
}

TEST_CASE("load_session from wav goes through the frontend") {
  TempDir dir("dann_test_load_wav");
  std::vector<double> samples(16000);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    samples[i] = 0.4 * std::sin(2.0 * M_PI * 220.0 * static_cast<double>(i) / 16000.0) +
                 0.1 * std::sin(2.0 * M_PI * 1750.0 * static_cast<double>(i) / 16000.0);
  }
  dann::write_wav(dir.file("w.wav"), samples, 16000);
  write_text(dir.file("w.seg"), "0.0 1.0 adult\n");
  dann::write_manifest(dir.file("m.tsv"),
                       {{"w", "tgt", "w.wav", "w.seg", Split::kTrain}});
  const auto sessions =
      dann::load_sessions(dann::load_manifest(dir.file("m.tsv")));
  REQUIRE(sessions.size() == 1);
  CHECK(sessions[0].n_frames == 49);
  REQUIRE(sessions[0].samples.size() == 2);  // centers 15 and 30
  CHECK(sessions[0].samples[0].label == dann::kAdult);
  CHECK(sessions[0].samples[0].window.cols() == 23);
}

TEST_CASE("a wav shorter than one frame loads as an empty session") {
  TempDir dir("dann_test_load_short");
  dann::write_wav(dir.file("w.wav"), std::vector<double>(500, 0.1), 16000);
  write_text(dir.file("w.seg"), "0.0 1.0 adult\n");
  SessionManifest m;
  m.session_id = "w";
  m.domain_tag = "src";
  m.audio = dir.file("w.wav");
  m.labels = dir.file("w.seg");
  const auto s = dann::load_session(m);
  CHECK(s.too_short);
  CHECK(s.samples.empty());
}

TEST_CASE("parallel session loading matches single-threaded loading") {
  TempDir dir("dann_test_load_parallel");
  std::vector<dann::ManifestRow> rows;
  RngState rng(17);
  for (int i = 0; i < 6; ++i) {
    const std::string sid = "s" + std::to_string(i);
    Tensor feats({60, 23});
    for (double& v : feats.values()) v = rng.normal();
    dann::save_tensor(dir.file(sid + ".dtns"), feats);
    write_text(dir.file(sid + ".seg"), "0.0 0.7 child\n0.7 1.3 adult\n");
    rows.push_back({sid, i % 2 ? "src" : "tgt", "feat:" + sid + ".dtns",
                    sid + ".seg", Split::kTrain});
  }
  dann::write_manifest(dir.file("m.tsv"), rows);
  const auto manifests = dann::load_manifest(dir.file("m.tsv"));
  const auto serial = dann::load_sessions(manifests, {}, 31, 1);
  const auto parallel = dann::load_sessions(manifests, {}, 31, 3);
  REQUIRE(serial.size() == parallel.size());
  for (std::size_t i = 0; i < serial.size(); ++i) {
    CHECK(serial[i].session_id == parallel[i].session_id);
    REQUIRE(serial[i].samples.size() == parallel[i].samples.size());
    for (std::size_t k = 0; k < serial[i].samples.size(); ++k) {
      CHECK(serial[i].samples[k].window.values() ==
            parallel[i].samples[k].window.values());
    }
  }
}

TEST_CASE("strip_speaker_labels blanks labels but keeps samples") {
  dann::LoadedSession s;
  s.samples.resize(3);
  s.samples[0].label = dann::kChild;
  s.samples[1].label = dann::kAdult;
  s.samples[2].label = dann::kChild;
  dann::strip_speaker_labels(s);
  CHECK(s.samples.size() == 3);
  for (const auto& sample : s.samples) CHECK(sample.label == -1);
}

// --- session-level splitting ----------------------------------------------

TEST_CASE("split_by_session is session-exclusive and seed-stable") {
  std::vector<SessionManifest> manifests(4);
  for (int i = 0; i < 4; ++i) {
    manifests[i].session_id = "s" + std::to_string(i);
  }
  const auto [train, heldout] = dann::split_by_session(manifests, 0.5, 9);
  CHECK(train.size() == 2);
  CHECK(heldout.size() == 2);
  std::set<std::string> seen;
  for (const auto& m : train) seen.insert(m.session_id);
  for (const auto& m : heldout) {
    CHECK(seen.count(m.session_id) == 0);
    seen.insert(m.session_id);
  }
  CHECK(seen.size() == 4);

  const auto [train2, heldout2] = dann::split_by_session(manifests, 0.5, 9);
  for (std::size_t i = 0; i < heldout.size(); ++i) {
    CHECK(heldout[i].session_id == heldout2[i].session_id);
  }

  CHECK_THROWS_AS(
      dann::split_by_session({manifests[0]}, 0.5, 1), dann::ConfigError);
  CHECK_THROWS_AS(dann::split_by_session(manifests, 0.0, 1),
                  dann::ConfigError);
  CHECK_THROWS_AS(dann::split_by_session(manifests, 1.0, 1),
                  dann::ConfigError);
}

// --- synthetic corpus -------------------------------------------------------

TEST_CASE("synthetic spec validation catches degenerate requests") {
  SyntheticSpec spec;
  CHECK_NOTHROW(spec.validate());
  spec.frames_per_session = 0;
  CHECK_THROWS_AS(spec.validate(), dann::ConfigError);
  spec = SyntheticSpec{};
  spec.adult_fraction = 1.0;  // one class only
  CHECK_THROWS_AS(spec.validate(), dann::ConfigError);
  spec = SyntheticSpec{};
  spec.noise_scale[0] = 0.0;
  CHECK_THROWS_AS(spec.validate(), dann::ConfigError);
  spec = SyntheticSpec{};
  spec.rho = 1.0;
  CHECK_THROWS_AS(spec.validate(), dann::ConfigError);
  spec = SyntheticSpec{};
  spec.mean[0][0].resize(7);
  CHECK_THROWS_AS(spec.validate(), dann::ConfigError);
}

TEST_CASE("synthetic corpus writes a loadable, balanced-split manifest") {
  TempDir dir("dann_test_synth");
  SyntheticSpec spec;
  spec.sessions_per_domain = 5;
  spec.frames_per_session = 120;
  spec.seed = 3;
  const std::string manifest_path =
      dann::make_synthetic_corpus(spec, dir.path.string());
  const auto manifests = dann::load_manifest(manifest_path);
  REQUIRE(manifests.size() == 10);

  std::size_t splits[2][3] = {};
  for (const auto& m : manifests) {
    const int side = m.domain_tag == dann::kSyntheticSourceTag ? 0 : 1;
    ++splits[side][static_cast<int>(m.split)];
    CHECK(m.is_feature);
  }
  for (int side : {0, 1}) {
    CHECK(splits[side][0] == 3);  // train
    CHECK(splits[side][1] == 1);  // heldout
    CHECK(splits[side][2] == 1);  // test
  }

  // Every session loads, has the declared frame count, and contains both
  // speaker classes.
  const auto sessions = dann::load_sessions(manifests);
  for (const auto& s : sessions) {
    CHECK(s.n_frames == 120);
    REQUIRE_FALSE(s.samples.empty());
    const auto segs = dann::load_segments(
        (dir.path / "labels" / (s.session_id + ".seg")).string());
    std::set<int> speakers;
    for (const auto& seg : segs) speakers.insert(seg.label);
    CHECK(speakers == std::set<int>({dann::kChild, dann::kAdult}));
  }
}

TEST_CASE("synthetic generation is a pure function of the spec") {
  TempDir a("dann_test_synth_a");
  TempDir b("dann_test_synth_b");
  SyntheticSpec spec;
  spec.sessions_per_domain = 3;
  spec.frames_per_session = 80;
  spec.seed = 11;
  dann::make_synthetic_corpus(spec, a.path.string());
  dann::make_synthetic_corpus(spec, b.path.string());
  for (const auto& entry : fs::directory_iterator(a.path / "feats")) {
    const Tensor ta = dann::load_tensor(entry.path().string());
    const Tensor tb = dann::load_tensor(
        (b.path / "feats" / entry.path().filename()).string());
    CHECK(ta.values() == tb.values());
  }
  // A different seed produces different features.
  TempDir c("dann_test_synth_c");
  spec.seed = 12;
  dann::make_synthetic_corpus(spec, c.path.string());
  const Tensor ta = dann::load_tensor(a.file("feats/src_000.dtns"));
  const Tensor tc = dann::load_tensor(c.file("feats/src_000.dtns"));
  CHECK(ta.values() != tc.values());
}

TEST_CASE("synthetic adult share tracks the configured class balance") {
  TempDir dir("dann_test_synth_balance");
  SyntheticSpec spec;
  spec.sessions_per_domain = 10;
  spec.frames_per_session = 400;
  spec.heldout_fraction = 0.1;
  spec.test_fraction = 0.1;
  dann::make_synthetic_corpus(spec, dir.path.string());
  const auto sessions =
      dann::load_sessions(dann::load_manifest(dir.file("manifest.tsv")));
  std::size_t adult = 0, total = 0;
  for (const auto& s : sessions) {
    if (s.domain_tag != dann::kSyntheticSourceTag) continue;
    const auto segs = dann::load_segments(dir.file("labels/" + s.session_id + ".seg"));
    const auto labels = dann::frame_labels(s.n_frames, segs);
    for (int l : labels) {
      if (l >= 0) {
        ++total;
        if (l == dann::kAdult) ++adult;
      }
    }
  }
  const double share = static_cast<double>(adult) / static_cast<double>(total);
  CAPTURE(adult, total);
  CHECK(share > 0.5);
  CHECK(share < 0.7);
}

TEST_CASE("synthetic spec file parsing applies overrides") {
  TempDir dir("dann_test_synth_spec");
  write_text(dir.file("spec.kv"),
             "sessions_per_domain = 4\n"
             "frames_per_session = 90\n"
             "rotation_degrees = 0\n"
             "seed = 21\n"
             "target_noise = 0.6\n");
  const SyntheticSpec spec = SyntheticSpec::from_file(dir.file("spec.kv"));
  CHECK(spec.sessions_per_domain == 4);
  CHECK(spec.frames_per_session == 90);
  CHECK(spec.seed == 21);
  CHECK(spec.noise_scale[dann::kTarget] == 0.6);
  // Zero rotation leaves the two domains' class means identical.
  for (int c : {dann::kChild, dann::kAdult}) {
    CHECK(spec.mean[c][dann::kSource] == spec.mean[c][dann::kTarget]);
  }

  write_text(dir.file("bad.kv"), "adult_fraction = 0\n");
  CHECK_THROWS_AS(SyntheticSpec::from_file(dir.file("bad.kv")),
                  dann::ConfigError);
}

TEST_CASE("waveform-mode synthetic corpus exercises the audio frontend") {
  TempDir dir("dann_test_synth_wav");
  SyntheticSpec spec;
  spec.sessions_per_domain = 2;
  spec.frames_per_session = 70;
  spec.waveform = true;
  spec.heldout_fraction = 0.3;
  spec.test_fraction = 0.3;
  const std::string manifest_path =
      dann::make_synthetic_corpus(spec, dir.path.string());
  const auto manifests = dann::load_manifest(manifest_path);
  REQUIRE(manifests.size() == 4);
  for (const auto& m : manifests) CHECK_FALSE(m.is_feature);
  const auto sessions = dann::load_sessions(manifests);
  for (const auto& s : sessions) {
    CHECK(s.n_frames == 70);
    CHECK_FALSE(s.samples.empty());
    for (const auto& sample : s.samples) {
      CHECK((sample.label == dann::kChild || sample.label == dann::kAdult));
    }
  }
}
