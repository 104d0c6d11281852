// dann/dataset.hpp
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

#pragma once

// Session loading: segment labels to frame labels, audio or precomputed
// features to normalized spliced samples. Class indices are fixed:
// child = 0, adult = 1; source = 0, target = 1.

#include <fstream>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "dann/error.hpp"
#include "dann/features.hpp"
#include "dann/manifest.hpp"
#include "dann/rng.hpp"
#include "dann/tensor_io.hpp"
#include "dann/wav.hpp"

namespace dann {

inline constexpr int kChild = 0;
inline constexpr int kAdult = 1;
inline constexpr int kSource = 0;
inline constexpr int kTarget = 1;

inline const char* speaker_name(int label) {
  if (label == kChild) return "child";
  if (label == kAdult) return "adult";
  return "?";
}

struct Segment {
  double start_sec = 0.0;
  double end_sec = 0.0;
  int label = -1;
};

/// Segment files: one `start_sec<TAB>end_sec<TAB>{child|adult}` per line.
inline std::vector<Segment> load_segments(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open for reading: " + path);
  std::vector<Segment> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    Segment seg;
    std::string who;
    if (!(ss >> seg.start_sec >> seg.end_sec >> who) || !(ss >> std::ws).eof()) {
      throw ParseError(path + " line " + std::to_string(lineno) +
                       ": expected 'start end {child|adult}'");
    }
    if (who == "child") {
      seg.label = kChild;
    } else if (who == "adult") {
      seg.label = kAdult;
    } else {
      throw ParseError(path + " line " + std::to_string(lineno) +
                       ": unknown speaker '" + who + "'");
    }
    if (!(seg.end_sec > seg.start_sec)) {
      throw ParseError(path + " line " + std::to_string(lineno) +
                       ": segment end must be after start");
    }
    out.push_back(seg);
  }
  return out;
}

inline void write_segments(const std::string& path,
                           const std::vector<Segment>& segments) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out.precision(17);
  for (const auto& s : segments) {
    out << s.start_sec << '\t' << s.end_sec << '\t' << speaker_name(s.label)
        << "\n";
  }
  if (!out) throw IoError("segment write failed: " + path);
}

/// Frames are assigned by frame-center time (i*shift + len/2). A frame is
/// labeled only when exactly one segment covers its center; uncovered or
/// ambiguous (overlapping segments) frames get -1 and are skipped later.
inline std::vector<int> frame_labels(std::size_t n_frames,
                                     const std::vector<Segment>& segments,
                                     double frame_shift_s = 0.02,
                                     double frame_len_s = 0.04) {
  std::vector<int> labels(n_frames, -1);
  for (std::size_t i = 0; i < n_frames; ++i) {
    const double t =
        static_cast<double>(i) * frame_shift_s + frame_len_s / 2.0;
    int hits = 0, label = -1;
    for (const auto& seg : segments) {
      if (seg.start_sec <= t && t < seg.end_sec) {
        ++hits;
        label = seg.label;
      }
    }
    if (hits == 1) labels[i] = label;
  }
  return labels;
}

struct LoadedSession {
  std::string session_id;
  std::string domain_tag;
  int domain = -1;  // kSource/kTarget once an experiment maps the tag
  Split split = Split::kTrain;
  std::size_t n_frames = 0;
  bool too_short = false;
  std::vector<SpliceSample> samples;
};

/// Reads one session end to end: features (from WAV through MFCC, or from a
/// precomputed tensor), session-level CMVN, segment labels, splicing.
inline LoadedSession load_session(const SessionManifest& m,
                                  const FrontendConfig& fcfg = {},
                                  std::size_t window_len = 31) {
  LoadedSession s;
  s.session_id = m.session_id;
  s.domain_tag = m.domain_tag;
  s.split = m.split;

  Tensor feats;
  if (m.is_feature) {
    feats = load_tensor(m.audio);
    if (feats.rank() != 2) {
      throw FormatError("feature file " + m.audio +
                        " is not a rank-2 matrix: " + feats.shape_string());
    }
    s.n_frames = feats.rows();
  } else {
    const AudioBuffer audio = read_wav(m.audio);
    FeatureMatrix fm = mfcc(audio, fcfg);
    s.n_frames = fm.n_frames;
    s.too_short = fm.too_short;
    if (fm.too_short) return s;  // zero samples, not an error
    feats = std::move(fm.frames);
  }
  if (s.n_frames < 2) {
    throw DegenerateError("session '" + m.session_id + "' has " +
                          std::to_string(s.n_frames) +
                          " frames; need at least 2 for normalization");
  }
  cmvn_session(feats);
  const auto segments = load_segments(m.labels);
  const auto labels =
      frame_labels(s.n_frames, segments, fcfg.frame_shift_ms / 1000.0,
                   fcfg.frame_len_ms / 1000.0);
  s.samples = splice(feats, labels, window_len, m.session_id);
  return s;
}

/// Loads sessions, optionally in parallel. Results keep manifest order, so
/// the worker count never changes the output.
inline std::vector<LoadedSession> load_sessions(
    const std::vector<SessionManifest>& manifests,
    const FrontendConfig& fcfg = {}, std::size_t window_len = 31,
    std::size_t workers = 1) {
  std::vector<LoadedSession> out(manifests.size());
  if (workers <= 1 || manifests.size() <= 1) {
    for (std::size_t i = 0; i < manifests.size(); ++i) {
      out[i] = load_session(manifests[i], fcfg, window_len);
    }
    return out;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  const std::size_t n_threads = std::min(workers, manifests.size());
  for (std::size_t w = 0; w < n_threads; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < manifests.size(); i += n_threads) {
          out[i] = load_session(manifests[i], fcfg, window_len);
        }
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

/// Withholds speaker label values while keeping the sample set itself, so
/// adaptation sees which windows exist but never what they contain.
inline void strip_speaker_labels(LoadedSession& s) {
  for (auto& sample : s.samples) sample.label = -1;
}

/// Session-level random split; no session's samples ever straddle splits.
inline std::pair<std::vector<SessionManifest>, std::vector<SessionManifest>>
split_by_session(const std::vector<SessionManifest>& manifests,
                 double heldout_fraction, std::uint64_t seed) {
  if (manifests.size() < 2) {
    throw ConfigError("session split needs at least 2 sessions, got " +
                      std::to_string(manifests.size()));
  }
  if (heldout_fraction <= 0.0 || heldout_fraction >= 1.0) {
    throw ConfigError("heldout fraction must be in (0, 1), got " +
                      std::to_string(heldout_fraction));
  }
  std::vector<std::size_t> order(manifests.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  RngState rng(seed);
  shuffle(order, rng);
  std::size_t n_heldout = static_cast<std::size_t>(
      std::llround(heldout_fraction * static_cast<double>(manifests.size())));
  n_heldout = std::max<std::size_t>(1, n_heldout);
  n_heldout = std::min(n_heldout, manifests.size() - 1);
  std::pair<std::vector<SessionManifest>, std::vector<SessionManifest>> out;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (i < n_heldout) {
      out.second.push_back(manifests[order[i]]);
    } else {
      out.first.push_back(manifests[order[i]]);
    }
  }
  return out;
}

}  // namespace dann
