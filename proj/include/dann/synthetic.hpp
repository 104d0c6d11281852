// dann/synthetic.hpp
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

// Synthetic two-domain corpus generator for desk-scale experiments. Each
// session is a sequence of alternating child/adult speaker turns; frames are
// AR(1)-smoothed Gaussians around a per-(class, domain) mean vector.
//
// Session features are mean-and-variance normalized downstream, which erases
// any shift that is constant across both classes of a session. The default
// target means are therefore a rotation of the source means (the class
// separation axis turns in feature space) plus a larger noise scale; that
// shift survives normalization and measurably degrades a source-trained
// classifier, which is the point of the benchmark.

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dann/dataset.hpp"
#include "dann/error.hpp"
#include "dann/kv.hpp"
#include "dann/manifest.hpp"
#include "dann/rng.hpp"
#include "dann/tensor.hpp"
#include "dann/tensor_io.hpp"
#include "dann/wav.hpp"

namespace dann {

inline constexpr std::size_t kSyntheticDim = 23;
inline constexpr const char* kSyntheticSourceTag = "src";
inline constexpr const char* kSyntheticTargetTag = "tgt";

struct SyntheticSpec {
  std::size_t sessions_per_domain = 20;
  std::size_t frames_per_session = 600;
  double adult_fraction = 0.6;     // share of labeled frames that are adult
  double rho = 0.9;                // AR(1) temporal smoothing
  // Equal per-domain noise keeps the default shift purely rotational, which
  // an embedding map can undo without trading away source accuracy.
  std::array<double, 2> noise_scale = {0.55, 0.55};  // [domain]
  std::vector<double> mean[2][2];  // [class][domain], each kSyntheticDim wide
  double heldout_fraction = 0.2;
  double test_fraction = 0.2;
  std::uint64_t seed = 1;
  bool waveform = false;           // emit WAV audio instead of feature files
  std::uint32_t sample_rate = 16000;

  SyntheticSpec() { set_rotated_means(72.0, 1.0); }

  /// Class means are +/- scale along one axis for the source domain and the
  /// same pair rotated by `degrees` in the plane of the first two feature
  /// dimensions for the target domain. Zero degrees makes the domains
  /// identically distributed up to noise scale.
  void set_rotated_means(double degrees, double scale) {
    const double theta = degrees * M_PI / 180.0;
    for (int c : {kChild, kAdult}) {
      for (int d : {kSource, kTarget}) {
        mean[c][d].assign(kSyntheticDim, 0.0);
      }
    }
    const double sign_child = -1.0, sign_adult = 1.0;
    mean[kChild][kSource][0] = sign_child * scale;
    mean[kAdult][kSource][0] = sign_adult * scale;
    mean[kChild][kTarget][0] = sign_child * scale * std::cos(theta);
    mean[kChild][kTarget][1] = sign_child * scale * std::sin(theta);
    mean[kAdult][kTarget][0] = sign_adult * scale * std::cos(theta);
    mean[kAdult][kTarget][1] = sign_adult * scale * std::sin(theta);
  }

  void validate() const {
    if (frames_per_session < 2) {
      throw ConfigError("degenerate spec: need at least 2 frames per session");
    }
    if (sessions_per_domain == 0) {
      throw ConfigError("degenerate spec: zero sessions per domain");
    }
    if (adult_fraction <= 0.0 || adult_fraction >= 1.0) {
      throw ConfigError(
          "adult fraction must lie strictly inside (0, 1) so both classes "
          "appear; got " +
          std::to_string(adult_fraction));
    }
    for (double s : noise_scale) {
      if (!(s > 0.0)) {
        throw ConfigError("noise scale must be positive");
      }
    }
    if (rho < 0.0 || rho >= 1.0) {
      throw ConfigError("temporal smoothing must lie in [0, 1), got " +
                        std::to_string(rho));
    }
    for (int c : {kChild, kAdult}) {
      for (int d : {kSource, kTarget}) {
        if (mean[c][d].size() != kSyntheticDim) {
          throw ConfigError("class/domain mean vectors must have " +
                            std::to_string(kSyntheticDim) + " entries, got " +
                            std::to_string(mean[c][d].size()));
        }
      }
    }
    if (heldout_fraction < 0.0 || test_fraction < 0.0 ||
        heldout_fraction + test_fraction >= 1.0) {
      throw ConfigError("split fractions must be nonnegative and sum below 1");
    }
    if (waveform && sample_rate < 8000) {
      throw ConfigError("waveform mode needs a sample rate of at least 8000");
    }
  }

  static SyntheticSpec from_file(const std::string& path) {
    const KeyValueFile kv = KeyValueFile::load(path);
    SyntheticSpec spec;
    spec.sessions_per_domain = static_cast<std::size_t>(
        kv.get_int("sessions_per_domain",
                   static_cast<long long>(spec.sessions_per_domain)));
    spec.frames_per_session = static_cast<std::size_t>(
        kv.get_int("frames_per_session",
                   static_cast<long long>(spec.frames_per_session)));
    spec.adult_fraction = kv.get_double("adult_fraction", spec.adult_fraction);
    spec.rho = kv.get_double("rho", spec.rho);
    spec.noise_scale[kSource] =
        kv.get_double("source_noise", spec.noise_scale[kSource]);
    spec.noise_scale[kTarget] =
        kv.get_double("target_noise", spec.noise_scale[kTarget]);
    spec.heldout_fraction =
        kv.get_double("heldout_fraction", spec.heldout_fraction);
    spec.test_fraction = kv.get_double("test_fraction", spec.test_fraction);
    spec.seed = static_cast<std::uint64_t>(
        kv.get_int("seed", static_cast<long long>(spec.seed)));
    spec.waveform = kv.get_bool("waveform", spec.waveform);
    spec.sample_rate = static_cast<std::uint32_t>(
        kv.get_int("sample_rate", static_cast<long long>(spec.sample_rate)));
    if (kv.has("rotation_degrees") || kv.has("mean_scale")) {
      spec.set_rotated_means(kv.get_double("rotation_degrees", 72.0),
                             kv.get_double("mean_scale", 1.0));
    }
    const char* mean_keys[2][2] = {
        {"mean_child_source", "mean_child_target"},
        {"mean_adult_source", "mean_adult_target"}};
    for (int c : {kChild, kAdult}) {
      for (int d : {kSource, kTarget}) {
        if (kv.has(mean_keys[c][d])) {
          spec.mean[c][d] = kv.get_doubles(mean_keys[c][d]);
        }
      }
    }
    spec.validate();
    return spec;
  }
};

struct SpeakerTurn {
  std::size_t first = 0;  // first frame index, inclusive
  std::size_t last = 0;   // last frame index, inclusive
  int speaker = kChild;
};

/// Plans strictly alternating speaker turns over `n_frames` frames with
/// 0-2 unlabeled gap frames between turns. Alternation guarantees both
/// classes per session; turn lengths are scaled so the labeled-frame share
/// matches `adult_fraction` in expectation. Turns are long relative to the
/// 31-frame splice window so most windows are single-speaker; with short
/// turns nearly every window straddles a boundary and the per-window label
/// stops being predictable from the window's dominant content.
inline std::vector<SpeakerTurn> plan_turns(std::size_t n_frames,
                                           double adult_fraction,
                                           RngState& rng) {
  std::vector<SpeakerTurn> turns;
  int who = rng.bernoulli(0.5) ? kAdult : kChild;
  std::size_t f = 0;
  while (f < n_frames) {
    const double share = who == kAdult ? adult_fraction : 1.0 - adult_fraction;
    const double mean_len = 240.0 * share;  // a turn pair averages 240 frames
    const auto len = std::max<std::size_t>(
        4, static_cast<std::size_t>(
               std::llround(mean_len * rng.uniform(0.67, 1.33))));
    SpeakerTurn t;
    t.first = f;
    t.last = std::min(n_frames - 1, f + len - 1);
    t.speaker = who;
    turns.push_back(t);
    f = t.last + 1 + rng.index(3);  // gap of 0, 1, or 2 frames
    who = 1 - who;
  }
  if (turns.size() == 1 && turns[0].last > turns[0].first) {
    // A very short session can end up as a single turn; split it so the
    // both-classes-per-session invariant still holds.
    const SpeakerTurn t = turns[0];
    const std::size_t mid = (t.first + t.last) / 2;
    turns = {{t.first, mid, t.speaker}, {mid + 1, t.last, 1 - t.speaker}};
  }
  return turns;
}

/// Segment spans bracket the covered frame centers: frame i's center time is
/// (i+1)*shift, so [first+0.5, last+1.5)*shift covers exactly frames
/// first..last and adjacent turns never overlap.
///
/// Each turn is trimmed by `margin_frames` on both sides (clamped so at
/// least 4 frames stay labeled). The trim keeps labeled frame centers at
/// least one splice half-window away from the speaker change, so a spliced
/// sample never mixes the two speakers; frames inside the margin still carry
/// the turn's features, they just go unlabeled, like transition regions left
/// unannotated in hand-labeled sessions.
inline std::vector<Segment> turns_to_segments(
    const std::vector<SpeakerTurn>& turns, double frame_shift_s = 0.02,
    std::size_t margin_frames = 15) {
  std::vector<Segment> segs;
  segs.reserve(turns.size());
  for (const auto& t : turns) {
    const std::size_t len = t.last - t.first + 1;
    const std::size_t margin =
        std::min(margin_frames, len >= 4 ? (len - 4) / 2 : 0);
    Segment s;
    s.start_sec = (static_cast<double>(t.first + margin) + 0.5) * frame_shift_s;
    s.end_sec = (static_cast<double>(t.last - margin) + 1.5) * frame_shift_s;
    s.label = t.speaker;
    segs.push_back(s);
  }
  return segs;
}

namespace detail {

/// Per-frame generating class: turn frames take the turn's speaker, gap
/// frames carry the previous speaker forward (the gap is unlabeled in the
/// segment file but the signal does not go silent).
inline std::vector<int> frame_classes(std::size_t n_frames,
                                      const std::vector<SpeakerTurn>& turns) {
  std::vector<int> cls(n_frames, -1);
  for (const auto& t : turns) {
    for (std::size_t f = t.first; f <= t.last && f < n_frames; ++f) {
      cls[f] = t.speaker;
    }
  }
  if (!cls.empty() && cls[0] < 0) cls[0] = turns.front().speaker;
  for (std::size_t f = 1; f < n_frames; ++f) {
    if (cls[f] < 0) cls[f] = cls[f - 1];
  }
  return cls;
}

inline Tensor synth_features(const SyntheticSpec& spec, int domain,
                             const std::vector<int>& cls, RngState& rng) {
  const std::size_t n = cls.size();
  Tensor x({n, kSyntheticDim});
  std::vector<double> ar(kSyntheticDim, 0.0);
  const double innovation = std::sqrt(1.0 - spec.rho * spec.rho);
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t d = 0; d < kSyntheticDim; ++d) {
      ar[d] = t == 0 ? rng.normal()
                     : spec.rho * ar[d] + innovation * rng.normal();
      x(t, d) = spec.mean[cls[t]][domain][d] + spec.noise_scale[domain] * ar[d];
    }
  }
  return x;
}

/// Waveform mode: each speaker is a harmonic tone (distinct fundamentals),
/// the domain sets the spectral tilt of the harmonics. Phases accumulate
/// across turn changes so there are no clicks.
inline AudioBuffer synth_audio(const SyntheticSpec& spec, int domain,
                               const std::vector<int>& cls, RngState& rng) {
  constexpr std::size_t kHarmonics = 6;
  const double f0[2] = {285.0, 122.0};  // child, adult
  const double tilt = domain == kSource ? 1.0 : 1.8;
  const double sr = static_cast<double>(spec.sample_rate);
  const auto frame_shift =
      static_cast<std::size_t>(std::llround(0.02 * sr));
  const auto frame_len = static_cast<std::size_t>(std::llround(0.04 * sr));
  const std::size_t n_samples =
      frame_len + frame_shift * (spec.frames_per_session - 1);

  AudioBuffer audio;
  audio.sample_rate = spec.sample_rate;
  audio.samples.resize(n_samples, 0.0);
  std::array<double, kHarmonics> phase{};
  for (std::size_t i = 0; i < n_samples; ++i) {
    const std::size_t frame = std::min(cls.size() - 1, i / frame_shift);
    const double base = f0[cls[frame]];
    double v = 0.0;
    for (std::size_t h = 0; h < kHarmonics; ++h) {
      phase[h] += 2.0 * M_PI * base * static_cast<double>(h + 1) / sr;
      if (phase[h] > 2.0 * M_PI) {
        phase[h] -= 2.0 * M_PI * std::floor(phase[h] / (2.0 * M_PI));
      }
      v += std::pow(static_cast<double>(h + 1), -tilt) * std::sin(phase[h]);
    }
    audio.samples[i] = 0.15 * v + 0.01 * rng.normal();
  }
  return audio;
}

inline Split split_for_index(std::size_t i, std::size_t n_train,
                             std::size_t n_heldout) {
  if (i < n_train) return Split::kTrain;
  if (i < n_train + n_heldout) return Split::kHeldout;
  return Split::kTest;
}

}  // namespace detail

/// Writes a complete corpus under `out_dir`: per-session feature tensors (or
/// WAV audio), segment label files, and a manifest with relative paths.
/// Returns the manifest path. The corpus is a pure function of the spec:
/// every session draws from its own forked stream keyed by a global index.
inline std::string make_synthetic_corpus(const SyntheticSpec& spec,
                                         const std::string& out_dir) {
  spec.validate();
  namespace fs = std::filesystem;
  const fs::path root(out_dir);
  const char* payload_dir = spec.waveform ? "wavs" : "feats";
  std::error_code ec;
  fs::create_directories(root / payload_dir, ec);
  fs::create_directories(root / "labels", ec);
  if (!fs::is_directory(root / payload_dir) ||
      !fs::is_directory(root / "labels")) {
    throw IoError("cannot create corpus directories under " + out_dir);
  }

  const std::size_t n = spec.sessions_per_domain;
  auto count = [&](double frac) {
    return std::max<std::size_t>(
        1, static_cast<std::size_t>(
               std::llround(frac * static_cast<double>(n))));
  };
  std::size_t n_heldout = n >= 3 ? count(spec.heldout_fraction) : 0;
  std::size_t n_test = n >= 2 ? count(spec.test_fraction) : 0;
  if (n_heldout + n_test >= n) {
    throw ConfigError("too few sessions per domain (" + std::to_string(n) +
                      ") to carve out heldout and test splits");
  }
  const std::size_t n_train = n - n_heldout - n_test;

  const RngState base(spec.seed);
  std::vector<ManifestRow> rows;
  for (int domain : {kSource, kTarget}) {
    const char* tag = domain == kSource ? kSyntheticSourceTag
                                        : kSyntheticTargetTag;
    for (std::size_t i = 0; i < n; ++i) {
      RngState rng = base.fork(static_cast<std::uint64_t>(domain) * n + i);
      const auto turns = plan_turns(spec.frames_per_session,
                                    spec.adult_fraction, rng);
      const auto cls = detail::frame_classes(spec.frames_per_session, turns);

      char sid[32];
      std::snprintf(sid, sizeof(sid), "%s_%03zu", tag, i);
      const std::string label_rel = std::string("labels/") + sid + ".seg";
      write_segments((root / label_rel).string(), turns_to_segments(turns));

      ManifestRow row;
      row.session_id = sid;
      row.domain_tag = tag;
      row.labels = label_rel;
      row.split = detail::split_for_index(i, n_train, n_heldout);
      if (spec.waveform) {
        const std::string rel = std::string("wavs/") + sid + ".wav";
        const AudioBuffer audio = detail::synth_audio(spec, domain, cls, rng);
        write_wav((root / rel).string(), audio.samples, audio.sample_rate);
        row.audio = rel;
      } else {
        const std::string rel = std::string("feats/") + sid + ".dtns";
        save_tensor((root / rel).string(),
                    detail::synth_features(spec, domain, cls, rng));
        row.audio = "feat:" + rel;
      }
      rows.push_back(std::move(row));
    }
  }
  const std::string manifest_path = (root / "manifest.tsv").string();
  write_manifest(manifest_path, rows);
  return manifest_path;
}

}  // namespace dann
