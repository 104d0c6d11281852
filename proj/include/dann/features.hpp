// dann/features.hpp
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

// Audio frontend: framing, MFCC extraction, per-session mean/variance
// normalization, and context splicing. The MFCC recipe is pinned exactly
// (pre-emphasis 0.97 applied per frame, Hamming window, power spectrum via
// radix-2 FFT zero-padded to the next power of two, 30 triangular mel
// filters spanning 0 Hz to Nyquist, log floored at 1e-10, orthonormal
// DCT-II, coefficients 0..22 kept) so downstream numbers are stable.

#include <cmath>
#include <complex>
#include <cstddef>
#include <string>
#include <vector>

#include "dann/error.hpp"
#include "dann/tensor.hpp"
#include "dann/wav.hpp"

namespace dann {

struct FrontendConfig {
  double frame_len_ms = 40.0;
  double frame_shift_ms = 20.0;
  std::size_t n_mels = 30;
  std::size_t n_coeffs = 23;
  double preemph = 0.97;
  double log_floor = 1e-10;

  void validate() const {
    if (frame_len_ms <= 0.0 || frame_shift_ms <= 0.0) {
      throw ConfigError("frame length and shift must be positive");
    }
    if (n_mels == 0 || n_coeffs == 0 || n_coeffs > n_mels) {
      throw ConfigError("need 1 <= n_coeffs <= n_mels, got " +
                        std::to_string(n_coeffs) + " of " +
                        std::to_string(n_mels));
    }
    if (preemph < 0.0 || preemph >= 1.0) {
      throw ConfigError("pre-emphasis must be in [0, 1)");
    }
    if (log_floor <= 0.0) throw ConfigError("log floor must be positive");
  }
};

struct FeatureMatrix {
  Tensor frames;           // [T x n_coeffs]; unset when too_short
  std::size_t n_frames = 0;
  bool too_short = false;  // input shorter than one frame: empty, not error
};

inline std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

/// In-place iterative radix-2 FFT; size must be a power of two.
inline void fft_radix2(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  if (n == 0 || (n & (n - 1)) != 0) {
    throw DimensionError("fft size must be a power of two, got " +
                         std::to_string(n));
  }
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * M_PI / static_cast<double>(len);
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t j = 0; j < len / 2; ++j) {
        const std::complex<double> u = a[i + j];
        const std::complex<double> v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

inline double hz_to_mel(double hz) {
  return 2595.0 * std::log10(1.0 + hz / 700.0);
}

inline double mel_to_hz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

/// Triangular filters over FFT bins 0..nfft/2, centers equally spaced on
/// the mel scale between 0 Hz and Nyquist.
inline std::vector<std::vector<double>> mel_filterbank(std::size_t n_mels,
                                                       std::size_t nfft,
                                                       double sample_rate) {
  const std::size_t n_bins = nfft / 2 + 1;
  std::vector<double> edge_hz(n_mels + 2);
  const double mel_hi = hz_to_mel(sample_rate / 2.0);
  for (std::size_t p = 0; p < n_mels + 2; ++p) {
    edge_hz[p] = mel_to_hz(mel_hi * static_cast<double>(p) /
                           static_cast<double>(n_mels + 1));
  }
  std::vector<std::vector<double>> filters(n_mels,
                                           std::vector<double>(n_bins, 0.0));
  for (std::size_t m = 0; m < n_mels; ++m) {
    const double lo = edge_hz[m], center = edge_hz[m + 1], hi = edge_hz[m + 2];
    for (std::size_t k = 0; k < n_bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate /
                       static_cast<double>(nfft);
      if (f > lo && f <= center) {
        filters[m][k] = (f - lo) / (center - lo);
      } else if (f > center && f < hi) {
        filters[m][k] = (hi - f) / (hi - center);
      }
    }
  }
  return filters;
}

/// Orthonormal DCT-II matrix [n_coeffs x n_mels].
inline std::vector<std::vector<double>> dct_matrix(std::size_t n_coeffs,
                                                   std::size_t n_mels) {
  std::vector<std::vector<double>> dct(n_coeffs,
                                       std::vector<double>(n_mels, 0.0));
  const double m = static_cast<double>(n_mels);
  for (std::size_t j = 0; j < n_coeffs; ++j) {
    const double alpha = j == 0 ? std::sqrt(1.0 / m) : std::sqrt(2.0 / m);
    for (std::size_t i = 0; i < n_mels; ++i) {
      dct[j][i] = alpha * std::cos(M_PI * static_cast<double>(j) *
                                   (static_cast<double>(i) + 0.5) / m);
    }
  }
  return dct;
}

/// Frame boundaries only; used by the labeler and for counting.
/// n_frames = floor((N - L) / S) + 1; a trailing partial frame is dropped.
inline std::size_t frame_count(std::size_t n_samples, std::size_t frame_len,
                               std::size_t frame_shift) {
  if (n_samples < frame_len) return 0;
  return (n_samples - frame_len) / frame_shift + 1;
}

inline FeatureMatrix mfcc(const AudioBuffer& audio,
                          const FrontendConfig& cfg = {}) {
  cfg.validate();
  if (audio.sample_rate < 8000) {
    throw ConfigError("sample rate must be at least 8000 Hz, got " +
                      std::to_string(audio.sample_rate));
  }
  const double sr = static_cast<double>(audio.sample_rate);
  const std::size_t frame_len =
      static_cast<std::size_t>(std::llround(cfg.frame_len_ms * sr / 1000.0));
  const std::size_t frame_shift =
      static_cast<std::size_t>(std::llround(cfg.frame_shift_ms * sr / 1000.0));
  FeatureMatrix out;
  out.n_frames = frame_count(audio.samples.size(), frame_len, frame_shift);
  if (out.n_frames == 0) {
    out.too_short = true;
    return out;
  }
  const std::size_t nfft = next_pow2(frame_len);
  const auto filters = mel_filterbank(cfg.n_mels, nfft, sr);
  const auto dct = dct_matrix(cfg.n_coeffs, cfg.n_mels);
  std::vector<double> window(frame_len);
  for (std::size_t i = 0; i < frame_len; ++i) {
    window[i] = 0.54 - 0.46 * std::cos(2.0 * M_PI * static_cast<double>(i) /
                                       static_cast<double>(frame_len - 1));
  }

  out.frames = Tensor({out.n_frames, cfg.n_coeffs});
  std::vector<std::complex<double>> spectrum(nfft);
  std::vector<double> logmel(cfg.n_mels);
  for (std::size_t t = 0; t < out.n_frames; ++t) {
    const double* frame = audio.samples.data() + t * frame_shift;
    // pre-emphasis is applied within the frame; the first sample has no
    // predecessor inside the frame and keeps only its (1 - a) share
    std::fill(spectrum.begin(), spectrum.end(), std::complex<double>(0, 0));
    spectrum[0] = frame[0] * (1.0 - cfg.preemph) * window[0];
    for (std::size_t i = 1; i < frame_len; ++i) {
      spectrum[i] = (frame[i] - cfg.preemph * frame[i - 1]) * window[i];
    }
    fft_radix2(spectrum);
    for (std::size_t m = 0; m < cfg.n_mels; ++m) {
      double energy = 0.0;
      for (std::size_t k = 0; k <= nfft / 2; ++k) {
        if (filters[m][k] != 0.0) energy += filters[m][k] * std::norm(spectrum[k]);
      }
      logmel[m] = std::log(std::max(energy, cfg.log_floor));
    }
    for (std::size_t j = 0; j < cfg.n_coeffs; ++j) {
      double acc = 0.0;
      for (std::size_t m = 0; m < cfg.n_mels; ++m) acc += dct[j][m] * logmel[m];
      out.frames(t, j) = acc;
    }
  }
  return out;
}

struct CmvnStats {
  Tensor mean;  // [d] pre-normalization column means
  Tensor var;   // [d] pre-normalization biased column variances
};

/// Session-level mean/variance normalization in place. Variance is floored
/// at 1e-10, so constant columns normalize to zero rather than exploding.
inline CmvnStats cmvn_session(Tensor& feats) {
  if (feats.rank() != 2) {
    throw DimensionError("cmvn expects a rank-2 feature matrix, got " +
                         feats.shape_string());
  }
  if (feats.rows() < 2) {
    throw DegenerateError("cmvn needs at least 2 frames, got " +
                          std::to_string(feats.rows()));
  }
  const MeanVar mv = reduce_mean_var(feats);
  const std::size_t n = feats.rows(), d = feats.cols();
  for (std::size_t j = 0; j < d; ++j) {
    const double inv = 1.0 / std::sqrt(std::max(mv.var(j), 1e-10));
    const double mean = mv.mean(j);
    for (std::size_t i = 0; i < n; ++i) {
      feats(i, j) = (feats(i, j) - mean) * inv;
    }
  }
  return {mv.mean, mv.var};
}

/// One spliced training sample: a context window around a labeled center
/// frame, plus everything evaluation needs to trace it back.
struct SpliceSample {
  Tensor window;           // [window_len x n_coeffs]
  int label = -1;          // 0 = child, 1 = adult, -1 = withheld/unknown
  int domain = -1;         // 0 = source, 1 = target
  std::string session_id;
  std::size_t center = 0;  // center frame index within the session
};

/// Cuts windows of `window_len` rows centered at window_half, 2*window_half,
/// 3*window_half, ... while the window stays in bounds. The sample label is
/// the center frame's label; centers labeled -1 (no segment, or overlapping
/// segments) are skipped.
inline std::vector<SpliceSample> splice(const Tensor& feats,
                                        const std::vector<int>& labels,
                                        std::size_t window_len = 31,
                                        const std::string& session_id = "") {
  if (window_len < 3 || window_len % 2 == 0) {
    throw ConfigError("splice window must be odd and at least 3, got " +
                      std::to_string(window_len));
  }
  if (feats.rank() != 2) {
    throw DimensionError("splice expects a rank-2 feature matrix, got " +
                         feats.shape_string());
  }
  const std::size_t T = feats.rows(), d = feats.cols();
  if (labels.size() != T) {
    throw AlignmentError("label array length " +
                         std::to_string(labels.size()) +
                         " does not match frame count " + std::to_string(T));
  }
  const std::size_t half = (window_len - 1) / 2;
  std::vector<SpliceSample> out;
  for (std::size_t c = half; c + half <= T - 1; c += half) {
    if (labels[c] < 0) continue;
    SpliceSample s;
    s.window = Tensor({window_len, d});
    for (std::size_t r = 0; r < window_len; ++r) {
      const double* src = feats.row_ptr(c - half + r);
      double* dst = s.window.row_ptr(r);
      for (std::size_t j = 0; j < d; ++j) dst[j] = src[j];
    }
    s.label = labels[c];
    s.center = c;
    s.session_id = session_id;
    out.push_back(std::move(s));
  }
  return out;
}

/// Centers only (for tests and bookkeeping), same enumeration as splice.
inline std::vector<std::size_t> splice_centers(std::size_t n_frames,
                                               std::size_t window_len = 31) {
  if (window_len < 3 || window_len % 2 == 0) {
    throw ConfigError("splice window must be odd and at least 3");
  }
  const std::size_t half = (window_len - 1) / 2;
  std::vector<std::size_t> centers;
  if (n_frames == 0) return centers;
  for (std::size_t c = half; c + half <= n_frames - 1; c += half) {
    centers.push_back(c);
  }
  return centers;
}

}  // namespace dann
