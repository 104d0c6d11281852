// dann/fusion.hpp
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

// Embedding export and embedding-level fusion. Two adapted models (one per
// adversarial flavor) each produce a 16-dim embedding per sample; fusion
// concatenates the pair and trains a fresh dense classifier (64 -> 16 -> 16
// plus a two-unit head) on the labeled source concatenations. Score-level
// fusion of posteriors lives in metrics.hpp.

#include <cstdio>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "dann/adam.hpp"
#include "dann/error.hpp"
#include "dann/metrics.hpp"
#include "dann/model.hpp"
#include "dann/train.hpp"

namespace dann {

struct EmbeddingRecord {
  std::string session_id;
  std::size_t center = 0;
  int domain = -1;
  int label = -1;  // -1 when withheld
};

struct EmbeddingSet {
  Tensor vectors;  // [n x embed_dim]
  std::vector<EmbeddingRecord> records;

  std::size_t size() const { return records.size(); }
};

/// Eval-mode embeddings for a sample list; chunked like `predict`, and for
/// the same reason chunking never changes the numbers.
inline EmbeddingSet compute_embeddings(ModelBundle& m,
                                       const std::vector<SpliceSample>& samples,
                                       std::size_t chunk = 256) {
  EmbeddingSet set;
  if (samples.empty()) {
    throw DegenerateError("cannot embed an empty sample list");
  }
  const std::size_t dim = m.config().embed_dim;
  set.vectors = Tensor({samples.size(), dim});
  set.records.reserve(samples.size());
  RngState idle(0);  // eval mode draws nothing from it
  for (std::size_t i = 0; i < samples.size(); i += chunk) {
    const std::size_t n = std::min(chunk, samples.size() - i);
    std::vector<const SpliceSample*> batch(n);
    for (std::size_t j = 0; j < n; ++j) batch[j] = &samples[i + j];
    const Tensor e = m.generator().forward(detail::stack_windows(batch),
                                           Phase::kEval, idle);
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t d = 0; d < dim; ++d) {
        set.vectors(i + j, d) = e(j, d);
      }
      const SpliceSample& s = samples[i + j];
      set.records.push_back({s.session_id, s.center, s.domain, s.label});
    }
  }
  return set;
}

/// Writes `path` (tensor binary) and `path.meta` (text sidecar with one
/// session/center/domain/label row per sample).
inline void write_embeddings(const std::string& path,
                             const EmbeddingSet& set) {
  if (set.vectors.rank() != 2 || set.vectors.rows() != set.records.size()) {
    throw DimensionError("embedding tensor and metadata disagree: " +
                         set.vectors.shape_string() + " vs " +
                         std::to_string(set.records.size()) + " records");
  }
  save_tensor(path, set.vectors);
  const std::string meta_path = path + ".meta";
  std::ofstream out(meta_path);
  if (!out) throw IoError("cannot open for writing: " + meta_path);
  out << "session\tcenter\tdomain\tlabel\n";
  for (const auto& r : set.records) {
    out << r.session_id << '\t' << r.center << '\t'
        << (r.domain == kTarget ? "target" : "source") << '\t'
        << (r.label < 0 ? "?" : speaker_name(r.label)) << "\n";
  }
  if (!out) throw IoError("embedding sidecar write failed: " + meta_path);
}

inline void export_embeddings(ModelBundle& m,
                              const std::vector<SpliceSample>& samples,
                              const std::string& path) {
  write_embeddings(path, compute_embeddings(m, samples));
}

inline EmbeddingSet read_embeddings(const std::string& path) {
  EmbeddingSet set;
  set.vectors = load_tensor(path);
  if (set.vectors.rank() != 2) {
    throw FormatError("embedding file " + path + " is not a rank-2 matrix");
  }
  const std::string meta_path = path + ".meta";
  std::ifstream in(meta_path);
  if (!in) throw IoError("cannot open for reading: " + meta_path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (lineno == 1) {
      if (line != "session\tcenter\tdomain\tlabel") {
        throw ParseError(meta_path + " line 1: bad header");
      }
      continue;
    }
    const auto fields = detail::split_tabs(line);
    if (fields.size() != 4) {
      throw ParseError(meta_path + " line " + std::to_string(lineno) +
                       ": expected 4 fields");
    }
    EmbeddingRecord r;
    r.session_id = fields[0];
    try {
      r.center = std::stoull(fields[1]);
    } catch (const std::exception&) {
      throw ParseError(meta_path + " line " + std::to_string(lineno) +
                       ": bad center index");
    }
    if (fields[2] == "source") {
      r.domain = kSource;
    } else if (fields[2] == "target") {
      r.domain = kTarget;
    } else {
      throw ParseError(meta_path + " line " + std::to_string(lineno) +
                       ": unknown domain '" + fields[2] + "'");
    }
    if (fields[3] == "?") {
      r.label = -1;
    } else if (fields[3] == "child") {
      r.label = kChild;
    } else if (fields[3] == "adult") {
      r.label = kAdult;
    } else {
      throw ParseError(meta_path + " line " + std::to_string(lineno) +
                       ": unknown label '" + fields[3] + "'");
    }
    set.records.push_back(std::move(r));
  }
  if (set.records.size() != set.vectors.rows()) {
    throw FormatError("embedding sidecar " + meta_path + " has " +
                      std::to_string(set.records.size()) + " rows but the "
                      "tensor has " + std::to_string(set.vectors.rows()));
  }
  return set;
}

/// Two embedding sets fuse only if they describe the same samples in the
/// same order.
inline void require_aligned(const EmbeddingSet& a, const EmbeddingSet& b) {
  if (a.size() != b.size()) {
    throw AlignmentError("embedding sets differ in size: " +
                         std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()));
  }
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    const auto& ra = a.records[i];
    const auto& rb = b.records[i];
    if (ra.session_id != rb.session_id || ra.center != rb.center ||
        ra.domain != rb.domain || ra.label != rb.label) {
      throw AlignmentError("embedding sets disagree at row " +
                           std::to_string(i) + ": " + ra.session_id + ":" +
                           std::to_string(ra.center) + " vs " +
                           rb.session_id + ":" + std::to_string(rb.center));
    }
  }
}

/// [n x d] + [n x d] -> [n x 2d], first set's columns first.
inline Tensor concat_embeddings(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.rows() != b.rows() ||
      a.cols() != b.cols()) {
    throw DimensionError("cannot concatenate embeddings " + a.shape_string() +
                         " and " + b.shape_string());
  }
  Tensor out({a.rows(), a.cols() + b.cols()});
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) {
      out(i, j) = a(i, j);
      out(i, a.cols() + j) = b(i, j);
    }
  }
  return out;
}

struct FusionNetConfig {
  std::size_t embed_dim = 16;  // width of each branch before concatenation
  std::size_t batch_size = 64;
  std::size_t max_epochs = 30;  // 0 returns the untrained net
  std::size_t patience = 5;
  double dropout = 0.2;
  double bn_momentum = 0.9;
  double bn_eps = 1e-5;
  std::uint64_t seed = 1;

  void validate() const {
    if (embed_dim == 0) throw ConfigError("fusion embed dim must be positive");
    if (batch_size < 2) {
      throw ConfigError("fusion batch size must be at least 2");
    }
    if (patience == 0) throw ConfigError("fusion patience must be at least 1");
    if (dropout < 0.0 || dropout >= 1.0) {
      throw ConfigError("fusion dropout must be in [0, 1)");
    }
  }
};

/// Dense classifier over concatenated embeddings: hidden widths 64, 16, 16
/// (each Dense/ReLU/BatchNorm/Dropout) and a zero-initialized two-unit head,
/// so the untrained net emits exactly [0.5, 0.5].
class FusionNet {
 public:
  FusionNet() = default;

  FusionNet(const FusionNetConfig& cfg, RngState& rng) : input_dim_(2 * cfg.embed_dim) {
    ModelConfig mc;
    mc.dropout = cfg.dropout;
    mc.bn_momentum = cfg.bn_momentum;
    mc.bn_eps = cfg.bn_eps;
    const std::size_t widths[] = {input_dim_, 64, 16, 16};
    for (std::size_t i = 0; i + 1 < 4; ++i) {
      blocks_.emplace_back(widths[i], widths[i + 1], mc, rng);
    }
    head_ = DenseLayer(16, 2, rng, /*zero_init=*/true);
  }

  std::size_t input_dim() const { return input_dim_; }

  Tensor forward(const Tensor& x, Phase phase, RngState& rng) {
    if (x.rank() != 2 || x.cols() != input_dim_) {
      throw DimensionError("fusion net expects [n x " +
                           std::to_string(input_dim_) + "] inputs, got " +
                           x.shape_string());
    }
    Tensor h = x;
    for (auto& block : blocks_) h = block.forward(h, phase, rng);
    return head_.forward(h);
  }

  Tensor backward(const Tensor& dlogits) {
    Tensor d = head_.backward(dlogits);
    for (std::size_t i = blocks_.size(); i-- > 0;) d = blocks_[i].backward(d);
    return d;
  }

  Tensor posteriors(const Tensor& x) {
    RngState idle(0);
    return softmax(forward(x, Phase::kEval, idle));
  }

  std::vector<Tensor*> params() {
    std::vector<Tensor*> out;
    for (auto& block : blocks_) block.collect_params(out);
    for (Tensor* p : head_.params()) out.push_back(p);
    return out;
  }

  std::vector<Tensor*> state_tensors() {
    std::vector<Tensor*> out = params();
    for (auto& block : blocks_) block.collect_stats(out);
    return out;
  }

 private:
  std::size_t input_dim_ = 32;
  std::vector<HiddenBlock> blocks_;
  DenseLayer head_;
};

namespace detail {

inline double fusion_accuracy(FusionNet& net, const Tensor& x,
                              const std::vector<int>& labels) {
  const Tensor probs = net.posteriors(x);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (argmax_posterior(probs(i, 0), probs(i, 1)) == labels[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

}  // namespace detail

/// Trains the fusion classifier on aligned gan/gr source embeddings. When
/// held-out embeddings are supplied, early stopping watches their accuracy
/// and the best parameters seen are restored; otherwise the net trains for
/// exactly `max_epochs`. A zero-epoch budget returns the untrained net.
inline FusionNet embed_fuse_train(const Tensor& gan_embeds,
                                  const Tensor& gr_embeds,
                                  const std::vector<int>& labels,
                                  const FusionNetConfig& cfg,
                                  const Tensor& heldout_gan = Tensor(),
                                  const Tensor& heldout_gr = Tensor(),
                                  const std::vector<int>& heldout_labels = {},
                                  std::vector<EpochRecord>* history = nullptr) {
  cfg.validate();
  RngState rng(cfg.seed);
  FusionNet net(cfg, rng);
  if (gan_embeds.rank() != 2 || gan_embeds.cols() != cfg.embed_dim ||
      gr_embeds.rank() != 2 || gr_embeds.cols() != cfg.embed_dim) {
    throw DimensionError("fusion expects two [n x " +
                         std::to_string(cfg.embed_dim) +
                         "] embedding matrices, got " +
                         gan_embeds.shape_string() + " and " +
                         gr_embeds.shape_string());
  }
  const Tensor x = concat_embeddings(gan_embeds, gr_embeds);
  if (labels.size() != x.rows()) {
    throw DimensionError("fusion got " + std::to_string(labels.size()) +
                         " labels for " + std::to_string(x.rows()) +
                         " samples");
  }
  for (int y : labels) {
    if (y != kChild && y != kAdult) {
      throw LabelError("fusion training labels must be child or adult");
    }
  }
  const bool has_heldout = !heldout_labels.empty();
  Tensor hx;
  if (has_heldout) {
    hx = concat_embeddings(heldout_gan, heldout_gr);
    if (heldout_labels.size() != hx.rows()) {
      throw DimensionError("fusion held-out labels do not match rows");
    }
  }

  AdamOptimizer opt(net.params());
  std::vector<Tensor> best;
  double best_accuracy = -1.0;
  std::size_t since_best = 0;
  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    auto order = detail::identity_order(x.rows());
    shuffle(order, rng);
    const auto batches = detail::make_batches(std::move(order),
                                              cfg.batch_size);
    if (batches.empty()) {
      throw ConfigError("fusion training needs at least 2 samples");
    }
    EpochRecord rec;
    rec.epoch = epoch;
    for (const auto& batch : batches) {
      Tensor bx({batch.size(), x.cols()});
      std::vector<int> by(batch.size());
      for (std::size_t i = 0; i < batch.size(); ++i) {
        for (std::size_t j = 0; j < x.cols(); ++j) {
          bx(i, j) = x(batch[i], j);
        }
        by[i] = labels[batch[i]];
      }
      opt.zero_grads();
      const Tensor logits = net.forward(bx, Phase::kTrain, rng);
      SoftmaxXent sx = softmax_xent(logits, by);
      net.backward(sx.dlogits);
      opt.step();
      rec.task_loss += sx.loss;
    }
    rec.task_loss /= static_cast<double>(batches.size());
    if (has_heldout) {
      rec.heldout_accuracy = detail::fusion_accuracy(net, hx, heldout_labels);
      if (rec.heldout_accuracy > best_accuracy) {
        best_accuracy = rec.heldout_accuracy;
        best.clear();
        for (Tensor* t : net.state_tensors()) best.push_back(*t);
        since_best = 0;
      } else {
        ++since_best;
      }
    }
    if (history) history->push_back(rec);
    if (has_heldout && since_best >= cfg.patience) break;
  }
  if (has_heldout && !best.empty()) {
    const auto tensors = net.state_tensors();
    for (std::size_t i = 0; i < tensors.size(); ++i) {
      tensors[i]->values() = best[i].values();
    }
  }
  return net;
}

/// Runs the fusion net over aligned gan/gr embedding sets and packages the
/// posteriors with the sets' metadata.
inline PredictionSet predict_fusion(FusionNet& net, const EmbeddingSet& gan,
                                    const EmbeddingSet& gr) {
  require_aligned(gan, gr);
  const Tensor x = concat_embeddings(gan.vectors, gr.vectors);
  const Tensor probs = net.posteriors(x);
  PredictionSet out;
  out.reserve(gan.size());
  for (std::size_t i = 0; i < gan.size(); ++i) {
    Prediction p;
    p.p_child = probs(i, static_cast<std::size_t>(kChild));
    p.p_adult = probs(i, static_cast<std::size_t>(kAdult));
    p.predicted = argmax_posterior(p.p_child, p.p_adult);
    p.label = gan.records[i].label;
    p.session_id = gan.records[i].session_id;
    p.center = gan.records[i].center;
    p.domain = gan.records[i].domain;
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace dann
