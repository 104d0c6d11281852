// dann/train.hpp
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

// Training loops. Task training (pretrain and upper bound) minimizes speaker
// cross-entropy on labeled data. Adaptation runs three steps per batch:
//
//   1. task step        - generator + classifier on labeled source samples
//   2. discriminator    - discriminator on true domain labels, generator held
//   3. adversarial      - generator against the held discriminator, either
//                         with inverted domain labels (gan) or through the
//                         gradient reversal layer (gr)
//
// so the generator is updated twice per batch. Each step has its own Adam
// instance over exactly the parameters it may touch; everything outside that
// set stays bitwise identical through the step.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "dann/adam.hpp"
#include "dann/dataset.hpp"
#include "dann/error.hpp"
#include "dann/metrics.hpp"
#include "dann/model.hpp"
#include "dann/rng.hpp"
#include "dann/tensor.hpp"

namespace dann {

/// What a training run optimizes. gan and gr adapt a pretrained model;
/// upper_bound trains on labeled data from both domains.
enum class TrainMode { kPretrainOnly, kGan, kGr, kUpperBound };

inline const char* train_mode_name(TrainMode m) {
  switch (m) {
    case TrainMode::kPretrainOnly: return "pretrain_only";
    case TrainMode::kGan: return "gan";
    case TrainMode::kGr: return "gr";
    case TrainMode::kUpperBound: return "upper_bound";
  }
  return "?";
}

inline TrainMode parse_train_mode(const std::string& s) {
  if (s == "pretrain_only") return TrainMode::kPretrainOnly;
  if (s == "gan") return TrainMode::kGan;
  if (s == "gr") return TrainMode::kGr;
  if (s == "upper_bound") return TrainMode::kUpperBound;
  throw ConfigError("unknown training variant '" + s +
                    "', expected pretrain_only, gan, gr, or upper_bound");
}

struct TrainConfig {
  TrainMode variant = TrainMode::kPretrainOnly;
  std::size_t batch_size = 64;
  std::size_t max_epochs = 100;
  std::size_t patience = 5;
  double lambda = 1.0;            // gradient reversal strength
  std::uint64_t seed = 1;
  double heldout_fraction = 0.2;  // source sessions reserved for early stop
  bool disc_generator_eval = false;  // step 2 embeddings from running stats

  void validate() const {
    if (batch_size < 2) {
      throw ConfigError("batch size must be at least 2 (batch statistics), "
                        "got " + std::to_string(batch_size));
    }
    if (max_epochs == 0) throw ConfigError("max epochs must be positive");
    if (patience == 0) throw ConfigError("patience must be at least 1");
    if (lambda < 0.0) throw ConfigError("lambda must be >= 0");
    if (heldout_fraction <= 0.0 || heldout_fraction >= 1.0) {
      throw ConfigError("heldout fraction must be in (0, 1), got " +
                        std::to_string(heldout_fraction));
    }
  }
};

/// A mixed batch for the adversarial steps. Domain labels are implied by
/// membership: everything under `source` is domain 0, everything under
/// `target` is domain 1, and target speaker labels are never read.
struct DomainBatch {
  std::vector<const SpliceSample*> source;
  std::vector<const SpliceSample*> target;

  std::size_t size() const { return source.size() + target.size(); }
};

struct EpochRecord {
  std::size_t epoch = 0;
  double task_loss = 0.0;
  double domain_loss = 0.0;
  double adv_loss = 0.0;
  double heldout_accuracy = 0.0;
};

/// Observation point around each optimizer step; used by tests to assert
/// that a step touched exactly its declared parameter set.
struct StepEvent {
  std::size_t epoch = 0;
  std::size_t batch = 0;
  int step = 0;  // 1 = task, 2 = discriminator, 3 = adversarial
  bool after = false;
};
using StepObserver = std::function<void(const StepEvent&, ModelBundle&)>;

namespace detail {

inline Tensor stack_windows(const std::vector<const SpliceSample*>& batch) {
  if (batch.empty()) {
    throw DimensionError("cannot assemble an empty batch");
  }
  const std::size_t w = batch[0]->window.rows();
  const std::size_t d = batch[0]->window.cols();
  Tensor x({batch.size(), w, d});
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Tensor& win = batch[i]->window;
    if (win.rows() != w || win.cols() != d) {
      throw DimensionError("inconsistent window shapes in batch: " +
                           win.shape_string());
    }
    std::copy(win.values().begin(), win.values().end(),
              x.values().begin() + static_cast<std::ptrdiff_t>(i * w * d));
  }
  return x;
}

inline void observe(const StepObserver& obs, std::size_t epoch,
                    std::size_t batch, int step, bool after, ModelBundle& m) {
  if (obs) obs(StepEvent{epoch, batch, step, after}, m);
}

}  // namespace detail

/// Step 1: one Adam update to generator + classifier on speaker labels.
/// Only upper-bound training may feed it target-domain samples.
inline double step_task(ModelBundle& m, AdamOptimizer& opt,
                        const std::vector<const SpliceSample*>& batch,
                        RngState& rng, bool allow_target = false) {
  std::vector<int> labels;
  labels.reserve(batch.size());
  for (const SpliceSample* s : batch) {
    if (!allow_target && s->domain == kTarget) {
      throw ContractError("task step received a target-domain sample from "
                          "session '" + s->session_id + "'");
    }
    if (s->label != kChild && s->label != kAdult) {
      throw LabelError("task step needs labeled samples; session '" +
                       s->session_id + "' center " +
                       std::to_string(s->center) + " is unlabeled");
    }
    labels.push_back(s->label);
  }
  const Tensor x = detail::stack_windows(batch);
  opt.zero_grads();
  const Tensor e = m.generator().forward(x, Phase::kTrain, rng);
  const Tensor logits = m.classifier().forward(e, Phase::kTrain, rng);
  SoftmaxXent sx = softmax_xent(logits, labels);
  m.generator().backward(m.classifier().backward(sx.dlogits));
  opt.step();
  return sx.loss;
}

/// Step 2: one Adam update to the discriminator on true domain labels.
/// The generator only produces embeddings: by default it runs with batch
/// statistics but no parameter or running-stat updates; `generator_eval`
/// switches it to running statistics.
inline double step_discriminator(ModelBundle& m, AdamOptimizer& opt,
                                 const DomainBatch& batch, RngState& rng,
                                 bool generator_eval = false) {
  if (batch.source.empty() || batch.target.empty()) {
    throw ContractError("discriminator step needs both domains in the batch; "
                        "got " + std::to_string(batch.source.size()) +
                        " source and " + std::to_string(batch.target.size()) +
                        " target samples");
  }
  std::vector<const SpliceSample*> all(batch.source);
  all.insert(all.end(), batch.target.begin(), batch.target.end());
  std::vector<int> domains(batch.source.size(), kSource);
  domains.resize(all.size(), kTarget);

  const Tensor x = detail::stack_windows(all);
  opt.zero_grads();
  const Phase gphase = generator_eval ? Phase::kEval : Phase::kFrozen;
  const Tensor e = m.generator().forward(x, gphase, rng);
  const Tensor logits = m.discriminator().forward(e, Phase::kTrain, rng);
  SoftmaxXent sx = softmax_xent(logits, domains);
  m.discriminator().backward(sx.dlogits);  // gradient stops at the embedding
  opt.step();
  return sx.loss;
}

/// Step 3: one Adam update to the generator against the held discriminator.
/// gan minimizes domain cross-entropy under swapped labels; gr backpropagates
/// the true-label loss through the reversal layer, so the generator receives
/// -lambda times the discriminator-loss gradient. Returns the adversarial
/// objective value (for gr that is -lambda * true-label loss).
inline double step_generator_adversarial(ModelBundle& m, AdamOptimizer& opt,
                                         const DomainBatch& batch,
                                         Variant variant, RngState& rng) {
  if (variant != Variant::kGan && variant != Variant::kGr) {
    throw ConfigError("unknown adversarial variant");
  }
  if (batch.size() == 0) {
    throw DimensionError("cannot run an adversarial step on an empty batch");
  }
  std::vector<const SpliceSample*> all(batch.source);
  all.insert(all.end(), batch.target.begin(), batch.target.end());
  const bool invert = variant == Variant::kGan;
  std::vector<int> domains(batch.source.size(), invert ? kTarget : kSource);
  domains.resize(all.size(), invert ? kSource : kTarget);

  const Tensor x = detail::stack_windows(all);
  opt.zero_grads();
  const Tensor e = m.generator().forward(x, Phase::kTrain, rng);
  double loss;
  if (variant == Variant::kGan) {
    const Tensor logits = m.discriminator().forward(e, Phase::kFrozen, rng);
    SoftmaxXent sx = softmax_xent(logits, domains);
    m.generator().backward(m.discriminator().backward(sx.dlogits));
    loss = sx.loss;
  } else {
    const Tensor rev = m.reversal().forward(e);
    const Tensor logits = m.discriminator().forward(rev, Phase::kFrozen, rng);
    SoftmaxXent sx = softmax_xent(logits, domains);
    m.generator().backward(
        m.reversal().backward(m.discriminator().backward(sx.dlogits)));
    loss = -m.reversal().lambda() * sx.loss;
  }
  opt.step();
  return loss;
}

/// Class posteriors over a sample list; fixed-size chunks keep memory flat
/// and evaluation consumes no randomness, so chunking never changes results.
inline PredictionSet predict(ModelBundle& m,
                             const std::vector<SpliceSample>& samples,
                             std::size_t chunk = 256) {
  PredictionSet out;
  out.reserve(samples.size());
  RngState idle(0);  // eval mode draws nothing from it
  for (std::size_t i = 0; i < samples.size(); i += chunk) {
    const std::size_t n = std::min(chunk, samples.size() - i);
    std::vector<const SpliceSample*> batch(n);
    for (std::size_t j = 0; j < n; ++j) batch[j] = &samples[i + j];
    const Tensor probs =
        m.posteriors(detail::stack_windows(batch), idle);
    for (std::size_t j = 0; j < n; ++j) {
      Prediction p;
      p.p_child = probs(j, static_cast<std::size_t>(kChild));
      p.p_adult = probs(j, static_cast<std::size_t>(kAdult));
      p.predicted = argmax_posterior(p.p_child, p.p_adult);
      p.label = samples[i + j].label;
      p.session_id = samples[i + j].session_id;
      p.center = samples[i + j].center;
      p.domain = samples[i + j].domain;
      out.push_back(std::move(p));
    }
  }
  return out;
}

inline double accuracy(ModelBundle& m,
                       const std::vector<SpliceSample>& samples) {
  if (samples.empty()) {
    throw DegenerateError("cannot compute accuracy over zero samples");
  }
  std::size_t hits = 0;
  for (const Prediction& p : predict(m, samples)) {
    if (p.predicted == p.label) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(samples.size());
}

namespace detail {

inline std::vector<Tensor> snapshot_state(ModelBundle& m) {
  std::vector<Tensor> snap;
  for (Tensor* t : m.state_tensors()) snap.push_back(*t);
  return snap;
}

inline void restore_state(ModelBundle& m, const std::vector<Tensor>& snap) {
  const auto tensors = m.state_tensors();
  if (tensors.size() != snap.size()) {
    throw StateError("snapshot does not match the model's tensor inventory");
  }
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    tensors[i]->values() = snap[i].values();
  }
}

/// Splits a shuffled index order into training batches. Chunks shorter than
/// two samples are dropped (batch statistics need n >= 2).
inline std::vector<std::vector<std::size_t>> make_batches(
    std::vector<std::size_t> order, std::size_t batch_size) {
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < order.size(); i += batch_size) {
    const std::size_t n = std::min(batch_size, order.size() - i);
    if (n < 2) break;
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                         order.begin() + static_cast<std::ptrdiff_t>(i + n));
  }
  return batches;
}

inline std::vector<std::size_t> identity_order(std::size_t n) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  return order;
}

/// Shared early-stopping shell: runs `epoch_body` until held-out source
/// accuracy stops improving, then restores the best parameters seen. Ties
/// with the running maximum count toward patience (they are not
/// improvements) but refresh the snapshot, so among equally good epochs the
/// latest one wins. That matters for adversarial adaptation, where source
/// accuracy typically plateaus while the generator keeps aligning domains:
/// keeping the first plateau epoch would discard almost all of the
/// adaptation.
template <typename EpochBody>
std::vector<EpochRecord> early_stopped_run(
    ModelBundle& m, const std::vector<SpliceSample>& heldout,
    const TrainConfig& cfg, EpochBody&& epoch_body) {
  if (heldout.empty()) {
    throw ConfigError("early stopping needs a non-empty held-out set");
  }
  std::vector<EpochRecord> history;
  std::vector<Tensor> best = snapshot_state(m);
  double best_accuracy = -1.0;
  std::size_t since_best = 0;
  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    EpochRecord rec = epoch_body(epoch);
    rec.epoch = epoch;
    rec.heldout_accuracy = accuracy(m, heldout);
    history.push_back(rec);
    if (rec.heldout_accuracy > best_accuracy) {
      best_accuracy = rec.heldout_accuracy;
      best = snapshot_state(m);
      since_best = 0;
    } else {
      if (rec.heldout_accuracy == best_accuracy) best = snapshot_state(m);
      if (++since_best >= cfg.patience) break;
    }
  }
  restore_state(m, best);
  return history;
}

}  // namespace detail

/// Task-only training: pretraining on labeled source data, or upper-bound
/// training when the sample list also carries labeled target data (enabled
/// by variant upper_bound). Early stopping watches held-out accuracy.
inline std::vector<EpochRecord> train_task(
    ModelBundle& m, const std::vector<SpliceSample>& train,
    const std::vector<SpliceSample>& heldout, const TrainConfig& cfg,
    const StepObserver& observer = {}) {
  cfg.validate();
  if (train.size() < 2) {
    throw ConfigError("task training needs at least 2 labeled samples, got " +
                      std::to_string(train.size()));
  }
  const bool allow_target = cfg.variant == TrainMode::kUpperBound;
  RngState rng(cfg.seed);
  AdamOptimizer task_opt(m.task_params());

  return detail::early_stopped_run(m, heldout, cfg, [&](std::size_t epoch) {
    auto order = detail::identity_order(train.size());
    shuffle(order, rng);
    const auto batches = detail::make_batches(std::move(order),
                                              cfg.batch_size);
    EpochRecord rec;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      std::vector<const SpliceSample*> batch;
      batch.reserve(batches[b].size());
      for (std::size_t idx : batches[b]) batch.push_back(&train[idx]);
      detail::observe(observer, epoch, b, 1, false, m);
      rec.task_loss += step_task(m, task_opt, batch, rng, allow_target);
      detail::observe(observer, epoch, b, 1, true, m);
    }
    rec.task_loss /= static_cast<double>(batches.size());
    return rec;
  });
}

/// Adaptation: per batch, task step on source, discriminator step on a
/// balanced two-domain batch, then the adversarial generator step on the
/// same two-domain batch. Target speaker labels are never read; membership
/// in the target list is the only domain evidence used.
inline std::vector<EpochRecord> train_adversarial(
    ModelBundle& m, Stage from_stage,
    const std::vector<SpliceSample>& source_train,
    const std::vector<SpliceSample>& source_heldout,
    const std::vector<SpliceSample>& target_train, const TrainConfig& cfg,
    const StepObserver& observer = {}) {
  cfg.validate();
  if (cfg.variant != TrainMode::kGan && cfg.variant != TrainMode::kGr) {
    throw ConfigError(std::string("adaptation requires variant gan or gr, "
                                  "got ") + train_mode_name(cfg.variant));
  }
  if (from_stage != Stage::kPretrain) {
    throw ConfigError("adaptation must start from a pretrained model");
  }
  if (target_train.empty()) {
    throw ConfigError("adaptation needs target-domain samples");
  }
  if (source_train.size() < 2) {
    throw ConfigError("adaptation needs at least 2 labeled source samples");
  }
  const Variant variant =
      cfg.variant == TrainMode::kGan ? Variant::kGan : Variant::kGr;

  RngState rng(cfg.seed);
  AdamOptimizer task_opt(m.task_params());
  AdamOptimizer disc_opt(m.discriminator_params());
  AdamOptimizer adv_opt(m.generator_params());
  const std::size_t half = std::max<std::size_t>(1, cfg.batch_size / 2);

  return detail::early_stopped_run(m, source_heldout, cfg,
                                   [&](std::size_t epoch) {
    auto source_order = detail::identity_order(source_train.size());
    shuffle(source_order, rng);
    auto target_order = detail::identity_order(target_train.size());
    shuffle(target_order, rng);
    const auto batches = detail::make_batches(std::move(source_order),
                                              cfg.batch_size);
    std::size_t target_cursor = 0;

    EpochRecord rec;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      std::vector<const SpliceSample*> task_batch;
      task_batch.reserve(batches[b].size());
      for (std::size_t idx : batches[b]) {
        task_batch.push_back(&source_train[idx]);
      }

      detail::observe(observer, epoch, b, 1, false, m);
      rec.task_loss += step_task(m, task_opt, task_batch, rng);
      detail::observe(observer, epoch, b, 1, true, m);

      // Balanced two-domain batch: source half reuses the head of the task
      // batch, the target half walks a shuffled cycle over target samples.
      DomainBatch domain_batch;
      const std::size_t take = std::min(half, task_batch.size());
      domain_batch.source.assign(task_batch.begin(),
                                 task_batch.begin() +
                                     static_cast<std::ptrdiff_t>(take));
      for (std::size_t j = 0; j < take; ++j) {
        domain_batch.target.push_back(
            &target_train[target_order[target_cursor % target_order.size()]]);
        ++target_cursor;
      }

      detail::observe(observer, epoch, b, 2, false, m);
      rec.domain_loss += step_discriminator(m, disc_opt, domain_batch, rng,
                                            cfg.disc_generator_eval);
      detail::observe(observer, epoch, b, 2, true, m);

      detail::observe(observer, epoch, b, 3, false, m);
      rec.adv_loss +=
          step_generator_adversarial(m, adv_opt, domain_batch, variant, rng);
      detail::observe(observer, epoch, b, 3, true, m);
    }
    const auto n = static_cast<double>(batches.size());
    rec.task_loss /= n;
    rec.domain_loss /= n;
    rec.adv_loss /= n;
    return rec;
  });
}

/// History file: one line per epoch,
///   epoch<TAB>task_loss<TAB>domain_loss<TAB>adv_loss<TAB>heldout_accuracy
/// with round-trippable decimal numbers.
inline void write_history(const std::string& path,
                          const std::vector<EpochRecord>& history) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  for (const auto& r : history) {
    out << r.epoch << '\t' << num(r.task_loss) << '\t' << num(r.domain_loss)
        << '\t' << num(r.adv_loss) << '\t' << num(r.heldout_accuracy) << "\n";
  }
  if (!out) throw IoError("history write failed: " + path);
}

}  // namespace dann
