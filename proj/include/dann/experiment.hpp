// dann/experiment.hpp
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

// Experiment wiring: which manifest domain tags count as source vs target,
// the training and model configuration, and assembly of loaded sessions into
// per-split sample pools. Experiments are direction-specific; swapping the
// tag lists reverses the adaptation direction.

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "dann/dataset.hpp"
#include "dann/error.hpp"
#include "dann/kv.hpp"
#include "dann/model.hpp"
#include "dann/train.hpp"

namespace dann {

struct ExperimentSpec {
  std::vector<std::string> source_tags = {"src"};
  std::vector<std::string> target_tags = {"tgt"};
  TrainConfig train;
  ModelConfig model;
  std::string out_dir = ".";

  /// Returns kSource or kTarget for a mapped tag, -1 for an unmapped one.
  int side_for_tag(const std::string& tag) const {
    if (std::find(source_tags.begin(), source_tags.end(), tag) !=
        source_tags.end()) {
      return kSource;
    }
    if (std::find(target_tags.begin(), target_tags.end(), tag) !=
        target_tags.end()) {
      return kTarget;
    }
    return -1;
  }

  /// Copies the training-side knobs the model depends on into the model
  /// config so a checkpoint records them.
  void finalize() {
    model.lambda = train.lambda;
    if (train.variant == TrainMode::kGan) model.variant = Variant::kGan;
    if (train.variant == TrainMode::kGr) model.variant = Variant::kGr;
  }

  void validate() const {
    if (source_tags.empty() || target_tags.empty()) {
      throw ConfigError("experiment needs at least one source tag and one "
                        "target tag");
    }
    const std::set<std::string> src(source_tags.begin(), source_tags.end());
    for (const auto& t : target_tags) {
      if (src.count(t)) {
        throw ConfigError("domain tag '" + t +
                          "' appears on both sides of the experiment");
      }
    }
    train.validate();
    model.validate();
  }

  static ExperimentSpec from_file(const std::string& path) {
    const KeyValueFile kv = KeyValueFile::load(path);
    ExperimentSpec spec;
    if (kv.has("source_tags")) spec.source_tags = kv.get_list("source_tags");
    if (kv.has("target_tags")) spec.target_tags = kv.get_list("target_tags");
    if (kv.has("variant")) {
      spec.train.variant = parse_train_mode(kv.require_string("variant"));
    }
    auto get_size = [&](const char* key, std::size_t fallback) {
      const long long v = kv.get_int(key, static_cast<long long>(fallback));
      if (v <= 0) {
        throw ConfigError(std::string("key '") + key + "' must be positive");
      }
      return static_cast<std::size_t>(v);
    };
    spec.train.batch_size = get_size("batch_size", spec.train.batch_size);
    spec.train.max_epochs = get_size("max_epochs", spec.train.max_epochs);
    spec.train.patience = get_size("patience", spec.train.patience);
    spec.train.lambda = kv.get_double("lambda", spec.train.lambda);
    spec.train.seed = static_cast<std::uint64_t>(
        kv.get_int("seed", static_cast<long long>(spec.train.seed)));
    spec.train.heldout_fraction =
        kv.get_double("heldout_fraction", spec.train.heldout_fraction);
    spec.train.disc_generator_eval =
        kv.get_bool("disc_generator_eval", spec.train.disc_generator_eval);
    spec.model.input_dim = get_size("input_dim", spec.model.input_dim);
    spec.model.window = get_size("window", spec.model.window);
    spec.model.hidden = get_size("hidden", spec.model.hidden);
    spec.model.embed_dim = get_size("embed_dim", spec.model.embed_dim);
    spec.model.dropout = kv.get_double("dropout", spec.model.dropout);
    spec.model.bn_momentum =
        kv.get_double("bn_momentum", spec.model.bn_momentum);
    spec.model.bn_eps = kv.get_double("bn_eps", spec.model.bn_eps);
    spec.out_dir = kv.get_string("out_dir", spec.out_dir);
    spec.finalize();
    spec.validate();
    return spec;
  }
};

/// Per-split sample pools for one experiment direction. Target speaker
/// labels are stripped at assembly unless explicitly kept, so adaptation
/// code paths cannot read them even by accident.
struct ExperimentData {
  std::vector<SpliceSample> pool[2][3];  // [domain][split]

  std::vector<SpliceSample>& at(int domain, Split split) {
    return pool[domain][static_cast<int>(split)];
  }
  const std::vector<SpliceSample>& at(int domain, Split split) const {
    return pool[domain][static_cast<int>(split)];
  }
};

/// Buckets session samples by (domain, split), tagging each sample with its
/// domain. Sessions whose tag maps to neither side are skipped and reported
/// through `skipped_tags` when given. `keep_target_labels` is only for
/// evaluation and upper-bound training.
inline ExperimentData assemble_experiment_data(
    const ExperimentSpec& spec, std::vector<LoadedSession>& sessions,
    bool keep_target_labels,
    std::vector<std::string>* skipped_tags = nullptr) {
  ExperimentData data;
  for (auto& session : sessions) {
    const int side = spec.side_for_tag(session.domain_tag);
    session.domain = side;
    if (side < 0) {
      if (skipped_tags) skipped_tags->push_back(session.domain_tag);
      continue;
    }
    if (side == kTarget && !keep_target_labels) {
      strip_speaker_labels(session);
    }
    auto& pool = data.at(side, session.split);
    for (auto& sample : session.samples) {
      sample.domain = side;
      pool.push_back(sample);
    }
  }
  return data;
}

/// If no source session is marked heldout, promotes a session-level random
/// fraction of the source training sessions so early stopping has data.
/// No session's samples ever straddle the two splits.
inline void ensure_source_heldout(std::vector<SessionManifest>& manifests,
                                  const ExperimentSpec& spec) {
  std::vector<SessionManifest> source_train;
  for (const auto& m : manifests) {
    const int side = spec.side_for_tag(m.domain_tag);
    if (side != kSource) continue;
    if (m.split == Split::kHeldout) return;  // manifest already carved one out
    if (m.split == Split::kTrain) source_train.push_back(m);
  }
  const auto [keep, heldout] = split_by_session(
      source_train, spec.train.heldout_fraction, spec.train.seed);
  std::set<std::string> promote;
  for (const auto& m : heldout) promote.insert(m.session_id);
  for (auto& m : manifests) {
    if (promote.count(m.session_id)) m.split = Split::kHeldout;
  }
}

}  // namespace dann
