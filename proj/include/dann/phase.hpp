// dann/phase.hpp
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

namespace dann {

/// Execution mode for layers with train/test asymmetry.
///
/// kTrain  - batch statistics, running stats updated, dropout active.
/// kFrozen - batch statistics, running stats NOT updated, dropout active.
///           Used when a subnetwork participates in a step that must not
///           mutate it (e.g. the generator while the discriminator trains).
/// kEval   - running statistics, dropout is the identity and consumes no
///           random numbers, so evaluating never perturbs a training run.
enum class Phase { kTrain, kFrozen, kEval };

inline bool uses_batch_stats(Phase p) { return p != Phase::kEval; }
inline bool updates_running_stats(Phase p) { return p == Phase::kTrain; }
inline bool dropout_active(Phase p) { return p != Phase::kEval; }

}  // namespace dann
