// dann/dann.hpp
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

// Umbrella header pulling in the whole library.

#include "dann/activations.hpp"
#include "dann/adam.hpp"
#include "dann/batchnorm.hpp"
#include "dann/blstm.hpp"
#include "dann/checkpoint.hpp"
#include "dann/dataset.hpp"
#include "dann/dense.hpp"
#include "dann/dropout.hpp"
#include "dann/error.hpp"
#include "dann/experiment.hpp"
#include "dann/features.hpp"
#include "dann/fusion.hpp"
#include "dann/grad_reversal.hpp"
#include "dann/kv.hpp"
#include "dann/manifest.hpp"
#include "dann/metrics.hpp"
#include "dann/model.hpp"
#include "dann/phase.hpp"
#include "dann/rng.hpp"
#include "dann/synthetic.hpp"
#include "dann/tensor.hpp"
#include "dann/tensor_io.hpp"
#include "dann/train.hpp"
#include "dann/wav.hpp"
