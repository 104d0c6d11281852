// dann/error.hpp
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

#include <stdexcept>
#include <string>

namespace dann {

/// Base class for every error thrown by this library. Each subclass is a
/// distinct failure category so callers can catch exactly what they expect.
class Error : public std::runtime_error {
 public:
  Error(const std::string& category, const std::string& what)
      : std::runtime_error(category + ": " + what), category_(category) {}

  const std::string& category() const { return category_; }

 private:
  std::string category_;
};

#define DANN_DEFINE_ERROR(Name, tag)                                   \
  class Name : public Error {                                          \
   public:                                                             \
    explicit Name(const std::string& what) : Error(tag, what) {}       \
  }

DANN_DEFINE_ERROR(DimensionError, "dimension error");
DANN_DEFINE_ERROR(ConfigError, "config error");
DANN_DEFINE_ERROR(StateError, "state error");
DANN_DEFINE_ERROR(LabelError, "label error");
DANN_DEFINE_ERROR(AlignmentError, "alignment error");
DANN_DEFINE_ERROR(FormatError, "format error");
DANN_DEFINE_ERROR(ParseError, "parse error");
DANN_DEFINE_ERROR(ValidationError, "validation error");
DANN_DEFINE_ERROR(IoError, "io error");
// Training-step preconditions (wrong domain mix in a batch and the like).
DANN_DEFINE_ERROR(ContractError, "contract violation");
// Inputs too small to normalize: batch of one, session of one frame.
DANN_DEFINE_ERROR(DegenerateError, "degenerate input");

#undef DANN_DEFINE_ERROR

}  // namespace dann
