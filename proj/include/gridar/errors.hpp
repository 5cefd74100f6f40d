// Copyright 2026 The GridAR Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace gridar {

// All engine failures derive from Error so callers can catch one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define GRIDAR_DEFINE_ERROR(Name)          \
  class Name : public Error {              \
   public:                                 \
    using Error::Error;                    \
  }

// token-canvas
GRIDAR_DEFINE_ERROR(IndivisibleCanvas);
GRIDAR_DEFINE_ERROR(ShapeMismatch);
GRIDAR_DEFINE_ERROR(OutOfRange);

// scene-model
GRIDAR_DEFINE_ERROR(NonSequentialAccess);
GRIDAR_DEFINE_ERROR(DegenerateDistribution);
GRIDAR_DEFINE_ERROR(UnpopulatedCanvas);
GRIDAR_DEFINE_ERROR(PromptParseError);
GRIDAR_DEFINE_ERROR(InvalidPrompt);

// guidance
GRIDAR_DEFINE_ERROR(LengthMismatch);

// verification
GRIDAR_DEFINE_ERROR(InfeasibleRemainder);
GRIDAR_DEFINE_ERROR(VerifierError);

class Timeout : public VerifierError {
 public:
  using VerifierError::VerifierError;
};
class MalformedResponse : public VerifierError {
 public:
  using VerifierError::VerifierError;
};
class TransportError : public VerifierError {
 public:
  using VerifierError::VerifierError;
};

// pipeline
GRIDAR_DEFINE_ERROR(AllRejected);
GRIDAR_DEFINE_ERROR(Abort);
GRIDAR_DEFINE_ERROR(InvalidPlan);

// bench
GRIDAR_DEFINE_ERROR(EmptySpec);
GRIDAR_DEFINE_ERROR(NoFailingPrompts);
GRIDAR_DEFINE_ERROR(ConfigError);

#undef GRIDAR_DEFINE_ERROR

}  // namespace gridar
