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

#include "gridar/guidance.hpp"

namespace gridar {

std::string to_string(GuidanceMode mode) {
  switch (mode) {
    case GuidanceMode::two_way:
      return "two_way";
    case GuidanceMode::three_way:
      return "three_way";
    case GuidanceMode::replacement:
      return "replacement";
  }
  return "unknown";
}

GuidanceMode parse_guidance_mode(const std::string& name) {
  if (name == "two_way") return GuidanceMode::two_way;
  if (name == "three_way") return GuidanceMode::three_way;
  if (name == "replacement") return GuidanceMode::replacement;
  throw ConfigError("unknown guidance mode '" + name + "'");
}

}  // namespace gridar
