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

#include <chrono>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "gridar/verification.hpp"

namespace gridar {

/// Wire form of a verification call. Field names are the protocol.
struct VerificationRequest {
  std::string prompt;
  std::string image_b64;
  std::string image_format = "png";  ///< "png" or "ppm"
  int rows = 0;
  int stage = 0;
  bool want_reformulation = false;

  nlohmann::ordered_json to_json() const;
};

struct VerificationResponse {
  std::vector<Judgment> judgments;
  std::optional<std::string> reformulated_prompt;
  std::optional<std::vector<Directive>> directives;

  /// Strict parse. Throws MalformedResponse on any schema violation,
  /// including a judgment count different from `expected_rows`.
  static VerificationResponse parse(const nlohmann::json& body, int expected_rows);
  nlohmann::ordered_json to_json() const;
};

enum class WireProfile {
  native,  ///< POST the request JSON as-is
  openai,  ///< wrap it in an OpenAI-compatible chat-completions call
};

struct RemoteEndpoint {
  std::string url;  ///< e.g. http://127.0.0.1:8080/verify
  std::string auth_token;
  WireProfile profile = WireProfile::native;
  std::string model = "gpt-4.1";  ///< openai profile only
  std::chrono::milliseconds timeout{30000};
  int retries = 2;

  /// Token from the GRIDAR_VERIFIER_TOKEN environment variable, if set.
  static std::string token_from_env();
};

/// One raw exchange, kept for audit.
struct WireExchange {
  std::string request_body;
  std::string response_body;
  int status = 0;
  std::string error;
};

using ExchangeLog = std::function<void(const WireExchange&)>;

/// System prompt used by the openai profile.
std::string openai_system_prompt(int rows);
/// Chat-completions body wrapping `request`.
nlohmann::ordered_json openai_chat_body(const VerificationRequest& request,
                                        const std::string& model);

/// POSTs `request` and parses the reply. Transport failures and timeouts are
/// retried `endpoint.retries` times before surfacing as TransportError or
/// Timeout; schema failures raise MalformedResponse immediately.
VerificationResponse remote_verify(const RemoteEndpoint& endpoint,
                                   const VerificationRequest& request,
                                   const ExchangeLog& log = {});

/// Builds the wire request for a grid (rendered with the toy renderer).
VerificationRequest make_request(const GridView& grid, const ScenePrompt& prompt,
                                 const Palette& palette, bool want_reformulation,
                                 const std::string& image_format = "png");

/// Verifier backed by an external service speaking the wire protocol. By
/// default the whole grid goes out as one image; with `per_cell` each cell is
/// cropped and sent on its own (rows = 1).
class RemoteVerifier final : public Verifier {
 public:
  RemoteVerifier(RemoteEndpoint endpoint, Palette palette, std::string image_format = "png",
                 bool per_cell = false)
      : endpoint_(std::move(endpoint)),
        palette_(palette),
        image_format_(std::move(image_format)),
        per_cell_(per_cell) {}

  std::string name() const override { return "remote"; }
  Inspection inspect(const GridView& grid, const ScenePrompt& prompt,
                     bool want_reformulation) override;

  std::vector<WireExchange> exchanges() const;

 private:
  std::optional<ScenePrompt> reformulation_from(const VerificationResponse& response,
                                                const ScenePrompt& prompt, int h) const;

  RemoteEndpoint endpoint_;
  Palette palette_;
  std::string image_format_;
  bool per_cell_;
  mutable std::mutex mu_;
  std::vector<WireExchange> exchanges_;
};

}  // namespace gridar
