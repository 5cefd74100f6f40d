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

#include "gridar/remote_verifier.hpp"

#include <algorithm>
#include <cstdlib>

#include "httplib.h"

#include "gridar/errors.hpp"

namespace gridar {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

[[noreturn]] void malformed(const std::string& what) {
  throw MalformedResponse("malformed verifier response: " + what);
}

template <typename Names>
int index_of(const Names& names, const std::string& value, const char* what) {
  for (size_t i = 0; i < names.size(); ++i) {
    if (names[i] == value) return static_cast<int>(i);
  }
  malformed(std::string("unknown ") + what + " '" + value + "'");
}

Directive parse_directive(const json& j) {
  if (!j.is_object() || !j.contains("rows") || !j.contains("quotas") || j.size() != 2) {
    malformed("directive needs exactly 'rows' and 'quotas'");
  }
  const auto& rows = j["rows"];
  if (!rows.is_array() || rows.size() != 2 || !rows[0].is_number_integer() ||
      !rows[1].is_number_integer()) {
    malformed("directive rows must be [start, end]");
  }
  Directive d;
  d.row_start = rows[0].get<int>();
  d.row_end = rows[1].get<int>();
  if (!j["quotas"].is_array()) malformed("directive quotas must be an array");
  for (const auto& q : j["quotas"]) {
    if (!q.is_object() || q.size() != 3 || !q.contains("count") || !q.contains("color") ||
        !q.contains("shape") || !q["count"].is_number_integer() || !q["color"].is_string() ||
        !q["shape"].is_string()) {
      malformed("quota needs integer 'count' and string 'color', 'shape'");
    }
    Requirement r;
    r.count = q["count"].get<int>();
    r.type.color = index_of(kColorNames, q["color"].get<std::string>(), "color");
    r.type.shape = index_of(kShapeNames, q["shape"].get<std::string>(), "shape");
    d.quotas.push_back(r);
  }
  return d;
}

ordered_json directive_json(const Directive& d) {
  ordered_json quotas = ordered_json::array();
  for (const auto& q : d.quotas) {
    quotas.push_back({{"count", q.count},
                      {"color", std::string(kColorNames.at(static_cast<size_t>(q.type.color)))},
                      {"shape", std::string(kShapeNames.at(static_cast<size_t>(q.type.shape)))}});
  }
  return {{"rows", {d.row_start, d.row_end}}, {"quotas", quotas}};
}

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

ParsedUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw TransportError("endpoint needs a scheme: " + url);
  if (url.compare(0, scheme_end, "http") != 0) {
    throw TransportError("only http:// endpoints are supported: " + url);
  }
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

ordered_json VerificationRequest::to_json() const {
  return {{"prompt", prompt},         {"image_b64", image_b64},
          {"image_format", image_format}, {"rows", rows},
          {"stage", stage},           {"want_reformulation", want_reformulation}};
}

VerificationResponse VerificationResponse::parse(const json& body, int expected_rows) {
  if (!body.is_object()) malformed("body is not an object");
  for (const auto& [key, _] : body.items()) {
    if (key != "judgments" && key != "reformulated_prompt" && key != "directives") {
      malformed("unexpected field '" + key + "'");
    }
  }
  if (!body.contains("judgments") || !body["judgments"].is_array()) {
    malformed("missing 'judgments' array");
  }
  VerificationResponse out;
  for (const auto& j : body["judgments"]) {
    if (!j.is_string()) malformed("judgment is not a string");
    const auto s = j.get<std::string>();
    if (s == "possible") {
      out.judgments.push_back(Judgment::possible);
    } else if (s == "impossible") {
      out.judgments.push_back(Judgment::impossible);
    } else {
      malformed("judgment '" + s + "'");
    }
  }
  if (static_cast<int>(out.judgments.size()) != expected_rows) {
    malformed(std::to_string(out.judgments.size()) + " judgments for " +
              std::to_string(expected_rows) + " rows");
  }
  if (body.contains("reformulated_prompt") && !body["reformulated_prompt"].is_null()) {
    if (!body["reformulated_prompt"].is_string()) malformed("reformulated_prompt not a string");
    out.reformulated_prompt = body["reformulated_prompt"].get<std::string>();
  }
  if (body.contains("directives") && !body["directives"].is_null()) {
    if (!body["directives"].is_array()) malformed("directives not an array");
    std::vector<Directive> ds;
    for (const auto& d : body["directives"]) ds.push_back(parse_directive(d));
    out.directives = std::move(ds);
  }
  return out;
}

ordered_json VerificationResponse::to_json() const {
  ordered_json j;
  ordered_json js = ordered_json::array();
  for (auto v : judgments) js.push_back(to_string(v));
  j["judgments"] = js;
  j["reformulated_prompt"] = reformulated_prompt ? ordered_json(*reformulated_prompt) : nullptr;
  if (directives) {
    ordered_json ds = ordered_json::array();
    for (const auto& d : *directives) ds.push_back(directive_json(d));
    j["directives"] = ds;
  } else {
    j["directives"] = nullptr;
  }
  return j;
}

std::string RemoteEndpoint::token_from_env() {
  const char* v = std::getenv("GRIDAR_VERIFIER_TOKEN");
  return v ? v : "";
}

std::string openai_system_prompt(int rows) {
  return "You verify partially generated images. The image is a grid of " +
         std::to_string(rows) +
         " horizontal cells; each cell shows the top part of a separate candidate image "
         "for the same prompt. For each cell, top to bottom, answer \"impossible\" only if "
         "the visible part already rules out the prompt (wrong colors or object types, or "
         "more objects than requested), otherwise \"possible\". If asked, also propose a "
         "reformulated prompt that states how many objects belong in the visible rows and "
         "how many remain for the rest of the image. Respond only with JSON of the form "
         "{\"judgments\": [...], \"reformulated_prompt\": string|null, \"directives\": "
         "[{\"rows\": [start, end], \"quotas\": [{\"count\": n, \"color\": c, \"shape\": "
         "s}]}]|null}.";
}

ordered_json openai_chat_body(const VerificationRequest& request, const std::string& model) {
  const std::string mime = request.image_format == "png" ? "image/png" : "image/x-portable-pixmap";
  std::string task = "Prompt: " + request.prompt + "\nCells: " + std::to_string(request.rows) +
                     "\nStage: " + std::to_string(request.stage) + "\nReformulate: " +
                     (request.want_reformulation ? "yes" : "no");
  return {
      {"model", model},
      {"temperature", 0},
      {"response_format", {{"type", "json_object"}}},
      {"messages",
       {{{"role", "system"}, {"content", openai_system_prompt(request.rows)}},
        {{"role", "user"},
         {"content",
          {{{"type", "text"}, {"text", task}},
           {{"type", "image_url"},
            {"image_url", {{"url", "data:" + mime + ";base64," + request.image_b64}}}}}}}}},
  };
}

VerificationResponse remote_verify(const RemoteEndpoint& endpoint,
                                   const VerificationRequest& request, const ExchangeLog& log) {
  const auto url = split_url(endpoint.url);
  const std::string body = endpoint.profile == WireProfile::openai
                               ? openai_chat_body(request, endpoint.model).dump()
                               : request.to_json().dump();
  httplib::Headers headers;
  if (!endpoint.auth_token.empty()) {
    headers.emplace("Authorization", "Bearer " + endpoint.auth_token);
  }

  std::string last_error;
  bool timed_out = false;
  for (int attempt = 0; attempt <= endpoint.retries; ++attempt) {
    httplib::Client client(url.origin);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(endpoint.timeout);
    const auto usecs =
        std::chrono::duration_cast<std::chrono::microseconds>(endpoint.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());

    WireExchange exchange{body, {}, 0, {}};
    auto res = client.Post(url.path, headers, body, "application/json");
    if (!res) {
      const auto err = res.error();
      timed_out = err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout;
      last_error = httplib::to_string(err);
      exchange.error = last_error;
      if (log) log(exchange);
      continue;
    }
    exchange.status = res->status;
    exchange.response_body = res->body;
    if (log) log(exchange);
    if (res->status >= 500) {
      timed_out = false;
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) malformed("HTTP status " + std::to_string(res->status));

    json parsed = json::parse(res->body, nullptr, false);
    if (parsed.is_discarded()) malformed("body is not JSON");
    if (endpoint.profile == WireProfile::openai) {
      if (!parsed.contains("choices") || !parsed["choices"].is_array() ||
          parsed["choices"].empty()) {
        malformed("chat completion without choices");
      }
      const auto& msg = parsed["choices"][0]["message"];
      if (!msg.is_object() || !msg.contains("content") || !msg["content"].is_string()) {
        malformed("chat completion without message content");
      }
      parsed = json::parse(msg["content"].get<std::string>(), nullptr, false);
      if (parsed.is_discarded()) malformed("message content is not JSON");
    }
    return VerificationResponse::parse(parsed, request.rows);
  }
  const std::string what = "verifier at " + endpoint.url + " failed after " +
                           std::to_string(endpoint.retries + 1) + " attempts: " + last_error;
  if (timed_out) throw Timeout(what);
  throw TransportError(what);
}

VerificationRequest make_request(const GridView& grid, const ScenePrompt& prompt,
                                 const Palette& palette, bool want_reformulation,
                                 const std::string& image_format) {
  const Image image = render(grid.canvas, palette);
  VerificationRequest req;
  req.prompt = prompt.text();
  req.image_format = image_format;
  req.image_b64 = base64_encode(image_format == "ppm" ? encode_ppm(image) : encode_png(image));
  req.rows = grid.rows;
  req.stage = grid.stage;
  req.want_reformulation = want_reformulation;
  return req;
}

std::optional<ScenePrompt> RemoteVerifier::reformulation_from(const VerificationResponse& response,
                                                          const ScenePrompt& prompt, int h) const {
  if (!response.reformulated_prompt && !response.directives) return std::nullopt;
  ScenePrompt r;
  r.requirements = prompt.requirements;
  if (response.directives) r.directives = *response.directives;
  if (response.reformulated_prompt) r.external_text = *response.reformulated_prompt;
  try {
    r.validate(palette_, h);
  } catch (const InvalidPrompt& e) {
    malformed(std::string("directives: ") + e.what());
  }
  return r;
}

Inspection RemoteVerifier::inspect(const GridView& grid, const ScenePrompt& prompt,
                                   bool want_reformulation) {
  const auto log = [this](const WireExchange& e) {
    std::lock_guard lock(mu_);
    exchanges_.push_back(e);
  };
  const int h = grid.canvas.spec().h;
  std::vector<VerificationResponse> responses;
  if (per_cell_) {
    // One single-cell image per candidate, cropped from the grid.
    CanvasSpec crop = grid.canvas.spec();
    crop.h = grid.cell_rows();
    const auto bands = partition_rows(grid.canvas.spec(), grid.rows);
    for (const auto& band : bands) {
      const GridView cell{TokenCanvas(crop, slice_band(grid.canvas, band)), 1, grid.stage};
      responses.push_back(remote_verify(
          endpoint_, make_request(cell, prompt, palette_, want_reformulation, image_format_), log));
    }
  } else {
    responses.push_back(remote_verify(
        endpoint_, make_request(grid, prompt, palette_, want_reformulation, image_format_), log));
  }

  Inspection out;
  std::vector<std::optional<ScenePrompt>> offered;
  for (int i = 0; i < grid.rows; ++i) {
    const auto& response = responses[per_cell_ ? static_cast<size_t>(i) : 0];
    const size_t at = per_cell_ ? 0 : static_cast<size_t>(i);
    out.verdicts.push_back({i, response.judgments[at], {}});
    if (per_cell_ || i == 0) {
      offered.push_back(want_reformulation ? reformulation_from(response, prompt, h) : std::nullopt);
    } else {
      offered.push_back(offered.front());
    }
  }
  if (std::any_of(offered.begin(), offered.end(), [](const auto& r) { return r.has_value(); })) {
    for (int i = 0; i < grid.rows; ++i) {
      if (out.verdicts[static_cast<size_t>(i)].possible()) {
        out.reformulations.push_back(offered[static_cast<size_t>(i)]);
      } else {
        out.reformulations.emplace_back();
      }
    }
  }
  return out;
}

std::vector<WireExchange> RemoteVerifier::exchanges() const {
  std::lock_guard lock(mu_);
  return exchanges_;
}

}  // namespace gridar
