// Copyright 2026 The KPA Toolkit Authors.
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

#include "kpa/bridge.hpp"

#include <cstdlib>

#include "httplib.h"
#include "kpa/error.hpp"

namespace kpa::bridge {
namespace {

httplib::Client make_client(const std::string& url, std::chrono::milliseconds timeout) {
  httplib::Client cli(url);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);
  cli.set_connection_timeout(secs.count(), usecs.count());
  cli.set_read_timeout(secs.count(), usecs.count());
  cli.set_write_timeout(secs.count(), usecs.count());
  return cli;
}

std::string transport_error(const std::string& url, httplib::Error err) {
  if (err == httplib::Error::Read || err == httplib::Error::Write) {
    return "backend timeout or connection reset at " + url + " (" + httplib::to_string(err) + ")";
  }
  return "backend unreachable at " + url + " (" + httplib::to_string(err) + ")";
}

}  // namespace

BridgeClient::BridgeClient(std::string url, std::chrono::milliseconds timeout)
    : url_(std::move(url)), timeout_(timeout) {
  while (!url_.empty() && url_.back() == '/') url_.pop_back();
  if (url_.empty()) throw UsageError("empty bridge URL");
}

nlohmann::json BridgeClient::health() const {
  auto cli = make_client(url_, timeout_);
  const auto res = cli.Get("/health");
  if (!res) throw BackendError(transport_error(url_, res.error()));
  if (res->status != 200) {
    throw BackendError("backend unhealthy at " + url_ + " (HTTP " + std::to_string(res->status) + ")");
  }
  try {
    return nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::exception&) {
    throw BackendError("backend /health returned malformed JSON");
  }
}

nlohmann::json BridgeClient::post(const std::string& path, const nlohmann::json& body) const {
  auto cli = make_client(url_, timeout_);
  const auto res = cli.Post(path, body.dump(), "application/json");
  if (!res) throw BackendError(transport_error(url_, res.error()));
  if (res->status == 504) throw BackendError("backend timeout on " + path);
  if (res->status != 200) {
    throw BackendError("backend " + path + " failed with HTTP " + std::to_string(res->status) +
                       ": " + res->body.substr(0, 200));
  }
  try {
    return nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::exception&) {
    throw BackendError("backend " + path + " returned malformed JSON");
  }
}

std::vector<embedding::Vector> BridgeClient::embed(const std::vector<std::string>& texts) const {
  if (texts.empty()) return {};
  const nlohmann::json res = post("/embed", {{"texts", texts}});
  if (!res.contains("vectors") || !res["vectors"].is_array()) {
    throw BackendError("/embed response lacks \"vectors\"");
  }
  const auto& vectors = res["vectors"];
  if (vectors.size() != texts.size()) {
    throw BackendError("/embed returned " + std::to_string(vectors.size()) + " vectors for " +
                       std::to_string(texts.size()) + " texts");
  }
  const std::size_t dim = res.value("dim", std::size_t{0});
  std::vector<embedding::Vector> out;
  out.reserve(vectors.size());
  for (const auto& v : vectors) {
    try {
      embedding::Vector vec(v.get<std::vector<double>>());
      if (dim != 0 && vec.dim() != dim) throw BackendError("/embed vector length != dim");
      if (!out.empty() && out.front().dim() != vec.dim()) {
        throw BackendError("/embed returned vectors of mixed dimension");
      }
      out.push_back(std::move(vec));
    } catch (const nlohmann::json::exception&) {
      throw BackendError("/embed returned a non-numeric vector");
    } catch (const InputError& e) {
      throw BackendError(std::string("/embed: ") + e.what());
    }
  }
  return out;
}

std::string BridgeClient::generate(const std::string& prompt, int max_new_tokens) const {
  const nlohmann::json res =
      post("/generate", {{"prompt", prompt}, {"max_new_tokens", max_new_tokens}});
  if (!res.contains("text") || !res["text"].is_string()) {
    throw BackendError("/generate response lacks \"text\"");
  }
  return res["text"].get<std::string>();
}

BridgeClient::ScoreBatch BridgeClient::score(
    const std::vector<std::pair<std::string, std::string>>& pairs,
    const std::string& metric) const {
  nlohmann::json body;
  body["pairs"] = nlohmann::json::array();
  for (const auto& [cand, ref] : pairs) {
    body["pairs"].push_back({{"candidate", cand}, {"reference", ref}});
  }
  body["metric"] = metric;
  const nlohmann::json res = post("/score", body);
  ScoreBatch batch;
  try {
    batch.scores = res.at("scores").get<std::vector<double>>();
    const auto range = res.at("range").get<std::vector<double>>();
    if (range.size() != 2) throw BackendError("/score \"range\" must have two entries");
    batch.lo = range[0];
    batch.hi = range[1];
  } catch (const nlohmann::json::exception&) {
    throw BackendError("/score response must carry numeric \"scores\" and \"range\"");
  }
  if (batch.scores.size() != pairs.size()) {
    throw BackendError("/score returned " + std::to_string(batch.scores.size()) +
                       " scores for " + std::to_string(pairs.size()) + " pairs");
  }
  return batch;
}

std::string resolve_bridge_url(const std::string& explicit_url) {
  if (!explicit_url.empty()) return explicit_url;
  if (const char* env = std::getenv("KPA_BRIDGE_URL"); env != nullptr && *env != '\0') return env;
  throw UsageError("no bridge URL: pass --endpoint or set KPA_BRIDGE_URL");
}

}  // namespace kpa::bridge
