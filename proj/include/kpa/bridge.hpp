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

#pragma once

#include <chrono>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "kpa/embedding.hpp"

namespace kpa::bridge {

// Client for the model bridge service:
//   POST /embed    {"texts": [...]}                     -> {"vectors": [[...]], "dim": n}
//   POST /generate {"prompt": s, "max_new_tokens": n}   -> {"text": s}
//   POST /score    {"pairs": [{candidate, reference}], "metric": s}
//                                                    -> {"scores": [...], "range": [lo, hi]}
//   GET  /health                                     -> {"status": ..., ...}
// Every transport or protocol failure is reported as BackendError.
class BridgeClient {
 public:
  // `url` is "http://host:port"; a trailing slash is ignored.
  explicit BridgeClient(std::string url,
                        std::chrono::milliseconds timeout = std::chrono::seconds(60));

  const std::string& url() const { return url_; }

  nlohmann::json health() const;
  std::vector<embedding::Vector> embed(const std::vector<std::string>& texts) const;
  std::string generate(const std::string& prompt, int max_new_tokens) const;

  struct ScoreBatch {
    std::vector<double> scores;
    double lo = 0.0;
    double hi = 0.0;
  };
  ScoreBatch score(const std::vector<std::pair<std::string, std::string>>& pairs,
                   const std::string& metric) const;

 private:
  nlohmann::json post(const std::string& path, const nlohmann::json& body) const;

  std::string url_;
  std::chrono::milliseconds timeout_;
};

class BridgeEncoder : public embedding::Encoder {
 public:
  explicit BridgeEncoder(BridgeClient client) : client_(std::move(client)) {}
  std::vector<embedding::Vector> embed(const std::vector<std::string>& texts) const override {
    return client_.embed(texts);
  }

 private:
  BridgeClient client_;
};

// Bridge URL from an explicit value, falling back to $KPA_BRIDGE_URL.
std::string resolve_bridge_url(const std::string& explicit_url);

}  // namespace kpa::bridge
