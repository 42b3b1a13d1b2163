// Copyright 2026 The cipherlm Authors.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <chrono>
#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cipherlm/keyed_cipher.hpp"
#include "cipherlm/model_io.hpp"
#include "cipherlm/tokenize.hpp"

namespace cipherlm {

inline constexpr std::size_t kMaxWireTokenChars = 64;

struct InferRequest {
  std::vector<std::string> cipher_tokens;
  std::optional<std::string> request_id;
};

struct InferResponse {
  std::size_t label = 0;
  std::vector<double> scores;
  std::string model_fingerprint;
};

struct HealthInfo {
  std::string status;
  std::size_t vocab_size = 0;
  std::size_t dim = 0;
};

/// Throws ProtocolError when the body is not a valid request: not JSON, an
/// empty or missing cipher_tokens list, a non-string or over-long token, or
/// a non-string request_id.
InferRequest request_from_json(std::string_view body);
std::string request_to_json(const InferRequest& request);

/// Throws ProtocolError on malformed JSON or a response that breaks its
/// invariants (scores not summing to 1, label not the argmax).
InferResponse response_from_json(std::string_view body);
std::string response_to_json(const InferResponse& response);

HealthInfo health_from_json(std::string_view body);
std::string health_to_json(const HealthInfo& health);

/// Immutable server-side model: second-stage tokenizer, embedding lookup,
/// mean pooling and the classifier head. Safe to share across threads.
class InferenceEngine {
 public:
  /// Throws StartupError when the head does not fit the bundle.
  InferenceEngine(AdaptedBundle bundle, ClassifierHead head);

  IndexSequence resolve(const CipherTokenStream& cs) const;
  InferResponse infer(const CipherTokenStream& cs) const;
  HealthInfo health() const;

  /// 16 hex chars of BLAKE2b over the manifest and head JSON.
  const std::string& model_fingerprint() const noexcept { return fingerprint_; }
  const AdaptedBundle& bundle() const noexcept { return bundle_; }
  const ClassifierHead& head() const noexcept { return head_; }

 private:
  AdaptedBundle bundle_;
  ClassifierHead head_;
  SecondStageTokenizer second_stage_;
  std::string fingerprint_;
};

/// HTTP front end: POST /v1/infer and GET /v1/health. Logs only token
/// counts, status codes and latencies.
class InferenceServer {
 public:
  explicit InferenceServer(std::shared_ptr<const InferenceEngine> engine);
  ~InferenceServer();

  InferenceServer(const InferenceServer&) = delete;
  InferenceServer& operator=(const InferenceServer&) = delete;

  /// Binds host:port (port 0 picks a free port) and serves on a background
  /// thread. Throws StartupError when the address cannot be bound.
  void start(const std::string& host, int port);
  void stop();
  /// Blocks until the server has stopped.
  void wait();

  int port() const noexcept { return port_; }
  bool running() const noexcept;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int port_ = 0;
};

/// Splits "host:port"; throws ConfigError on anything else.
std::pair<std::string, int> parse_bind(std::string_view bind);

struct HttpResult {
  int status = 0;
  std::string body;
};

/// What the client sends over. Throws TransportError when the server
/// cannot be reached.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual HttpResult post_json(const std::string& path,
                               const std::string& body) = 0;
  virtual HttpResult get(const std::string& path) = 0;
};

class HttpTransport : public Transport {
 public:
  /// url like "http://127.0.0.1:8080".
  explicit HttpTransport(std::string url,
                         std::chrono::milliseconds timeout =
                             std::chrono::milliseconds(10000));
  ~HttpTransport() override;

  HttpResult post_json(const std::string& path, const std::string& body) override;
  HttpResult get(const std::string& path) override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Tokenizes and encrypts locally, then sends only cipher tokens.
class InferenceClient {
 public:
  InferenceClient(std::shared_ptr<Transport> transport, const Vocabulary& vocab,
                  const KeyMaterial& km, bool lowercase = true);

  /// Throws ConfigError for empty text before anything is sent,
  /// ProtocolError for non-200 or malformed responses, TransportError when
  /// the server is unreachable.
  InferResponse infer(std::string_view text,
                      std::optional<std::string> request_id = std::nullopt);
  HealthInfo health();

  /// The payload infer() would post for this text.
  InferRequest build_request(std::string_view text,
                             std::optional<std::string> request_id = std::nullopt) const;

 private:
  std::shared_ptr<Transport> transport_;
  WordPieceTokenizer tokenizer_;
  KeyMaterial km_;
  CipherMap cipher_map_;
};

InferResponse client_infer(const std::string& url, std::string_view text,
                           const Vocabulary& vocab, const KeyMaterial& km);

}  // namespace cipherlm
