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

#include "cipherlm/service.hpp"

#include <charconv>
#include <cmath>
#include <thread>

#include <httplib.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "cipherlm/blake2b.hpp"
#include "cipherlm/errors.hpp"
#include "cipherlm/trainer.hpp"

namespace cipherlm {

using nlohmann::ordered_json;

namespace {

ordered_json parse_object(std::string_view body, std::string_view what) {
  ordered_json j = ordered_json::parse(body, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded() || !j.is_object()) {
    throw ProtocolError(std::string(what) + " is not a JSON object");
  }
  return j;
}

std::size_t argmax(const std::vector<double>& v) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < v.size(); ++k) {
    if (v[k] > v[best]) best = k;
  }
  return best;
}

std::string error_body(std::string_view message) {
  return ordered_json{{"error", message}}.dump();
}

}  // namespace

InferRequest request_from_json(std::string_view body) {
  const ordered_json j = parse_object(body, "request body");
  const auto it = j.find("cipher_tokens");
  if (it == j.end() || !it->is_array()) {
    throw ProtocolError("cipher_tokens must be a list");
  }
  if (it->empty()) throw ProtocolError("cipher_tokens is empty");
  InferRequest req;
  req.cipher_tokens.reserve(it->size());
  for (std::size_t i = 0; i < it->size(); ++i) {
    const auto& t = (*it)[i];
    if (!t.is_string()) {
      throw ProtocolError("cipher token at position " + std::to_string(i) +
                          " is not a string");
    }
    const auto& s = t.get_ref<const std::string&>();
    if (s.size() > kMaxWireTokenChars) {
      throw ProtocolError("cipher token at position " + std::to_string(i) +
                          " exceeds " + std::to_string(kMaxWireTokenChars) +
                          " characters");
    }
    req.cipher_tokens.push_back(s);
  }
  if (const auto rid = j.find("request_id"); rid != j.end()) {
    if (!rid->is_string()) throw ProtocolError("request_id must be a string");
    req.request_id = rid->get<std::string>();
  }
  return req;
}

std::string request_to_json(const InferRequest& request) {
  ordered_json j;
  j["cipher_tokens"] = request.cipher_tokens;
  if (request.request_id) j["request_id"] = *request.request_id;
  return j.dump();
}

InferResponse response_from_json(std::string_view body) {
  const ordered_json j = parse_object(body, "response body");
  InferResponse r;
  try {
    r.label = j.at("label").get<std::size_t>();
    r.scores = j.at("scores").get<std::vector<double>>();
    r.model_fingerprint = j.at("model_fingerprint").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(std::string("malformed response: ") + e.what());
  }
  if (r.scores.empty()) throw ProtocolError("response has no scores");
  double sum = 0.0;
  for (double s : r.scores) sum += s;
  if (!(std::abs(sum - 1.0) <= 1e-6)) {
    throw ProtocolError("response scores do not sum to 1");
  }
  if (r.label != argmax(r.scores)) {
    throw ProtocolError("response label is not the argmax of its scores");
  }
  return r;
}

std::string response_to_json(const InferResponse& response) {
  ordered_json j;
  j["label"] = response.label;
  j["scores"] = response.scores;
  j["model_fingerprint"] = response.model_fingerprint;
  return j.dump();
}

HealthInfo health_from_json(std::string_view body) {
  const ordered_json j = parse_object(body, "health body");
  HealthInfo h;
  try {
    h.status = j.at("status").get<std::string>();
    h.vocab_size = j.at("vocab_size").get<std::size_t>();
    h.dim = j.at("dim").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(std::string("malformed health response: ") + e.what());
  }
  return h;
}

std::string health_to_json(const HealthInfo& health) {
  ordered_json j;
  j["status"] = health.status;
  j["vocab_size"] = health.vocab_size;
  j["dim"] = health.dim;
  return j.dump();
}

InferenceEngine::InferenceEngine(AdaptedBundle bundle, ClassifierHead head)
    : bundle_(std::move(bundle)),
      head_(std::move(head)),
      second_stage_(bundle_.vocab, bundle_.manifest.digest_bytes) {
  const auto rows = static_cast<std::size_t>(bundle_.emb.rows());
  const auto cols = static_cast<std::size_t>(bundle_.emb.cols());
  if (bundle_.vocab.size() != rows) {
    throw StartupError("bundle vocabulary and matrix sizes differ");
  }
  if (head_.dim() != cols) {
    throw StartupError("head expects " + std::to_string(head_.dim()) +
                       "-dim features but the bundle has " +
                       std::to_string(cols));
  }
  if (head_.classes() < 2 ||
      static_cast<std::size_t>(head_.weights.rows()) != head_.classes()) {
    throw StartupError("head weights and bias disagree on the class count");
  }
  fingerprint_ = crypto::to_hex(crypto::blake2b(
      manifest_to_json(bundle_.manifest) + head_to_json(head_), 8));
}

IndexSequence InferenceEngine::resolve(const CipherTokenStream& cs) const {
  return second_stage_.tokenize(cs);
}

InferResponse InferenceEngine::infer(const CipherTokenStream& cs) const {
  const Eigen::VectorXd x =
      mean_pool(resolve(cs), bundle_.emb, second_stage_.pad_id());
  const Eigen::VectorXd p = predict_proba(head_, x);
  InferResponse r;
  r.scores.assign(p.data(), p.data() + p.size());
  r.label = argmax(r.scores);
  r.model_fingerprint = fingerprint_;
  return r;
}

HealthInfo InferenceEngine::health() const {
  return {"ok", bundle_.vocab.size(), static_cast<std::size_t>(bundle_.emb.cols())};
}

struct InferenceServer::Impl {
  std::shared_ptr<const InferenceEngine> engine;
  httplib::Server server;
  std::thread thread;
};

InferenceServer::InferenceServer(std::shared_ptr<const InferenceEngine> engine)
    : impl_(std::make_unique<Impl>()) {
  if (!engine) throw StartupError("no inference engine");
  impl_->engine = std::move(engine);
  const InferenceEngine* eng = impl_->engine.get();

  // SO_REUSEADDR only: the library default adds SO_REUSEPORT, which would let
  // a second server silently share a port that is already in use.
  impl_->server.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  });

  impl_->server.Post("/v1/infer", [eng](const httplib::Request& req,
                                        httplib::Response& res) {
    const auto t0 = std::chrono::steady_clock::now();
    std::size_t ntokens = 0;
    try {
      InferRequest parsed = request_from_json(req.body);
      ntokens = parsed.cipher_tokens.size();
      const InferResponse out =
          eng->infer(CipherTokenStream{std::move(parsed.cipher_tokens)});
      res.set_content(response_to_json(out), "application/json");
      res.status = 200;
    } catch (const ProtocolError& e) {
      res.set_content(error_body(e.what()), "application/json");
      res.status = 400;
    } catch (const std::exception&) {
      res.set_content(error_body("internal error"), "application/json");
      res.status = 500;
    }
    const auto us = std::chrono::duration_cast<std::chrono::microseconds>(
                        std::chrono::steady_clock::now() - t0)
                        .count();
    spdlog::info("infer status={} tokens={} latency_us={}", res.status, ntokens, us);
  });

  impl_->server.Get("/v1/health", [eng](const httplib::Request&,
                                        httplib::Response& res) {
    res.set_content(health_to_json(eng->health()), "application/json");
  });
}

InferenceServer::~InferenceServer() { stop(); }

void InferenceServer::start(const std::string& host, int port) {
  if (impl_->thread.joinable()) throw StartupError("server already started");
  if (port < 0 || port > 65535) {
    throw StartupError("port " + std::to_string(port) + " out of range");
  }
  if (port == 0) {
    port_ = impl_->server.bind_to_any_port(host);
    if (port_ < 0) throw StartupError("cannot bind " + host);
  } else {
    if (!impl_->server.bind_to_port(host, port)) {
      throw StartupError("cannot bind " + host + ":" + std::to_string(port) +
                         " (address in use or not available)");
    }
    port_ = port;
  }
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  spdlog::info("serving on {}:{}", host, port_);
}

void InferenceServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

void InferenceServer::wait() {
  if (impl_->thread.joinable()) impl_->thread.join();
}

bool InferenceServer::running() const noexcept {
  return impl_->server.is_running();
}

std::pair<std::string, int> parse_bind(std::string_view bind) {
  const std::size_t colon = bind.rfind(':');
  if (colon == std::string_view::npos || colon == 0) {
    throw ConfigError("bind address must look like host:port");
  }
  const std::string_view port_str = bind.substr(colon + 1);
  int port = -1;
  const auto [ptr, ec] =
      std::from_chars(port_str.data(), port_str.data() + port_str.size(), port);
  if (ec != std::errc{} || ptr != port_str.data() + port_str.size() ||
      port < 0 || port > 65535) {
    throw ConfigError("bind port must be an integer in [0, 65535]");
  }
  return {std::string(bind.substr(0, colon)), port};
}

struct HttpTransport::Impl {
  explicit Impl(const std::string& url) : client(url) {}
  httplib::Client client;
};

HttpTransport::HttpTransport(std::string url, std::chrono::milliseconds timeout)
    : impl_(std::make_unique<Impl>(url)) {
  if (!impl_->client.is_valid()) {
    throw TransportError("invalid server url: " + url);
  }
  impl_->client.set_connection_timeout(timeout);
  impl_->client.set_read_timeout(timeout);
  impl_->client.set_write_timeout(timeout);
}

HttpTransport::~HttpTransport() = default;

HttpResult HttpTransport::post_json(const std::string& path,
                                    const std::string& body) {
  auto res = impl_->client.Post(path, body, "application/json");
  if (!res) {
    throw TransportError("POST " + path + " failed: " +
                         httplib::to_string(res.error()));
  }
  return {res->status, res->body};
}

HttpResult HttpTransport::get(const std::string& path) {
  auto res = impl_->client.Get(path);
  if (!res) {
    throw TransportError("GET " + path + " failed: " +
                         httplib::to_string(res.error()));
  }
  return {res->status, res->body};
}

namespace {

std::string server_message(const HttpResult& r) {
  const ordered_json j = ordered_json::parse(r.body, nullptr, false);
  if (!j.is_discarded() && j.is_object() && j.contains("error") &&
      j["error"].is_string()) {
    return j["error"].get<std::string>();
  }
  return r.body;
}

}  // namespace

InferenceClient::InferenceClient(std::shared_ptr<Transport> transport,
                                 const Vocabulary& vocab, const KeyMaterial& km,
                                 bool lowercase)
    : transport_(std::move(transport)),
      tokenizer_(vocab, lowercase),
      km_(km),
      cipher_map_(build_cipher_map(vocab, km)) {
  if (!transport_) throw ConfigError("no transport");
}

InferRequest InferenceClient::build_request(
    std::string_view text, std::optional<std::string> request_id) const {
  if (text.empty()) throw ConfigError("text is empty");
  CipherTokenStream cs = encrypt_stream(tokenizer_.tokenize(text), km_, cipher_map_);
  if (cs.tokens.empty()) throw ConfigError("text contains no tokens");
  return {std::move(cs.tokens), std::move(request_id)};
}

InferResponse InferenceClient::infer(std::string_view text,
                                     std::optional<std::string> request_id) {
  const InferRequest req = build_request(text, std::move(request_id));
  const HttpResult r = transport_->post_json("/v1/infer", request_to_json(req));
  if (r.status != 200) {
    throw ProtocolError("server returned " + std::to_string(r.status) + ": " +
                        server_message(r));
  }
  return response_from_json(r.body);
}

HealthInfo InferenceClient::health() {
  const HttpResult r = transport_->get("/v1/health");
  if (r.status != 200) {
    throw ProtocolError("server returned " + std::to_string(r.status) + ": " +
                        server_message(r));
  }
  return health_from_json(r.body);
}

InferResponse client_infer(const std::string& url, std::string_view text,
                           const Vocabulary& vocab, const KeyMaterial& km) {
  InferenceClient client(std::make_shared<HttpTransport>(url), vocab, km);
  return client.infer(text);
}

}  // namespace cipherlm
