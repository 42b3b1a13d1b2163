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

// cipherlm: adapt / encrypt / train / serve / infer / analyze.

#include <csignal>
#include <cstdlib>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "cipherlm/adapt.hpp"
#include "cipherlm/analysis.hpp"
#include "cipherlm/errors.hpp"
#include "cipherlm/isometry.hpp"
#include "cipherlm/keyed_cipher.hpp"
#include "cipherlm/model_io.hpp"
#include "cipherlm/service.hpp"
#include "cipherlm/tokenize.hpp"
#include "cipherlm/trainer.hpp"

namespace {

using namespace cipherlm;

/// Bad invocation: exit code 1.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Never mentions the value, only the variable name.
std::string passkey_from_env(const std::string& var) {
  if (var.empty()) throw UsageError("--passkey-env is required");
  const char* value = std::getenv(var.c_str());
  if (value == nullptr) {
    throw UsageError("environment variable " + var + " is not set");
  }
  if (*value == '\0') throw UsageError("environment variable " + var + " is empty");
  return value;
}

struct AdaptArgs {
  std::string vocab, emb, passkey_env, out;
  std::size_t nglide = 3;
  std::size_t digest_bytes = kDefaultDigestBytes;
};

int run_adapt(const AdaptArgs& a) {
  const std::string passkey = passkey_from_env(a.passkey_env);
  const Vocabulary vocab = load_vocab(a.vocab);
  const EmbeddingMatrix emb = load_matrix(a.emb);
  const AdaptedBundle bundle =
      adapt_lm(vocab, emb, passkey, AdaptOptions{a.nglide, a.digest_bytes});
  save_bundle(bundle, a.out);
  spdlog::info("adapted {} tokens x {} dims into {}", bundle.vocab.size(),
               bundle.emb.cols(), a.out);
  return 0;
}

struct EncryptArgs {
  std::string vocab, passkey_env;
  std::optional<std::string> text;
  std::size_t digest_bytes = kDefaultDigestBytes;
};

std::string cipher_line(const std::string& text, const WordPieceTokenizer& tok,
                        const KeyMaterial& km, const CipherMap& map) {
  const CipherTokenStream cs = encrypt_stream(tok.tokenize(text), km, map);
  std::string line;
  for (std::size_t i = 0; i < cs.tokens.size(); ++i) {
    if (i > 0) line += ' ';
    line += cs.tokens[i];
  }
  return line;
}

// Without --text (or with "-"), every stdin line becomes one output line.
int run_encrypt(const EncryptArgs& a) {
  const KeyMaterial km(passkey_from_env(a.passkey_env), a.digest_bytes);
  const Vocabulary vocab = load_vocab(a.vocab);
  const WordPieceTokenizer tok(vocab);
  const CipherMap map = build_cipher_map(vocab, km);
  if (a.text && *a.text != "-") {
    std::cout << cipher_line(*a.text, tok, km, map) << '\n';
    return 0;
  }
  for (std::string line; std::getline(std::cin, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::cout << cipher_line(line, tok, km, map) << '\n';
  }
  return 0;
}

struct TrainArgs {
  std::string bundle, vocab, passkey_env, data, out;
  std::vector<std::string> plain;
  TrainConfig cfg;
};

int run_train(const TrainArgs& a) {
  const bool encrypted = !a.bundle.empty();
  if (encrypted == !a.plain.empty()) {
    throw UsageError("give exactly one of --bundle or --plain");
  }
  if (encrypted && a.vocab.empty()) {
    throw UsageError("--bundle training needs --vocab (the client vocabulary)");
  }
  if (!encrypted && a.plain.size() != 2) {
    throw UsageError("--plain takes <vocab>,<emb>");
  }
  const auto data = load_tsv(a.data);

  ClassifierHead head;
  Metrics metrics;
  if (encrypted) {
    const std::string passkey = passkey_from_env(a.passkey_env);
    const AdaptedBundle bundle = load_bundle(a.bundle, key_fingerprint(passkey));
    const KeyMaterial km(passkey, bundle.manifest.digest_bytes);
    const Vocabulary vocab = load_vocab(a.vocab);
    const EncryptedPipeline pipeline(vocab, km, bundle);
    head = train_head(data, a.cfg, featurizer(pipeline));
    metrics = evaluate(head, data, featurizer(pipeline));
  } else {
    const Vocabulary vocab = load_vocab(a.plain[0]);
    const EmbeddingMatrix emb = load_matrix(a.plain[1]);
    const PlaintextPipeline pipeline(vocab, emb);
    head = train_head(data, a.cfg, featurizer(pipeline));
    metrics = evaluate(head, data, featurizer(pipeline));
  }
  save_head(head, a.out);
  nlohmann::ordered_json j;
  j["examples"] = data.size();
  j["final_loss"] = head.final_loss;
  j["train_accuracy"] = metrics.accuracy;
  j["train_mean_loss"] = metrics.mean_loss;
  std::cout << j.dump() << '\n';
  return 0;
}

struct ServeArgs {
  std::string bundle, head, bind = "127.0.0.1:8080";
};

int run_serve(const ServeArgs& a) {
  const auto [host, port] = parse_bind(a.bind);
  auto engine = std::make_shared<const InferenceEngine>(load_bundle(a.bundle),
                                                        load_head(a.head));

  // Handle SIGINT/SIGTERM synchronously on this thread; server threads
  // inherit the blocked mask.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  InferenceServer server(engine);
  server.start(host, port);
  std::cout << nlohmann::ordered_json{{"host", host}, {"port", server.port()}}.dump()
            << std::endl;
  int sig = 0;
  sigwait(&signals, &sig);
  spdlog::info("signal {} received, shutting down", sig);
  server.stop();
  return 0;
}

struct InferArgs {
  std::string server, vocab, passkey_env, text;
  std::size_t digest_bytes = kDefaultDigestBytes;
};

int run_infer(const InferArgs& a) {
  const KeyMaterial km(passkey_from_env(a.passkey_env), a.digest_bytes);
  const Vocabulary vocab = load_vocab(a.vocab);
  if (a.text.empty()) throw UsageError("--text is empty");
  const InferResponse r = client_infer(a.server, a.text, vocab, km);
  std::cout << response_to_json(r) << '\n';
  return 0;
}

struct AnalyzeArgs {
  std::string orig, bundle, report, distance_csv, passkey_env;
  std::size_t k = 10;
  std::size_t samples = 0;
  std::size_t pairs = 10000;
  std::uint64_t seed = 0;
};

int run_analyze(const AnalyzeArgs& a) {
  if (!a.distance_csv.empty() && a.passkey_env.empty()) {
    throw UsageError("--distance-csv needs --passkey-env to undo the shuffle");
  }
  std::optional<std::string> passkey;
  if (!a.passkey_env.empty()) passkey = passkey_from_env(a.passkey_env);

  const EmbeddingMatrix orig = load_matrix(a.orig);
  const AdaptedBundle bundle = passkey
                                   ? load_bundle(a.bundle, key_fingerprint(*passkey))
                                   : load_bundle(a.bundle);
  if (orig.rows() != bundle.emb.rows() || orig.cols() != bundle.emb.cols()) {
    throw ConfigError("original matrix and bundle differ in shape");
  }

  RecoverabilityReport report;
  report.k = a.k;
  report.sample_size = sample_rows(static_cast<std::size_t>(orig.rows()),
                                   a.samples, a.seed)
                           .size();
  report.rank_overlap_at_k =
      ranked_list_overlap(orig, bundle.emb, a.k, a.samples, a.seed);

  if (passkey) {
    const KeyMaterial km(*passkey, bundle.manifest.digest_bytes);
    std::vector<TokenId> fixed;
    for (const auto& s : bundle.manifest.special_tokens) fixed.push_back(s.index);
    const AdaptationPlan plan =
        make_plan(km, bundle.vocab.size(), static_cast<std::size_t>(orig.cols()),
                  fixed, bundle.manifest.nglide);
    report.nn_accuracy =
        nn_recovery_accuracy(orig, bundle, &plan.permutation, a.samples, a.seed);
    if (!a.distance_csv.empty()) {
      // Undo the shuffle: adapted row r holds transformed row map[r].
      EmbeddingMatrix aligned(bundle.emb.rows(), bundle.emb.cols());
      for (std::size_t r = 0; r < plan.permutation.size(); ++r) {
        aligned.row(plan.permutation.map[r]) =
            bundle.emb.row(static_cast<Eigen::Index>(r));
      }
      const DriftStats drift =
          distance_audit(orig, aligned, a.pairs, a.distance_csv, a.seed);
      report.distance_drift_max = drift.max_abs;
      spdlog::info("distance audit: {} pairs, max abs drift {:.3g}, max rel drift {:.3g}",
                   drift.pairs, drift.max_abs, drift.max_rel);
    }
  } else {
    report.nn_accuracy = nn_recovery_accuracy(orig, bundle, nullptr, a.samples, a.seed);
  }
  const std::string json = report_to_json(report);
  if (!a.report.empty()) write_file(a.report, json);
  std::cout << json;
  return 0;
}

void init_logging(const std::string& level) {
  auto logger = spdlog::stderr_color_mt("cipherlm");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::from_str(level));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Passkey-based token encryption and embedding adaptation"};
  app.require_subcommand(1);
  app.set_version_flag("--version",
                       std::string("cipherlm ") + CIPHERLM_VERSION +
                           " (bundle format_version " +
                           std::to_string(BundleManifest::kFormatVersion) + ")");
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace|debug|info|warn|error|off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

  AdaptArgs adapt;
  auto* c_adapt = app.add_subcommand("adapt", "Encrypt, transform and shuffle a model");
  c_adapt->add_option("--vocab", adapt.vocab, "Vocabulary file")->required();
  c_adapt->add_option("--emb", adapt.emb, "Embedding matrix (CLM1)")->required();
  c_adapt->add_option("--passkey-env", adapt.passkey_env,
                      "Environment variable holding the passkey")->required();
  c_adapt->add_option("--out", adapt.out, "Output bundle directory")->required();
  c_adapt->add_option("--nglide", adapt.nglide, "Glide reflections")
      ->capture_default_str();
  c_adapt->add_option("--digest-bytes", adapt.digest_bytes, "Cipher digest length")
      ->check(CLI::Range(1, 32))->capture_default_str();

  EncryptArgs enc;
  auto* c_enc = app.add_subcommand("encrypt", "Print the cipher tokens of a text");
  c_enc->add_option("--vocab", enc.vocab, "Client vocabulary")->required();
  c_enc->add_option("--passkey-env", enc.passkey_env,
                    "Environment variable holding the passkey")->required();
  c_enc->add_option("--text", enc.text, "Input text (default or \"-\": stdin)");
  c_enc->add_option("--digest-bytes", enc.digest_bytes, "Cipher digest length")
      ->check(CLI::Range(1, 32))->capture_default_str();

  TrainArgs train;
  auto* c_train = app.add_subcommand("train", "Train a classifier head");
  c_train->add_option("--bundle", train.bundle, "Adapted bundle (encrypted pipeline)");
  c_train->add_option("--vocab", train.vocab, "Client vocabulary for --bundle");
  c_train->add_option("--passkey-env", train.passkey_env,
                      "Environment variable holding the passkey (with --bundle)");
  c_train->add_option("--plain", train.plain, "<vocab>,<emb> (plaintext pipeline)")
      ->delimiter(',');
  c_train->add_option("--data", train.data, "TSV: text<TAB>label")->required();
  c_train->add_option("--out", train.out, "Output head JSON")->required();
  c_train->add_option("--epochs", train.cfg.epochs)->capture_default_str();
  c_train->add_option("--lr", train.cfg.learning_rate)
      ->check(CLI::PositiveNumber)->capture_default_str();
  c_train->add_option("--l2", train.cfg.l2)->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  c_train->add_option("--grad-tol", train.cfg.grad_tolerance,
                      "Stop once all gradient entries are below this")
      ->check(CLI::NonNegativeNumber)->capture_default_str();

  ServeArgs serve;
  auto* c_serve = app.add_subcommand("serve", "Serve encrypted inference over HTTP");
  c_serve->add_option("--bundle", serve.bundle, "Adapted bundle")->required();
  c_serve->add_option("--head", serve.head, "Classifier head JSON")->required();
  c_serve->add_option("--bind", serve.bind, "host:port (port 0 = any)")
      ->capture_default_str();

  InferArgs infer;
  auto* c_infer = app.add_subcommand("infer", "Encrypt locally and query a server");
  c_infer->add_option("--server", infer.server, "http://host:port")->required();
  c_infer->add_option("--vocab", infer.vocab, "Client vocabulary")->required();
  c_infer->add_option("--passkey-env", infer.passkey_env,
                      "Environment variable holding the passkey")->required();
  c_infer->add_option("--text", infer.text, "Input text")->required();
  c_infer->add_option("--digest-bytes", infer.digest_bytes, "Cipher digest length")
      ->check(CLI::Range(1, 32))->capture_default_str();

  AnalyzeArgs an;
  auto* c_an = app.add_subcommand("analyze", "Recoverability report");
  c_an->add_option("--orig", an.orig, "Original embedding matrix")->required();
  c_an->add_option("--bundle", an.bundle, "Adapted bundle")->required();
  c_an->add_option("--report", an.report, "Write the JSON report here too");
  c_an->add_option("--distance-csv", an.distance_csv, "Distance audit CSV");
  c_an->add_option("--passkey-env", an.passkey_env,
                   "Passkey variable; scores against the true alignment");
  c_an->add_option("--k", an.k, "Ranked-list length")->capture_default_str();
  c_an->add_option("--samples", an.samples, "Anchor rows (0 = all)")
      ->capture_default_str();
  c_an->add_option("--pairs", an.pairs, "Distance audit pairs")->capture_default_str();
  c_an->add_option("--seed", an.seed, "Sampling seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  init_logging(log_level);
  try {
    if (*c_adapt) return run_adapt(adapt);
    if (*c_enc) return run_encrypt(enc);
    if (*c_train) return run_train(train);
    if (*c_serve) return run_serve(serve);
    if (*c_infer) return run_infer(infer);
    if (*c_an) return run_analyze(an);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
