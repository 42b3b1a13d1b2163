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

#include "cipherlm/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>

#include "cipherlm/errors.hpp"

namespace cipherlm {

std::vector<LabeledExample> load_tsv(const std::filesystem::path& path) {
  const std::string data = read_file(path);
  std::vector<LabeledExample> out;
  std::string_view rest = data;
  std::size_t line = 0;
  while (!rest.empty()) {
    const std::size_t nl = rest.find('\n');
    std::string_view row = rest.substr(0, nl);
    rest = nl == std::string_view::npos ? std::string_view{} : rest.substr(nl + 1);
    ++line;
    if (!row.empty() && row.back() == '\r') row.remove_suffix(1);
    if (row.empty()) continue;
    const std::size_t tab = row.rfind('\t');
    if (tab == std::string_view::npos) {
      throw FormatError(path.string() + ":" + std::to_string(line) +
                        ": expected text<TAB>label");
    }
    const std::string_view label = row.substr(tab + 1);
    std::size_t value = 0;
    const auto [ptr, ec] =
        std::from_chars(label.data(), label.data() + label.size(), value);
    if (ec != std::errc{} || ptr != label.data() + label.size()) {
      throw FormatError(path.string() + ":" + std::to_string(line) +
                        ": label is not a non-negative integer");
    }
    out.push_back({std::string(row.substr(0, tab)), value});
  }
  return out;
}

Eigen::VectorXd mean_pool(const IndexSequence& seq, const EmbeddingMatrix& emb,
                          TokenId pad_id) {
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(emb.cols());
  std::size_t count = 0;
  for (std::size_t i = 1; i + 1 < seq.ids.size(); ++i) {
    const TokenId id = seq.ids[i];
    if (id == pad_id) continue;
    if (id >= static_cast<std::size_t>(emb.rows())) {
      throw ConsistencyError("token id outside the embedding matrix");
    }
    sum += emb.row(static_cast<Eigen::Index>(id)).transpose();
    ++count;
  }
  if (count > 0) sum /= static_cast<double>(count);
  return sum;
}

PlaintextPipeline::PlaintextPipeline(const Vocabulary& vocab,
                                     const EmbeddingMatrix& emb, bool lowercase)
    : vocab_(&vocab),
      emb_(&emb),
      tokenizer_(vocab, lowercase),
      pad_(vocab.require(kPadToken)) {
  if (vocab.size() != static_cast<std::size_t>(emb.rows())) {
    throw ConsistencyError("vocabulary and embedding matrix sizes differ");
  }
}

IndexSequence PlaintextPipeline::ids(std::string_view text) const {
  return plain_ids(tokenizer_.tokenize(text), *vocab_);
}

Eigen::VectorXd PlaintextPipeline::featurize(std::string_view text) const {
  return mean_pool(ids(text), *emb_, pad_);
}

EncryptedPipeline::EncryptedPipeline(const Vocabulary& plain_vocab,
                                     const KeyMaterial& km,
                                     const AdaptedBundle& bundle,
                                     bool lowercase)
    : tokenizer_(plain_vocab, lowercase),
      km_(km),
      cipher_map_(build_cipher_map(plain_vocab, km)),
      bundle_(&bundle),
      second_stage_(bundle) {
  if (km.digest_bytes() != bundle.manifest.digest_bytes) {
    throw ConsistencyError("key material and bundle use different digest lengths");
  }
  if (km.fingerprint() != bundle.manifest.key_fingerprint) {
    throw ConsistencyError("bundle was adapted with a different passkey");
  }
}

CipherTokenStream EncryptedPipeline::encrypt(std::string_view text) const {
  return encrypt_stream(tokenizer_.tokenize(text), km_, cipher_map_);
}

IndexSequence EncryptedPipeline::ids(std::string_view text) const {
  return second_stage_.tokenize(encrypt(text));
}

Eigen::VectorXd EncryptedPipeline::featurize(std::string_view text) const {
  return mean_pool(ids(text), bundle_->emb, second_stage_.pad_id());
}

Featurizer featurizer(const PlaintextPipeline& pipeline) {
  return [&pipeline](std::string_view text) { return pipeline.featurize(text); };
}

Featurizer featurizer(const EncryptedPipeline& pipeline) {
  return [&pipeline](std::string_view text) { return pipeline.featurize(text); };
}

FeatureSet featurize_all(std::span<const LabeledExample> data,
                         const Featurizer& featurize) {
  FeatureSet set;
  set.labels.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Eigen::VectorXd x = featurize(data[i].text);
    if (i == 0) set.features.resize(static_cast<Eigen::Index>(data.size()), x.size());
    set.features.row(static_cast<Eigen::Index>(i)) = x.transpose();
    set.labels.push_back(data[i].label);
  }
  return set;
}

namespace {

/// Row-wise softmax of N x C logits.
Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd p = logits;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    const double m = p.row(i).maxCoeff();
    p.row(i) = (p.row(i).array() - m).exp();
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

/// -log softmax(z)[label], computed with log-sum-exp.
double cross_entropy(const Eigen::VectorXd& z, std::size_t label) {
  const double m = z.maxCoeff();
  const double lse = m + std::log((z.array() - m).exp().sum());
  return lse - z(static_cast<Eigen::Index>(label));
}

void check_labels(const FeatureSet& data, std::size_t classes) {
  if (static_cast<std::size_t>(data.features.rows()) != data.labels.size()) {
    throw ConsistencyError("feature rows and labels differ in count");
  }
  for (std::size_t label : data.labels) {
    if (label >= classes) {
      throw ConsistencyError("label " + std::to_string(label) +
                             " outside [0, " + std::to_string(classes) + ")");
    }
  }
}

}  // namespace

ObjectiveValue softmax_objective(const Eigen::MatrixXd& weights,
                                 const Eigen::VectorXd& bias,
                                 const FeatureSet& data, double l2) {
  const auto n = static_cast<double>(data.labels.size());
  const Eigen::MatrixXd logits =
      (data.features * weights.transpose()).rowwise() + bias.transpose();

  ObjectiveValue out;
  double ce = 0.0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    ce += cross_entropy(logits.row(i).transpose(),
                        data.labels[static_cast<std::size_t>(i)]);
  }
  out.loss = ce / n + 0.5 * l2 * weights.squaredNorm();

  // d/dz of the mean cross-entropy is (softmax - onehot) / n.
  Eigen::MatrixXd delta = softmax_rows(logits);
  for (Eigen::Index i = 0; i < delta.rows(); ++i) {
    delta(i, static_cast<Eigen::Index>(data.labels[static_cast<std::size_t>(i)])) -= 1.0;
  }
  delta /= n;
  out.grad_weights = delta.transpose() * data.features + l2 * weights;
  out.grad_bias = delta.colwise().sum().transpose();
  return out;
}

ClassifierHead train_head(const FeatureSet& data, std::size_t classes,
                          const TrainConfig& cfg) {
  if (!(cfg.learning_rate > 0.0)) {
    throw ConfigError("learning_rate must be positive");
  }
  if (cfg.l2 < 0.0) throw ConfigError("l2 must be non-negative");
  if (data.labels.empty()) throw TrainingError("no training examples");
  check_labels(data, classes);
  const std::set<std::size_t> present(data.labels.begin(), data.labels.end());
  if (present.size() < 2) {
    throw TrainingError("training data must contain at least two classes");
  }

  const Eigen::Index c = static_cast<Eigen::Index>(classes);
  const Eigen::Index e = data.features.cols();
  ClassifierHead head;
  head.weights = Eigen::MatrixXd::Zero(c, e);
  head.bias = Eigen::VectorXd::Zero(c);
  head.l2 = cfg.l2;

  // Descend in centered coordinates: W x + b = W (x - mu) + (b + W mu).
  // The bias is unregularized, so the objective and optimum are unchanged.
  const Eigen::RowVectorXd mu = data.features.colwise().mean();
  FeatureSet centered{data.features.rowwise() - mu, data.labels};

  const double curvature =
      0.5 * (centered.features.rowwise().squaredNorm().array() + 1.0).mean() +
      cfg.l2;
  const double step = std::min(cfg.learning_rate, 1.0 / curvature);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const ObjectiveValue obj =
        softmax_objective(head.weights, head.bias, centered, cfg.l2);
    if (cfg.grad_tolerance > 0.0 &&
        std::max(obj.grad_weights.cwiseAbs().maxCoeff(),
                 obj.grad_bias.cwiseAbs().maxCoeff()) < cfg.grad_tolerance) {
      break;
    }
    head.weights -= step * obj.grad_weights;
    head.bias -= step * obj.grad_bias;
  }
  head.bias -= head.weights * mu.transpose();
  head.final_loss = softmax_objective(head.weights, head.bias, data, cfg.l2).loss;
  return head;
}

ClassifierHead train_head(std::span<const LabeledExample> data,
                          const TrainConfig& cfg, const Featurizer& featurize) {
  if (data.empty()) throw TrainingError("no training examples");
  std::size_t classes = 0;
  for (const auto& ex : data) classes = std::max(classes, ex.label + 1);
  return train_head(featurize_all(data, featurize), classes, cfg);
}

Eigen::VectorXd predict_proba(const ClassifierHead& head,
                              const Eigen::VectorXd& features) {
  if (features.size() != head.weights.cols()) {
    throw ConsistencyError("feature dimension does not match the head");
  }
  Eigen::VectorXd z = head.weights * features + head.bias;
  const double m = z.maxCoeff();
  z = (z.array() - m).exp();
  return z / z.sum();
}

std::size_t predict(const ClassifierHead& head, const Eigen::VectorXd& features) {
  const Eigen::VectorXd scores = head.weights * features + head.bias;
  Eigen::Index best = 0;
  for (Eigen::Index k = 1; k < scores.size(); ++k) {
    if (scores(k) > scores(best)) best = k;
  }
  return static_cast<std::size_t>(best);
}

Metrics evaluate(const ClassifierHead& head, const FeatureSet& data) {
  if (data.labels.empty()) throw EvaluationError("empty evaluation set");
  check_labels(data, head.classes());
  std::size_t correct = 0;
  double loss = 0.0;
  for (Eigen::Index i = 0; i < data.features.rows(); ++i) {
    const Eigen::VectorXd x = data.features.row(i).transpose();
    const std::size_t label = data.labels[static_cast<std::size_t>(i)];
    if (predict(head, x) == label) ++correct;
    loss += cross_entropy(head.weights * x + head.bias, label);
  }
  const auto n = static_cast<double>(data.labels.size());
  return {static_cast<double>(correct) / n, loss / n};
}

Metrics evaluate(const ClassifierHead& head,
                 std::span<const LabeledExample> data,
                 const Featurizer& featurize) {
  if (data.empty()) throw EvaluationError("empty evaluation set");
  return evaluate(head, featurize_all(data, featurize));
}

}  // namespace cipherlm
