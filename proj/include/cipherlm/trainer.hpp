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

#include <cstddef>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "cipherlm/keyed_cipher.hpp"
#include "cipherlm/model_io.hpp"
#include "cipherlm/tokenize.hpp"

namespace cipherlm {

struct LabeledExample {
  std::string text;
  std::size_t label = 0;
};

/// Reads "text<TAB>label" lines. Blank lines are skipped.
std::vector<LabeledExample> load_tsv(const std::filesystem::path& path);

/// Mean of the embedding rows between the [CLS]/[SEP] wrappers, skipping
/// padding. Unknown tokens count. Zero vector when nothing is left.
Eigen::VectorXd mean_pool(const IndexSequence& seq, const EmbeddingMatrix& emb,
                          TokenId pad_id);

/// Original tokenizer and embeddings.
class PlaintextPipeline {
 public:
  PlaintextPipeline(const Vocabulary& vocab, const EmbeddingMatrix& emb,
                    bool lowercase = true);

  IndexSequence ids(std::string_view text) const;
  Eigen::VectorXd featurize(std::string_view text) const;

 private:
  const Vocabulary* vocab_;
  const EmbeddingMatrix* emb_;
  WordPieceTokenizer tokenizer_;
  TokenId pad_;
};

/// Client tokenizer + passkey encryption feeding the adapted bundle.
class EncryptedPipeline {
 public:
  EncryptedPipeline(const Vocabulary& plain_vocab, const KeyMaterial& km,
                    const AdaptedBundle& bundle, bool lowercase = true);

  CipherTokenStream encrypt(std::string_view text) const;
  IndexSequence ids(std::string_view text) const;
  Eigen::VectorXd featurize(std::string_view text) const;

 private:
  WordPieceTokenizer tokenizer_;
  KeyMaterial km_;
  CipherMap cipher_map_;
  const AdaptedBundle* bundle_;
  SecondStageTokenizer second_stage_;
};

using Featurizer = std::function<Eigen::VectorXd(std::string_view)>;

Featurizer featurizer(const PlaintextPipeline& pipeline);
Featurizer featurizer(const EncryptedPipeline& pipeline);

struct TrainConfig {
  double learning_rate = 0.1;
  std::size_t epochs = 500;
  double l2 = 1e-3;
  /// Stop early once every gradient entry is below this in magnitude
  /// (0 disables the check).
  double grad_tolerance = 0.0;
};

/// N x E features plus labels.
struct FeatureSet {
  Eigen::MatrixXd features;
  std::vector<std::size_t> labels;
};

FeatureSet featurize_all(std::span<const LabeledExample> data,
                         const Featurizer& featurize);

struct ObjectiveValue {
  double loss = 0.0;  // mean cross-entropy + (l2 / 2) ||W||^2
  Eigen::MatrixXd grad_weights;
  Eigen::VectorXd grad_bias;
};

/// Softmax cross-entropy objective and its analytic gradient. The bias is
/// not regularized.
ObjectiveValue softmax_objective(const Eigen::MatrixXd& weights,
                                 const Eigen::VectorXd& bias,
                                 const FeatureSet& data, double l2);

/// Full-batch gradient descent from zero parameters, run on features
/// centered at their mean (the mean is folded back into the bias). The step
/// is min(learning_rate, 1 / L) with L = mean(||[x - mu; 1]||^2) / 2 + l2,
/// an upper bound on the objective's curvature, so every step decreases the
/// loss. Throws TrainingError when fewer than two classes are present.
ClassifierHead train_head(const FeatureSet& data, std::size_t classes,
                          const TrainConfig& cfg);
ClassifierHead train_head(std::span<const LabeledExample> data,
                          const TrainConfig& cfg, const Featurizer& featurize);

/// Softmax probabilities.
Eigen::VectorXd predict_proba(const ClassifierHead& head,
                              const Eigen::VectorXd& features);

/// argmax of the scores; ties go to the lowest class index.
std::size_t predict(const ClassifierHead& head, const Eigen::VectorXd& features);

struct Metrics {
  double accuracy = 0.0;
  double mean_loss = 0.0;  // mean cross-entropy, no regularization term
};

Metrics evaluate(const ClassifierHead& head, const FeatureSet& data);
Metrics evaluate(const ClassifierHead& head,
                 std::span<const LabeledExample> data,
                 const Featurizer& featurize);

}  // namespace cipherlm
