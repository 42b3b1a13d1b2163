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

#include <doctest.h>

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "cipherlm/adapt.hpp"
#include "cipherlm/errors.hpp"
#include "cipherlm/isometry.hpp"
#include "cipherlm/trainer.hpp"
#include "gradcheck.hpp"
#include "test_util.hpp"

using namespace cipherlm;
using cipherlm::testing::TempDir;

namespace {

struct Toy {
  Vocabulary vocab = load_vocab(testing::data_path("toy_vocab.txt"));
  EmbeddingMatrix emb = load_matrix(testing::data_path("toy_emb.clm1"));
  std::vector<LabeledExample> data = load_tsv(testing::data_path("toy_sentiment.tsv"));
};

const Toy& toy() {
  static const Toy t;
  return t;
}

// Two Gaussian-ish blobs that a line separates.
FeatureSet separable(std::size_t n) {
  SplitMix64 prng(17);
  FeatureSet s{Eigen::MatrixXd(static_cast<Eigen::Index>(n), 2), {}};
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t label = i % 2;
    const double cx = label == 0 ? -2.0 : 2.0;
    s.features(static_cast<Eigen::Index>(i), 0) = cx + (prng.unit_open() - 0.5);
    s.features(static_cast<Eigen::Index>(i), 1) = prng.unit_open() - 0.5;
    s.labels.push_back(label);
  }
  return s;
}

}  // namespace

TEST_CASE("analytic gradient matches central differences") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    CAPTURE(seed);
    CHECK(testing::gradient_probe(seed) < 1e-4);
  }
}

TEST_CASE("separable data is fitted perfectly") {
  const FeatureSet s = separable(20);
  const ClassifierHead head = train_head(s, 2, TrainConfig{});
  CHECK(evaluate(head, s).accuracy == 1.0);
  CHECK(head.weights.rows() == 2);
  CHECK(head.weights.cols() == 2);
  const Eigen::VectorXd p = predict_proba(head, s.features.row(0).transpose());
  CHECK(std::abs(p.sum() - 1.0) < 1e-12);
}

TEST_CASE("more epochs never increase the loss") {
  const FeatureSet s = featurize_all(
      toy().data, featurizer(PlaintextPipeline(toy().vocab, toy().emb)));
  double previous = std::numeric_limits<double>::infinity();
  for (std::size_t epochs : {1u, 2u, 4u, 8u, 16u, 64u, 256u, 1024u}) {
    TrainConfig cfg;
    cfg.epochs = epochs;
    const double loss = train_head(s, 2, cfg).final_loss;
    CHECK(loss <= previous + 1e-12);
    previous = loss;
  }
}

TEST_CASE("gradient tolerance stops early at a stationary point") {
  const FeatureSet s = separable(20);
  TrainConfig slow, tol;
  slow.epochs = tol.epochs = 20000;
  tol.grad_tolerance = 1e-3;
  const ClassifierHead a = train_head(s, 2, tol);
  const ClassifierHead b = train_head(s, 2, slow);
  CHECK(a.final_loss >= b.final_loss);
  CHECK(a.final_loss - b.final_loss < 1e-2);
}

TEST_CASE("training errors") {
  FeatureSet one_class = separable(10);
  for (auto& l : one_class.labels) l = 1;
  CHECK_THROWS_AS(train_head(one_class, 2, TrainConfig{}), TrainingError);
  CHECK_THROWS_AS(train_head(FeatureSet{}, 2, TrainConfig{}), TrainingError);
  TrainConfig bad;
  bad.learning_rate = 0.0;
  CHECK_THROWS_AS(train_head(separable(10), 2, bad), ConfigError);
  bad = TrainConfig{};
  bad.l2 = -1.0;
  CHECK_THROWS_AS(train_head(separable(10), 2, bad), ConfigError);
  FeatureSet out_of_range = separable(10);
  out_of_range.labels[0] = 5;
  CHECK_THROWS_AS(train_head(out_of_range, 2, TrainConfig{}), ConsistencyError);
  const std::vector<LabeledExample> none;
  CHECK_THROWS_AS(train_head(none, TrainConfig{}, [](std::string_view) {
                    return Eigen::VectorXd::Zero(2).eval();
                  }),
                  TrainingError);
}

TEST_CASE("evaluation errors and ties") {
  ClassifierHead head;
  head.weights = Eigen::MatrixXd::Zero(3, 2);
  head.bias = Eigen::VectorXd::Zero(3);
  CHECK(predict(head, Eigen::VectorXd::Ones(2)) == 0);
  head.bias << 0.0, 1.0, 1.0;
  CHECK(predict(head, Eigen::VectorXd::Ones(2)) == 1);
  CHECK_THROWS_AS(evaluate(head, FeatureSet{}), EvaluationError);
  const std::vector<LabeledExample> none;
  CHECK_THROWS_AS(evaluate(head, none, [](std::string_view) {
                    return Eigen::VectorXd::Zero(2).eval();
                  }),
                  EvaluationError);
  CHECK_THROWS_AS(predict_proba(head, Eigen::VectorXd::Ones(3)), ConsistencyError);
}

TEST_CASE("mean pooling: single token, empty text, padding") {
  const PlaintextPipeline p(toy().vocab, toy().emb);
  const TokenId good = toy().vocab.require("good");
  CHECK(p.featurize("good") == toy().emb.row(good).transpose());
  CHECK(p.featurize("") == Eigen::VectorXd::Zero(toy().emb.cols()));
  CHECK(p.ids("good").ids.size() == 3);

  const TokenId pad = toy().vocab.require("[PAD]");
  const IndexSequence padded{{2, good, pad, pad, 3}};
  CHECK(mean_pool(padded, toy().emb, pad) == toy().emb.row(good).transpose());
  const IndexSequence out_of_range{{2, 100000, 3}};
  CHECK_THROWS_AS(mean_pool(out_of_range, toy().emb, pad), ConsistencyError);
}

TEST_CASE("encrypted features are the transformed plaintext features") {
  const KeyMaterial km("llm123", 4);
  const AdaptedBundle b = adapt_lm(toy().vocab, toy().emb, km, 3);
  const PlaintextPipeline plain(toy().vocab, toy().emb);
  const EncryptedPipeline enc(toy().vocab, km, b);
  const AffineMap q = compose(
      make_plan(km, toy().vocab.size(), 32, toy().vocab.special_ids(), 3).glides);
  for (std::size_t i = 0; i < 20; ++i) {
    const std::string& text = toy().data[i].text;
    CHECK((enc.featurize(text) - q(plain.featurize(text))).norm() < 1e-5);
  }
}

TEST_CASE("encrypted pipeline rejects a mismatched key") {
  const AdaptedBundle b = adapt_lm(toy().vocab, toy().emb, "llm123", AdaptOptions{});
  CHECK_THROWS_AS(EncryptedPipeline(toy().vocab, KeyMaterial("nlp2023", 4), b),
                  ConsistencyError);
  CHECK_THROWS_AS(EncryptedPipeline(toy().vocab, KeyMaterial("llm123", 8), b),
                  ConsistencyError);
}

TEST_CASE("plaintext and encrypted heads agree on the toy corpus") {
  const KeyMaterial km("llm123", 4);
  TempDir dir("parity");
  save_bundle(adapt_lm(toy().vocab, toy().emb, km, 3), dir / "bundle");
  const AdaptedBundle b = load_bundle(dir / "bundle");  // float32 precision

  const PlaintextPipeline plain(toy().vocab, toy().emb);
  const EncryptedPipeline enc(toy().vocab, km, b);
  const FeatureSet fp = featurize_all(toy().data, featurizer(plain));
  const FeatureSet fe = featurize_all(toy().data, featurizer(enc));

  TrainConfig cfg;
  cfg.epochs = 2000;
  const ClassifierHead hp = train_head(fp, 2, cfg);
  const ClassifierHead he = train_head(fe, 2, cfg);
  CHECK(std::abs(hp.final_loss - he.final_loss) < 1e-4);
  for (Eigen::Index i = 0; i < fp.features.rows(); ++i) {
    CHECK(predict(hp, fp.features.row(i).transpose()) ==
          predict(he, fe.features.row(i).transpose()));
  }
  CHECK(evaluate(hp, fp).accuracy == evaluate(he, fe).accuracy);
  CHECK(evaluate(hp, fp).accuracy > 0.7);
}

TEST_CASE("training is deterministic") {
  const FeatureSet s = featurize_all(
      toy().data, featurizer(PlaintextPipeline(toy().vocab, toy().emb)));
  const ClassifierHead a = train_head(s, 2, TrainConfig{});
  const ClassifierHead b = train_head(s, 2, TrainConfig{});
  CHECK(a.weights == b.weights);
  CHECK(a.bias == b.bias);
  CHECK(a.final_loss == b.final_loss);
}

TEST_CASE("load_tsv") {
  CHECK(toy().data.size() == 200);
  TempDir dir("tsv");
  write_file(dir / "ok.tsv", "a b\t1\n\nc\td\t0\r\n");
  const auto ok = load_tsv(dir / "ok.tsv");
  REQUIRE(ok.size() == 2);
  CHECK(ok[0].text == "a b");
  CHECK(ok[0].label == 1);
  CHECK(ok[1].text == "c\td");
  CHECK(ok[1].label == 0);
  write_file(dir / "bad.tsv", "a\t1\nno tab here\n");
  CHECK_THROWS_AS(load_tsv(dir / "bad.tsv"), FormatError);
  write_file(dir / "label.tsv", "a\tx\n");
  CHECK_THROWS_AS(load_tsv(dir / "label.tsv"), FormatError);
  CHECK_THROWS_AS(load_tsv(dir / "missing.tsv"), FileError);
}
