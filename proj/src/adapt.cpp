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

#include "cipherlm/adapt.hpp"

#include <algorithm>
#include <numeric>

#include "cipherlm/errors.hpp"

namespace cipherlm {

Permutation Permutation::inverse() const {
  Permutation inv;
  inv.fixed = fixed;
  inv.map.resize(map.size());
  for (std::size_t i = 0; i < map.size(); ++i) {
    inv.map[map[i]] = static_cast<TokenId>(i);
  }
  return inv;
}

Permutation Permutation::identity(std::size_t m) {
  Permutation p;
  p.map.resize(m);
  std::iota(p.map.begin(), p.map.end(), TokenId{0});
  return p;
}

Permutation make_permutation(std::size_t m, std::span<const TokenId> fixed,
                             SplitMix64& prng) {
  std::vector<bool> pinned(m, false);
  for (TokenId f : fixed) {
    if (f >= m) {
      throw ConfigError("fixed index " + std::to_string(f) +
                        " out of range for permutation of size " +
                        std::to_string(m));
    }
    pinned[f] = true;
  }

  Permutation p = Permutation::identity(m);
  p.fixed.assign(fixed.begin(), fixed.end());
  std::sort(p.fixed.begin(), p.fixed.end());
  p.fixed.erase(std::unique(p.fixed.begin(), p.fixed.end()), p.fixed.end());

  std::vector<TokenId> movable;
  movable.reserve(m);
  for (std::size_t i = 0; i < m; ++i) {
    if (!pinned[i]) movable.push_back(static_cast<TokenId>(i));
  }
  std::vector<TokenId> shuffled = movable;
  for (std::size_t k = shuffled.size(); k > 1; --k) {
    const auto j = static_cast<std::size_t>(prng.uniform_below(k));
    std::swap(shuffled[k - 1], shuffled[j]);
  }
  for (std::size_t k = 0; k < movable.size(); ++k) {
    p.map[movable[k]] = shuffled[k];
  }
  return p;
}

Permutation make_permutation(std::size_t m, std::span<const TokenId> fixed,
                             std::uint64_t seed) {
  SplitMix64 prng(seed);
  return make_permutation(m, fixed, prng);
}

std::pair<Vocabulary, EmbeddingMatrix> apply_permutation(
    const Vocabulary& vocab, const EmbeddingMatrix& emb, const Permutation& p) {
  if (vocab.size() != p.size() || static_cast<std::size_t>(emb.rows()) != p.size()) {
    throw ConsistencyError("permutation of size " + std::to_string(p.size()) +
                           " applied to vocabulary of " +
                           std::to_string(vocab.size()) + " and matrix of " +
                           std::to_string(emb.rows()) + " rows");
  }
  std::vector<std::string> tokens(p.size());
  EmbeddingMatrix out(emb.rows(), emb.cols());
  for (std::size_t i = 0; i < p.size(); ++i) {
    tokens[i] = vocab.tokens()[p.map[i]];
    out.row(static_cast<Eigen::Index>(i)) =
        emb.row(static_cast<Eigen::Index>(p.map[i]));
  }
  return {Vocabulary(std::move(tokens)), std::move(out)};
}

AdaptationPlan make_plan(const KeyMaterial& km, std::size_t vocab_size,
                         std::size_t dim, std::span<const TokenId> fixed,
                         std::size_t nglide) {
  SplitMix64 prng(km.seed());
  AdaptationPlan plan;
  plan.glides = make_glide_sequence(prng, dim, nglide);
  plan.permutation = make_permutation(vocab_size, fixed, prng);
  return plan;
}

AdaptedBundle adapt_lm(const Vocabulary& vocab, const EmbeddingMatrix& emb,
                       const KeyMaterial& km, std::size_t nglide) {
  if (vocab.size() != static_cast<std::size_t>(emb.rows())) {
    throw ConsistencyError("vocabulary has " + std::to_string(vocab.size()) +
                           " tokens but matrix has " +
                           std::to_string(emb.rows()) + " rows");
  }
  if (emb.cols() == 0) throw ConfigError("embedding dimension is zero");
  if (!emb.allFinite()) throw ConfigError("embedding matrix is not finite");

  const AdaptationPlan plan =
      make_plan(km, vocab.size(), static_cast<std::size_t>(emb.cols()),
                vocab.special_ids(), nglide);

  const EmbeddingMatrix transformed = transform_matrix(emb, plan.glides);
  const Vocabulary encrypted = encrypt_vocab(vocab, km);
  auto [shuffled_vocab, shuffled_emb] =
      apply_permutation(encrypted, transformed, plan.permutation);

  AdaptedBundle bundle;
  bundle.manifest.vocab_size = vocab.size();
  bundle.manifest.embed_dim = static_cast<std::size_t>(emb.cols());
  bundle.manifest.nglide = nglide;
  bundle.manifest.digest_bytes = km.digest_bytes();
  for (TokenId id : shuffled_vocab.special_ids()) {
    bundle.manifest.special_tokens.push_back({shuffled_vocab.token(id), id});
  }
  bundle.manifest.key_fingerprint = km.fingerprint();
  bundle.vocab = std::move(shuffled_vocab);
  bundle.emb = std::move(shuffled_emb);
  return bundle;
}

AdaptedBundle adapt_lm(const Vocabulary& vocab, const EmbeddingMatrix& emb,
                       std::string_view passkey, const AdaptOptions& options) {
  return adapt_lm(vocab, emb, derive_key_material(passkey, options.digest_bytes),
                  options.nglide);
}

}  // namespace cipherlm
