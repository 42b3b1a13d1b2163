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
#include <cstdint>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "cipherlm/isometry.hpp"
#include "cipherlm/keyed_cipher.hpp"
#include "cipherlm/model_io.hpp"
#include "cipherlm/prng.hpp"

namespace cipherlm {

/// map[new_index] == old_index. Indices listed in `fixed` map to themselves.
struct Permutation {
  std::vector<TokenId> map;
  std::vector<TokenId> fixed;

  std::size_t size() const noexcept { return map.size(); }

  /// inverse().map[old_index] == new_index.
  Permutation inverse() const;
  static Permutation identity(std::size_t m);
};

/// Fisher-Yates over the non-fixed indices (ascending), swapping position k
/// with prng.uniform_below(k + 1) for k from the top down. Throws
/// ConfigError if a fixed index is out of range.
Permutation make_permutation(std::size_t m, std::span<const TokenId> fixed,
                             SplitMix64& prng);
Permutation make_permutation(std::size_t m, std::span<const TokenId> fixed,
                             std::uint64_t seed);

/// new_vocab[i] = vocab[p.map[i]], new_emb.row(i) = emb.row(p.map[i]).
std::pair<Vocabulary, EmbeddingMatrix> apply_permutation(
    const Vocabulary& vocab, const EmbeddingMatrix& emb, const Permutation& p);

struct AdaptOptions {
  std::size_t nglide = 3;
  std::size_t digest_bytes = kDefaultDigestBytes;
};

/// Everything random about an adaptation. One SplitMix64 stream seeded from
/// the passkey yields the glide sequence first and the permutation second.
struct AdaptationPlan {
  GlideSequence glides;
  Permutation permutation;
};

AdaptationPlan make_plan(const KeyMaterial& km, std::size_t vocab_size,
                         std::size_t dim, std::span<const TokenId> fixed,
                         std::size_t nglide);

/// Transforms the embeddings, encrypts the vocabulary, then co-shuffles
/// both with special tokens pinned. The returned matrix is still double
/// precision; save_bundle() rounds it to float32.
AdaptedBundle adapt_lm(const Vocabulary& vocab, const EmbeddingMatrix& emb,
                       const KeyMaterial& km, std::size_t nglide);
AdaptedBundle adapt_lm(const Vocabulary& vocab, const EmbeddingMatrix& emb,
                       std::string_view passkey, const AdaptOptions& options);

}  // namespace cipherlm
