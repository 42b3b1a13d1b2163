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
#include <string>
#include <string_view>
#include <vector>

#include "cipherlm/keyed_cipher.hpp"
#include "cipherlm/model_io.hpp"

namespace cipherlm {

/// Vocabulary pieces; continuation pieces start with "##".
struct PlainTokenStream {
  std::vector<std::string> tokens;
  friend bool operator==(const PlainTokenStream&,
                         const PlainTokenStream&) = default;
};

/// What travels over the wire: hex cipher tokens and plaintext special
/// tokens.
struct CipherTokenStream {
  std::vector<std::string> tokens;
  friend bool operator==(const CipherTokenStream&,
                         const CipherTokenStream&) = default;
};

/// Vocabulary ids wrapped as [CLS] ... [SEP].
struct IndexSequence {
  std::vector<TokenId> ids;
  friend bool operator==(const IndexSequence&, const IndexSequence&) = default;
};

inline constexpr std::size_t kMaxWordChars = 200;

/// BERT basic tokenization: drop NUL, U+FFFD and control characters, map
/// whitespace to spaces, isolate CJK ideographs, split on whitespace,
/// optionally lowercase and strip combining marks (NFD), then split every
/// punctuation character into its own token.
std::vector<std::string> basic_tokenize(std::string_view text, bool lowercase);

/// Greedy longest-match-first WordPiece on top of basic_tokenize. A word
/// with no full decomposition, or longer than kMaxWordChars code points,
/// becomes [UNK]. The vocabulary must outlive the tokenizer.
class WordPieceTokenizer {
 public:
  explicit WordPieceTokenizer(const Vocabulary& vocab, bool lowercase = true,
                              std::size_t max_word_chars = kMaxWordChars);

  PlainTokenStream tokenize(std::string_view text) const;

  /// WordPiece for a single pre-split word.
  void tokenize_word(std::string_view word,
                     std::vector<std::string>& out) const;

 private:
  const Vocabulary* vocab_;
  bool lowercase_;
  std::size_t max_word_chars_;
  std::string unk_;
};

PlainTokenStream wordpiece_tokenize(std::string_view text,
                                    const Vocabulary& vocab,
                                    bool lowercase = true);

/// Replaces every non-special token via cipher_map. Throws ProtocolError
/// when a token is missing from the map or the map's ciphers do not have
/// km's digest length.
CipherTokenStream encrypt_stream(const PlainTokenStream& ts,
                                 const KeyMaterial& km,
                                 const CipherMap& cipher_map);

/// Plaintext ids for a token stream, [CLS]/[SEP] wrapped, unknown pieces
/// mapped to [UNK].
IndexSequence plain_ids(const PlainTokenStream& ts, const Vocabulary& vocab);

/// Server-side lookup of cipher tokens in an adapted vocabulary. Holds a
/// reference to the bundle vocabulary, which must outlive it.
class SecondStageTokenizer {
 public:
  SecondStageTokenizer(const Vocabulary& adapted_vocab,
                       std::size_t digest_bytes);
  explicit SecondStageTokenizer(const AdaptedBundle& bundle);

  /// Throws ProtocolError naming the position of the first token that is
  /// neither a special token nor hex of the expected length. Well-formed
  /// but unknown ciphers map to [UNK].
  IndexSequence tokenize(const CipherTokenStream& cs) const;

  TokenId unk_id() const noexcept { return unk_; }
  TokenId cls_id() const noexcept { return cls_; }
  TokenId sep_id() const noexcept { return sep_; }
  TokenId pad_id() const noexcept { return pad_; }

 private:
  const Vocabulary* vocab_;
  std::size_t digest_bytes_;
  TokenId unk_, cls_, sep_, pad_;
};

IndexSequence second_stage_tokenize(const CipherTokenStream& cs,
                                    const AdaptedBundle& bundle);

}  // namespace cipherlm
