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

#include "cipherlm/tokenize.hpp"

#include <algorithm>

#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

#include "cipherlm/errors.hpp"

namespace cipherlm {

namespace {

bool is_whitespace(UChar32 c) {
  if (c == ' ' || c == '\t' || c == '\n' || c == '\r') return true;
  return u_charType(c) == U_SPACE_SEPARATOR;
}

bool is_control(UChar32 c) {
  if (c == '\t' || c == '\n' || c == '\r') return false;
  const auto type = u_charType(c);
  return type == U_CONTROL_CHAR || type == U_FORMAT_CHAR;
}

bool is_punctuation(UChar32 c) {
  // ASCII symbols such as "$" and "^" are not Unicode punctuation but are
  // split like it.
  if ((c >= 33 && c <= 47) || (c >= 58 && c <= 64) || (c >= 91 && c <= 96) ||
      (c >= 123 && c <= 126)) {
    return true;
  }
  return (U_GET_GC_MASK(c) & U_GC_P_MASK) != 0;
}

bool is_cjk(UChar32 c) {
  return (c >= 0x4E00 && c <= 0x9FFF) || (c >= 0x3400 && c <= 0x4DBF) ||
         (c >= 0x20000 && c <= 0x2A6DF) || (c >= 0x2A700 && c <= 0x2B73F) ||
         (c >= 0x2B740 && c <= 0x2B81F) || (c >= 0x2B820 && c <= 0x2CEAF) ||
         (c >= 0xF900 && c <= 0xFAFF) || (c >= 0x2F800 && c <= 0x2FA1F);
}

std::vector<UChar32> decode_utf8(std::string_view s) {
  std::vector<UChar32> out;
  out.reserve(s.size());
  const auto* p = reinterpret_cast<const uint8_t*>(s.data());
  const auto n = static_cast<int32_t>(s.size());
  int32_t i = 0;
  while (i < n) {
    UChar32 c;
    U8_NEXT(p, i, n, c);
    out.push_back(c < 0 ? 0xFFFD : c);
  }
  return out;
}

void append_utf8(std::string& out, UChar32 c) {
  uint8_t buf[U8_MAX_LENGTH];
  int32_t len = 0;
  UBool error = false;
  U8_APPEND(buf, len, U8_MAX_LENGTH, c, error);
  if (!error) out.append(reinterpret_cast<const char*>(buf), len);
}

std::vector<UChar32> lower_and_strip_accents(const std::vector<UChar32>& word) {
  icu::UnicodeString s;
  for (UChar32 c : word) s.append(c);
  s.toLower(icu::Locale::getRoot());
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* nfd = icu::Normalizer2::getNFDInstance(status);
  if (U_FAILURE(status)) throw Error("ICU NFD normalizer unavailable");
  icu::UnicodeString decomposed = nfd->normalize(s, status);
  if (U_FAILURE(status)) throw Error("ICU normalization failed");

  std::vector<UChar32> out;
  for (int32_t i = 0; i < decomposed.length();) {
    const UChar32 c = decomposed.char32At(i);
    if (u_charType(c) != U_NON_SPACING_MARK) out.push_back(c);
    i = decomposed.moveIndex32(i, 1);
  }
  return out;
}

bool is_special_string(std::string_view token) {
  const auto specials = default_special_tokens();
  return std::find(specials.begin(), specials.end(), token) != specials.end();
}

}  // namespace

std::vector<std::string> basic_tokenize(std::string_view text, bool lowercase) {
  // Clean and isolate CJK characters; collect whitespace separated words.
  std::vector<std::vector<UChar32>> words;
  std::vector<UChar32> current;
  auto flush = [&] {
    if (!current.empty()) words.push_back(std::move(current));
    current.clear();
  };
  for (UChar32 c : decode_utf8(text)) {
    if (c == 0 || c == 0xFFFD || is_control(c)) continue;
    if (is_whitespace(c)) {
      flush();
    } else if (is_cjk(c)) {
      flush();
      current.push_back(c);
      flush();
    } else {
      current.push_back(c);
    }
  }
  flush();

  std::vector<std::string> tokens;
  for (auto& word : words) {
    if (lowercase) word = lower_and_strip_accents(word);
    std::string piece;
    for (UChar32 c : word) {
      if (is_punctuation(c)) {
        if (!piece.empty()) tokens.push_back(std::move(piece));
        piece.clear();
        std::string p;
        append_utf8(p, c);
        tokens.push_back(std::move(p));
      } else if (is_whitespace(c)) {
        // NFD can expose spacing characters; re-split like the reference.
        if (!piece.empty()) tokens.push_back(std::move(piece));
        piece.clear();
      } else {
        append_utf8(piece, c);
      }
    }
    if (!piece.empty()) tokens.push_back(std::move(piece));
  }
  return tokens;
}

WordPieceTokenizer::WordPieceTokenizer(const Vocabulary& vocab, bool lowercase,
                                       std::size_t max_word_chars)
    : vocab_(&vocab),
      lowercase_(lowercase),
      max_word_chars_(max_word_chars),
      unk_(kUnkToken) {
  vocab.require(kUnkToken);
}

void WordPieceTokenizer::tokenize_word(std::string_view word,
                                       std::vector<std::string>& out) const {
  // Byte offsets of code point boundaries, including the end.
  std::vector<std::size_t> bounds;
  {
    const auto* p = reinterpret_cast<const uint8_t*>(word.data());
    const auto n = static_cast<int32_t>(word.size());
    int32_t i = 0;
    while (i < n) {
      bounds.push_back(static_cast<std::size_t>(i));
      U8_FWD_1(p, i, n);
    }
    bounds.push_back(word.size());
  }
  const std::size_t chars = bounds.size() - 1;
  if (chars > max_word_chars_) {
    out.push_back(unk_);
    return;
  }

  std::vector<std::string> pieces;
  std::size_t start = 0;
  std::string candidate;
  while (start < chars) {
    std::size_t end = chars;
    bool found = false;
    while (start < end) {
      candidate.clear();
      if (start > 0) candidate = "##";
      candidate.append(word.substr(bounds[start], bounds[end] - bounds[start]));
      if (vocab_->find(candidate)) {
        found = true;
        break;
      }
      --end;
    }
    if (!found) {
      out.push_back(unk_);
      return;
    }
    pieces.push_back(candidate);
    start = end;
  }
  for (auto& p : pieces) out.push_back(std::move(p));
}

PlainTokenStream WordPieceTokenizer::tokenize(std::string_view text) const {
  PlainTokenStream ts;
  for (const auto& word : basic_tokenize(text, lowercase_)) {
    tokenize_word(word, ts.tokens);
  }
  return ts;
}

PlainTokenStream wordpiece_tokenize(std::string_view text,
                                    const Vocabulary& vocab, bool lowercase) {
  return WordPieceTokenizer(vocab, lowercase).tokenize(text);
}

CipherTokenStream encrypt_stream(const PlainTokenStream& ts,
                                 const KeyMaterial& km,
                                 const CipherMap& cipher_map) {
  CipherTokenStream cs;
  cs.tokens.reserve(ts.tokens.size());
  for (std::size_t i = 0; i < ts.tokens.size(); ++i) {
    const std::string& token = ts.tokens[i];
    if (is_special_string(token)) {
      cs.tokens.push_back(token);
      continue;
    }
    auto it = cipher_map.find(token);
    if (it == cipher_map.end()) {
      throw ProtocolError("token at position " + std::to_string(i) +
                          " is not in the client vocabulary");
    }
    if (!is_cipher_token(it->second, km.digest_bytes())) {
      throw ProtocolError(
          "cipher map does not match the key material's digest length");
    }
    cs.tokens.push_back(it->second);
  }
  return cs;
}

IndexSequence plain_ids(const PlainTokenStream& ts, const Vocabulary& vocab) {
  const TokenId unk = vocab.require(kUnkToken);
  IndexSequence seq;
  seq.ids.reserve(ts.tokens.size() + 2);
  seq.ids.push_back(vocab.require(kClsToken));
  for (const auto& t : ts.tokens) seq.ids.push_back(vocab.find(t).value_or(unk));
  seq.ids.push_back(vocab.require(kSepToken));
  return seq;
}

SecondStageTokenizer::SecondStageTokenizer(const Vocabulary& adapted_vocab,
                                           std::size_t digest_bytes)
    : vocab_(&adapted_vocab),
      digest_bytes_(digest_bytes),
      unk_(adapted_vocab.require(kUnkToken)),
      cls_(adapted_vocab.require(kClsToken)),
      sep_(adapted_vocab.require(kSepToken)),
      pad_(adapted_vocab.require(kPadToken)) {}

SecondStageTokenizer::SecondStageTokenizer(const AdaptedBundle& bundle)
    : SecondStageTokenizer(bundle.vocab, bundle.manifest.digest_bytes) {}

IndexSequence SecondStageTokenizer::tokenize(const CipherTokenStream& cs) const {
  IndexSequence seq;
  seq.ids.reserve(cs.tokens.size() + 2);
  seq.ids.push_back(cls_);
  for (std::size_t i = 0; i < cs.tokens.size(); ++i) {
    const std::string& token = cs.tokens[i];
    if (is_special_string(token)) {
      seq.ids.push_back(vocab_->find(token).value_or(unk_));
      continue;
    }
    if (!is_cipher_token(token, digest_bytes_)) {
      throw ProtocolError("malformed cipher token at position " +
                          std::to_string(i));
    }
    seq.ids.push_back(vocab_->find(token).value_or(unk_));
  }
  seq.ids.push_back(sep_);
  return seq;
}

IndexSequence second_stage_tokenize(const CipherTokenStream& cs,
                                    const AdaptedBundle& bundle) {
  return SecondStageTokenizer(bundle).tokenize(cs);
}

}  // namespace cipherlm
