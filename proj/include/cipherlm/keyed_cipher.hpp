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
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cipherlm/model_io.hpp"

namespace cipherlm {

inline constexpr std::size_t kDefaultDigestBytes = 4;

/// A passkey and everything derived from it. The passkey itself is only
/// reachable through passkey(); it is wiped on destruction and there is no
/// stream operator.
class KeyMaterial {
 public:
  KeyMaterial(std::string_view passkey, std::size_t digest_bytes);
  ~KeyMaterial();

  KeyMaterial(const KeyMaterial&) = default;
  KeyMaterial& operator=(const KeyMaterial&) = default;
  KeyMaterial(KeyMaterial&&) = default;
  KeyMaterial& operator=(KeyMaterial&&) = default;

  std::string_view passkey() const noexcept { return passkey_; }
  std::size_t digest_bytes() const noexcept { return digest_bytes_; }
  std::uint64_t seed() const noexcept { return seed_; }

  /// 16 hex chars identifying the passkey; safe to persist.
  const std::string& fingerprint() const noexcept { return fingerprint_; }

 private:
  std::string passkey_;
  std::size_t digest_bytes_;
  std::uint64_t seed_;
  std::string fingerprint_;
};

/// seed = little-endian u64 of the 8-byte keyed BLAKE2b of "seed".
/// Throws ConfigError for an empty passkey or digest_bytes outside [1, 32].
KeyMaterial derive_key_material(std::string_view passkey,
                                std::size_t digest_bytes = kDefaultDigestBytes);

/// First 8 bytes (hex) of the keyed BLAKE2b-64 of "fingerprint".
std::string key_fingerprint(std::string_view passkey);

/// Hex of the keyed BLAKE2b of the token's UTF-8 bytes, digest length
/// km.digest_bytes().
std::string encrypt_token(std::string_view token, const KeyMaterial& km);

/// True when s has the shape of a cipher token for the given digest length.
bool is_cipher_token(std::string_view s, std::size_t digest_bytes) noexcept;

/// Cipher string for every vocabulary entry, index aligned. Special tokens
/// map to themselves. Collisions are resolved in ascending index order by
/// re-hashing token || 0x00 || counter for counter = 1..255.
std::vector<std::string> cipher_tokens(const Vocabulary& vocab,
                                       const KeyMaterial& km);

/// The vocabulary with every non-special token replaced by its cipher.
Vocabulary encrypt_vocab(const Vocabulary& vocab, const KeyMaterial& km);

/// plaintext token -> cipher token, consistent with encrypt_vocab.
using CipherMap = std::unordered_map<std::string, std::string>;
CipherMap build_cipher_map(const Vocabulary& vocab, const KeyMaterial& km);

}  // namespace cipherlm
