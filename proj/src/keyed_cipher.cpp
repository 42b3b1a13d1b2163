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

#include "cipherlm/keyed_cipher.hpp"

#include <algorithm>
#include <unordered_set>

#include "cipherlm/blake2b.hpp"
#include "cipherlm/errors.hpp"

namespace cipherlm {

namespace {

constexpr std::size_t kMaxDigestBytes = 32;
constexpr int kMaxCollisionRetries = 255;

std::string keyed_hex(std::string_view message, std::string_view passkey,
                      std::size_t digest_bytes) {
  return crypto::to_hex(crypto::blake2b(message, digest_bytes, passkey));
}

void check_passkey(std::string_view passkey) {
  if (passkey.empty()) throw ConfigError("passkey must not be empty");
  if (passkey.size() > crypto::Blake2b::kMaxKeyBytes) {
    throw ConfigError("passkey longer than 64 bytes");
  }
}

}  // namespace

KeyMaterial::KeyMaterial(std::string_view passkey, std::size_t digest_bytes)
    : passkey_(passkey), digest_bytes_(digest_bytes), seed_(0) {
  check_passkey(passkey);
  if (digest_bytes < 1 || digest_bytes > kMaxDigestBytes) {
    throw ConfigError("digest_bytes must be in [1, 32]");
  }
  const auto digest = crypto::blake2b("seed", 8, passkey);
  for (int i = 7; i >= 0; --i) seed_ = (seed_ << 8) | digest[i];
  fingerprint_ = key_fingerprint(passkey);
}

KeyMaterial::~KeyMaterial() {
  volatile char* p = passkey_.data();
  for (std::size_t i = 0; i < passkey_.size(); ++i) p[i] = 0;
}

KeyMaterial derive_key_material(std::string_view passkey,
                                std::size_t digest_bytes) {
  return KeyMaterial(passkey, digest_bytes);
}

std::string key_fingerprint(std::string_view passkey) {
  check_passkey(passkey);
  return keyed_hex("fingerprint", passkey, 8);
}

std::string encrypt_token(std::string_view token, const KeyMaterial& km) {
  return keyed_hex(token, km.passkey(), km.digest_bytes());
}

bool is_cipher_token(std::string_view s, std::size_t digest_bytes) noexcept {
  return s.size() == 2 * digest_bytes &&
         std::all_of(s.begin(), s.end(), [](char c) {
           return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
         });
}

std::vector<std::string> cipher_tokens(const Vocabulary& vocab,
                                       const KeyMaterial& km) {
  std::vector<std::string> out;
  out.reserve(vocab.size());
  std::unordered_set<std::string> taken;
  taken.reserve(vocab.size());
  for (TokenId id : vocab.special_ids()) taken.insert(vocab.token(id));

  for (std::size_t i = 0; i < vocab.size(); ++i) {
    const auto id = static_cast<TokenId>(i);
    const std::string& plain = vocab.token(id);
    if (vocab.is_special(id)) {
      out.push_back(plain);
      continue;
    }
    std::string cipher = encrypt_token(plain, km);
    if (taken.contains(cipher)) {
      std::string message = plain;
      message.push_back('\0');
      message.push_back('\0');
      int counter = 1;
      for (; counter <= kMaxCollisionRetries; ++counter) {
        message.back() = static_cast<char>(counter);
        cipher = keyed_hex(message, km.passkey(), km.digest_bytes());
        if (!taken.contains(cipher)) break;
      }
      if (counter > kMaxCollisionRetries) {
        throw AdaptationError("unresolvable cipher collision for token index " +
                              std::to_string(i));
      }
    }
    taken.insert(cipher);
    out.push_back(std::move(cipher));
  }
  return out;
}

Vocabulary encrypt_vocab(const Vocabulary& vocab, const KeyMaterial& km) {
  return Vocabulary(cipher_tokens(vocab, km));
}

CipherMap build_cipher_map(const Vocabulary& vocab, const KeyMaterial& km) {
  auto ciphers = cipher_tokens(vocab, km);
  CipherMap map;
  map.reserve(vocab.size());
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    map.emplace(vocab.tokens()[i], std::move(ciphers[i]));
  }
  return map;
}

}  // namespace cipherlm
