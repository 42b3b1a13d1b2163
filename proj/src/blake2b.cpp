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

#include "cipherlm/blake2b.hpp"

#include <algorithm>
#include <bit>
#include <cstring>

#include "cipherlm/errors.hpp"

namespace cipherlm::crypto {

namespace {

constexpr std::array<std::uint64_t, 8> kIv = {
    0x6a09e667f3bcc908ULL, 0xbb67ae8584caa73bULL, 0x3c6ef372fe94f82bULL,
    0xa54ff53a5f1d36f1ULL, 0x510e527fade682d1ULL, 0x9b05688c2b3e6c1fULL,
    0x1f83d9abfb41bd6bULL, 0x5be0cd19137e2179ULL};

constexpr std::uint8_t kSigma[12][16] = {
    {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15},
    {14, 10, 4, 8, 9, 15, 13, 6, 1, 12, 0, 2, 11, 7, 5, 3},
    {11, 8, 12, 0, 5, 2, 15, 13, 10, 14, 3, 6, 7, 1, 9, 4},
    {7, 9, 3, 1, 13, 12, 11, 14, 2, 6, 5, 10, 4, 0, 15, 8},
    {9, 0, 5, 7, 2, 4, 10, 15, 14, 1, 11, 12, 6, 8, 3, 13},
    {2, 12, 6, 10, 0, 11, 8, 3, 4, 13, 7, 5, 15, 14, 1, 9},
    {12, 5, 1, 15, 14, 13, 4, 10, 0, 7, 6, 3, 9, 2, 8, 11},
    {13, 11, 7, 14, 12, 1, 3, 9, 5, 0, 15, 4, 8, 6, 2, 10},
    {6, 15, 14, 9, 11, 3, 0, 8, 12, 2, 13, 7, 1, 4, 10, 5},
    {10, 2, 8, 4, 7, 6, 1, 5, 15, 11, 9, 14, 3, 12, 13, 0},
    {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15},
    {14, 10, 4, 8, 9, 15, 13, 6, 1, 12, 0, 2, 11, 7, 5, 3}};

std::uint64_t load_le64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

inline void mix(std::uint64_t* v, int a, int b, int c, int d, std::uint64_t x,
                std::uint64_t y) {
  v[a] = v[a] + v[b] + x;
  v[d] = std::rotr(v[d] ^ v[a], 32);
  v[c] = v[c] + v[d];
  v[b] = std::rotr(v[b] ^ v[c], 24);
  v[a] = v[a] + v[b] + y;
  v[d] = std::rotr(v[d] ^ v[a], 16);
  v[c] = v[c] + v[d];
  v[b] = std::rotr(v[b] ^ v[c], 63);
}

}  // namespace

Blake2b::Blake2b(std::size_t digest_bytes, std::span<const std::uint8_t> key)
    : digest_bytes_(digest_bytes) {
  if (digest_bytes == 0 || digest_bytes > kMaxDigestBytes) {
    throw ConfigError("blake2b digest length must be in [1, 64]");
  }
  if (key.size() > kMaxKeyBytes) {
    throw ConfigError("blake2b key longer than 64 bytes");
  }
  h_ = kIv;
  // Parameter block word 0: digest length, key length, fanout 1, depth 1.
  h_[0] ^= 0x01010000ULL ^ (static_cast<std::uint64_t>(key.size()) << 8) ^
           static_cast<std::uint64_t>(digest_bytes);
  if (!key.empty()) {
    std::array<std::uint8_t, kBlockBytes> block{};
    std::copy(key.begin(), key.end(), block.begin());
    update(block);
    std::fill(block.begin(), block.end(), std::uint8_t{0});
  }
}

Blake2b::~Blake2b() {
  // Key material may sit in the buffer or chaining state.
  volatile std::uint8_t* p = buffer_.data();
  for (std::size_t i = 0; i < buffer_.size(); ++i) p[i] = 0;
  volatile std::uint64_t* q = h_.data();
  for (std::size_t i = 0; i < h_.size(); ++i) q[i] = 0;
}

void Blake2b::compress(bool last) {
  std::uint64_t m[16];
  for (int i = 0; i < 16; ++i) m[i] = load_le64(buffer_.data() + 8 * i);

  std::uint64_t v[16];
  for (int i = 0; i < 8; ++i) {
    v[i] = h_[i];
    v[i + 8] = kIv[i];
  }
  v[12] ^= counter_lo_;
  v[13] ^= counter_hi_;
  if (last) v[14] = ~v[14];

  for (const auto& s : kSigma) {
    mix(v, 0, 4, 8, 12, m[s[0]], m[s[1]]);
    mix(v, 1, 5, 9, 13, m[s[2]], m[s[3]]);
    mix(v, 2, 6, 10, 14, m[s[4]], m[s[5]]);
    mix(v, 3, 7, 11, 15, m[s[6]], m[s[7]]);
    mix(v, 0, 5, 10, 15, m[s[8]], m[s[9]]);
    mix(v, 1, 6, 11, 12, m[s[10]], m[s[11]]);
    mix(v, 2, 7, 8, 13, m[s[12]], m[s[13]]);
    mix(v, 3, 4, 9, 14, m[s[14]], m[s[15]]);
  }
  for (int i = 0; i < 8; ++i) h_[i] ^= v[i] ^ v[i + 8];
}

void Blake2b::update(std::span<const std::uint8_t> data) {
  if (finalized_) throw Error("blake2b: update after finalize");
  for (std::uint8_t byte : data) {
    // The final block is compressed in finalize(), so a full buffer is only
    // flushed once more input arrives.
    if (buffered_ == kBlockBytes) {
      counter_lo_ += kBlockBytes;
      if (counter_lo_ < kBlockBytes) ++counter_hi_;
      compress(false);
      buffered_ = 0;
    }
    buffer_[buffered_++] = byte;
  }
}

void Blake2b::update(std::string_view data) {
  update(std::span(reinterpret_cast<const std::uint8_t*>(data.data()),
                   data.size()));
}

std::vector<std::uint8_t> Blake2b::finalize() {
  if (finalized_) throw Error("blake2b: finalize called twice");
  finalized_ = true;
  counter_lo_ += buffered_;
  if (counter_lo_ < buffered_) ++counter_hi_;
  std::fill(buffer_.begin() + static_cast<std::ptrdiff_t>(buffered_),
            buffer_.end(), std::uint8_t{0});
  compress(true);

  std::vector<std::uint8_t> out(digest_bytes_);
  for (std::size_t i = 0; i < digest_bytes_; ++i) {
    out[i] = static_cast<std::uint8_t>(h_[i / 8] >> (8 * (i % 8)));
  }
  return out;
}

std::vector<std::uint8_t> blake2b(std::span<const std::uint8_t> message,
                                  std::size_t digest_bytes,
                                  std::span<const std::uint8_t> key) {
  Blake2b state(digest_bytes, key);
  state.update(message);
  return state.finalize();
}

std::vector<std::uint8_t> blake2b(std::string_view message,
                                  std::size_t digest_bytes,
                                  std::string_view key) {
  auto as_bytes = [](std::string_view s) {
    return std::span(reinterpret_cast<const std::uint8_t*>(s.data()),
                     s.size());
  };
  return blake2b(as_bytes(message), digest_bytes, as_bytes(key));
}

std::string to_hex(std::span<const std::uint8_t> bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (std::uint8_t b : bytes) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0x0f]);
  }
  return out;
}

}  // namespace cipherlm::crypto
