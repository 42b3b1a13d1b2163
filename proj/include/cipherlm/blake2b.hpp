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

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cipherlm::crypto {

/// BLAKE2b (RFC 7693) with an optional key of up to 64 bytes and a digest
/// length of 1..64 bytes. The digest length is part of the parameter block,
/// so a 4-byte digest is not a prefix of the 64-byte digest.
class Blake2b {
 public:
  static constexpr std::size_t kBlockBytes = 128;
  static constexpr std::size_t kMaxDigestBytes = 64;
  static constexpr std::size_t kMaxKeyBytes = 64;

  explicit Blake2b(std::size_t digest_bytes,
                   std::span<const std::uint8_t> key = {});
  ~Blake2b();

  Blake2b(const Blake2b&) = default;
  Blake2b& operator=(const Blake2b&) = default;

  void update(std::span<const std::uint8_t> data);
  void update(std::string_view data);

  /// Finishes the hash. The object must not be updated afterwards.
  std::vector<std::uint8_t> finalize();

 private:
  void compress(bool last);

  std::array<std::uint64_t, 8> h_{};
  std::array<std::uint8_t, kBlockBytes> buffer_{};
  std::size_t buffered_ = 0;
  std::uint64_t counter_lo_ = 0;
  std::uint64_t counter_hi_ = 0;
  std::size_t digest_bytes_;
  bool finalized_ = false;
};

std::vector<std::uint8_t> blake2b(std::span<const std::uint8_t> message,
                                  std::size_t digest_bytes,
                                  std::span<const std::uint8_t> key = {});

std::vector<std::uint8_t> blake2b(std::string_view message,
                                  std::size_t digest_bytes,
                                  std::string_view key = {});

/// Lowercase hex.
std::string to_hex(std::span<const std::uint8_t> bytes);

}  // namespace cipherlm::crypto
