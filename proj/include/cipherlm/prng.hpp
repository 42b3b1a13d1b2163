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

#include <cstdint>

namespace cipherlm {

/// SplitMix64. Every randomized adaptation step draws from one of these,
/// so the sequence must be identical on every platform.
///
/// Not a cryptographic generator; secrecy comes from the keyed hash.
class SplitMix64 {
 public:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

  explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  std::uint64_t next_u64() noexcept;

  /// Uniform double in the open interval (0, 1), 53 bits of resolution.
  double unit_open() noexcept;

  /// Uniform integer in [0, bound) without modulo bias. bound must be > 0.
  std::uint64_t uniform_below(std::uint64_t bound) noexcept;

  std::uint64_t state() const noexcept { return state_; }

  /// Number of next_u64() calls made so far, including rejected draws.
  std::uint64_t draws() const noexcept { return draws_; }

 private:
  std::uint64_t state_;
  std::uint64_t draws_ = 0;
};

}  // namespace cipherlm
