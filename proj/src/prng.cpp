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

#include "cipherlm/prng.hpp"

namespace cipherlm {

std::uint64_t SplitMix64::next_u64() noexcept {
  ++draws_;
  state_ += kGamma;
  std::uint64_t z = state_;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double SplitMix64::unit_open() noexcept {
  constexpr double kScale = 1.0 / 9007199254740992.0;  // 2^-53
  for (;;) {
    const double u = static_cast<double>((next_u64() >> 11) + 1) * kScale;
    if (u < 1.0) return u;
  }
}

std::uint64_t SplitMix64::uniform_below(std::uint64_t bound) noexcept {
  // Reject the lowest (2^64 mod bound) values so every residue is equally
  // likely.
  const std::uint64_t threshold = (0 - bound) % bound;
  for (;;) {
    const std::uint64_t r = next_u64();
    if (r >= threshold) return r % bound;
  }
}

}  // namespace cipherlm
