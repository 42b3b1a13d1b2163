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
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cipherlm/adapt.hpp"
#include "cipherlm/model_io.hpp"

namespace cipherlm {

/// Sorted distinct row indices in [0, m). samples == 0 or samples >= m
/// selects every row.
std::vector<std::size_t> sample_rows(std::size_t m, std::size_t samples,
                                     std::uint64_t seed);

/// Index of the Euclidean nearest candidate row for each query row, by
/// exact brute force. Ties go to the lowest candidate index.
std::vector<std::size_t> nearest_rows(const EmbeddingMatrix& queries,
                                      const EmbeddingMatrix& candidates);

/// Fraction of sampled original rows whose nearest candidate row is their
/// counterpart. counterpart[i] is the candidate row holding original row i;
/// an empty span means row i pairs with row i.
double nn_recovery_accuracy(const EmbeddingMatrix& orig,
                            const EmbeddingMatrix& candidates,
                            std::span<const TokenId> counterpart,
                            std::size_t samples = 0, std::uint64_t seed = 0);

/// Against an adapted bundle. Without the permutation rows are aligned by
/// index, which is all an attacker without the passkey has.
double nn_recovery_accuracy(const EmbeddingMatrix& orig,
                            const AdaptedBundle& adapted,
                            const Permutation* known_permutation,
                            std::size_t samples = 0, std::uint64_t seed = 0);

/// Mean Jaccard overlap of the k-nearest lists (anchor excluded) of sampled
/// anchors in the two spaces, rows aligned by index. Throws ConfigError
/// when k == 0 or k >= M.
double ranked_list_overlap(const EmbeddingMatrix& a, const EmbeddingMatrix& b,
                           std::size_t k, std::size_t samples = 0,
                           std::uint64_t seed = 0);

struct DriftStats {
  double max_abs = 0.0;
  double max_rel = 0.0;
  std::size_t pairs = 0;
};

/// Samples random pairs i != j, writes "i,j,d_orig,d_trans,drift" rows to
/// csv_path and returns the largest drift. Throws FileError when the CSV
/// cannot be written.
DriftStats distance_audit(const EmbeddingMatrix& orig,
                          const EmbeddingMatrix& transformed, std::size_t pairs,
                          const std::filesystem::path& csv_path,
                          std::uint64_t seed = 0);

struct RecoverabilityReport {
  double nn_accuracy = 0.0;
  double rank_overlap_at_k = 0.0;
  std::size_t k = 0;
  std::size_t sample_size = 0;
  std::optional<double> distance_drift_max;  // null when no audit was run
};

std::string report_to_json(const RecoverabilityReport& report);
RecoverabilityReport report_from_json(std::string_view json);

}  // namespace cipherlm
