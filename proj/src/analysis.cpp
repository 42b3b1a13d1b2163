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

#include "cipherlm/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "cipherlm/errors.hpp"
#include "cipherlm/prng.hpp"

namespace cipherlm {

namespace {

constexpr Eigen::Index kBlockRows = 128;

void require_same_dim(const EmbeddingMatrix& a, const EmbeddingMatrix& b) {
  if (a.cols() != b.cols()) {
    throw ConfigError("embedding dimensions differ: " + std::to_string(a.cols()) +
                      " vs " + std::to_string(b.cols()));
  }
}

EmbeddingMatrix gather_rows(const EmbeddingMatrix& m,
                            const std::vector<std::size_t>& rows) {
  EmbeddingMatrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out.row(static_cast<Eigen::Index>(r)) = m.row(static_cast<Eigen::Index>(rows[r]));
  }
  return out;
}

/// Squared distances from each query row to every candidate row, computed
/// one block of queries at a time as |q|^2 - 2 q.c + |c|^2. fn(row, dists)
/// receives a row vector of length M.
template <typename Fn>
void for_each_distance_row(const EmbeddingMatrix& queries,
                           const EmbeddingMatrix& candidates, Fn&& fn) {
  const Eigen::VectorXd cand_norms = candidates.rowwise().squaredNorm();
  for (Eigen::Index start = 0; start < queries.rows(); start += kBlockRows) {
    const Eigen::Index n = std::min(kBlockRows, queries.rows() - start);
    const auto block = queries.middleRows(start, n);
    Eigen::MatrixXd d = -2.0 * (block * candidates.transpose());
    d.colwise() += block.rowwise().squaredNorm();
    d.rowwise() += cand_norms.transpose();
    for (Eigen::Index r = 0; r < n; ++r) fn(start + r, d.row(r));
  }
}

/// k nearest indices (excluding `self`), ties to the lowest index.
std::vector<std::size_t> knn_row(const Eigen::RowVectorXd& dists, std::size_t self,
                                 std::size_t k) {
  std::vector<std::size_t> idx(static_cast<std::size_t>(dists.size()));
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  idx.erase(idx.begin() + static_cast<std::ptrdiff_t>(self));
  const auto less = [&dists](std::size_t x, std::size_t y) {
    const double dx = dists(static_cast<Eigen::Index>(x));
    const double dy = dists(static_cast<Eigen::Index>(y));
    return dx < dy || (dx == dy && x < y);
  };
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k),
                    idx.end(), less);
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

std::vector<std::size_t> sample_rows(std::size_t m, std::size_t samples,
                                     std::uint64_t seed) {
  std::vector<std::size_t> all(m);
  std::iota(all.begin(), all.end(), std::size_t{0});
  if (samples == 0 || samples >= m) return all;
  SplitMix64 prng(seed);
  for (std::size_t i = 0; i < samples; ++i) {
    const auto j = i + static_cast<std::size_t>(prng.uniform_below(m - i));
    std::swap(all[i], all[j]);
  }
  all.resize(samples);
  std::sort(all.begin(), all.end());
  return all;
}

std::vector<std::size_t> nearest_rows(const EmbeddingMatrix& queries,
                                      const EmbeddingMatrix& candidates) {
  require_same_dim(queries, candidates);
  if (candidates.rows() == 0) throw ConfigError("no candidate rows");
  std::vector<std::size_t> out(static_cast<std::size_t>(queries.rows()));
  for_each_distance_row(queries, candidates,
                        [&out](Eigen::Index q, const auto& d) {
                          Eigen::Index best = 0;
                          for (Eigen::Index c = 1; c < d.size(); ++c) {
                            if (d(c) < d(best)) best = c;
                          }
                          out[static_cast<std::size_t>(q)] =
                              static_cast<std::size_t>(best);
                        });
  return out;
}

double nn_recovery_accuracy(const EmbeddingMatrix& orig,
                            const EmbeddingMatrix& candidates,
                            std::span<const TokenId> counterpart,
                            std::size_t samples, std::uint64_t seed) {
  require_same_dim(orig, candidates);
  if (orig.rows() == 0) throw ConfigError("no original rows");
  if (!counterpart.empty() &&
      counterpart.size() != static_cast<std::size_t>(orig.rows())) {
    throw ConfigError("counterpart map does not cover every original row");
  }
  const auto rows = sample_rows(static_cast<std::size_t>(orig.rows()), samples, seed);
  const auto nn = nearest_rows(gather_rows(orig, rows), candidates);
  std::size_t hits = 0;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const std::size_t truth = counterpart.empty() ? rows[r] : counterpart[rows[r]];
    if (nn[r] == truth) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(rows.size());
}

double nn_recovery_accuracy(const EmbeddingMatrix& orig,
                            const AdaptedBundle& adapted,
                            const Permutation* known_permutation,
                            std::size_t samples, std::uint64_t seed) {
  if (!known_permutation) {
    return nn_recovery_accuracy(orig, adapted.emb, {}, samples, seed);
  }
  if (known_permutation->size() != static_cast<std::size_t>(orig.rows())) {
    throw ConfigError("permutation size does not match the original matrix");
  }
  // Adapted row r holds original row map[r].
  const Permutation inv = known_permutation->inverse();
  return nn_recovery_accuracy(orig, adapted.emb, inv.map, samples, seed);
}

double ranked_list_overlap(const EmbeddingMatrix& a, const EmbeddingMatrix& b,
                           std::size_t k, std::size_t samples,
                           std::uint64_t seed) {
  require_same_dim(a, b);
  if (a.rows() != b.rows()) throw ConfigError("row counts differ");
  const auto m = static_cast<std::size_t>(a.rows());
  if (k == 0) throw ConfigError("k must be positive");
  if (k >= m) {
    throw ConfigError("k = " + std::to_string(k) + " must be below the row count " +
                      std::to_string(m));
  }
  const auto rows = sample_rows(m, samples, seed);
  const EmbeddingMatrix qa = gather_rows(a, rows);
  const EmbeddingMatrix qb = gather_rows(b, rows);

  std::vector<std::vector<std::size_t>> lists_a(rows.size());
  for_each_distance_row(qa, a, [&](Eigen::Index q, const auto& d) {
    const auto r = static_cast<std::size_t>(q);
    lists_a[r] = knn_row(d, rows[r], k);
  });
  double total = 0.0;
  for_each_distance_row(qb, b, [&](Eigen::Index q, const auto& d) {
    const auto r = static_cast<std::size_t>(q);
    const auto list_b = knn_row(d, rows[r], k);
    std::vector<std::size_t> common;
    std::set_intersection(lists_a[r].begin(), lists_a[r].end(), list_b.begin(),
                          list_b.end(), std::back_inserter(common));
    total += static_cast<double>(common.size()) /
             static_cast<double>(2 * k - common.size());
  });
  return total / static_cast<double>(rows.size());
}

DriftStats distance_audit(const EmbeddingMatrix& orig,
                          const EmbeddingMatrix& transformed, std::size_t pairs,
                          const std::filesystem::path& csv_path,
                          std::uint64_t seed) {
  require_same_dim(orig, transformed);
  if (orig.rows() != transformed.rows()) throw ConfigError("row counts differ");
  const auto m = static_cast<std::uint64_t>(orig.rows());
  if (pairs > 0 && m < 2) throw ConfigError("need at least two rows for pairs");

  std::ofstream out(csv_path, std::ios::binary | std::ios::trunc);
  if (!out) throw FileError("cannot write " + csv_path.string());
  out << "i,j,d_orig,d_trans,drift\n";

  DriftStats stats;
  SplitMix64 prng(seed);
  char line[160];
  for (std::size_t p = 0; p < pairs; ++p) {
    const auto i = static_cast<Eigen::Index>(prng.uniform_below(m));
    auto j = static_cast<Eigen::Index>(prng.uniform_below(m - 1));
    if (j >= i) ++j;
    const double d_orig = (orig.row(i) - orig.row(j)).norm();
    const double d_trans = (transformed.row(i) - transformed.row(j)).norm();
    const double drift = std::abs(d_trans - d_orig);
    stats.max_abs = std::max(stats.max_abs, drift);
    if (d_orig > 0.0) stats.max_rel = std::max(stats.max_rel, drift / d_orig);
    std::snprintf(line, sizeof line, "%td,%td,%.17g,%.17g,%.17g\n", i, j, d_orig,
                  d_trans, drift);
    out << line;
  }
  stats.pairs = pairs;
  out.close();
  if (!out) throw FileError("failed writing " + csv_path.string());
  return stats;
}

std::string report_to_json(const RecoverabilityReport& report) {
  nlohmann::ordered_json j;
  j["nn_accuracy"] = report.nn_accuracy;
  j["rank_overlap_at_k"] = report.rank_overlap_at_k;
  j["k"] = report.k;
  j["sample_size"] = report.sample_size;
  if (report.distance_drift_max) {
    j["distance_drift_max"] = *report.distance_drift_max;
  } else {
    j["distance_drift_max"] = nullptr;
  }
  return j.dump(2) + "\n";
}

RecoverabilityReport report_from_json(std::string_view json) {
  try {
    const auto j = nlohmann::ordered_json::parse(json);
    RecoverabilityReport r;
    r.nn_accuracy = j.at("nn_accuracy").get<double>();
    r.rank_overlap_at_k = j.at("rank_overlap_at_k").get<double>();
    r.k = j.at("k").get<std::size_t>();
    r.sample_size = j.at("sample_size").get<std::size_t>();
    if (!j.at("distance_drift_max").is_null()) {
      r.distance_drift_max = j.at("distance_drift_max").get<double>();
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed report: ") + e.what());
  }
}

}  // namespace cipherlm
