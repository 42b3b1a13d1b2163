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

#include "cipherlm/isometry.hpp"

namespace cipherlm {

namespace {

Eigen::VectorXd draw_positive_vector(SplitMix64& prng, std::size_t dim) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = prng.unit_open();
  return v;
}

}  // namespace

GlideSequence make_glide_sequence(SplitMix64& prng, std::size_t dim,
                                  std::size_t nglide) {
  if (nglide == 0) throw ConfigError("nglide must be at least 1");
  if (dim == 0) throw ConfigError("embedding dimension must be at least 1");
  GlideSequence seq;
  seq.steps.reserve(nglide);
  for (std::size_t i = 0; i < nglide; ++i) {
    GlideParams p;
    p.line = draw_positive_vector(prng, dim);
    p.translation = draw_positive_vector(prng, dim);
    // All components are in (0, 1), so the norm is at least 2^-53 * sqrt(dim)
    // in theory; reject anything below the reflect() threshold anyway.
    if (!(p.line.norm() > kMinAxisNorm)) {
      throw DegenerateAxisError("generated reflection normal is degenerate");
    }
    seq.steps.push_back(std::move(p));
  }
  return seq;
}

GlideSequence make_glide_sequence(std::uint64_t seed, std::size_t dim,
                                  std::size_t nglide) {
  SplitMix64 prng(seed);
  return make_glide_sequence(prng, dim, nglide);
}

EmbeddingMatrix transform_matrix(const EmbeddingMatrix& m,
                                 const GlideSequence& seq) {
  if (seq.size() == 0) throw ConfigError("empty glide sequence");
  for (const auto& step : seq.steps) {
    if (step.line.size() != m.cols() || step.translation.size() != m.cols()) {
      throw ConfigError("glide sequence dimension " +
                        std::to_string(step.line.size()) +
                        " does not match embedding dimension " +
                        std::to_string(m.cols()));
    }
  }
  EmbeddingMatrix out(m.rows(), m.cols());
  // Each row goes through an owned VectorXd so the arithmetic is exactly the
  // one apply_sequence() performs on a single vector.
  Eigen::VectorXd row(m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    row = m.row(i).transpose();
    out.row(i) = apply_sequence(row, seq).transpose();
  }
  return out;
}

AffineMap compose(const GlideSequence& seq) {
  const Eigen::Index n = seq.dim();
  AffineMap map{Eigen::MatrixXd::Identity(n, n), Eigen::VectorXd::Zero(n)};
  for (const auto& step : seq.steps) {
    const Eigen::VectorXd& l = step.line;
    // H = I - 2 l l^T / (l^T l); apply to both the accumulated linear part
    // and the accumulated offset.
    const double ll = l.squaredNorm();
    map.linear -= (2.0 / ll) * l * (l.transpose() * map.linear);
    map.offset = reflect(map.offset, l) + step.translation;
  }
  return map;
}

}  // namespace cipherlm
