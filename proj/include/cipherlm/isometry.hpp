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

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "cipherlm/errors.hpp"
#include "cipherlm/model_io.hpp"
#include "cipherlm/prng.hpp"

namespace cipherlm {

/// Smallest admissible norm of a reflection normal.
inline constexpr double kMinAxisNorm = 1e-9;

/// Householder reflection of e about the hyperplane with normal l:
///   e - 2 (e.l / l.l) l
/// The map is orthogonal and an involution. l need not be normalized.
template <typename DerivedE, typename DerivedL>
Eigen::Matrix<typename DerivedE::Scalar, Eigen::Dynamic, 1> reflect(
    const Eigen::MatrixBase<DerivedE>& e, const Eigen::MatrixBase<DerivedL>& l) {
  using Scalar = typename DerivedE::Scalar;
  if (e.size() != l.size()) {
    throw ConfigError("reflect: vector and normal differ in dimension");
  }
  const Scalar ll = l.squaredNorm();
  if (!(std::sqrt(ll) > Scalar(kMinAxisNorm))) {
    throw DegenerateAxisError("reflect: normal vector is (nearly) zero");
  }
  const Scalar scale = Scalar(2) * e.dot(l.template cast<Scalar>()) / ll;
  return e - scale * l.template cast<Scalar>();
}

/// One glide reflection: a reflection followed by a translation.
struct GlideParams {
  Eigen::VectorXd line;
  Eigen::VectorXd translation;

  Eigen::Index dim() const noexcept { return line.size(); }
};

template <typename DerivedE>
Eigen::Matrix<typename DerivedE::Scalar, Eigen::Dynamic, 1> glide(
    const Eigen::MatrixBase<DerivedE>& e, const GlideParams& p) {
  using Scalar = typename DerivedE::Scalar;
  if (p.translation.size() != e.size()) {
    throw ConfigError("glide: translation differs in dimension");
  }
  return reflect(e, p.line) + p.translation.template cast<Scalar>();
}

/// Inverse of glide: subtract the translation, reflect again.
template <typename DerivedE>
Eigen::Matrix<typename DerivedE::Scalar, Eigen::Dynamic, 1> unglide(
    const Eigen::MatrixBase<DerivedE>& e, const GlideParams& p) {
  using Scalar = typename DerivedE::Scalar;
  return reflect(e - p.translation.template cast<Scalar>(), p.line);
}

/// nglide glide reflections applied in order.
struct GlideSequence {
  std::vector<GlideParams> steps;

  std::size_t size() const noexcept { return steps.size(); }
  Eigen::Index dim() const noexcept {
    return steps.empty() ? 0 : steps.front().dim();
  }
};

/// Draws, for each of nglide iterations, the normal and then the
/// translation, every component via prng.unit_open() in index order.
/// Consumes exactly 2 * nglide * dim values (plus rare rejections).
GlideSequence make_glide_sequence(SplitMix64& prng, std::size_t dim,
                                  std::size_t nglide);
GlideSequence make_glide_sequence(std::uint64_t seed, std::size_t dim,
                                  std::size_t nglide);

template <typename DerivedE>
Eigen::Matrix<typename DerivedE::Scalar, Eigen::Dynamic, 1> apply_sequence(
    const Eigen::MatrixBase<DerivedE>& e, const GlideSequence& seq) {
  Eigen::Matrix<typename DerivedE::Scalar, Eigen::Dynamic, 1> x = e;
  for (const auto& step : seq.steps) x = glide(x, step);
  return x;
}

/// Every row pushed through the whole sequence. Rows are independent, so
/// the result does not depend on processing order.
EmbeddingMatrix transform_matrix(const EmbeddingMatrix& m,
                                 const GlideSequence& seq);

/// x -> linear * x + offset, the closed form of a glide sequence.
struct AffineMap {
  Eigen::MatrixXd linear;
  Eigen::VectorXd offset;

  template <typename Derived>
  Eigen::VectorXd operator()(const Eigen::MatrixBase<Derived>& x) const {
    return linear * x + offset;
  }
};

/// Composes the reflections into one orthogonal matrix and the translations
/// into one offset.
AffineMap compose(const GlideSequence& seq);

}  // namespace cipherlm
