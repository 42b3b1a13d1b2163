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
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace cipherlm {

using TokenId = std::uint32_t;

template <typename Scalar>
using RowMatrix =
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// M x E token embeddings, row i belongs to vocabulary index i. Held in
/// double precision; files store float32.
using EmbeddingMatrix = RowMatrix<double>;

inline constexpr std::string_view kPadToken = "[PAD]";
inline constexpr std::string_view kUnkToken = "[UNK]";
inline constexpr std::string_view kClsToken = "[CLS]";
inline constexpr std::string_view kSepToken = "[SEP]";
inline constexpr std::string_view kMaskToken = "[MASK]";

/// Token strings that are treated as special when present in a vocabulary.
std::span<const std::string_view> default_special_tokens();

/// Ordered, duplicate-free token list. Index == token id.
class Vocabulary {
 public:
  Vocabulary() = default;

  /// Special ids are every token equal to one of default_special_tokens().
  /// Throws ConsistencyError on empty or duplicate tokens, or tokens
  /// containing a line break.
  explicit Vocabulary(std::vector<std::string> tokens);

  std::size_t size() const noexcept { return tokens_.size(); }
  bool empty() const noexcept { return tokens_.empty(); }

  const std::string& token(TokenId id) const { return tokens_.at(id); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  /// Sorted ascending.
  const std::vector<TokenId>& special_ids() const noexcept {
    return special_ids_;
  }
  bool is_special(TokenId id) const;

  std::optional<TokenId> find(std::string_view token) const;

  /// Id of a token that must be present; throws ConfigError otherwise.
  TokenId require(std::string_view token) const;

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.tokens_ == b.tokens_;
  }

 private:
  std::vector<std::string> tokens_;
  std::vector<TokenId> special_ids_;
  std::unordered_map<std::string, TokenId> index_;
};

struct SpecialToken {
  std::string token;
  TokenId index = 0;

  friend bool operator==(const SpecialToken&, const SpecialToken&) = default;
};

struct BundleManifest {
  static constexpr int kFormatVersion = 1;

  int format_version = kFormatVersion;
  std::size_t vocab_size = 0;
  std::size_t embed_dim = 0;
  std::size_t nglide = 0;
  std::size_t digest_bytes = 0;
  std::vector<SpecialToken> special_tokens;
  /// 16 lowercase hex chars derived from the passkey by a keyed hash.
  std::string key_fingerprint;

  friend bool operator==(const BundleManifest&,
                         const BundleManifest&) = default;
};

/// Output of the adaptation: cipher vocabulary and transformed embeddings,
/// both shuffled with the same permutation.
struct AdaptedBundle {
  Vocabulary vocab;
  EmbeddingMatrix emb;
  BundleManifest manifest;
};

/// Linear softmax classifier over E-dimensional features.
struct ClassifierHead {
  Eigen::MatrixXd weights;  // C x E
  Eigen::VectorXd bias;     // C
  double l2 = 0.0;
  double final_loss = 0.0;

  std::size_t classes() const noexcept {
    return static_cast<std::size_t>(bias.size());
  }
  std::size_t dim() const noexcept {
    return static_cast<std::size_t>(weights.cols());
  }
};

// Vocabulary files: UTF-8, one token per line, token id = 0-based line.
Vocabulary load_vocab(const std::filesystem::path& path);
void save_vocab(const Vocabulary& vocab, const std::filesystem::path& path);

// CLM1 matrix files: "CLM1", u32 rows, u32 cols (little endian), then
// rows*cols little-endian float32 values, row-major.
EmbeddingMatrix load_matrix(const std::filesystem::path& path);
void save_matrix(const EmbeddingMatrix& matrix,
                 const std::filesystem::path& path);
std::string encode_matrix(const EmbeddingMatrix& matrix);
EmbeddingMatrix decode_matrix(std::string_view bytes);

/// Rounds every entry to float32 and back, i.e. what a save/load cycle does.
EmbeddingMatrix round_to_float(const EmbeddingMatrix& matrix);

/// Manifest JSON: keys in declaration order, two-space indent, LF endings.
std::string manifest_to_json(const BundleManifest& manifest);
BundleManifest manifest_from_json(std::string_view json);

/// Writes vocab.txt, embeddings.clm1 and manifest.json into dir.
void save_bundle(const Vocabulary& vocab, const EmbeddingMatrix& emb,
                 const BundleManifest& manifest,
                 const std::filesystem::path& dir);
void save_bundle(const AdaptedBundle& bundle, const std::filesystem::path& dir);

/// Loads and cross-checks a bundle. When expected_fingerprint is given, a
/// manifest with another fingerprint is rejected with ConsistencyError
/// before the matrix is read.
AdaptedBundle load_bundle(
    const std::filesystem::path& dir,
    std::optional<std::string_view> expected_fingerprint = std::nullopt);

inline constexpr std::string_view kBundleVocabFile = "vocab.txt";
inline constexpr std::string_view kBundleMatrixFile = "embeddings.clm1";
inline constexpr std::string_view kBundleManifestFile = "manifest.json";

/// Head JSON: {"format_version","classes","dim","l2","final_loss",
/// "weights" (C rows of E numbers),"bias"}.
std::string head_to_json(const ClassifierHead& head);
ClassifierHead head_from_json(std::string_view json);
void save_head(const ClassifierHead& head, const std::filesystem::path& path);
ClassifierHead load_head(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace cipherlm
