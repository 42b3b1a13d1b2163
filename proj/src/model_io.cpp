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

#include "cipherlm/model_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "cipherlm/errors.hpp"

namespace cipherlm {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr std::array<std::string_view, 5> kDefaultSpecial = {
    kPadToken, kUnkToken, kClsToken, kSepToken, kMaskToken};

constexpr std::string_view kMagic = "CLM1";
constexpr std::size_t kHeaderBytes = 12;

bool valid_utf8(std::string_view s) {
  std::size_t i = 0;
  const auto* p = reinterpret_cast<const unsigned char*>(s.data());
  while (i < s.size()) {
    const unsigned char c = p[i];
    std::size_t extra = 0;
    std::uint32_t cp = 0;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      extra = 1;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      extra = 2;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      extra = 3;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + extra >= s.size()) return false;
    for (std::size_t k = 1; k <= extra; ++k) {
      if ((p[i + k] & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (p[i + k] & 0x3F);
    }
    static constexpr std::uint32_t kMin[] = {0, 0x80, 0x800, 0x10000};
    if (cp < kMin[extra] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF))
      return false;
    i += extra + 1;
  }
  return true;
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>(v >> (8 * i)));
}

std::uint32_t get_u32(std::string_view bytes, std::size_t offset) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) {
    v = (v << 8) | static_cast<unsigned char>(bytes[offset + i]);
  }
  return v;
}

bool is_fingerprint(std::string_view s) {
  return s.size() == 16 && std::all_of(s.begin(), s.end(), [](char c) {
           return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
         });
}

template <typename T>
T get_field(const ordered_json& j, const char* key) {
  if (!j.contains(key)) {
    throw FormatError(std::string("missing field \"") + key + "\"");
  }
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw FormatError(std::string("field \"") + key + "\" has the wrong type");
  }
}

void require_exact_keys(const ordered_json& j,
                        std::initializer_list<std::string_view> keys,
                        std::string_view what) {
  if (!j.is_object()) throw FormatError(std::string(what) + " is not a JSON object");
  if (j.size() != keys.size()) {
    throw FormatError(std::string(what) + " has unexpected fields");
  }
  auto it = j.begin();
  for (std::string_view key : keys) {
    if (it.key() != key) {
      throw FormatError(std::string(what) + ": expected field \"" +
                        std::string(key) + "\" but found \"" + it.key() + "\"");
    }
    ++it;
  }
}

}  // namespace

std::span<const std::string_view> default_special_tokens() {
  return kDefaultSpecial;
}

Vocabulary::Vocabulary(std::vector<std::string> tokens)
    : tokens_(std::move(tokens)) {
  if (tokens_.size() > std::numeric_limits<TokenId>::max()) {
    throw ConsistencyError("vocabulary too large");
  }
  index_.reserve(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    const std::string& t = tokens_[i];
    if (t.empty()) {
      throw ConsistencyError("empty token at index " + std::to_string(i));
    }
    if (t.find_first_of("\r\n") != std::string::npos) {
      throw ConsistencyError("line break inside token at index " +
                             std::to_string(i));
    }
    const auto id = static_cast<TokenId>(i);
    if (!index_.emplace(t, id).second) {
      throw ConsistencyError("duplicate token at index " + std::to_string(i));
    }
    if (std::find(kDefaultSpecial.begin(), kDefaultSpecial.end(), t) !=
        kDefaultSpecial.end()) {
      special_ids_.push_back(id);
    }
  }
}

bool Vocabulary::is_special(TokenId id) const {
  return std::binary_search(special_ids_.begin(), special_ids_.end(), id);
}

std::optional<TokenId> Vocabulary::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

TokenId Vocabulary::require(std::string_view token) const {
  if (auto id = find(token)) return *id;
  throw ConfigError("vocabulary has no " + std::string(token) + " token");
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileError("cannot open " + path.string());
  std::string data((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  if (in.bad()) throw FileError("read failed: " + path.string());
  return data;
}

void write_file(const fs::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FileError("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) throw FileError("write failed: " + path.string());
}

Vocabulary load_vocab(const fs::path& path) {
  const std::string data = read_file(path);
  if (!valid_utf8(data)) {
    throw FormatError(path.string() + ": not valid UTF-8");
  }
  std::vector<std::string> tokens;
  std::unordered_map<std::string_view, std::size_t> first_seen;
  std::string_view rest = data;
  std::size_t line = 0;
  while (!rest.empty()) {
    const std::size_t nl = rest.find('\n');
    std::string_view token = rest.substr(0, nl);
    rest = nl == std::string_view::npos ? std::string_view{}
                                        : rest.substr(nl + 1);
    ++line;
    if (!token.empty() && token.back() == '\r') token.remove_suffix(1);
    if (token.empty()) {
      throw FormatError(path.string() + ":" + std::to_string(line) +
                        ": empty line");
    }
    auto [it, inserted] = first_seen.emplace(token, line);
    if (!inserted) {
      throw FormatError(path.string() + ":" + std::to_string(line) +
                        ": duplicate token (first seen on line " +
                        std::to_string(it->second) + ")");
    }
    tokens.emplace_back(token);
  }
  if (tokens.empty()) throw FormatError(path.string() + ": empty vocabulary");
  return Vocabulary(std::move(tokens));
}

void save_vocab(const Vocabulary& vocab, const fs::path& path) {
  std::string out;
  for (const auto& t : vocab.tokens()) {
    out += t;
    out.push_back('\n');
  }
  write_file(path, out);
}

std::string encode_matrix(const EmbeddingMatrix& matrix) {
  if (matrix.rows() > std::numeric_limits<std::uint32_t>::max() ||
      matrix.cols() > std::numeric_limits<std::uint32_t>::max()) {
    throw ConfigError("matrix too large for CLM1");
  }
  std::string out;
  out.reserve(kHeaderBytes + 4 * static_cast<std::size_t>(matrix.size()));
  out.append(kMagic);
  put_u32(out, static_cast<std::uint32_t>(matrix.rows()));
  put_u32(out, static_cast<std::uint32_t>(matrix.cols()));
  for (Eigen::Index i = 0; i < matrix.rows(); ++i) {
    for (Eigen::Index j = 0; j < matrix.cols(); ++j) {
      const float f = static_cast<float>(matrix(i, j));
      if (!std::isfinite(f)) {
        throw ConfigError("non-finite matrix entry at (" + std::to_string(i) +
                          ", " + std::to_string(j) + ")");
      }
      put_u32(out, std::bit_cast<std::uint32_t>(f));
    }
  }
  return out;
}

EmbeddingMatrix decode_matrix(std::string_view bytes) {
  if (bytes.size() < kHeaderBytes) throw FormatError("CLM1: truncated header");
  if (bytes.substr(0, 4) != kMagic) throw FormatError("CLM1: bad magic");
  const std::uint64_t rows = get_u32(bytes, 4);
  const std::uint64_t cols = get_u32(bytes, 8);
  const std::uint64_t expected = kHeaderBytes + 4 * rows * cols;
  if (bytes.size() < expected) throw FormatError("CLM1: truncated payload");
  if (bytes.size() > expected) throw FormatError("CLM1: trailing bytes");

  EmbeddingMatrix m(static_cast<Eigen::Index>(rows),
                    static_cast<Eigen::Index>(cols));
  std::size_t offset = kHeaderBytes;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j, offset += 4) {
      const float f = std::bit_cast<float>(get_u32(bytes, offset));
      if (!std::isfinite(f)) {
        throw FormatError("CLM1: non-finite entry at (" + std::to_string(i) +
                          ", " + std::to_string(j) + ")");
      }
      m(i, j) = f;
    }
  }
  return m;
}

EmbeddingMatrix load_matrix(const fs::path& path) {
  try {
    return decode_matrix(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void save_matrix(const EmbeddingMatrix& matrix, const fs::path& path) {
  write_file(path, encode_matrix(matrix));
}

EmbeddingMatrix round_to_float(const EmbeddingMatrix& matrix) {
  return matrix.cast<float>().cast<double>();
}

std::string manifest_to_json(const BundleManifest& manifest) {
  ordered_json j;
  j["format_version"] = manifest.format_version;
  j["vocab_size"] = manifest.vocab_size;
  j["embed_dim"] = manifest.embed_dim;
  j["nglide"] = manifest.nglide;
  j["digest_bytes"] = manifest.digest_bytes;
  ordered_json specials = ordered_json::array();
  for (const auto& s : manifest.special_tokens) {
    ordered_json entry;
    entry["token"] = s.token;
    entry["index"] = s.index;
    specials.push_back(std::move(entry));
  }
  j["special_tokens"] = std::move(specials);
  j["key_fingerprint"] = manifest.key_fingerprint;
  return j.dump(2) + "\n";
}

BundleManifest manifest_from_json(std::string_view json) {
  ordered_json j;
  try {
    j = ordered_json::parse(json);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("manifest: ") + e.what());
  }
  require_exact_keys(j,
                     {"format_version", "vocab_size", "embed_dim", "nglide",
                      "digest_bytes", "special_tokens", "key_fingerprint"},
                     "manifest");
  BundleManifest m;
  m.format_version = get_field<int>(j, "format_version");
  if (m.format_version != BundleManifest::kFormatVersion) {
    throw FormatError("manifest: unsupported format_version " +
                      std::to_string(m.format_version));
  }
  m.vocab_size = get_field<std::size_t>(j, "vocab_size");
  m.embed_dim = get_field<std::size_t>(j, "embed_dim");
  m.nglide = get_field<std::size_t>(j, "nglide");
  m.digest_bytes = get_field<std::size_t>(j, "digest_bytes");
  const auto& specials = j.at("special_tokens");
  if (!specials.is_array()) throw FormatError("manifest: special_tokens");
  for (const auto& s : specials) {
    require_exact_keys(s, {"token", "index"}, "manifest special token");
    m.special_tokens.push_back(
        {get_field<std::string>(s, "token"), get_field<TokenId>(s, "index")});
  }
  m.key_fingerprint = get_field<std::string>(j, "key_fingerprint");
  if (!is_fingerprint(m.key_fingerprint)) {
    throw FormatError("manifest: key_fingerprint must be 16 lowercase hex");
  }
  return m;
}

namespace {

void check_consistent(const Vocabulary& vocab, const EmbeddingMatrix& emb,
                      const BundleManifest& manifest) {
  if (static_cast<std::size_t>(emb.rows()) != vocab.size()) {
    throw ConsistencyError("vocabulary has " + std::to_string(vocab.size()) +
                           " tokens but matrix has " +
                           std::to_string(emb.rows()) + " rows");
  }
  if (manifest.vocab_size != vocab.size() ||
      manifest.embed_dim != static_cast<std::size_t>(emb.cols())) {
    throw ConsistencyError("manifest dimensions disagree with bundle data");
  }
  for (const auto& s : manifest.special_tokens) {
    if (s.index >= vocab.size() || vocab.token(s.index) != s.token) {
      throw ConsistencyError("manifest special token " + s.token +
                             " not at index " + std::to_string(s.index));
    }
  }
}

}  // namespace

void save_bundle(const Vocabulary& vocab, const EmbeddingMatrix& emb,
                 const BundleManifest& manifest, const fs::path& dir) {
  check_consistent(vocab, emb, manifest);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw FileError("cannot create " + dir.string() + ": " + ec.message());
  save_vocab(vocab, dir / kBundleVocabFile);
  save_matrix(emb, dir / kBundleMatrixFile);
  write_file(dir / kBundleManifestFile, manifest_to_json(manifest));
}

void save_bundle(const AdaptedBundle& bundle, const fs::path& dir) {
  save_bundle(bundle.vocab, bundle.emb, bundle.manifest, dir);
}

AdaptedBundle load_bundle(const fs::path& dir,
                          std::optional<std::string_view> expected_fingerprint) {
  AdaptedBundle bundle;
  bundle.manifest = manifest_from_json(read_file(dir / kBundleManifestFile));
  if (expected_fingerprint &&
      *expected_fingerprint != bundle.manifest.key_fingerprint) {
    throw ConsistencyError(
        "bundle was adapted with a different passkey (fingerprint mismatch)");
  }
  bundle.vocab = load_vocab(dir / kBundleVocabFile);
  bundle.emb = load_matrix(dir / kBundleMatrixFile);
  check_consistent(bundle.vocab, bundle.emb, bundle.manifest);
  return bundle;
}

std::string head_to_json(const ClassifierHead& head) {
  if (static_cast<std::size_t>(head.weights.rows()) != head.classes()) {
    throw ConsistencyError("head weights/bias class count mismatch");
  }
  ordered_json j;
  j["format_version"] = 1;
  j["classes"] = head.classes();
  j["dim"] = head.dim();
  j["l2"] = head.l2;
  j["final_loss"] = head.final_loss;
  ordered_json weights = ordered_json::array();
  for (Eigen::Index c = 0; c < head.weights.rows(); ++c) {
    ordered_json row = ordered_json::array();
    for (Eigen::Index e = 0; e < head.weights.cols(); ++e) {
      row.push_back(head.weights(c, e));
    }
    weights.push_back(std::move(row));
  }
  j["weights"] = std::move(weights);
  ordered_json bias = ordered_json::array();
  for (Eigen::Index c = 0; c < head.bias.size(); ++c) bias.push_back(head.bias(c));
  j["bias"] = std::move(bias);
  return j.dump(2) + "\n";
}

ClassifierHead head_from_json(std::string_view json) {
  ordered_json j;
  try {
    j = ordered_json::parse(json);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("head: ") + e.what());
  }
  require_exact_keys(j,
                     {"format_version", "classes", "dim", "l2", "final_loss",
                      "weights", "bias"},
                     "head");
  if (get_field<int>(j, "format_version") != 1) {
    throw FormatError("head: unsupported format_version");
  }
  const auto classes = get_field<std::size_t>(j, "classes");
  const auto dim = get_field<std::size_t>(j, "dim");
  ClassifierHead head;
  head.l2 = get_field<double>(j, "l2");
  head.final_loss = get_field<double>(j, "final_loss");
  const auto rows = get_field<std::vector<std::vector<double>>>(j, "weights");
  const auto bias = get_field<std::vector<double>>(j, "bias");
  if (rows.size() != classes || bias.size() != classes) {
    throw FormatError("head: class count mismatch");
  }
  head.weights.resize(static_cast<Eigen::Index>(classes),
                      static_cast<Eigen::Index>(dim));
  head.bias.resize(static_cast<Eigen::Index>(classes));
  for (std::size_t c = 0; c < classes; ++c) {
    if (rows[c].size() != dim) throw FormatError("head: weight row length");
    for (std::size_t e = 0; e < dim; ++e) {
      head.weights(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(e)) =
          rows[c][e];
    }
    head.bias(static_cast<Eigen::Index>(c)) = bias[c];
  }
  if (!head.weights.allFinite() || !head.bias.allFinite()) {
    throw FormatError("head: non-finite parameter");
  }
  return head;
}

void save_head(const ClassifierHead& head, const fs::path& path) {
  write_file(path, head_to_json(head));
}

ClassifierHead load_head(const fs::path& path) {
  return head_from_json(read_file(path));
}

}  // namespace cipherlm
