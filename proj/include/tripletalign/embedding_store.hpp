#pragma once

#include <compare>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace tripletalign {

// Canonical order within a block: attention < mlp < residual.
enum class LayerKind { Attention = 0, Mlp = 1, Residual = 2 };

std::string_view to_string(LayerKind kind) noexcept;
LayerKind parse_layer_kind(std::string_view s);

struct LayerKey {
  int block = 0;
  LayerKind kind = LayerKind::Residual;

  auto operator<=>(const LayerKey&) const = default;
};

std::string to_string(const LayerKey& key);

enum class Mode { Pretrained, Instruct };

std::string_view to_string(Mode mode) noexcept;
Mode parse_mode(std::string_view s);

// Term-by-dimension matrix for one layer, row-major, rows in bundle term
// order. Values are held in double precision in memory; on disk they are
// binary32, so every value read from a file is exactly representable.
struct EmbeddingMatrix {
  LayerKey layer;
  std::size_t dim = 0;
  std::vector<double> values;

  std::size_t rows() const noexcept { return dim == 0 ? 0 : values.size() / dim; }
  std::span<const double> row(std::size_t i) const noexcept { return {values.data() + i * dim, dim}; }
  std::span<double> row(std::size_t i) noexcept { return {values.data() + i * dim, dim}; }

  bool operator==(const EmbeddingMatrix&) const = default;
};

struct EmbeddingBundle {
  std::string model_id;
  Mode mode = Mode::Pretrained;
  std::vector<std::string> terms;
  std::vector<EmbeddingMatrix> layers;  // canonical LayerKey order
  bool centered = false;
  // Free-form producer metadata (capture points, tokenizer, ...). Round-trips
  // through the manifest's "metadata" object.
  std::map<std::string, std::string> metadata;

  const EmbeddingMatrix& layer(const LayerKey& key) const;
  bool operator==(const EmbeddingBundle&) const = default;
};

// Throws ValidationError on: duplicate terms, empty term list, duplicate
// layer keys, unsorted layers, row-count mismatch, dim 0, non-finite values.
void validate_bundle(const EmbeddingBundle& bundle);

// Sorts layers into canonical order, then validates.
void canonicalize(EmbeddingBundle& bundle);

// Directory layout: manifest.json plus one raw little-endian binary32
// row-major file per layer, `terms * dim * 4` bytes, no header.
void write_bundle(const EmbeddingBundle& bundle, const std::filesystem::path& dir);
EmbeddingBundle read_bundle(const std::filesystem::path& dir);

// Checks a bundle directory without stopping at the first problem: manifest
// shape, file sizes, checksums, finiteness, term uniqueness. Returns one
// message per problem; empty means the bundle is valid.
std::vector<std::string> verify_bundle(const std::filesystem::path& dir);

// Rows minus the column-wise mean over all rows.
EmbeddingMatrix center_layer(const EmbeddingMatrix& m);

// Returns a copy with every layer centered and the centered flag set.
EmbeddingBundle center_bundle(const EmbeddingBundle& bundle);

// dot(u, v) / (|u| |v|). Throws DegenerateVectorError on a zero-norm input
// and ValidationError on a dimension mismatch.
double cosine(std::span<const double> u, std::span<const double> v);

// Exact (case-sensitive) term lookup.
std::size_t lookup(const EmbeddingBundle& bundle, std::string_view term);

class TermIndex {
 public:
  explicit TermIndex(const std::vector<std::string>& terms);
  std::size_t lookup(std::string_view term) const;
  std::optional<std::size_t> find(std::string_view term) const;

 private:
  std::unordered_map<std::string, std::size_t> index_;
};

// Lower-case hex SHA-256 of a byte buffer.
std::string sha256_hex(std::span<const unsigned char> bytes);

// Little-endian binary32 encoding of a layer's values.
std::vector<unsigned char> encode_matrix(const EmbeddingMatrix& m);

}  // namespace tripletalign
