#include "tripletalign/embedding_store.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "tripletalign/error.hpp"

namespace tripletalign {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::numeric_limits<float>::is_iec559, "binary32 storage requires IEEE-754 floats");

namespace {

constexpr int kFormatVersion = 1;

std::string layer_file_name(const LayerKey& key) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "layer_%04d_%s.f32", key.block, std::string(to_string(key.kind)).c_str());
  return buf;
}

std::vector<unsigned char> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("embedding-store", "cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const fs::path& path, std::span<const unsigned char> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("embedding-store", "cannot write '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("embedding-store", "short write to '" + path.string() + "'");
}

std::vector<double> decode_matrix(std::span<const unsigned char> bytes) {
  std::vector<double> out(bytes.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(bytes[i * 4 + b]) << (8 * b);
    out[i] = static_cast<double>(std::bit_cast<float>(bits));
  }
  return out;
}

// Collects problems while loading. In strict mode the first problem throws.
struct Problems {
  bool strict;
  std::vector<std::string> messages;

  template <class E = ValidationError>
  void add(const std::string& msg) {
    if (strict) throw E("embedding-store", msg);
    messages.push_back(msg);
  }
};

std::optional<EmbeddingBundle> load(const fs::path& dir, Problems& problems) {
  const auto manifest_path = dir / "manifest.json";
  if (!fs::exists(manifest_path)) {
    problems.add<ParseError>("missing manifest '" + manifest_path.string() + "'");
    return std::nullopt;
  }
  json manifest;
  try {
    std::ifstream in(manifest_path);
    manifest = json::parse(in);
  } catch (const json::exception& e) {
    problems.add<ParseError>("malformed manifest: " + std::string(e.what()));
    return std::nullopt;
  }

  EmbeddingBundle bundle;
  try {
    if (manifest.at("format_version").get<int>() != kFormatVersion) {
      problems.add<ParseError>("unsupported format_version " + manifest.at("format_version").dump());
      return std::nullopt;
    }
    bundle.model_id = manifest.at("model_id").get<std::string>();
    bundle.mode = parse_mode(manifest.at("mode").get<std::string>());
    bundle.centered = manifest.at("centered").get<bool>();
    bundle.terms = manifest.at("terms").get<std::vector<std::string>>();
    if (manifest.contains("metadata")) {
      bundle.metadata = manifest.at("metadata").get<std::map<std::string, std::string>>();
    }
  } catch (const Error& e) {
    problems.add<ParseError>(std::string("manifest: ") + e.what());
    return std::nullopt;
  } catch (const json::exception& e) {
    problems.add<ParseError>("manifest: " + std::string(e.what()));
    return std::nullopt;
  }

  std::unordered_set<std::string_view> seen_terms;
  for (const auto& t : bundle.terms) {
    if (!seen_terms.insert(t).second) problems.add("duplicate term '" + t + "'");
  }

  const json* layers = nullptr;
  if (auto it = manifest.find("layers"); it != manifest.end() && it->is_array()) {
    layers = &*it;
  } else {
    problems.add<ParseError>("manifest: 'layers' must be an array");
    return std::nullopt;
  }

  std::set<LayerKey> keys;
  bool ok = true;
  for (const auto& entry : *layers) {
    LayerKey key;
    std::size_t dim = 0;
    std::string file;
    std::string sha;
    try {
      key.block = entry.at("block").get<int>();
      key.kind = parse_layer_kind(entry.at("kind").get<std::string>());
      dim = entry.at("dim").get<std::size_t>();
      file = entry.at("file").get<std::string>();
      sha = entry.at("sha256").get<std::string>();
    } catch (const std::exception& e) {
      problems.add<ParseError>("manifest layer entry: " + std::string(e.what()));
      ok = false;
      continue;
    }
    const auto name = to_string(key);
    if (key.block < 0) problems.add("layer " + name + ": negative block index");
    if (dim == 0) problems.add("layer " + name + ": dim must be >= 1");
    if (!keys.insert(key).second) problems.add("duplicate layer " + name);
    if (fs::path(file).is_absolute() || file.find("..") != std::string::npos) {
      problems.add("layer " + name + ": file '" + file + "' escapes the bundle directory");
      ok = false;
      continue;
    }

    const auto path = dir / file;
    if (!fs::exists(path)) {
      problems.add<ParseError>("layer " + name + ": missing matrix file '" + file + "'");
      ok = false;
      continue;
    }
    auto bytes = read_file(path);
    const auto expected = bundle.terms.size() * dim * 4;
    if (bytes.size() != expected) {
      problems.add<ParseError>("layer " + name + ": size mismatch in '" + file + "': expected " +
                               std::to_string(expected) + " bytes, found " + std::to_string(bytes.size()));
      ok = false;
      continue;
    }
    if (sha256_hex(bytes) != sha) {
      problems.add("layer " + name + ": checksum mismatch in '" + file + "'");
      ok = false;
      continue;
    }
    EmbeddingMatrix m{key, dim, decode_matrix(bytes)};
    for (std::size_t i = 0; i < m.values.size(); ++i) {
      if (!std::isfinite(m.values[i])) {
        problems.add("layer " + name + ": non-finite value at row " + std::to_string(i / dim) + " ('" +
                     bundle.terms[i / dim] + "')");
        ok = false;
        break;
      }
    }
    bundle.layers.push_back(std::move(m));
  }

  if (manifest.contains("dim_per_layer")) {
    const auto& dims = manifest.at("dim_per_layer");
    for (const auto& m : bundle.layers) {
      auto it = dims.find(to_string(m.layer));
      if (it != dims.end() && it->is_number_unsigned() && it->get<std::size_t>() != m.dim) {
        problems.add("layer " + to_string(m.layer) + ": dim_per_layer disagrees with layer entry");
      }
    }
  }

  std::sort(bundle.layers.begin(), bundle.layers.end(),
            [](const EmbeddingMatrix& a, const EmbeddingMatrix& b) { return a.layer < b.layer; });
  if (!ok) return std::nullopt;
  return bundle;
}

}  // namespace

std::string_view to_string(LayerKind kind) noexcept {
  switch (kind) {
    case LayerKind::Attention: return "attention";
    case LayerKind::Mlp: return "mlp";
    case LayerKind::Residual: return "residual";
  }
  return "residual";
}

LayerKind parse_layer_kind(std::string_view s) {
  if (s == "attention") return LayerKind::Attention;
  if (s == "mlp") return LayerKind::Mlp;
  if (s == "residual") return LayerKind::Residual;
  throw ParseError("embedding-store", "unknown layer kind '" + std::string(s) + "'");
}

std::string to_string(const LayerKey& key) {
  return std::to_string(key.block) + "." + std::string(to_string(key.kind));
}

std::string_view to_string(Mode mode) noexcept {
  return mode == Mode::Pretrained ? "pretrained" : "instruct";
}

Mode parse_mode(std::string_view s) {
  if (s == "pretrained") return Mode::Pretrained;
  if (s == "instruct") return Mode::Instruct;
  throw ParseError("embedding-store", "unknown mode '" + std::string(s) + "'");
}

const EmbeddingMatrix& EmbeddingBundle::layer(const LayerKey& key) const {
  auto it = std::lower_bound(layers.begin(), layers.end(), key,
                             [](const EmbeddingMatrix& m, const LayerKey& k) { return m.layer < k; });
  if (it == layers.end() || it->layer != key) {
    throw ValidationError("embedding-store", "bundle '" + model_id + "' has no layer " + to_string(key));
  }
  return *it;
}

void validate_bundle(const EmbeddingBundle& bundle) {
  if (bundle.terms.empty()) throw ValidationError("embedding-store", "bundle has no terms");
  std::unordered_set<std::string_view> seen;
  for (const auto& t : bundle.terms) {
    if (!seen.insert(t).second) throw ValidationError("embedding-store", "duplicate term '" + t + "'");
  }
  for (std::size_t l = 0; l < bundle.layers.size(); ++l) {
    const auto& m = bundle.layers[l];
    const auto name = to_string(m.layer);
    if (m.layer.block < 0) throw ValidationError("embedding-store", "layer " + name + ": negative block index");
    if (m.dim == 0) throw ValidationError("embedding-store", "layer " + name + ": dim must be >= 1");
    if (m.values.size() != bundle.terms.size() * m.dim) {
      throw ValidationError("embedding-store", "layer " + name + ": row count does not match term count");
    }
    if (l > 0 && !(bundle.layers[l - 1].layer < m.layer)) {
      throw ValidationError("embedding-store", "layers not in canonical order or duplicated at " + name);
    }
    for (double v : m.values) {
      if (!std::isfinite(v)) throw ValidationError("embedding-store", "layer " + name + ": non-finite value");
    }
  }
}

void canonicalize(EmbeddingBundle& bundle) {
  std::stable_sort(bundle.layers.begin(), bundle.layers.end(),
                   [](const EmbeddingMatrix& a, const EmbeddingMatrix& b) { return a.layer < b.layer; });
  validate_bundle(bundle);
}

std::vector<unsigned char> encode_matrix(const EmbeddingMatrix& m) {
  std::vector<unsigned char> out(m.values.size() * 4);
  for (std::size_t i = 0; i < m.values.size(); ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(m.values[i]));
    for (int b = 0; b < 4; ++b) out[i * 4 + b] = static_cast<unsigned char>((bits >> (8 * b)) & 0xFFu);
  }
  return out;
}

void write_bundle(const EmbeddingBundle& bundle, const fs::path& dir) {
  validate_bundle(bundle);
  fs::create_directories(dir);

  json layers = json::array();
  json dims = json::object();
  for (const auto& m : bundle.layers) {
    const auto file = layer_file_name(m.layer);
    const auto bytes = encode_matrix(m);
    write_file(dir / file, bytes);
    layers.push_back({{"block", m.layer.block},
                      {"kind", to_string(m.layer.kind)},
                      {"dim", m.dim},
                      {"file", file},
                      {"sha256", sha256_hex(bytes)}});
    dims[to_string(m.layer)] = m.dim;
  }

  json manifest = {{"format_version", kFormatVersion},
                   {"model_id", bundle.model_id},
                   {"mode", to_string(bundle.mode)},
                   {"centered", bundle.centered},
                   {"dim_per_layer", dims},
                   {"terms", bundle.terms},
                   {"layers", layers}};
  if (!bundle.metadata.empty()) manifest["metadata"] = bundle.metadata;

  const auto text = manifest.dump(2) + "\n";
  write_file(dir / "manifest.json", {reinterpret_cast<const unsigned char*>(text.data()), text.size()});
}

EmbeddingBundle read_bundle(const fs::path& dir) {
  Problems problems{true, {}};
  auto bundle = load(dir, problems);
  validate_bundle(*bundle);
  return std::move(*bundle);
}

std::vector<std::string> verify_bundle(const fs::path& dir) {
  Problems problems{false, {}};
  auto bundle = load(dir, problems);
  if (bundle && problems.messages.empty()) {
    try {
      validate_bundle(*bundle);
    } catch (const Error& e) {
      problems.messages.emplace_back(e.what());
    }
  }
  return problems.messages;
}

EmbeddingMatrix center_layer(const EmbeddingMatrix& m) {
  const auto n = m.rows();
  if (n == 0) throw ValidationError("embedding-store", "cannot center an empty layer");
  std::vector<double> mean(m.dim, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = m.row(i);
    for (std::size_t d = 0; d < m.dim; ++d) mean[d] += r[d];
  }
  for (auto& v : mean) v /= static_cast<double>(n);

  EmbeddingMatrix out{m.layer, m.dim, m.values};
  for (std::size_t i = 0; i < n; ++i) {
    auto r = out.row(i);
    for (std::size_t d = 0; d < m.dim; ++d) r[d] -= mean[d];
  }
  return out;
}

EmbeddingBundle center_bundle(const EmbeddingBundle& bundle) {
  EmbeddingBundle out = bundle;
  for (auto& m : out.layers) m = center_layer(m);
  out.centered = true;
  return out;
}

double cosine(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) {
    throw ValidationError("embedding-store", "cosine of vectors with different dimensions (" +
                                                 std::to_string(u.size()) + " vs " + std::to_string(v.size()) + ")");
  }
  double dot = 0.0;
  double uu = 0.0;
  double vv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    uu += u[i] * u[i];
    vv += v[i] * v[i];
  }
  if (uu == 0.0 || vv == 0.0) throw DegenerateVectorError("cosine of a zero-norm vector");
  const double c = dot / (std::sqrt(uu) * std::sqrt(vv));
  return std::clamp(c, -1.0, 1.0);
}

std::size_t lookup(const EmbeddingBundle& bundle, std::string_view term) {
  auto it = std::find(bundle.terms.begin(), bundle.terms.end(), term);
  if (it == bundle.terms.end()) {
    throw ValidationError("embedding-store", "unknown term '" + std::string(term) + "' in bundle '" +
                                                 bundle.model_id + "'");
  }
  return static_cast<std::size_t>(it - bundle.terms.begin());
}

TermIndex::TermIndex(const std::vector<std::string>& terms) {
  index_.reserve(terms.size());
  for (std::size_t i = 0; i < terms.size(); ++i) index_.emplace(terms[i], i);
}

std::optional<std::size_t> TermIndex::find(std::string_view term) const {
  auto it = index_.find(std::string(term));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t TermIndex::lookup(std::string_view term) const {
  if (auto i = find(term)) return *i;
  throw ValidationError("embedding-store", "unknown term '" + std::string(term) + "'");
}

std::string sha256_hex(std::span<const unsigned char> bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("embedding-store", "sha256 computation failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xF]);
  }
  return out;
}

}  // namespace tripletalign
