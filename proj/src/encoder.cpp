#include "liri/encoder.hpp"

#include <cmath>
#include <random>
#include <string>

#include "liri/error.hpp"
#include "liri/io.hpp"

namespace liri {

const char* similarity_name(Similarity s) noexcept {
  return s == Similarity::dot ? "dot" : "neg_l2";
}

Similarity parse_similarity(std::string_view name) {
  if (name == "neg_l2") return Similarity::neg_l2;
  if (name == "dot") return Similarity::dot;
  throw Error(Errc::invalid_argument, "unknown similarity '" + std::string(name) + "'");
}

void EncoderConfig::validate() const {
  if (dim < 2) throw Error(Errc::invalid_argument, "encoder: dim must be >= 2");
  if (buckets < 1) throw Error(Errc::invalid_argument, "encoder: buckets must be >= 1");
  if (query_maxlen < 1 || doc_maxlen < 1) {
    throw Error(Errc::invalid_argument, "encoder: maxlens must be >= 1");
  }
  if (similarity != Similarity::neg_l2 && similarity != Similarity::dot) {
    throw Error(Errc::invalid_argument, "encoder: bad similarity tag");
  }
}

EncoderParams init_params(const EncoderConfig& config, std::uint64_t seed) {
  config.validate();
  EncoderParams p;
  p.config = config;
  p.table.resize(static_cast<std::size_t>(config.buckets) * config.dim);
  std::mt19937_64 rng(seed);
  for (auto& v : p.table) {
    // 24 high bits -> [0,1) exactly representable in float.
    float unit = static_cast<float>(rng() >> 40) * 0x1.0p-24f;
    v = -0.1f + 0.2f * unit;
  }
  return p;
}

std::uint32_t hash_token(const EncoderConfig& config, std::string_view token) {
  constexpr std::uint64_t kOffset = 0xcbf29ce484222325ULL;
  constexpr std::uint64_t kPrime = 0x100000001b3ULL;
  std::uint64_t h = kOffset;
  for (int i = 0; i < 8; ++i) {
    h ^= (config.hash_seed >> (8 * i)) & 0xFF;
    h *= kPrime;
  }
  for (unsigned char c : token) {
    h ^= c;
    h *= kPrime;
  }
  h ^= h >> 30;
  h *= 0xbf58476d1ce4e5b9ULL;
  h ^= h >> 27;
  h *= 0x94d049bb133111ebULL;
  h ^= h >> 31;
  return static_cast<std::uint32_t>(h % config.buckets);
}

std::vector<std::uint32_t> bucket_ids(const EncoderConfig& config, const TokenSeq& tokens,
                                      Role role) {
  auto n = std::min<std::size_t>(tokens.size(), config.maxlen(role));
  std::vector<std::uint32_t> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(hash_token(config, tokens[i]));
  return out;
}

TokenMatrix encode_buckets(const EncoderParams& params, std::span<const std::uint32_t> buckets) {
  TokenMatrix m;
  m.dim = params.config.dim;
  m.bucket_ids.assign(buckets.begin(), buckets.end());
  m.data.reserve(buckets.size() * m.dim);
  for (auto b : buckets) {
    auto r = params.row(b);
    m.data.insert(m.data.end(), r.begin(), r.end());
  }
  return m;
}

TokenMatrix encode(const EncoderParams& params, const TokenSeq& tokens, Role role) {
  auto ids = bucket_ids(params.config, tokens, role);
  return encode_buckets(params, ids);
}

std::vector<double> mean_pool(const TokenMatrix& m) {
  if (m.empty()) throw Error(Errc::empty_sequence, "cannot pool empty sequence");
  std::vector<double> out(m.dim, 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = m.row(i);
    for (std::uint32_t d = 0; d < m.dim; ++d) out[d] += r[d];
  }
  for (auto& v : out) v /= static_cast<double>(m.rows());
  return out;
}

std::vector<double> encode_single(const EncoderParams& params, const TokenSeq& tokens, Role role) {
  return mean_pool(encode(params, tokens, role));
}

std::string serialize_checkpoint(const EncoderParams& params) {
  const auto& c = params.config;
  io::BinaryWriter w;
  w.magic(kCheckpointMagic);
  w.u64(params.version);
  w.u32(c.dim);
  w.u32(c.buckets);
  w.u32(c.query_maxlen);
  w.u32(c.doc_maxlen);
  w.u8(static_cast<std::uint8_t>(c.similarity));
  w.u64(c.hash_seed);
  w.f32s(params.table);
  return w.take();
}

EncoderParams deserialize_checkpoint(std::string_view bytes) {
  io::BinaryReader r(bytes, "checkpoint");
  r.expect_magic(kCheckpointMagic);
  EncoderParams p;
  p.version = r.u64();
  auto& c = p.config;
  c.dim = r.u32();
  c.buckets = r.u32();
  c.query_maxlen = r.u32();
  c.doc_maxlen = r.u32();
  auto sim = r.u8();
  if (sim > 1) throw Error(Errc::malformed, "checkpoint: bad similarity tag");
  c.similarity = static_cast<Similarity>(sim);
  c.hash_seed = r.u64();
  c.validate();
  auto n = static_cast<std::size_t>(c.buckets) * c.dim;
  if (r.remaining() < 4 * n) {
    throw Error(Errc::truncated, "checkpoint: truncated file (table needs " +
                                     std::to_string(4 * n) + " bytes)");
  }
  p.table.resize(n);
  r.f32s(p.table);
  r.expect_end();
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(p.table[i])) {
      throw Error(Errc::non_finite, "checkpoint: non-finite table entry at " + std::to_string(i));
    }
  }
  return p;
}

void save_checkpoint(const EncoderParams& params, const std::filesystem::path& path) {
  io::write_file_atomic(path, serialize_checkpoint(params));
}

EncoderParams load_checkpoint(const std::filesystem::path& path) {
  return deserialize_checkpoint(io::read_file(path));
}

}  // namespace liri
