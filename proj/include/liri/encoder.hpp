#pragma once

/** \file encoder.hpp
 *  \brief Hashed-token embedding encoder with versioned checkpoints.
 *
 * Each token hashes to a row of a buckets x dim float table; encoding a
 * token sequence is a pure lookup (no projection, no padding). Queries and
 * passages share the table and differ only in their truncation length.
 *
 * EncoderParams values are treated as immutable snapshots: training code
 * produces new versions instead of mutating published ones.
 */

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "liri/text.hpp"

namespace liri {

enum class Similarity : std::uint8_t { neg_l2 = 0, dot = 1 };

const char* similarity_name(Similarity s) noexcept;
/// Accepts "neg_l2" or "dot"; throws Errc::invalid_argument otherwise.
Similarity parse_similarity(std::string_view name);

enum class Role { query, doc };

struct EncoderConfig {
  std::uint32_t dim = 32;
  std::uint32_t buckets = 1u << 15;
  std::uint32_t query_maxlen = 32;
  std::uint32_t doc_maxlen = 128;
  Similarity similarity = Similarity::neg_l2;
  std::uint64_t hash_seed = 0;

  void validate() const;
  [[nodiscard]] std::uint32_t maxlen(Role role) const noexcept {
    return role == Role::query ? query_maxlen : doc_maxlen;
  }

  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

struct EncoderParams {
  std::uint64_t version = 0;
  EncoderConfig config;
  std::vector<float> table;  // row-major, buckets x dim

  [[nodiscard]] std::span<const float> row(std::uint32_t bucket) const noexcept {
    return {table.data() + static_cast<std::size_t>(bucket) * config.dim, config.dim};
  }
  [[nodiscard]] std::span<float> row(std::uint32_t bucket) noexcept {
    return {table.data() + static_cast<std::size_t>(bucket) * config.dim, config.dim};
  }

  friend bool operator==(const EncoderParams&, const EncoderParams&) = default;
};

/// One row per kept token, copied from the embedding table.
struct TokenMatrix {
  std::uint32_t dim = 0;
  std::vector<float> data;
  std::vector<std::uint32_t> bucket_ids;

  [[nodiscard]] std::size_t rows() const noexcept { return bucket_ids.size(); }
  [[nodiscard]] bool empty() const noexcept { return bucket_ids.empty(); }
  [[nodiscard]] std::span<const float> row(std::size_t i) const noexcept {
    return {data.data() + i * dim, dim};
  }

  friend bool operator==(const TokenMatrix&, const TokenMatrix&) = default;
};

/// Entries i.i.d. uniform in [-0.1, 0.1] from a seeded mt19937_64; version 0.
EncoderParams init_params(const EncoderConfig& config, std::uint64_t seed);

/// Seeded 64-bit FNV-1a with a splitmix64 finalizer, reduced mod buckets.
std::uint32_t hash_token(const EncoderConfig& config, std::string_view token);

/// Bucket ids of the tokens kept for `role` (truncated to its maxlen).
std::vector<std::uint32_t> bucket_ids(const EncoderConfig& config, const TokenSeq& tokens,
                                      Role role);

TokenMatrix encode(const EncoderParams& params, const TokenSeq& tokens, Role role);
TokenMatrix encode_buckets(const EncoderParams& params, std::span<const std::uint32_t> buckets);

/// Mean of the encoded rows. Throws Errc::empty_sequence for an empty input.
std::vector<double> encode_single(const EncoderParams& params, const TokenSeq& tokens, Role role);
std::vector<double> mean_pool(const TokenMatrix& m);

inline constexpr std::string_view kCheckpointMagic = "LIRI-CKPT-v1";

std::string serialize_checkpoint(const EncoderParams& params);
/// Throws Errc::bad_magic, Errc::truncated or Errc::non_finite.
EncoderParams deserialize_checkpoint(std::string_view bytes);
void save_checkpoint(const EncoderParams& params, const std::filesystem::path& path);
EncoderParams load_checkpoint(const std::filesystem::path& path);

}  // namespace liri
