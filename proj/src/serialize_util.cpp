#include "liri/serialize_util.hpp"

#include "liri/error.hpp"

namespace liri::detail {

void write_tokenizer(io::BinaryWriter& w, const TokenizerConfig& config) {
  std::uint8_t flags = (config.lowercase ? 1 : 0) | (config.strip_punctuation ? 2 : 0) |
                       (config.stem ? 4 : 0);
  w.u8(flags);
  w.u32(static_cast<std::uint32_t>(config.stopwords.size()));
  for (const auto& s : config.stopwords) w.str(s);
}

TokenizerConfig read_tokenizer(io::BinaryReader& r) {
  TokenizerConfig config;
  auto flags = r.u8();
  if (flags > 7) throw Error(Errc::malformed, "tokenizer flags out of range");
  config.lowercase = (flags & 1) != 0;
  config.strip_punctuation = (flags & 2) != 0;
  config.stem = (flags & 4) != 0;
  auto n = r.u32();
  for (std::uint32_t i = 0; i < n; ++i) config.stopwords.insert(r.str());
  return config;
}

}  // namespace liri::detail
