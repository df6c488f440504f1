#pragma once

// Shared encoders for fields that appear in several file formats.

#include "liri/io.hpp"
#include "liri/text.hpp"

namespace liri::detail {

void write_tokenizer(io::BinaryWriter& w, const TokenizerConfig& config);
TokenizerConfig read_tokenizer(io::BinaryReader& r);

}  // namespace liri::detail
