#pragma once

#include <cstddef>
#include <map>
#include <string>

#include "liri/types.hpp"

namespace liri {

/// Fraction of qrels queries whose gold passage is within the top k.
/// Throws Errc::unknown_id for a qrels query with no ranking.
double match_at_k(const std::map<std::string, RankedResult>& rankings, const Qrels& qrels,
                  std::size_t k);

}  // namespace liri
