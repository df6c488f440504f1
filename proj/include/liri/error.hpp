#pragma once

/** \file error.hpp
 *  \brief Error type shared by every liri module.
 *
 * Failures are reported by throwing liri::Error. The code lets callers
 * (and tests) tell failure classes apart without matching on message text;
 * the message always names the offending id, path or line.
 */

#include <stdexcept>
#include <string>

namespace liri {

enum class Errc {
  invalid_argument,
  duplicate_id,
  empty_corpus,
  unknown_id,
  dimension_mismatch,
  empty_passage,
  empty_sequence,
  bad_magic,
  truncated,
  non_finite,
  stale_index,
  dangling_gold,
  malformed,
  insufficient_queries,
  io,
  role_failure,
  cancelled,
};

const char* errc_name(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  [[nodiscard]] Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace liri
