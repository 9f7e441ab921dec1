#pragma once

#include <stdexcept>
#include <string>

namespace coherence_forge {

enum class Errc {
  degenerate_point,
  retraction_failure,
  invalid_weight,
  empty_input,
  too_few_columns,
  line_search_stall,
  zero_column,
  invalid_field,
  degree_too_large,
  invalid_sparsity,
  shape,
  degenerate_snr,
  parse,
  validation,
  io,
};

inline const char *to_string(Errc code) {
  switch (code) {
  case Errc::degenerate_point: return "degenerate-point";
  case Errc::retraction_failure: return "retraction-failure";
  case Errc::invalid_weight: return "invalid-weight";
  case Errc::empty_input: return "empty-input";
  case Errc::too_few_columns: return "too-few-columns";
  case Errc::line_search_stall: return "line-search-stall";
  case Errc::zero_column: return "zero-column";
  case Errc::invalid_field: return "invalid-field";
  case Errc::degree_too_large: return "degree-too-large";
  case Errc::invalid_sparsity: return "invalid-sparsity";
  case Errc::shape: return "shape";
  case Errc::degenerate_snr: return "degenerate-snr";
  case Errc::parse: return "parse";
  case Errc::validation: return "validation";
  case Errc::io: return "io";
  }
  return "unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
public:
  Error(Errc code, const std::string &what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  Errc code() const noexcept { return code_; }

private:
  Errc code_;
};

} // namespace coherence_forge
