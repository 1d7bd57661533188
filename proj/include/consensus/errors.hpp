#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace consensus {

// Failure taxonomy shared by ingestion, aggregation and evaluation. Every
// throwing path in the library raises consensus::error with one of these
// codes; the CLI maps them onto process exit codes.
enum class errc {
  missing_author,       // observation appears in votes but not in authorship
  missing_author_vote,  // author cast no vote and the authorship row carries no species
  unknown_species,      // species token outside a closed dictionary
  index_error,          // dense id out of range
  parse_error,          // malformed input row
  range_error,          // numeric field outside its domain
  reference_error,      // token refers to an unknown observation/user/species
  write_error,          // output could not be written
  empty_expert_set,
  empty_subset,
  invalid_ai_weight,    // fixed AI weight outside the admissible open interval
  invalid_config,
  internal,
};

inline const char* errc_name(errc c) noexcept {
  switch (c) {
    case errc::missing_author: return "MissingAuthor";
    case errc::missing_author_vote: return "MissingAuthorVote";
    case errc::unknown_species: return "UnknownSpecies";
    case errc::index_error: return "IndexError";
    case errc::parse_error: return "ParseError";
    case errc::range_error: return "RangeError";
    case errc::reference_error: return "ReferenceError";
    case errc::write_error: return "WriteError";
    case errc::empty_expert_set: return "EmptyExpertSet";
    case errc::empty_subset: return "EmptySubset";
    case errc::invalid_ai_weight: return "InvalidAiWeight";
    case errc::invalid_config: return "InvalidConfig";
    case errc::internal: return "InternalError";
  }
  return "UnknownError";
}

class error : public std::runtime_error {
 public:
  error(errc code, const std::string& msg, std::size_t row = 0)
      : std::runtime_error(std::string(errc_name(code)) + ": " + msg +
                           (row ? " (row " + std::to_string(row) + ")" : std::string())),
        code_(code),
        row_(row) {}

  errc code() const noexcept { return code_; }
  // 1-based row of the offending input line (header = row 1); 0 when the
  // error is not tied to a row.
  std::size_t row() const noexcept { return row_; }

 private:
  errc code_;
  std::size_t row_;
};

}  // namespace consensus
