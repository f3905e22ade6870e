#pragma once

#include <stdexcept>
#include <string>

namespace qclean {

// Failure categories. Each maps to a distinct process exit code in the CLI.
enum class ErrorKind {
  invalid_argument,
  io,
  empty_corpus,
  model_mismatch,
  missing_score,
  numeric,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline int exit_code(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::io: return 2;
    case ErrorKind::empty_corpus: return 3;
    case ErrorKind::model_mismatch: return 4;
    case ErrorKind::missing_score: return 5;
    case ErrorKind::numeric: return 6;
    case ErrorKind::invalid_argument: break;
  }
  return 1;
}

}  // namespace qclean
