#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace gnisi {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& what) : std::runtime_error(what), code_(std::move(code)) {}

  /// Short machine-readable identifier, e.g. "invalid_input".
  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

class InvalidInput : public Error {
 public:
  explicit InvalidInput(const std::string& what) : Error("invalid_input", what) {}
};

/// Raised by exact enumeration when the model is too large to enumerate.
class SizeLimitError : public Error {
 public:
  explicit SizeLimitError(const std::string& what) : Error("size_limit", what) {}
};

class SingularMatrixError : public Error {
 public:
  SingularMatrixError(const std::string& what, std::vector<std::size_t> sites)
      : Error("singular_matrix", what), sites_(std::move(sites)) {}

  /// Near-constant sites responsible for the rank deficiency (may be empty).
  const std::vector<std::size_t>& sites() const noexcept { return sites_; }

 private:
  std::vector<std::size_t> sites_;
};

class ParseError : public Error {
 public:
  explicit ParseError(const std::string& what) : Error("parse_error", what) {}
};

class VersionError : public Error {
 public:
  explicit VersionError(const std::string& what) : Error("version_mismatch", what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error("io_error", what) {}
};

}  // namespace gnisi
