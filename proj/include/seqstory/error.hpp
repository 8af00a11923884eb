#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace seqstory {

/// Base of every error the toolkit raises. `kind()` is the stable
/// machine-readable tag that the CLI prints in its structured error line.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual std::string_view kind() const noexcept { return "error"; }
};

class ValidationError : public Error {
 public:
  using Error::Error;
  std::string_view kind() const noexcept override { return "validation"; }
};

// Dimension or format mismatch against a dataset-level contract.
class SchemaError : public Error {
 public:
  using Error::Error;
  std::string_view kind() const noexcept override { return "schema"; }
};

class NotFoundError : public Error {
 public:
  using Error::Error;
  std::string_view kind() const noexcept override { return "not_found"; }
};

// An external process (decoder, encoder subprocess) failed.
class PipelineError : public Error {
 public:
  PipelineError(const std::string& what, std::string stderr_text = {})
      : Error(what), stderr_text_(std::move(stderr_text)) {}
  std::string_view kind() const noexcept override { return "pipeline"; }
  const std::string& stderr_text() const noexcept { return stderr_text_; }

 private:
  std::string stderr_text_;
};

// Transient failure of a remote backend; callers may retry.
class RetryableError : public Error {
 public:
  using Error::Error;
  std::string_view kind() const noexcept override { return "retryable"; }
};

class ConflictError : public Error {
 public:
  using Error::Error;
  std::string_view kind() const noexcept override { return "conflict"; }
};

class CapacityError : public Error {
 public:
  using Error::Error;
  std::string_view kind() const noexcept override { return "capacity"; }
};

class AuthError : public Error {
 public:
  using Error::Error;
  std::string_view kind() const noexcept override { return "auth"; }
};

// A batch finished with some items left unprocessed.
class BatchError : public Error {
 public:
  BatchError(const std::string& what, std::vector<std::string> failed_ids)
      : Error(what), failed_ids_(std::move(failed_ids)) {}
  std::string_view kind() const noexcept override { return "batch"; }
  const std::vector<std::string>& failed_ids() const noexcept {
    return failed_ids_;
  }

 private:
  std::vector<std::string> failed_ids_;
};

}  // namespace seqstory
