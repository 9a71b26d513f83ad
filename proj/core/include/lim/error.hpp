#pragma once

#include <stdexcept>
#include <string>

namespace lim {

/// Broad failure category. The CLI maps these onto process exit codes.
enum class ErrorKind {
  kInvalidArgument,  // caller violated a precondition
  kEmptyVoxel,       // too few observations to encode a region
  kData,             // malformed or inconsistent input data
  kParse,            // file-format violation
  kIo,               // filesystem failure
  kNumeric,          // factorization / eigensolver failure
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline void require(bool cond, const std::string& what) {
  if (!cond) throw Error(ErrorKind::kInvalidArgument, what);
}

}  // namespace lim
