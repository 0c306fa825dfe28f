#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hdfeat {

enum class ErrorKind {
  kShape,     // operand shapes disagree
  kGeometry,  // grid/block/tiling arithmetic does not work out
  kBudget,    // token cap exceeded
  kParse,     // malformed input bytes (PNM, HDFT, JSON)
  kConfig,    // well-formed config that violates an invariant
  kIo,        // file system failures
  kCache,     // backward pass called with a missing or stale forward cache
};

inline std::string_view kind_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::kShape: return "shape";
    case ErrorKind::kGeometry: return "geometry";
    case ErrorKind::kBudget: return "budget";
    case ErrorKind::kParse: return "parse";
    case ErrorKind::kConfig: return "config";
    case ErrorKind::kIo: return "io";
    case ErrorKind::kCache: return "cache";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(kind_name(kind)) + " error: " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace hdfeat
