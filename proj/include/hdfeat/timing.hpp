#pragma once

#include <chrono>
#include <map>
#include <string>

namespace hdfeat {

// Accumulated wall-clock milliseconds per pipeline stage.
using StageTimes = std::map<std::string, double>;

class ScopedStage {
 public:
  ScopedStage(StageTimes* sink, std::string name)
      : sink_(sink), name_(std::move(name)), start_(std::chrono::steady_clock::now()) {}
  ~ScopedStage() {
    if (!sink_) return;
    const auto dt = std::chrono::steady_clock::now() - start_;
    (*sink_)[name_] += std::chrono::duration<double, std::milli>(dt).count();
  }
  ScopedStage(const ScopedStage&) = delete;
  ScopedStage& operator=(const ScopedStage&) = delete;

 private:
  StageTimes* sink_;
  std::string name_;
  std::chrono::steady_clock::time_point start_;
};

}  // namespace hdfeat
