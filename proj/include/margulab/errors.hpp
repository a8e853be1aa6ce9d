#pragma once
#include <stdexcept>
#include <string>

namespace ml {

enum class ErrorKind {
  InvalidDescriptor,
  NoConvergence,
  NotApplicable,
  OutOfChart,
  NoIntersection,
  DegenerateCell,
  RefinementBudgetExceeded,
  CompactLeafConflict,
  NotIrreducible,
  CoverGap,
  ZeroMassCell,
  UnboundedWc,
  ConfigError,
};

const char* kind_name(ErrorKind k);

struct LabError : std::runtime_error {
  ErrorKind kind;
  std::string stage;
  LabError(ErrorKind k, const std::string& msg, std::string stage_ = {})
      : std::runtime_error(std::string(kind_name(k)) + ": " + msg), kind(k), stage(std::move(stage_)) {}
};

}  // namespace ml
