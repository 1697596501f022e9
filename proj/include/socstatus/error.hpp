#pragma once

#include <stdexcept>
#include <string>

namespace socstatus {

enum class ErrorKind {
  Format,
  Io,
  EmptyGraph,
  EmptyDataset,
  Config,
  BudgetExceeded,
  Numerical,
  PartialLabels,
  DegenerateTraining,
  Shape,
  ModelMismatch,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Format: return "FormatError";
    case ErrorKind::Io: return "IoError";
    case ErrorKind::EmptyGraph: return "EmptyGraph";
    case ErrorKind::EmptyDataset: return "EmptyDataset";
    case ErrorKind::Config: return "ConfigError";
    case ErrorKind::BudgetExceeded: return "BudgetExceeded";
    case ErrorKind::Numerical: return "NumericalError";
    case ErrorKind::PartialLabels: return "PartialLabels";
    case ErrorKind::DegenerateTraining: return "DegenerateTraining";
    case ErrorKind::Shape: return "ShapeError";
    case ErrorKind::ModelMismatch: return "ModelMismatch";
  }
  return "Error";
}

// Every failure raised by the library carries a kind so the CLI can map it
// onto an exit code without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace socstatus
