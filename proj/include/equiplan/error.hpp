#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace equiplan {

/// Bad user input: out-of-range values, malformed records, bad requests.
/// The CLI maps every ValidationError (and subclass) to exit code 1.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration values (speeds, weights, thresholds).
class ConfigError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Raised by the loader. Carries one diagnostic line per offending row.
class LoadError : public ValidationError {
 public:
  explicit LoadError(std::string summary, std::vector<std::string> rows = {});

  const std::vector<std::string>& rows() const noexcept { return rows_; }

 private:
  std::vector<std::string> rows_;
};

class FitError : public std::runtime_error {
 public:
  enum class Kind { TooShort, Unstable, NoConvergence };

  FitError(Kind kind, const std::string& what);
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

class CandidateError : public ValidationError {
 public:
  CandidateError() : ValidationError("no feasible candidate sites (NoFeasibleSites)") {}
};

class SolverError : public ValidationError {
 public:
  enum class Kind { UseHeuristic, Infeasible };

  SolverError(Kind kind, const std::string& what);
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// The objective returned a non-finite value.
class EvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Wraps an error raised inside one pipeline stage with the stage label.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& what, bool validation);

  const std::string& stage() const noexcept { return stage_; }
  bool is_validation() const noexcept { return validation_; }

 private:
  std::string stage_;
  bool validation_;
};

}  // namespace equiplan
