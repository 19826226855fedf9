#include "equiplan/error.hpp"

namespace equiplan {

namespace {
std::string join_rows(const std::string& summary, const std::vector<std::string>& rows) {
  std::string out = summary;
  for (const auto& r : rows) {
    out += "\n  ";
    out += r;
  }
  return out;
}
}  // namespace

LoadError::LoadError(std::string summary, std::vector<std::string> rows)
    : ValidationError(join_rows(summary, rows)), rows_(std::move(rows)) {}

FitError::FitError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

SolverError::SolverError(Kind kind, const std::string& what) : ValidationError(what), kind_(kind) {}

StageError::StageError(std::string stage, const std::string& what, bool validation)
    : std::runtime_error(stage + ": " + what), stage_(std::move(stage)), validation_(validation) {}

}  // namespace equiplan
