#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace efr {

// One named problem found while checking an input. `path` is a JSON-pointer
// style location ("/demand/0/rate") when the input came from a file, or a
// short symbolic location otherwise.
struct Diagnostic {
  std::string path;
  std::string message;
};

std::string format_diagnostics(const std::vector<Diagnostic>& diags);

class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(std::vector<Diagnostic> diags)
      : std::runtime_error(format_diagnostics(diags)), diags_(std::move(diags)) {}
  const std::vector<Diagnostic>& diagnostics() const { return diags_; }

 private:
  std::vector<Diagnostic> diags_;
};

// A node whose effective service rate is zero: the chain would be reducible.
class DeadNodeError : public std::runtime_error {
 public:
  DeadNodeError(int node, const std::string& what)
      : std::runtime_error(what), node_(node) {}
  int node() const { return node_; }

 private:
  int node_;
};

// Routing chain is reducible; `cut` is a set of states with no transitions
// leaving it.
class ReducibleError : public std::runtime_error {
 public:
  ReducibleError(std::vector<int> cut, const std::string& what)
      : std::runtime_error(what), cut_(std::move(cut)) {}
  const std::vector<int>& cut() const { return cut_; }

 private:
  std::vector<int> cut_;
};

// Requested state space exceeds the configured cap.
class SizeCapError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Normalization constant over/underflowed double range despite pre-scaling;
// the message carries the offending exponent.
class NormalizationRangeError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Linear program has no feasible point; carries the violated constraint rows.
class InfeasibleError : public std::runtime_error {
 public:
  InfeasibleError(std::vector<int> rows, const std::string& what)
      : std::runtime_error(what), rows_(std::move(rows)) {}
  const std::vector<int>& violated_rows() const { return rows_; }

 private:
  std::vector<int> rows_;
};

// Output construction hit a numerically degenerate division (e.g. redirection
// probabilities with a zero incoming rate).
class DegenerateError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace efr
