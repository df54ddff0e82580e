#pragma once

#include <stdexcept>
#include <string>

namespace lyapexp {

/// Broad failure class; the CLI maps it to an exit code.
enum class ErrorKind {
  validation,  // bad input: malformed spec, violated precondition
  numerical,   // well-formed input the mathematics cannot handle
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string name, const std::string& what)
      : std::runtime_error(name + ": " + what), kind_(kind), name_(std::move(name)) {}

  ErrorKind kind() const noexcept { return kind_; }
  /// Short machine-readable tag, e.g. "DegenerateMoment".
  const std::string& name() const noexcept { return name_; }

 private:
  ErrorKind kind_;
  std::string name_;
};

struct InvalidSpec : Error {
  explicit InvalidSpec(const std::string& what) : Error(ErrorKind::validation, "InvalidSpec", what) {}
};

struct InvalidArgument : Error {
  explicit InvalidArgument(const std::string& what)
      : Error(ErrorKind::validation, "InvalidArgument", what) {}
};

struct NoUpcrossing : Error {
  explicit NoUpcrossing(const std::string& what) : Error(ErrorKind::numerical, "NoUpcrossing", what) {}
};

/// E[Z^l] == 1 exactly: the l-th moment equation cannot be solved.
struct DegenerateMoment : Error {
  explicit DegenerateMoment(int l)
      : Error(ErrorKind::numerical, "DegenerateMoment",
              "E[Z^" + std::to_string(l) + "] = 1 (order " + std::to_string(l) + ")"),
        order(l) {}
  int order;
};

/// E[Z^l] > 1: the requested order lies outside the stable moment range.
struct UnstableMoment : Error {
  explicit UnstableMoment(int l)
      : Error(ErrorKind::numerical, "UnstableMoment",
              "E[Z^" + std::to_string(l) + "] > 1 (order " + std::to_string(l) + ")"),
        order(l) {}
  int order;
};

struct KNotInA : Error {
  explicit KNotInA(int k)
      : Error(ErrorKind::numerical, "KNotInA",
              "E[Z^" + std::to_string(k) + "] >= 1, K=" + std::to_string(k) + " is not admissible") {}
};

struct TruncationOverflow : Error {
  explicit TruncationOverflow(const std::string& what)
      : Error(ErrorKind::numerical, "TruncationOverflow", what) {}
};

struct SingularSystem : Error {
  explicit SingularSystem(const std::string& what)
      : Error(ErrorKind::numerical, "SingularSystem", what) {}
};

struct InsufficientSignal : Error {
  explicit InsufficientSignal(const std::string& what)
      : Error(ErrorKind::numerical, "InsufficientSignal", what) {}
};

struct UnboundedSupport : Error {
  explicit UnboundedSupport(const std::string& what)
      : Error(ErrorKind::numerical, "UnboundedSupport", what) {}
};

}  // namespace lyapexp
