#pragma once

#include <stdexcept>
#include <string>

namespace gnlp {

/// Base class for every error raised by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Expression evaluated outside its domain (log/sqrt argument, division by
/// zero, non-finite intermediate).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Oracle evaluation failed at a trial point; the step must be rejected.
class TrialPointFailure : public Error {
 public:
  using Error::Error;
};

// ---- model construction ----

class SelfLoop : public Error {
 public:
  using Error::Error;
};

class DuplicateEdge : public Error {
 public:
  using Error::Error;
};

class UnknownNode : public Error {
 public:
  using Error::Error;
};

/// Expression references a variable outside the owner's allowed scope.
class ScopeViolation : public Error {
 public:
  using Error::Error;
};

class EmptyModel : public Error {
 public:
  using Error::Error;
};

// ---- partitioning ----

class TooManyParts : public Error {
 public:
  using Error::Error;
};

// ---- KKT assembly and linear algebra ----

/// Assembly requested at a point that is not strictly interior.
class NotInterior : public Error {
 public:
  using Error::Error;
};

class SingularMatrix : public Error {
 public:
  using Error::Error;
};

/// A subdomain block factorization failed; carries the offending block index.
class SubdomainSingular : public SingularMatrix {
 public:
  SubdomainSingular(int k, const std::string& what)
      : SingularMatrix(what), k_(k) {}
  int subdomain() const { return k_; }

 private:
  int k_;
};

/// Primal regularization hit its escalation limit.
class RegularizationExhausted : public Error {
 public:
  using Error::Error;
};

// ---- instances and file formats ----

class InvalidHorizon : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

}  // namespace gnlp
