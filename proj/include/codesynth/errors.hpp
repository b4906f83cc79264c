#pragma once

#include <stdexcept>
#include <string>

namespace codesynth {

// Base class for all toolkit errors. Everything thrown on purpose derives
// from this so callers can catch one type at the CLI boundary.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// ---- corpus loading -------------------------------------------------------

class MissingFieldError : public Error {
 public:
  MissingFieldError(const std::string& entry, const std::string& field)
      : Error("missing field '" + field + "' in " + entry) {}
};

class DuplicateIdError : public Error {
 public:
  explicit DuplicateIdError(const std::string& id)
      : Error("duplicate atom id '" + id + "'") {}
};

class UnknownValueTypeError : public Error {
 public:
  UnknownValueTypeError(const std::string& entry, const std::string& tag)
      : Error("unknown value type '" + tag + "' in " + entry) {}
};

class UnparseableCodeError : public Error {
 public:
  UnparseableCodeError(const std::string& entry, const std::string& detail)
      : Error("unparseable code in " + entry + ": " + detail) {}
};

class SizesDontSumError : public Error {
 public:
  SizesDontSumError(size_t got, size_t corpus)
      : Error("partition sizes sum to " + std::to_string(got) +
              " but corpus has " + std::to_string(corpus) + " atoms") {}
};

// ---- composition ----------------------------------------------------------

class EmptyCorpusError : public Error {
 public:
  EmptyCorpusError() : Error("corpus is empty") {}
};

class DeadEndError : public Error {
 public:
  explicit DeadEndError(const std::string& msg) : Error(msg) {}
};

class UnknownAtomIdError : public Error {
 public:
  explicit UnknownAtomIdError(const std::string& id)
      : Error("unknown atom id '" + id + "'") {}
};

class MissingTemplateError : public Error {
 public:
  explicit MissingTemplateError(const std::string& pos)
      : Error("template set is missing position '" + pos + "'") {}
};

class ExhaustedRetriesError : public Error {
 public:
  ExhaustedRetriesError(size_t produced, size_t target)
      : Error("retry budget exhausted after producing " +
              std::to_string(produced) + " of " + std::to_string(target) +
              " candidates"),
        produced_(produced) {}
  size_t produced() const { return produced_; }

 private:
  size_t produced_;
};

// ---- sandbox --------------------------------------------------------------

class SandboxSpawnError : public Error {
 public:
  explicit SandboxSpawnError(const std::string& msg)
      : Error("sandbox spawn failure: " + msg) {}
};

class SandboxUnavailableError : public Error {
 public:
  explicit SandboxUnavailableError(const std::string& msg)
      : Error("sandbox unavailable: " + msg) {}
};

class SerializationError : public Error {
 public:
  explicit SerializationError(const std::string& msg)
      : Error("serialization failure: " + msg) {}
};

class CompileError : public Error {
 public:
  explicit CompileError(const std::string& msg)
      : Error("candidate does not compile: " + msg) {}
};

// ---- filtering ------------------------------------------------------------

class IncompleteTracesError : public Error {
 public:
  IncompleteTracesError(size_t got, size_t expected)
      : Error("expected " + std::to_string(expected) + " traces, got " +
              std::to_string(got)) {}
};

class NotAcceptedError : public Error {
 public:
  explicit NotAcceptedError(const std::string& candidate_id)
      : Error("candidate '" + candidate_id +
              "' was rejected; no unit tests emitted") {}
};

// ---- datasets -------------------------------------------------------------

class MissingTestsError : public Error {
 public:
  explicit MissingTestsError(const std::string& id)
      : Error("record '" + id + "' carries no unit tests") {}
};

class EmptyComponentError : public Error {
 public:
  explicit EmptyComponentError(const std::string& path)
      : Error("mixture component '" + path + "' is empty") {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& msg) : Error(msg) {}
};

class SchemaViolationError : public Error {
 public:
  SchemaViolationError(const std::string& path, size_t line,
                       const std::string& detail)
      : Error(path + ":" + std::to_string(line) + ": " + detail) {}
};

// ---- rl kernel ------------------------------------------------------------

class DegenerateMaskError : public Error {
 public:
  explicit DegenerateMaskError(size_t n)
      : Error("whitening needs at least 2 masked-in elements, got " +
              std::to_string(n)) {}
};

class NonFiniteInputError : public Error {
 public:
  explicit NonFiniteInputError(const std::string& where)
      : Error("non-finite input in " + where) {}
};

class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& msg) : Error(msg) {}
};

// ---- evaluation / service -------------------------------------------------

class UnresolvedPromptIdError : public Error {
 public:
  explicit UnresolvedPromptIdError(const std::string& id)
      : Error("response refers to unknown prompt id '" + id + "'") {}
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& msg) : Error(msg) {}
};

class BindFailureError : public Error {
 public:
  explicit BindFailureError(const std::string& addr)
      : Error("cannot bind service to " + addr) {}
};

}  // namespace codesynth
