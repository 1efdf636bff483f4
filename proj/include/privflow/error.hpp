#pragma once

#include <stdexcept>
#include <string>

#include "privflow/model.hpp"

namespace privflow {

/// Base for every user-facing failure. The CLI turns these into a single
/// diagnostic line and exit status 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(Location location, std::string message, std::string expected)
      : Error(to_string(location) + ": " + message + (expected.empty() ? "" : " (expected " + expected + ")")),
        location_(std::move(location)),
        message_(std::move(message)),
        expected_(std::move(expected)) {}

  const Location& location() const { return location_; }
  const std::string& message() const { return message_; }
  const std::string& expected() const { return expected_; }

 private:
  Location location_;
  std::string message_;
  std::string expected_;
};

class LoweringError : public Error {
 public:
  using Error::Error;
};

class ManifestError : public Error {
 public:
  ManifestError(std::string field, std::string reason)
      : Error("manifest: " + field + ": " + reason), field_(std::move(field)), reason_(std::move(reason)) {}

  const std::string& field() const { return field_; }
  const std::string& reason() const { return reason_; }

 private:
  std::string field_;
  std::string reason_;
};

class FactsError : public Error {
 public:
  FactsError(std::size_t line, std::string reason)
      : Error("facts line " + std::to_string(line) + ": " + reason), line_(line), reason_(std::move(reason)) {}

  std::size_t line() const { return line_; }
  const std::string& reason() const { return reason_; }

 private:
  std::size_t line_;
  std::string reason_;
};

class BadPattern : public Error {
 public:
  using Error::Error;
};

class UnknownElement : public Error {
 public:
  explicit UnknownElement(const std::string& selector) : Error("unknown element: " + selector) {}
};

class NotAFunction : public Error {
 public:
  explicit NotAFunction(const std::string& selector) : Error("not a function: " + selector) {}
};

class RulesError : public Error {
 public:
  RulesError(std::string field, std::string reason)
      : Error("rules: " + field + ": " + reason), field_(std::move(field)) {}

  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

class BackendUnavailable : public Error {
 public:
  using Error::Error;
};

class SchemaViolation : public Error {
 public:
  using Error::Error;
};

class MissingVariable : public Error {
 public:
  explicit MissingVariable(const std::string& name) : Error("no value for variable " + name) {}
};

class ConstraintError : public Error {
 public:
  using Error::Error;
};

class NoEntryService : public Error {
 public:
  NoEntryService() : Error("manifest declares no entry service") {}
};

}  // namespace privflow
