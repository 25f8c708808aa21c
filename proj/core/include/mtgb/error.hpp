#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mtgb {

// Base of every error the library throws. Callers that only care about
// "something in the pipeline failed" catch this.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

class EmptyInputError : public Error {
 public:
  using Error::Error;
};

class ArgumentError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class SplitError : public Error {
 public:
  using Error::Error;
};

class DegenerateTriggerError : public Error {
 public:
  using Error::Error;
};

class DistinctnessError : public Error {
 public:
  using Error::Error;
};

class OversubscriptionError : public Error {
 public:
  OversubscriptionError(const std::string& msg, int exhausted_class)
      : Error(msg), exhausted_class_(exhausted_class) {}
  int exhausted_class() const noexcept { return exhausted_class_; }

 private:
  int exhausted_class_;
};

class ReplacementInfeasibleError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  TrainingError(const std::string& msg, int epoch) : Error(msg), epoch_(epoch) {}
  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

// Malformed TU file content. Line numbers are 1-based; 0 means the problem is
// not tied to a single line (e.g. a row-count mismatch).
class ParseError : public Error {
 public:
  ParseError(std::string file, std::size_t line, const std::string& what)
      : Error(file + ":" + std::to_string(line) + ": " + what),
        file_(std::move(file)),
        line_(line) {}
  const std::string& file() const noexcept { return file_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string file_;
  std::size_t line_;
};

// Invalid experiment configuration; field() is a dotted JSON path.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace mtgb
