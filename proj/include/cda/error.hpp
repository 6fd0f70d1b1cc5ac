#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cda {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------- dataset

class MissingFile : public Error {
 public:
  explicit MissingFile(const std::string& path)
      : Error("missing file: " + path), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

class MalformedRow : public Error {
 public:
  MalformedRow(std::size_t row, const std::string& reason)
      : Error("row " + std::to_string(row) + ": " + reason),
        row_(row),
        reason_(reason) {}
  std::size_t row() const { return row_; }
  const std::string& reason() const { return reason_; }

 private:
  std::size_t row_;
  std::string reason_;
};

class UnknownLabelValue : public Error {
 public:
  UnknownLabelValue(std::size_t row, const std::string& value)
      : Error("row " + std::to_string(row) + ": unknown label value '" + value +
              "'"),
        row_(row),
        value_(value) {}
  std::size_t row() const { return row_; }
  const std::string& value() const { return value_; }

 private:
  std::size_t row_;
  std::string value_;
};

class InsufficientClassCount : public Error {
 public:
  InsufficientClassCount(const std::string& label, std::size_t have,
                         std::size_t need)
      : Error("insufficient " + label + " instances: have " +
              std::to_string(have) + ", need " + std::to_string(need)),
        label_(label),
        have_(have),
        need_(need) {}
  const std::string& label() const { return label_; }
  std::size_t have() const { return have_; }
  std::size_t need() const { return need_; }

 private:
  std::string label_;
  std::size_t have_;
  std::size_t need_;
};

class CorrectnessCoverageMismatch : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------- inference

class TransportError : public Error {
 public:
  using Error::Error;
};

class ProtocolError : public Error {
 public:
  ProtocolError(int status, const std::string& body_excerpt)
      : Error("protocol error: HTTP " + std::to_string(status) + ": " +
              body_excerpt),
        status_(status),
        body_excerpt_(body_excerpt) {}
  int status() const { return status_; }
  const std::string& body_excerpt() const { return body_excerpt_; }

 private:
  int status_;
  std::string body_excerpt_;
};

class EmptyChoice : public Error {
 public:
  EmptyChoice() : Error("response carried no choice content") {}
};

class NoRuleMatches : public Error {
 public:
  explicit NoRuleMatches(const std::string& prompt_excerpt)
      : Error("no mock rule matches prompt: " + prompt_excerpt) {}
};

class EndpointUnavailable : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------- evaluator

class EmptyConfusion : public Error {
 public:
  EmptyConfusion() : Error("confusion matrix is empty") {}
};

// ---------------------------------------------------------------- augmenter

class PolarityMismatch : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------- trainer

class HookFailed : public Error {
 public:
  HookFailed(int status, const std::string& log_excerpt)
      : Error("trainer hook failed with status " + std::to_string(status) +
              (log_excerpt.empty() ? std::string() : ":\n" + log_excerpt)),
        status_(status),
        log_excerpt_(log_excerpt) {}
  int status() const { return status_; }
  const std::string& log_excerpt() const { return log_excerpt_; }

 private:
  int status_;
  std::string log_excerpt_;
};

class ManifestMissing : public Error {
 public:
  using Error::Error;
};

class ManifestMalformed : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------- pipeline

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IncompleteRun : public Error {
 public:
  using Error::Error;
};

class StageFailed : public Error {
 public:
  StageFailed(const std::string& stage, const std::string& what)
      : Error("stage '" + stage + "' failed: " + what), stage_(stage) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

}  // namespace cda
