#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace craft {

// Exit-code families used by the CLI: usage → 1, data → 2, backend/transport → 3.
enum class ErrorKind { usage = 1, data = 2, backend = 3 };

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what, ErrorKind kind = ErrorKind::data)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error("config: " + what, ErrorKind::usage) {}
};

class EmptyGraphError : public Error {
 public:
  explicit EmptyGraphError(const std::string& what) : Error("empty graph: " + what) {}
};

class MissingVerbError : public Error {
 public:
  MissingVerbError(std::string verb, std::vector<std::string> suggestions)
      : Error(format(verb, suggestions)), verb_(std::move(verb)), suggestions_(std::move(suggestions)) {}

  const std::string& verb() const noexcept { return verb_; }
  const std::vector<std::string>& suggestions() const noexcept { return suggestions_; }

 private:
  static std::string format(const std::string& verb, const std::vector<std::string>& s) {
    std::string msg = "verb not in graph: " + verb;
    if (!s.empty()) {
      msg += " (did you mean:";
      for (const auto& x : s) msg += " " + x;
      msg += ")";
    }
    return msg;
  }

  std::string verb_;
  std::vector<std::string> suggestions_;
};

class EmptyPriorError : public Error {
 public:
  explicit EmptyPriorError(const std::string& verb)
      : Error("no object candidates for verb " + verb), verb_(verb) {}
  const std::string& verb() const noexcept { return verb_; }

 private:
  std::string verb_;
};

class LlmPriorError : public Error {
 public:
  LlmPriorError(const std::string& what, std::string raw_payload)
      : Error("llm prior: " + what, ErrorKind::backend), raw_payload_(std::move(raw_payload)) {}
  const std::string& raw_payload() const noexcept { return raw_payload_; }

 private:
  std::string raw_payload_;
};

class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what) : Error("format: " + what) {}
};

class DataError : public Error {
 public:
  DataError(const std::string& what, std::string key)
      : Error("data: " + what + (key.empty() ? "" : " [" + key + "]")), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

class KeyMissingError : public Error {
 public:
  KeyMissingError(std::string key, std::vector<std::string> nearest)
      : Error(format(key, nearest)), key_(std::move(key)), nearest_(std::move(nearest)) {}
  const std::string& key() const noexcept { return key_; }
  const std::vector<std::string>& nearest() const noexcept { return nearest_; }

 private:
  static std::string format(const std::string& key, const std::vector<std::string>& nearest) {
    std::string msg = "key not found: " + key;
    if (!nearest.empty()) {
      msg += " (nearest:";
      for (const auto& x : nearest) msg += " " + x;
      msg += ")";
    }
    return msg;
  }

  std::string key_;
  std::vector<std::string> nearest_;
};

class TransportError : public Error {
 public:
  TransportError(const std::string& what, int attempts)
      : Error("transport: " + what + " after " + std::to_string(attempts) + " attempt(s)",
              ErrorKind::backend),
        attempts_(attempts) {}
  int attempts() const noexcept { return attempts_; }

 private:
  int attempts_;
};

class ProtocolError : public Error {
 public:
  explicit ProtocolError(const std::string& what) : Error("protocol: " + what, ErrorKind::backend) {}
};

class DimError : public Error {
 public:
  DimError(std::size_t a, std::size_t b)
      : Error("dimension mismatch: " + std::to_string(a) + " vs " + std::to_string(b)) {}
};

class AlignmentError : public Error {
 public:
  explicit AlignmentError(const std::string& what) : Error("alignment: " + what) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error("numeric: " + what) {}
};

class LoadError : public Error {
 public:
  LoadError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class SamplingError : public Error {
 public:
  SamplingError(const std::string& verb, const std::string& what)
      : Error("cannot sample episode for " + verb + ": " + what), verb_(verb) {}
  const std::string& verb() const noexcept { return verb_; }

 private:
  std::string verb_;
};

class MetricError : public Error {
 public:
  explicit MetricError(const std::string& what) : Error("metric: " + what) {}
};

class TraceError : public Error {
 public:
  explicit TraceError(const std::string& what) : Error("trace: " + what) {}
};

}  // namespace craft
