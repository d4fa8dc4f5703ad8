#pragma once

#include <stdexcept>
#include <string>

namespace rounds {

// Base for every error raised by the library. Callers that only care about
// "something went wrong in the harness" can catch this.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input syntax (JSON, JSONL, model replies). `position` is a byte
// offset or line number depending on the producer; see the message.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t position = 0)
      : Error(what), position_(position) {}
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

// Structurally valid input that violates a domain invariant.
class SchemaError : public Error {
 public:
  SchemaError(const std::string& case_id, const std::string& field, const std::string& rule)
      : Error("case '" + case_id + "': field '" + field + "': " + rule),
        case_id_(case_id),
        field_(field) {}
  const std::string& case_id() const { return case_id_; }
  const std::string& field() const { return field_; }

 private:
  std::string case_id_;
  std::string field_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

// Network or HTTP failure after all retries were spent.
class TransportError : public Error {
 public:
  using Error::Error;
};

class RateLimitError : public TransportError {
 public:
  using TransportError::TransportError;
};

class CacheMissError : public Error {
 public:
  using Error::Error;
};

// A model reply that does not follow the required answer format.
class ReplyFormatError : public Error {
 public:
  ReplyFormatError(const std::string& what, std::string reply)
      : Error(what), reply_(std::move(reply)) {}
  const std::string& reply() const { return reply_; }

 private:
  std::string reply_;
};

class SessionClosedError : public Error {
 public:
  using Error::Error;
};

}  // namespace rounds
