#pragma once

#include <stdexcept>
#include <string>

namespace attnablate {

// Base class for every error raised by the library. Subclasses exist where
// callers are expected to branch on the failure kind.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class InputError : public Error {
 public:
  using Error::Error;
};

class LoadError : public Error {
 public:
  using Error::Error;
};

// Violations of the experiment protocol (mismatched run sizes, bad grids, ...).
class ProtocolError : public Error {
 public:
  using Error::Error;
};

class TransportError : public Error {
 public:
  using Error::Error;
};

// A remote judge answered, but not in the marker convention. The raw reply is
// kept so it can be audited; it is never coerced into a label.
class JudgeParseError : public Error {
 public:
  JudgeParseError(const std::string& what, std::string raw_reply)
      : Error(what), raw_reply_(std::move(raw_reply)) {}
  const std::string& raw_reply() const noexcept { return raw_reply_; }

 private:
  std::string raw_reply_;
};

}  // namespace attnablate
