#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sizer {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SyntaxError : public Error {
 public:
  SyntaxError(std::size_t line, const std::string& reason)
      : Error("line " + std::to_string(line) + ": " + reason), line_(line), reason_(reason) {}
  std::size_t line() const noexcept { return line_; }
  const std::string& reason() const noexcept { return reason_; }

 private:
  std::size_t line_;
  std::string reason_;
};

class DuplicateDevice : public Error {
 public:
  explicit DuplicateDevice(const std::string& name)
      : Error("duplicate device name '" + name + "'"), name_(name) {}
  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
};

class UnknownDeviceCard : public Error {
 public:
  UnknownDeviceCard(std::size_t line, const std::string& prefix)
      : Error("line " + std::to_string(line) + ": unsupported element card '" + prefix + "'"),
        prefix_(prefix) {}
  const std::string& prefix() const noexcept { return prefix_; }

 private:
  std::string prefix_;
};

class MissingGround : public Error {
 public:
  MissingGround() : Error("no ground net found (expected one of the ground aliases)") {}
};

class UnknownNode : public Error {
 public:
  using Error::Error;
};

class OverlappingMatches : public Error {
 public:
  explicit OverlappingMatches(const std::string& device)
      : Error("device '" + device + "' is bound by more than one match"), device_(device) {}
  const std::string& device() const noexcept { return device_; }

 private:
  std::string device_;
};

class PathExplosion : public Error {
 public:
  explicit PathExplosion(std::size_t cap)
      : Error("conduction path count exceeds cap of " + std::to_string(cap)), cap_(cap) {}
  std::size_t cap() const noexcept { return cap_; }

 private:
  std::size_t cap_;
};

class NoConductionPath : public Error {
 public:
  NoConductionPath() : Error("no VDD to GND conduction path exists") {}
};

class OverlappingStages : public Error {
 public:
  using Error::Error;
};

class SchemaError : public Error {
 public:
  using Error::Error;
};

class AdvisorUnavailable : public Error {
 public:
  using Error::Error;
};

class MalformedAdvisorResponse : public Error {
 public:
  MalformedAdvisorResponse(int round, const std::string& detail)
      : Error("malformed advisor response in round " + std::to_string(round) + ": " + detail),
        round_(round) {}
  int round() const noexcept { return round_; }

 private:
  int round_;
};

class NonFiniteInput : public Error {
 public:
  using Error::Error;
};

class MissingMetric : public Error {
 public:
  explicit MissingMetric(const std::string& name)
      : Error("measurement lacks metric '" + name + "'"), name_(name) {}
  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
};

class EvaluatorFailure : public Error {
 public:
  using Error::Error;
};

class OutOfBounds : public Error {
 public:
  using Error::Error;
};

class SingularKernel : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace sizer
