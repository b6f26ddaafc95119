#pragma once

#include <stdexcept>
#include <string>

namespace idistill {

// Error taxonomy shared across modules. The CLI maps each class to a
// distinct exit code (see tools/main.cpp --help).

class InvalidArgument : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

class EmptyInputError : public InvalidArgument {
public:
  using InvalidArgument::InvalidArgument;
};

class ParseError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class FormatError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class IntegrityError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class TransportError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class EndpointError : public std::runtime_error {
public:
  EndpointError(int status, const std::string& what)
      : std::runtime_error(what), status_(status) {}
  int status() const { return status_; }

private:
  int status_;
};

}  // namespace idistill
