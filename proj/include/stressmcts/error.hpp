#pragma once

#include <stdexcept>
#include <string>

namespace stressmcts {

// Base for every error raised by the library. Subclasses let callers
// (notably the CLI and the experiment runner) tell failure modes apart.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CorpusError : public Error {
 public:
  using Error::Error;
};

class ModelError : public Error {
 public:
  using Error::Error;
};

// Transport, handshake or payload failure talking to an external scorer.
class ScorerError : public ModelError {
 public:
  using ModelError::ModelError;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

}  // namespace stressmcts
