#pragma once

#include <stdexcept>
#include <string>

namespace zeroforge {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor, batch or grid dimensions disagree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Invalid hyperparameter value (non-positive beta, tau, ...).
class ParameterError : public Error {
 public:
  using Error::Error;
};

// Invalid or inconsistent configuration, including unknown config keys.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Input outside an operation's domain (e.g. unnormalized embeddings,
// grid values outside [0,1] handed to the renderer).
class DomainError : public Error {
 public:
  using Error::Error;
};

// A prompt does not fit in the text encoder's context window.
class ContextOverflowError : public Error {
 public:
  ContextOverflowError(std::string prompt, int tokens, int limit)
      : Error("prompt exceeds encoder context limit (" + std::to_string(tokens) +
              " > " + std::to_string(limit) + " tokens): \"" + prompt + "\""),
        prompt_(std::move(prompt)) {}
  const std::string& prompt() const { return prompt_; }

 private:
  std::string prompt_;
};

// Malformed or unreadable file (voxel files, checkpoints, config files).
class FormatError : public Error {
 public:
  using Error::Error;
};

// Training stopped because of a non-finite loss or an I/O failure.
class TrainingAborted : public Error {
 public:
  TrainingAborted(const std::string& what, long iteration)
      : Error(what), iteration_(iteration) {}
  long iteration() const { return iteration_; }

 private:
  long iteration_;
};

}  // namespace zeroforge
