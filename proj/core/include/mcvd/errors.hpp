#pragma once

#include <stdexcept>
#include <string>

namespace mcvd {

/// Base class for all pipeline errors. Errors that stem from bad user input
/// (missing files, malformed binaries) derive from InputError so the CLI can
/// map them to a distinct exit code.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InputError : Error {
  using Error::Error;
};

// decoder
struct UnknownOpcode : Error {
  using Error::Error;
};
struct TruncatedInstruction : Error {
  using Error::Error;
};

// elf loader
struct NotElf : InputError {
  using InputError::InputError;
};
struct WrongArchitecture : InputError {
  using InputError::InputError;
};
struct MalformedElf : InputError {
  using InputError::InputError;
};
struct StrippedBinary : InputError {
  using InputError::InputError;
};

// models
struct IdOutOfRange : Error {
  using Error::Error;
};

// training
struct NonFiniteLoss : Error {
  using Error::Error;
};

// dataset pipeline
struct CompilerNotFound : InputError {
  using InputError::InputError;
};

}  // namespace mcvd
