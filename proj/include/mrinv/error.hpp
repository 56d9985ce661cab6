#pragma once

#include <stdexcept>
#include <string>

namespace mrinv {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or unsupported NIfTI input, or a failed image write.
class NiftiError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration, manifest or command-line input. Detected before work starts.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Segmentation backend failure. exit_code is -1 when the process never exited normally.
class BackendError : public Error {
 public:
  BackendError(const std::string& what, int exit_code = -1)
      : Error(what), exit_code_(exit_code) {}

  int exit_code() const noexcept { return exit_code_; }

 private:
  int exit_code_;
};

}  // namespace mrinv
