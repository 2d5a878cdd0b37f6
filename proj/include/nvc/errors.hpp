#pragma once

#include <stdexcept>
#include <string>

namespace nvc {

/// Base class for every error raised by the library.
class error : public std::runtime_error {
 public:
  explicit error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Tensor or layer shape disagreement; messages carry both shapes.
class shape_error : public error {
 public:
  using error::error;
};

/// Malformed container, checkpoint, or image file.
class format_error : public error {
 public:
  using error::error;
};

/// Compressed file does not belong to the supplied model.
class model_key_error : public error {
 public:
  using error::error;
};

/// Corrupt or truncated entropy-coded stream.
class decode_error : public error {
 public:
  using error::error;
};

/// Filesystem-level failure (open/read/write).
class io_error : public error {
 public:
  using error::error;
};

/// Invalid flag, config key, or option value.
class config_error : public error {
 public:
  using error::error;
};

/// Training run aborted (non-finite loss, empty dataset, ...).
class training_error : public error {
 public:
  using error::error;
};

}  // namespace nvc
