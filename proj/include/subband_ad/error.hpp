// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace subband_ad {

/// Base class for all library errors.
class error : public std::runtime_error {
 public:
  explicit error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed input file or wire payload. Messages name the byte offset
/// where parsing stopped making sense.
class parse_error : public error {
 public:
  explicit parse_error(const std::string& msg) : error(msg) {}
};

/// Invalid argument value or shape/dimension mismatch.
class value_error : public error {
 public:
  explicit value_error(const std::string& msg) : error(msg) {}
};

/// Remote backend failure: transport error or non-2xx response.
class backend_error : public error {
 public:
  explicit backend_error(const std::string& msg) : error(msg) {}
};

/// Filesystem failure (open/read/write).
class io_error : public error {
 public:
  explicit io_error(const std::string& msg) : error(msg) {}
};

}  // namespace subband_ad
