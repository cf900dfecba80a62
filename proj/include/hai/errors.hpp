#pragma once

#include <stdexcept>
#include <string>

namespace hai {

// Malformed or inconsistent input data (files, containers, key material).
// Precondition violations on in-memory arguments use std::invalid_argument.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Filesystem failures: missing files, refused overwrites, short writes.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace hai
