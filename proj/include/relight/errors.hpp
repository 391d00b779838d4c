// Copyright 2026 The Relight Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace relight {

/// Rejected input: wrong shape, out-of-range argument, malformed file.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Degenerate geometric configuration (zero-length vectors, empty regions).
class DegenerateError : public InputError {
 public:
  using InputError::InputError;
};

/// Non-finite values or divergence during optimization.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace relight
