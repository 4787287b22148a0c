// Copyright (c) the hcae authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace hcae {

// Bad or inconsistent run configuration (unknown key, out-of-range value).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A pipeline stage was invoked before the stage(s) it depends on.
struct DependencyError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Training or evaluation produced a non-finite value.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// File system / serialization failure.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace hcae
