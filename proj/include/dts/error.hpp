// Copyright 2026 The diffts Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace dts {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration values, unknown config keys, incompatible checkpoints.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Violated call contracts: shape mismatches, out-of-range steps, bad arguments.
class ContractError : public Error {
 public:
  using Error::Error;
};

// Malformed manifests, corpora that violate data invariants.
class DataError : public Error {
 public:
  using Error::Error;
};

// Filesystem and file-format failures.
class IoError : public Error {
 public:
  using Error::Error;
};

inline void check_contract(bool cond, const std::string& msg) {
  if (!cond) throw ContractError(msg);
}

inline void check_config(bool cond, const std::string& msg) {
  if (!cond) throw ConfigError(msg);
}

}  // namespace dts
