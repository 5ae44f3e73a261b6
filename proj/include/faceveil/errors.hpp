// Copyright (c) 2026 The faceveil authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace faceveil {

/// Invalid argument passed to an operation (shape mismatch, out-of-range
/// layer index, non-unit vector where one is required, ...).
class ArgumentError : public std::invalid_argument {
 public:
  explicit ArgumentError(const std::string& what) : std::invalid_argument(what) {}
};

/// Bad or inconsistent configuration (unknown backend name, schema violation,
/// feature resolution above the correspondence cap, ...).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// A backend produced invalid output (non-finite activations or embeddings).
class BackendFault : public std::runtime_error {
 public:
  explicit BackendFault(const std::string& what) : std::runtime_error(what) {}
};

/// The optimization loop hit a non-finite loss. Carries the iteration at
/// which the fault occurred and the name of the offending loss component so
/// callers can report a partial trajectory.
class OptimizationFault : public std::runtime_error {
 public:
  OptimizationFault(const std::string& what, int iteration, std::string component)
      : std::runtime_error(what), iteration_(iteration), component_(std::move(component)) {}
  int iteration() const { return iteration_; }
  const std::string& component() const { return component_; }

 private:
  int iteration_;
  std::string component_;
};

/// I/O failure with the path that caused it.
class IoError : public std::runtime_error {
 public:
  IoError(const std::string& what, std::string path)
      : std::runtime_error(what + ": " + path), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

}  // namespace faceveil
