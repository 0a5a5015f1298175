/**
 * Copyright 2026 The CDL Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cdl {

// Base of every error raised by the library. Categories are distinct types so
// callers (the CLI in particular) can map them onto stable exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor or weight geometry does not match what an operation expects.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Index or neuron range outside the valid bounds.
class RangeError : public Error {
 public:
  using Error::Error;
};

// Model configuration text is malformed. Carries the 1-based line number.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Binary file or container is structurally malformed (bad magic, truncated,
// trailing bytes, ...).
class FormatError : public Error {
 public:
  using Error::Error;
};

// Authentication failed. Never raised for purely structural problems.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

// A secure-arena allocation would exceed the arena capacity.
class OutOfSecureMemory : public Error {
 public:
  using Error::Error;
};

// Operation attempted in the wrong state (e.g. invoke on a closed session).
class StateError : public Error {
 public:
  using Error::Error;
};

// Inputs are inconsistent with each other (plan vs. model, bad key length, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// A plan cannot be produced under the requested memory budget.
class PlanningError : public Error {
 public:
  using Error::Error;
};

// A single layer does not fit the budget as a whole partition.
class LayerTooLargeError : public PlanningError {
 public:
  LayerTooLargeError(std::size_t layer, std::size_t footprint, std::size_t cap)
      : PlanningError("layer " + std::to_string(layer) + " needs " +
                      std::to_string(footprint) + " bytes of secure memory, cap is " +
                      std::to_string(cap)),
        layer_(layer) {}

  std::size_t layer() const noexcept { return layer_; }

 private:
  std::size_t layer_;
};

}  // namespace cdl
