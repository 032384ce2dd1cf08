// Copyright 2026 The HSLiNet Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace hslinet {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not satisfy an operator's contract.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Bad input files or an invalid configuration.
class DataError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf produced or detected, or a gradient check failed.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// API misuse such as a second backward pass over a consumed tape.
class StateError : public Error {
 public:
  using Error::Error;
};

}  // namespace hslinet
