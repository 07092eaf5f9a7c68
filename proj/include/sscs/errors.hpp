// Copyright 2026 The SSCS Authors.
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

namespace sscs {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Zero vectors and other inputs on which an operation is undefined.
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

// Invalid hyper-parameters, shapes or enum values.
class ParameterError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent data (out-of-vocabulary ids, bad files).
class DataError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf produced during evaluation.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace sscs
