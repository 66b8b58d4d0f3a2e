/*
 * Copyright 2026 The CNNA Simulator Authors. All Rights Reserved
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <stdexcept>
#include <string>

namespace cnna {

enum class ErrorKind {
  bad_input,  // malformed files, arguments, shapes
  invariant,  // a simulator or scheduler invariant was broken
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Raised for anything the caller can fix by changing inputs.
class InputError : public Error {
 public:
  explicit InputError(const std::string& what) : Error(ErrorKind::bad_input, what) {}
};

// Raised when the simulated hardware sees a stream it cannot legally process.
class SimulationFault : public Error {
 public:
  explicit SimulationFault(const std::string& what) : Error(ErrorKind::invariant, what) {}
};

}  // namespace cnna
