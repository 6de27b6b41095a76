// Copyright 2026 The gtbounds Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace gtbounds {

/// Base class for all gtbounds failures.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// A type invariant or argument domain was violated.
class InvalidConfigError : public Error {
 public:
  using Error::Error;
};

/// An exhaustive subset enumeration would exceed the guardrail.
class EnumerationLimitError : public Error {
 public:
  using Error::Error;
};

/// The channel carries no information (I(1) == 0); thresholds diverge.
class DegenerateChannelError : public Error {
 public:
  using Error::Error;
};

/// A stated hypothesis of an asymptotic result does not hold; the message
/// names the failing clause.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// The requested approximation is not defined for this channel.
class UnsupportedChannelError : public Error {
 public:
  using Error::Error;
};

}  // namespace gtbounds
