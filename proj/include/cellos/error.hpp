// Copyright 2026 The CellOS Authors
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

#ifndef CELLOS_ERROR_HPP_
#define CELLOS_ERROR_HPP_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cellos {

// Base of every error raised by the toolkit. kind() is the stable name used in
// logs and in the CLI's machine-readable error output.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(kind + ": " + what), kind_(std::move(kind)) {}
  const std::string& kind() const { return kind_; }

 private:
  std::string kind_;
};

#define CELLOS_DEFINE_ERROR(Name)                                   \
  class Name : public Error {                                       \
   public:                                                          \
    explicit Name(const std::string& what) : Error(#Name, what) {}  \
  };

// Expressions and the objective language.
CELLOS_DEFINE_ERROR(UnboundSymbol)
CELLOS_DEFINE_ERROR(DomainError)
CELLOS_DEFINE_ERROR(NonDifferentiable)
CELLOS_DEFINE_ERROR(UnsupportedTerm)
CELLOS_DEFINE_ERROR(UnknownConstraintKey)
CELLOS_DEFINE_ERROR(NonPositiveBound)
CELLOS_DEFINE_ERROR(MalformedExpr)

// Network abstraction.
CELLOS_DEFINE_ERROR(InvalidNetwork)
CELLOS_DEFINE_ERROR(InvalidShare)
CELLOS_DEFINE_ERROR(UnknownSlice)
CELLOS_DEFINE_ERROR(EngineAlreadySet)
CELLOS_DEFINE_ERROR(InvalidEngineConfig)
CELLOS_DEFINE_ERROR(DuplicateConstraint)

// Problem generation and decomposition.
CELLOS_DEFINE_ERROR(NoObjective)
CELLOS_DEFINE_ERROR(UnclassifiedVariable)
CELLOS_DEFINE_ERROR(NotSeparable)
CELLOS_DEFINE_ERROR(NotImplemented)
CELLOS_DEFINE_ERROR(EndpointUnreachable)
CELLOS_DEFINE_ERROR(SerializationOverflow)
CELLOS_DEFINE_ERROR(MalformedProgram)

// Simulator and runtime.
CELLOS_DEFINE_ERROR(CoincidentNodes)
CELLOS_DEFINE_ERROR(InvariantViolation)
CELLOS_DEFINE_ERROR(NoBackloggedUsers)
CELLOS_DEFINE_ERROR(UnresolvedPlaceholder)
CELLOS_DEFINE_ERROR(InboxIncomplete)
CELLOS_DEFINE_ERROR(NumericalDivergence)
CELLOS_DEFINE_ERROR(BarrierTimeout)
CELLOS_DEFINE_ERROR(ChecksumMismatch)
CELLOS_DEFINE_ERROR(MalformedMessage)

// Oracle and scenarios.
CELLOS_DEFINE_ERROR(BudgetExceeded)
CELLOS_DEFINE_ERROR(SchemaViolation)

#undef CELLOS_DEFINE_ERROR

// Parse failure carrying the byte offset of the offending token.
class SyntaxError : public Error {
 public:
  SyntaxError(const std::string& what, std::size_t offset)
      : Error("SyntaxError",
              what + " at offset " + std::to_string(offset)),
        offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

}  // namespace cellos

#endif  // CELLOS_ERROR_HPP_
