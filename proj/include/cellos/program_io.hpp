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

// Canonical "ir-v1" serialization of distributed programs and centralized
// problems, and in-process dispatch of programs to base-station endpoints.
// The layout is documented in docs/ir-v1.md.

#ifndef CELLOS_PROGRAM_IO_HPP_
#define CELLOS_PROGRAM_IO_HPP_

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"

#include "cellos/decomposition.hpp"
#include "cellos/problem.hpp"

namespace cellos {

inline constexpr const char* kIrSchema = "ir-v1";
inline constexpr std::size_t kDefaultIrLimit = 4u << 20;

nlohmann::json expr_to_json(const Expr& e, const SymbolTable& table);
Expr expr_from_json(const nlohmann::json& j, const SymbolTable& table);
nlohmann::json symbols_to_json(const SymbolTable& table);
SymbolTable symbols_from_json(const nlohmann::json& j);

nlohmann::json program_to_json(const DistributedProgram& dp);
DistributedProgram program_from_json(const nlohmann::json& j);

// Compact JSON with sorted keys. Throws SerializationOverflow above limit.
std::string serialize_program(const DistributedProgram& dp, std::size_t limit = kDefaultIrLimit);
// Throws MalformedProgram.
DistributedProgram deserialize_program(const std::string& bytes);

nlohmann::json problem_to_json(const CentralizedProblem& prob);

// An agent-side receiver for compiled programs.
struct Endpoint {
  int owner = 0;
  std::function<void(const std::string& bytes)> deliver;
};

struct Receipt {
  int owner = 0;
  std::size_t bytes = 0;
};

// Serializes and delivers each program to the endpoint of its owner. Nothing
// is delivered unless every program has an endpoint (EndpointUnreachable).
std::vector<Receipt> dispatch(const std::vector<DistributedProgram>& programs, const std::vector<Endpoint>& endpoints,
                              std::size_t limit = kDefaultIrLimit);

}  // namespace cellos

#endif  // CELLOS_PROGRAM_IO_HPP_
