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

// Symbolic expressions used for objectives, constraints, Lagrangian terms and
// their derivatives.
//
// An Expr is an immutable tree. Two flavours share the same node set:
// * template expressions refer to indexed symbol families (p[b,u,n]) and may
//   contain sums over index sets (B, U_b, N) and builtin leaves (rate, power);
// * ground expressions, produced by Grounder for a concrete network shape,
//   contain only scalar symbols and arithmetic and can be evaluated,
//   differentiated and compiled.

#ifndef CELLOS_EXPR_HPP_
#define CELLOS_EXPR_HPP_

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cellos {

using SymbolId = std::uint32_t;

enum class SymbolKind : std::uint8_t { Variable, Placeholder, Parameter, Multiplier };
enum class Layer : std::uint8_t { None, Mac, Phy };
enum class VarDomain : std::uint8_t { Continuous, Binary };
enum class IndexSet : std::uint8_t { BaseStations, Users, Channels };

const char* to_string(SymbolKind kind);
const char* to_string(Layer layer);
const char* to_string(IndexSet set);

// Index position of an indexed symbol or sum: either an index variable bound
// by an enclosing sum or quantifier, or a concrete index.
struct IndexArg {
  std::string var;
  int value = -1;

  static IndexArg named(std::string name) { return IndexArg{std::move(name), -1}; }
  static IndexArg fixed(int v) { return IndexArg{{}, v}; }
  bool is_var() const { return !var.empty(); }
  std::string str() const { return is_var() ? var : std::to_string(value); }
  bool operator==(const IndexArg&) const = default;
};

struct IndexBinding {
  IndexSet set = IndexSet::BaseStations;
  IndexArg arg;
  bool operator==(const IndexBinding&) const = default;
};

struct SymbolMeta {
  SymbolId id = 0;
  std::string name;
  // Name of the indexed family a ground symbol was instantiated from; equal
  // to name for unindexed symbols and for the family entries themselves.
  std::string family;
  SymbolKind kind = SymbolKind::Placeholder;
  Layer layer = Layer::None;
  VarDomain domain = VarDomain::Continuous;
  std::optional<int> owner;
  std::vector<IndexBinding> indices;
  std::optional<double> value;
};

class SymbolTable {
 public:
  // Assigns the next id; throws MalformedExpr on a duplicate name.
  SymbolId add(SymbolMeta meta);
  const SymbolMeta& at(SymbolId id) const;
  std::optional<SymbolId> find(std::string_view name) const;
  SymbolId require(std::string_view name) const;
  std::size_t size() const { return symbols_.size(); }
  const std::vector<SymbolMeta>& all() const { return symbols_; }

 private:
  std::vector<SymbolMeta> symbols_;
  std::map<std::string, SymbolId, std::less<>> by_name_;
};

struct IndexDomain {
  enum class Kind : std::uint8_t {
    BaseStations,       // B
    OtherBaseStations,  // B \ {ref}
    ServedUsers,        // U_ref
    ScopedUsers,        // U_ref restricted to subset
    AllUsers,           // U
    Channels,           // N
  };
  Kind kind = Kind::BaseStations;
  IndexArg ref;
  std::vector<int> subset;
  bool operator==(const IndexDomain&) const = default;
};

enum class Op : std::uint8_t {
  Constant, Symbol, Indexed, IndexSum, Add, Mul, Div, Log2, Ln, Pow, Neg, Builtin,
};

enum class BuiltinTerm : std::uint8_t { Rate, Power, Sinr, EnergyEfficiency, Scheduled };
const char* to_string(BuiltinTerm term);

struct Node;

class Expr {
 public:
  Expr();  // constant zero
  explicit Expr(std::shared_ptr<const Node> node) : node_(std::move(node)) {}

  const Node& node() const { return *node_; }
  const Node* operator->() const { return node_.get(); }
  Op op() const;
  bool is_constant() const { return op() == Op::Constant; }
  bool is_constant(double v) const;
  double constant_value() const;

 private:
  std::shared_ptr<const Node> node_;
};

struct Node {
  Op op = Op::Constant;
  double value = 0.0;             // Constant value, Pow exponent
  SymbolId symbol = 0;            // Symbol, Indexed family
  std::vector<IndexArg> args;     // Indexed arguments, Builtin scope (b[,u])
  std::string index_var;          // IndexSum bound variable
  IndexDomain domain;             // IndexSum range
  BuiltinTerm builtin = BuiltinTerm::Rate;
  std::vector<double> coeffs;     // Add coefficients, one per child
  std::vector<Expr> children;
};

namespace ex {

Expr constant(double v);
Expr symbol(SymbolId id);
Expr indexed(SymbolId family, std::vector<IndexArg> args);
Expr index_sum(std::string var, IndexDomain domain, Expr body);
Expr builtin(BuiltinTerm term, std::vector<IndexArg> scope = {});

// Simplifying constructors: fold constants, flatten nested sums/products and
// drop neutral elements. Used by generators and the differentiator.
Expr add(std::vector<double> coeffs, std::vector<Expr> children);
Expr sum(std::vector<Expr> children);
Expr mul(std::vector<Expr> children);
Expr div(Expr num, Expr den);
Expr log2(Expr arg);
Expr ln(Expr arg);
Expr pow(Expr base, double exponent);
Expr neg(Expr arg);

// Literal constructors used by the parser; the tree keeps the source shape.
namespace raw {
Expr add(std::vector<double> coeffs, std::vector<Expr> children);
Expr mul(std::vector<Expr> children);
Expr div(Expr num, Expr den);
Expr log2(Expr arg);
Expr ln(Expr arg);
Expr pow(Expr base, double exponent);
Expr neg(Expr arg);
}  // namespace raw

}  // namespace ex

Expr operator+(const Expr& a, const Expr& b);
Expr operator-(const Expr& a, const Expr& b);
Expr operator*(const Expr& a, const Expr& b);
Expr operator/(const Expr& a, const Expr& b);
Expr operator*(double c, const Expr& a);

// Symbols reachable from e, ascending by id. For template expressions the
// family ids of Indexed nodes are reported.
std::vector<SymbolId> free_symbols(const Expr& e);
bool contains_symbol(const Expr& e, SymbolId s);
bool structurally_equal(const Expr& a, const Expr& b);
std::size_t node_count(const Expr& e);

// Binding lookups. eval throws UnboundSymbol for missing symbols and
// DomainError for log of a non-positive value or division by zero.
double eval(const Expr& e, const std::map<SymbolId, double>& binding);
double eval_dense(const Expr& e, std::span<const double> dense);

// d e / d s with constant folding. Throws NonDifferentiable if s is a binary
// variable in table, or if e still contains template nodes.
Expr differentiate(const Expr& e, SymbolId s, const SymbolTable* table = nullptr);

// Pre-order rewrite: when fn returns a value it replaces the visited subtree.
Expr rewrite(const Expr& e, const std::function<std::optional<Expr>(const Expr&)>& fn);

// Replaces the free index variable var by arg (respecting shadowing by sums).
Expr bind_index(const Expr& e, const std::string& var, const IndexArg& arg);

// Index variables used but not bound inside e, in first-use order.
std::vector<std::string> free_index_vars(const Expr& e);

// Dense value vector with every symbol's declared value (0 when unset).
std::vector<double> declared_values(const SymbolTable& table);

// Human-readable rendering (not the objective language; see dsl.hpp).
std::string to_string(const Expr& e, const SymbolTable* table = nullptr);

// Concrete network shape used to instantiate templates: served UE ids per
// base station (UE ids are global) and the channel count.
struct Shape {
  std::vector<std::vector<int>> users_by_bs;
  int channels = 0;
  int bs_count() const { return static_cast<int>(users_by_bs.size()); }
  int user_count() const;
  int serving_bs(int ue) const;  // -1 when the UE is not served
};

// Instantiates template expressions for a shape. Scalar symbols are created in
// the output table on first use; instantiating the same family element twice
// yields the same SymbolId.
class Grounder {
 public:
  using Env = std::vector<std::pair<std::string, int>>;

  Grounder(const SymbolTable& templates, const Shape& shape, SymbolTable& out);
  Expr ground(const Expr& e, const Env& env = {});
  SymbolId scalar(SymbolId family, const std::vector<int>& idx);
  std::vector<int> enumerate(const IndexDomain& domain, const Env& env) const;
  int resolve(const IndexArg& arg, const Env& env) const;
  const Shape& shape() const { return shape_; }

 private:
  const SymbolTable& templates_;
  const Shape& shape_;
  SymbolTable& out_;
};

std::string scalar_name(const std::string& family, const std::vector<int>& idx);

// Postfix tape for fast repeated evaluation over dense symbol values.
class CompiledExpr {
 public:
  CompiledExpr() = default;
  explicit CompiledExpr(const Expr& e);

  // Throws DomainError like eval().
  double eval(std::span<const double> values) const;
  // IEEE-754 semantics instead of DomainError: log(0) = -inf, x/0 = +-inf.
  double eval_extended(std::span<const double> values) const;
  bool empty() const { return code_.empty(); }

 private:
  enum class Code : std::uint8_t { Const, Var, Add, Mul, Div, Log2, Ln, Pow, Neg };
  struct Instr {
    Code code;
    std::uint32_t a = 0;  // symbol id or operand count
    std::uint32_t b = 0;  // coefficient offset
    double value = 0.0;
  };
  void emit(const Expr& e, std::size_t depth);
  template <bool Strict>
  double run(std::span<const double> values) const;

  std::vector<Instr> code_;
  std::vector<double> coeffs_;
  std::size_t max_stack_ = 0;
};

}  // namespace cellos

#endif  // CELLOS_EXPR_HPP_
