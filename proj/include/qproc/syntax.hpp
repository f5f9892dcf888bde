#pragma once

// Process terms of the quantum process algebra, their concrete ASCII syntax
// and elaboration.
//
// Concrete syntax (tightest binding first):
//
//   action . P          prefix
//   P ; Q               sequence (right associative)
//   P || Q              parallel (right associative)
//   atom |{g1,g2}       restriction, postfix on an atom
//
//   atom   ::= nil | end | Name | Name[x,...] | ( P ) | [ decls : P ] | choice
//   decls  ::= { nat[x,...] | qubit[x,...] }+
//   choice ::= { [] cond -> P }+          branches extend to the enclosing ) or ]
//   action ::= g!n | g!x | g!M[x,...] | g?x | U[x,...] | M[x,...]
//
// "[: P]" is the running form of a scope whose variables are already on the
// environment stack. Comments run from "--" to the end of the line.

#include "qproc/error.hpp"
#include "qproc/quantum.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

namespace qproc {

enum class VarType { Nat, Qubit };

struct VarDecl {
    std::string name;
    VarType type = VarType::Nat;
    friend bool operator==(const VarDecl&, const VarDecl&) = default;
};

enum class ActionKind {
    EmitValue,   ///< g!v
    EmitVar,     ///< g!x
    EmitMeasure, ///< g!M[x,...]
    Receive,     ///< g?x
    ApplyUnitary,
    MeasureOnly,
};

struct Action {
    ActionKind kind = ActionKind::EmitValue;
    std::string gate;
    std::uint64_t value = 0;
    std::string var;
    /// Unitary or observable name.
    std::string op;
    std::vector<std::string> targets;

    static Action emit_value(std::string gate, std::uint64_t v);
    static Action emit_var(std::string gate, std::string var);
    static Action emit_measure(std::string gate, std::string observable, std::vector<std::string> targets);
    static Action receive(std::string gate, std::string var);
    static Action apply(std::string unitary, std::vector<std::string> targets);
    static Action measure_only(std::string observable, std::vector<std::string> targets);

    friend bool operator==(const Action&, const Action&) = default;
};

enum class CompOp { Eq, Ne, Le, Ge, Lt, Gt };

/// Variable name or natural literal.
using CondOperand = std::variant<std::string, std::uint64_t>;

struct Cond {
    CondOperand lhs;
    CompOp op = CompOp::Eq;
    CondOperand rhs;
    friend bool operator==(const Cond&, const Cond&) = default;
};

class Term;

namespace ast {

struct Nil {};
struct End {};
struct Invoke {
    std::string name;
    std::vector<std::string> args;
};
struct Prefix;
struct Seq;
struct Par;
struct Choice;
struct Restrict;
struct Scope;
struct Block;

} // namespace ast

/// Immutable, shared process term. Copying a Term copies a pointer.
class Term {
public:
    struct Node;

    Term() = default;

    static Term nil(SourcePos pos = {});
    static Term end(SourcePos pos = {});
    static Term invoke(std::string name, std::vector<std::string> args, SourcePos pos = {});
    static Term prefix(Action action, Term body, SourcePos pos = {});
    static Term seq(Term first, Term second, SourcePos pos = {});
    static Term par(Term left, Term right, SourcePos pos = {});
    static Term choice(std::vector<std::pair<Cond, Term>> branches, SourcePos pos = {});
    static Term restrict(Term body, std::vector<std::string> gates, SourcePos pos = {});
    static Term scope(std::vector<VarDecl> decls, Term body, SourcePos pos = {});
    /// Running scope "[: P]".
    static Term block(Term body, SourcePos pos = {});

    explicit operator bool() const { return node_ != nullptr; }

    template <class T>
    const T* as() const;
    template <class T>
    bool is() const {
        return as<T>() != nullptr;
    }

    SourcePos pos() const;
    const Node& node() const { return *node_; }
    bool same_node(const Term& other) const { return node_ == other.node_; }

    /// Structural equality, ignoring source positions.
    friend bool operator==(const Term& a, const Term& b);

private:
    explicit Term(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
    std::shared_ptr<const Node> node_;
};

namespace ast {

struct Prefix {
    Action action;
    Term body;
};
struct Seq {
    Term first;
    Term second;
};
struct Par {
    Term left;
    Term right;
};
struct Choice {
    std::vector<std::pair<Cond, Term>> branches;
};
struct Restrict {
    Term body;
    std::vector<std::string> gates;
};
struct Scope {
    std::vector<VarDecl> decls;
    Term body;

    std::vector<std::string> classical_vars() const;
    std::vector<std::string> quantum_vars() const;
};
struct Block {
    Term body;
};

} // namespace ast

struct Term::Node {
    std::variant<ast::Nil, ast::End, ast::Invoke, ast::Prefix, ast::Seq, ast::Par, ast::Choice, ast::Restrict,
                 ast::Scope, ast::Block>
        v;
    SourcePos pos;
};

template <class T>
const T* Term::as() const {
    return node_ ? std::get_if<T>(&node_->v) : nullptr;
}

struct Definition {
    std::string name;
    Term body;
    SourcePos pos;

    /// Declarations of the leading scope, the formal parameters of a
    /// parameterized invocation. Empty if the body is not a scope.
    std::vector<VarDecl> formals() const;
};

class Program {
public:
    void add(Definition def);
    const Definition* find(const std::string& name) const;
    const std::vector<Definition>& definitions() const { return defs_; }
    std::vector<Definition>& definitions() { return defs_; }

    /// Gates seen during elaboration.
    std::set<std::string> gates;

    friend bool operator==(const Program& a, const Program& b);

private:
    std::vector<Definition> defs_;
    std::map<std::string, std::size_t> index_;
};

Program parse_program(const std::string& text);

/// Parse a single process term (no "Name =" header).
Term parse_term(const std::string& text);

/// Classify identifiers against the registry, check arities and
/// declarations, and rename bound variables to be unique program-wide.
/// Returns a new program; the input is unchanged.
Program elaborate(const Program& program, const GateRegistry& registry);

std::string pretty_print(const Term& term);
std::string pretty_print(const Action& action);
std::string pretty_print(const Cond& cond);
std::string pretty_print(const Program& program);

/// Names of variables declared anywhere inside the term.
std::set<std::string> bound_variables(const Term& term);

/// Every variable name occurring in the term, bound or free. Gates,
/// operators and process names are not included.
std::set<std::string> variable_names(const Term& term);

/// Capture-free replacement of free variable names.
Term substitute(const Term& term, const std::map<std::string, std::string>& renaming);

/// Rename declared variables (and their uses) according to the map.
Term rename_bound(const Term& term, const std::map<std::string, std::string>& renaming);

/// Strip "#n" and "~n" disambiguation suffixes.
std::string base_name(const std::string& name);

/// base~n for the least n such that the result is not in `used`.
std::string fresh_name(const std::string& base, const std::set<std::string>& used);

} // namespace qproc
