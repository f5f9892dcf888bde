#pragma once

// Small-step transition relation over process states P / C.

#include "qproc/context.hpp"
#include "qproc/quantum.hpp"
#include "qproc/syntax.hpp"

#include <cstdint>
#include <set>
#include <string>
#include <vector>

namespace qproc {

/// An elaborated program together with the gates it was elaborated against.
struct Machine {
    Program program;
    GateRegistry registry;
};

/// Parse, elaborate and bundle. Throws SyntaxError / ElaborationError.
Machine load_machine(const std::string& source, GateRegistry registry = GateRegistry::builtins());

struct Label {
    enum class Kind { Emit, Receive, Tau, Delta, Decl, Prob };

    Kind kind = Kind::Tau;
    std::string gate;
    std::uint64_t value = 0;
    std::string var;
    double probability = 0.0;
    /// Outcome behind a Prob transition.
    std::string observable;
    std::int64_t eigenvalue = 0;

    static Label emit(std::string gate, std::uint64_t v);
    static Label receive(std::string gate, std::string var);
    static Label tau();
    static Label delta();
    static Label decl();
    static Label prob(double p, std::string observable, std::int64_t eigenvalue);

    bool is_open() const { return kind == Kind::Emit || kind == Kind::Receive; }

    friend bool operator==(const Label&, const Label&) = default;
};

std::string to_string(const Label& label);

struct ExecState {
    Term term;
    AnyContext ctx;
};

bool is_stable(const ExecState& state);

struct Step {
    Label label;
    ExecState next;
};

/// Integer comparison. Throws ContextError if a variable is unset.
bool eval_cond(const Cond& cond, const ClassicalStore& store);

/// Maximum number of consecutive unfoldings at one position.
inline constexpr int kUnfoldLimit = 256;

/// Body of the invoked definition. Actuals replace the first k declared
/// variables of the body's leading scope, whose declarations are dropped.
/// Bound names that clash with `used` are renamed to fresh ones.
Term unfold(const ast::Invoke& invoke, const Program& program, const std::set<std::string>& used);

/// Unfold every invocation in an active position (anything that could take
/// the next step), until none remains. Throws UnfoldError past kUnfoldLimit.
Term normalize(const Term& term, const Program& program, const std::set<std::string>& used);

/// Every variable name occurring in the term or the context.
std::set<std::string> names_in_use(const ExecState& state);

/// Entry process in the empty context.
ExecState initial_state(const Machine& machine, const std::string& entry = "Main");

/// All rule instances applicable to `state`, in a fixed syntactic order.
/// An unstable context admits only its probabilistic transitions.
std::vector<Step> transitions(const ExecState& state, const Machine& machine);

} // namespace qproc
