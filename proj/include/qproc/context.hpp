#pragma once

// Execution contexts <s, q = |psi>, f>.
//
// The environment stack s is a cactus stack: a list of nodes from the root
// upwards, where a node is either a frame of variable bindings or a fork
// holding the private stacks of the two operands of a parallel composition.
// A fork can only be the topmost node of a path. An operand sees the stack
// through a view: the nodes below the fork followed by its own branch.

#include "qproc/quantum.hpp"
#include "qproc/syntax.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

namespace qproc {

struct EnvNode {
    bool is_fork = false;
    std::vector<VarDecl> frame;
    std::vector<EnvNode> left;
    std::vector<EnvNode> right;

    friend bool operator==(const EnvNode&, const EnvNode&) = default;
};

class EnvStack {
public:
    EnvStack() = default;
    explicit EnvStack(std::vector<EnvNode> nodes) : nodes_(std::move(nodes)) {}

    const std::vector<EnvNode>& nodes() const { return nodes_; }
    bool empty() const { return nodes_.empty(); }
    const EnvNode* top() const { return nodes_.empty() ? nullptr : &nodes_.back(); }
    bool top_is_fork() const { return !nodes_.empty() && nodes_.back().is_fork; }
    bool top_is_frame() const { return !nodes_.empty() && !nodes_.back().is_fork; }

    /// Names visible from the current node: every frame on the path to the
    /// root. Branches of a fork are not on the path.
    std::set<std::string> vars() const;
    std::optional<VarType> type_of(const std::string& name) const;

    /// Every name bound anywhere in the cactus, including fork branches.
    std::set<std::string> all_names() const;

    EnvStack push_frame(std::vector<VarDecl> bindings) const;
    EnvStack pop() const;

    friend bool operator==(const EnvStack&, const EnvStack&) = default;

private:
    std::vector<EnvNode> nodes_;
};

/// Qubit-name sequence; std::nullopt marks a freed slot ("*").
class QubitSeq {
public:
    QubitSeq() = default;
    explicit QubitSeq(std::vector<std::optional<std::string>> slots) : slots_(std::move(slots)) {}

    const std::vector<std::optional<std::string>>& slots() const { return slots_; }
    std::size_t size() const { return slots_.size(); }
    std::optional<std::size_t> find(const std::string& name) const;
    bool contains(const std::string& name) const { return find(name).has_value(); }

    /// name . q
    QubitSeq prepend(const std::string& name) const;
    /// q[names <- *]
    QubitSeq star(const std::set<std::string>& names) const;

    friend bool operator==(const QubitSeq&, const QubitSeq&) = default;

private:
    std::vector<std::optional<std::string>> slots_;
};

using ClassicalStore = std::map<std::string, std::uint64_t>;

struct Context {
    EnvStack stack;
    QubitSeq qseq;
    StateVector state;
    ClassicalStore store;

    friend bool operator==(const Context&, const Context&) = default;
};

struct ProbBranch {
    double probability = 0.0;
    Context ctx;
    /// Measurement that produced this branch.
    std::string observable;
    std::int64_t eigenvalue = 0;
};

/// Probabilistic composition of contexts. Always at least one branch;
/// probabilities sum to 1.
class ProbContext {
public:
    explicit ProbContext(std::vector<ProbBranch> branches);
    const std::vector<ProbBranch>& branches() const { return branches_; }

private:
    std::vector<ProbBranch> branches_;
};

using AnyContext = std::variant<Context, ProbContext>;

/// Builds a probabilistic context, collapsing a single certain branch into
/// the plain context it holds.
AnyContext mixture(std::vector<ProbBranch> branches);

bool is_stable(const AnyContext& ctx);

Context declare(const Context& ctx, const std::vector<std::string>& classical, const std::vector<std::string>& quantum);
Context declare(const Context& ctx, const std::vector<VarDecl>& decls);

/// Pop the topmost frame, star its qubits and drop its classical values.
/// The state vector is untouched.
Context release_scope(const Context& ctx);

/// Push a fork with two empty branches.
Context fork(const Context& ctx);

/// Discard the topmost fork, starring every qubit and dropping every
/// classical value bound in either branch.
Context join(const Context& ctx);

enum class Side { Left, Right };

/// Operand view of a forked context: s_P . s (or s_Q . s).
Context view(const Context& forked, Side side);

/// Put a stepped operand view back under its fork. Throws ContextError if
/// the step changed the stack below the fork.
Context embed(const Context& forked, Side side, const Context& stepped);

/// Initialize an undeclared-in-q qubit to |bit> at the head of the register.
Context init_qubit(const Context& ctx, const std::string& name, int bit);

Context set_classical(const Context& ctx, const std::string& name, std::uint64_t value);
std::uint64_t get_value(const Context& ctx, const std::string& name);

/// Register slots of the named qubits, in order. Throws ContextError if a
/// name is not an initialized qubit.
std::vector<std::size_t> qubit_positions(const Context& ctx, const std::vector<std::string>& names);

} // namespace qproc
