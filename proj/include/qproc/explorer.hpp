#pragma once

// Execution trees, sampled runs and exact outcome distributions.

#include "qproc/semantics.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace qproc {

enum class Policy { First, Uniform };

Policy parse_policy(const std::string& text);
std::string to_string(Policy policy);

struct TreeNode {
    ExecState state;
    std::size_t depth = 0;
    /// (label, child index) in successor order.
    std::vector<std::pair<Label, std::size_t>> edges;
    /// Not expanded because a limit was hit.
    bool truncated = false;
    /// Expanded and found without successors.
    bool leaf() const { return !truncated && edges.empty(); }
};

struct ExecutionTree {
    /// nodes[0] is the root.
    std::vector<TreeNode> nodes;
    bool truncated = false;
};

/// Breadth-first expansion. Nodes at depth maxDepth, and nodes beyond
/// maxNodes, are kept unexpanded and marked truncated.
ExecutionTree build_tree(const ExecState& init, const Machine& machine, std::size_t maxDepth, std::size_t maxNodes);

enum class TraceStatus { Terminated, Stuck, Truncated };

std::string to_string(TraceStatus status);

struct Trace {
    ExecState initial;
    std::vector<Step> steps;
    TraceStatus status = TraceStatus::Stuck;

    const ExecState& final_state() const { return steps.empty() ? initial : steps.back().next; }
};

/// Terminated means the run reached nil after a Delta. In closed mode
/// (open = false) an Emit or Receive step raises OpenActionError.
Trace sample_trace(const ExecState& init, const Machine& machine, Policy policy, std::uint64_t seed,
                   std::size_t maxSteps, bool open = false);

/// Chronological (observable, eigenvalue) pairs of the measurements on a path.
using OutcomeKey = std::vector<std::pair<std::string, std::int64_t>>;

std::string to_string(const OutcomeKey& key);

/// Exact leaf probabilities with nondeterminism resolved by `policy`
/// (first: leftmost successor; uniform: equal weights). Throws
/// TruncatedError when the exploration hits a limit.
std::map<OutcomeKey, double> outcome_distribution(const ExecState& init, const Machine& machine, Policy policy,
                                                  std::size_t maxDepth = 10000, std::size_t maxNodes = 1000000);

/// One trace per leaf of a complete tree, in depth-first order, together
/// with the product of the Prob labels on its path.
std::vector<std::pair<Trace, double>> leaf_traces(const ExecutionTree& tree);

/// Amplitudes (a0, a1) of the named qubit at the end of the trace, with
/// the global phase fixed so that the first non-negligible amplitude is
/// real and positive. Throws NotSeparableError if the qubit is entangled
/// with the rest of the register.
std::pair<Complex, Complex> final_quantum_state(const Trace& trace, const std::string& name);

} // namespace qproc
