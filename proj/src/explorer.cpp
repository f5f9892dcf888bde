#include "qproc/explorer.hpp"

#include "qproc/error.hpp"

#include <cmath>
#include <deque>
#include <optional>
#include <random>

namespace qproc {

Policy parse_policy(const std::string& text) {
    if (text == "first") return Policy::First;
    if (text == "uniform") return Policy::Uniform;
    throw Error("unknown policy '" + text + "' (expected first or uniform)");
}

std::string to_string(Policy policy) { return policy == Policy::First ? "first" : "uniform"; }

std::string to_string(TraceStatus status) {
    switch (status) {
    case TraceStatus::Terminated: return "terminated";
    case TraceStatus::Stuck: return "stuck";
    case TraceStatus::Truncated: return "truncated";
    }
    return {};
}

std::string to_string(const OutcomeKey& key) {
    std::string out = "(";
    for (std::size_t i = 0; i < key.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(key[i].second);
    }
    return out + ")";
}

ExecutionTree build_tree(const ExecState& init, const Machine& machine, std::size_t maxDepth, std::size_t maxNodes) {
    if (maxDepth < 1 || maxNodes < 1) throw Error("tree limits must be at least 1");
    ExecutionTree tree;
    tree.nodes.push_back(TreeNode{init, 0, {}, false});
    std::deque<std::size_t> frontier{0};
    while (!frontier.empty()) {
        const std::size_t id = frontier.front();
        frontier.pop_front();
        auto steps = transitions(tree.nodes[id].state, machine);
        if (steps.empty()) continue;
        const std::size_t depth = tree.nodes[id].depth;
        if (depth >= maxDepth || tree.nodes.size() + steps.size() > maxNodes) {
            tree.nodes[id].truncated = true;
            tree.truncated = true;
            continue;
        }
        for (auto& s : steps) {
            const std::size_t child = tree.nodes.size();
            tree.nodes.push_back(TreeNode{std::move(s.next), depth + 1, {}, false});
            tree.nodes[id].edges.emplace_back(std::move(s.label), child);
            frontier.push_back(child);
        }
    }
    return tree;
}

Trace sample_trace(const ExecState& init, const Machine& machine, Policy policy, std::uint64_t seed,
                   std::size_t maxSteps, bool open) {
    std::mt19937_64 rng(seed);
    Trace trace{init, {}, TraceStatus::Stuck};
    ExecState current = init;
    while (true) {
        auto steps = transitions(current, machine);
        if (steps.empty()) {
            const bool done = !trace.steps.empty() && trace.steps.back().label.kind == Label::Kind::Delta &&
                              current.term.is<ast::Nil>();
            trace.status = done ? TraceStatus::Terminated : TraceStatus::Stuck;
            return trace;
        }
        if (trace.steps.size() >= maxSteps) {
            trace.status = TraceStatus::Truncated;
            return trace;
        }
        if (!open) {
            for (const auto& s : steps)
                if (s.label.is_open()) throw OpenActionError(to_string(s.label));
        }

        std::size_t pick = 0;
        if (!is_stable(current)) {
            const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
            double acc = 0.0;
            pick = steps.size() - 1;
            for (std::size_t i = 0; i < steps.size(); ++i) {
                acc += steps[i].label.probability;
                if (u < acc) {
                    pick = i;
                    break;
                }
            }
        } else if (policy == Policy::Uniform) {
            pick = static_cast<std::size_t>(rng() % steps.size());
        }
        current = steps[pick].next;
        trace.steps.push_back(std::move(steps[pick]));
    }
}

namespace {

struct DistWalk {
    const Machine& machine;
    Policy policy;
    std::size_t maxDepth;
    std::size_t maxNodes;
    std::size_t visited = 0;
    std::map<OutcomeKey, double> dist;

    void walk(const ExecState& state, double weight, OutcomeKey& key, std::size_t depth) {
        if (++visited > maxNodes) throw TruncatedError("distribution exceeds the node limit");
        const auto steps = transitions(state, machine);
        if (steps.empty()) {
            dist[key] += weight;
            return;
        }
        if (depth >= maxDepth) throw TruncatedError("distribution exceeds the depth limit");
        if (!is_stable(state)) {
            for (const auto& s : steps) {
                key.emplace_back(s.label.observable, s.label.eigenvalue);
                walk(s.next, weight * s.label.probability, key, depth + 1);
                key.pop_back();
            }
        } else if (policy == Policy::First) {
            walk(steps.front().next, weight, key, depth + 1);
        } else {
            const double share = weight / static_cast<double>(steps.size());
            for (const auto& s : steps) walk(s.next, share, key, depth + 1);
        }
    }
};

} // namespace

std::map<OutcomeKey, double> outcome_distribution(const ExecState& init, const Machine& machine, Policy policy,
                                                  std::size_t maxDepth, std::size_t maxNodes) {
    DistWalk w{machine, policy, maxDepth, maxNodes, 0, {}};
    OutcomeKey key;
    w.walk(init, 1.0, key, 0);
    return std::move(w.dist);
}

std::vector<std::pair<Trace, double>> leaf_traces(const ExecutionTree& tree) {
    std::vector<std::pair<Trace, double>> out;
    if (tree.nodes.empty()) return out;
    std::vector<Step> path;
    auto rec = [&](auto&& self, std::size_t id, double p) -> void {
        const TreeNode& n = tree.nodes[id];
        if (n.edges.empty()) {
            TraceStatus status = TraceStatus::Stuck;
            if (n.truncated) {
                status = TraceStatus::Truncated;
            } else if (!path.empty() && path.back().label.kind == Label::Kind::Delta && n.state.term.is<ast::Nil>()) {
                status = TraceStatus::Terminated;
            }
            out.emplace_back(Trace{tree.nodes[0].state, path, status}, p);
            return;
        }
        for (const auto& [label, child] : n.edges) {
            path.push_back(Step{label, tree.nodes[child].state});
            const double q = label.kind == Label::Kind::Prob ? p * label.probability : p;
            self(self, child, q);
            path.pop_back();
        }
    };
    rec(rec, 0, 1.0);
    return out;
}

namespace {

/// Offset of the named qubit counted from the tail of the register, which
/// does not change when later qubits are prepended.
std::optional<std::size_t> tail_offset(const Context& ctx, const std::string& name, bool by_base) {
    const auto& slots = ctx.qseq.slots();
    for (std::size_t i = 0; i < slots.size(); ++i) {
        if (!slots[i]) continue;
        if (*slots[i] == name || (by_base && base_name(*slots[i]) == name)) return slots.size() - 1 - i;
    }
    return std::nullopt;
}

std::optional<std::size_t> locate(const Trace& trace, const std::string& name, bool by_base) {
    auto in_state = [&](const ExecState& s) -> std::optional<std::size_t> {
        if (const auto* c = std::get_if<Context>(&s.ctx)) return tail_offset(*c, name, by_base);
        for (const auto& b : std::get<ProbContext>(s.ctx).branches())
            if (auto o = tail_offset(b.ctx, name, by_base)) return o;
        return std::nullopt;
    };
    for (auto it = trace.steps.rbegin(); it != trace.steps.rend(); ++it)
        if (auto o = in_state(it->next)) return o;
    return in_state(trace.initial);
}

} // namespace

std::pair<Complex, Complex> final_quantum_state(const Trace& trace, const std::string& name) {
    auto offset = locate(trace, name, false);
    if (!offset) offset = locate(trace, name, true);
    if (!offset) throw ContextError("qubit '" + name + "' never appears in the register");

    const auto* ctx = std::get_if<Context>(&trace.final_state().ctx);
    if (!ctx) throw ContextError("trace ends in a probabilistic context");
    const StateVector& psi = ctx->state;
    const std::size_t m = psi.width();
    if (*offset >= m) throw ContextError("qubit '" + name + "' lies outside the register");
    const std::size_t bit = *offset; // bit position within the basis index

    // Gram matrix G = A A^dagger of the 2 x 2^(m-1) reshaping A.
    Complex g00 = 0.0, g01 = 0.0, g11 = 0.0;
    const std::uint64_t mask = std::uint64_t{1} << bit;
    for (std::uint64_t b = 0; b < psi.size(); ++b) {
        if (b & mask) continue;
        const Complex a0 = psi[b];
        const Complex a1 = psi[b | mask];
        g00 += a0 * std::conj(a0);
        g01 += a0 * std::conj(a1);
        g11 += a1 * std::conj(a1);
    }
    const double a = g00.real();
    const double d = g11.real();
    const double half = 0.5 * (a - d);
    const double root = std::sqrt(half * half + std::norm(g01));
    const double lambda1 = 0.5 * (a + d) + root;

    Complex v0, v1;
    if (std::abs(g01) > 1e-15) {
        v0 = g01;
        v1 = lambda1 - a;
    } else if (a >= d) {
        v0 = 1.0;
        v1 = 0.0;
    } else {
        v0 = 0.0;
        v1 = 1.0;
    }
    const double n = std::sqrt(std::norm(v0) + std::norm(v1));
    v0 /= n;
    v1 /= n;

    // sqrt(lambda2), measured as the weight orthogonal to v; subtracting the
    // eigenvalues instead loses everything below ~1e-8.
    double rest = 0.0;
    for (std::uint64_t b = 0; b < psi.size(); ++b) {
        if (b & mask) continue;
        rest += std::norm(v0 * psi[b | mask] - v1 * psi[b]);
    }
    if (std::sqrt(rest) >= 1e-8) {
        throw NotSeparableError("qubit '" + name + "' is entangled with the rest of the register");
    }
    const Complex lead = std::abs(v0) > 1e-12 ? v0 : v1;
    const Complex phase = std::conj(lead) / std::abs(lead);
    return {v0 * phase, v1 * phase};
}

} // namespace qproc
