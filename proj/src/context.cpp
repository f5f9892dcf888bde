#include "qproc/context.hpp"

#include "qproc/error.hpp"

#include <cmath>

namespace qproc {

namespace {

void collect_all(const std::vector<EnvNode>& nodes, std::set<std::string>& out) {
    for (const auto& n : nodes) {
        if (n.is_fork) {
            collect_all(n.left, out);
            collect_all(n.right, out);
        } else {
            for (const auto& b : n.frame) out.insert(b.name);
        }
    }
}

ClassicalStore drop(const ClassicalStore& store, const std::set<std::string>& names) {
    ClassicalStore out;
    for (const auto& [k, v] : store)
        if (!names.contains(k)) out.emplace(k, v);
    return out;
}

} // namespace

std::set<std::string> EnvStack::vars() const {
    std::set<std::string> out;
    for (const auto& n : nodes_)
        if (!n.is_fork)
            for (const auto& b : n.frame) out.insert(b.name);
    return out;
}

std::optional<VarType> EnvStack::type_of(const std::string& name) const {
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        if (it->is_fork) continue;
        for (const auto& b : it->frame)
            if (b.name == name) return b.type;
    }
    return std::nullopt;
}

std::set<std::string> EnvStack::all_names() const {
    std::set<std::string> out;
    collect_all(nodes_, out);
    return out;
}

EnvStack EnvStack::push_frame(std::vector<VarDecl> bindings) const {
    auto nodes = nodes_;
    nodes.push_back(EnvNode{false, std::move(bindings), {}, {}});
    return EnvStack(std::move(nodes));
}

EnvStack EnvStack::pop() const {
    if (nodes_.empty()) throw ContextError("environment stack underflow");
    auto nodes = nodes_;
    nodes.pop_back();
    return EnvStack(std::move(nodes));
}

std::optional<std::size_t> QubitSeq::find(const std::string& name) const {
    for (std::size_t i = 0; i < slots_.size(); ++i)
        if (slots_[i] && *slots_[i] == name) return i;
    return std::nullopt;
}

QubitSeq QubitSeq::prepend(const std::string& name) const {
    std::vector<std::optional<std::string>> slots;
    slots.reserve(slots_.size() + 1);
    slots.emplace_back(name);
    slots.insert(slots.end(), slots_.begin(), slots_.end());
    return QubitSeq(std::move(slots));
}

QubitSeq QubitSeq::star(const std::set<std::string>& names) const {
    auto slots = slots_;
    for (auto& s : slots)
        if (s && names.contains(*s)) s.reset();
    return QubitSeq(std::move(slots));
}

ProbContext::ProbContext(std::vector<ProbBranch> branches) : branches_(std::move(branches)) {
    if (branches_.empty()) throw ContextError("probabilistic context without branches");
    double total = 0.0;
    for (const auto& b : branches_) {
        if (!(b.probability > 0.0) || b.probability > 1.0 + kUnitTolerance) {
            throw ContextError("branch probability " + std::to_string(b.probability) + " outside (0,1]");
        }
        total += b.probability;
    }
    if (std::abs(total - 1.0) > kUnitTolerance) {
        throw ContextError("branch probabilities sum to " + std::to_string(total));
    }
}

AnyContext mixture(std::vector<ProbBranch> branches) {
    ProbContext pc(std::move(branches));
    if (pc.branches().size() == 1) return pc.branches().front().ctx;
    return pc;
}

bool is_stable(const AnyContext& ctx) { return std::holds_alternative<Context>(ctx); }

Context declare(const Context& ctx, const std::vector<std::string>& classical, const std::vector<std::string>& quantum) {
    std::vector<VarDecl> decls;
    for (const auto& x : classical) decls.push_back({x, VarType::Nat});
    for (const auto& y : quantum) decls.push_back({y, VarType::Qubit});
    return declare(ctx, decls);
}

Context declare(const Context& ctx, const std::vector<VarDecl>& decls) {
    Context out = ctx;
    out.stack = ctx.stack.push_frame(decls);
    return out;
}

Context release_scope(const Context& ctx) {
    const EnvNode* top = ctx.stack.top();
    if (!top || top->is_fork) throw ContextError("scope exit without an enclosing frame");
    std::set<std::string> names;
    for (const auto& b : top->frame) names.insert(b.name);
    Context out = ctx;
    out.stack = ctx.stack.pop();
    out.qseq = ctx.qseq.star(names);
    out.store = drop(ctx.store, names);
    return out;
}

Context fork(const Context& ctx) {
    auto nodes = ctx.stack.nodes();
    nodes.push_back(EnvNode{true, {}, {}, {}});
    Context out = ctx;
    out.stack = EnvStack(std::move(nodes));
    return out;
}

Context join(const Context& ctx) {
    const EnvNode* top = ctx.stack.top();
    if (!top || !top->is_fork) throw ContextError("join without a fork");
    std::set<std::string> names;
    collect_all(top->left, names);
    collect_all(top->right, names);
    Context out = ctx;
    out.stack = ctx.stack.pop();
    out.qseq = ctx.qseq.star(names);
    out.store = drop(ctx.store, names);
    return out;
}

Context view(const Context& forked, Side side) {
    const EnvNode* top = forked.stack.top();
    if (!top || !top->is_fork) throw ContextError("operand view of an unforked context");
    auto nodes = forked.stack.nodes();
    nodes.pop_back();
    const auto& branch = side == Side::Left ? top->left : top->right;
    nodes.insert(nodes.end(), branch.begin(), branch.end());
    Context out = forked;
    out.stack = EnvStack(std::move(nodes));
    return out;
}

Context embed(const Context& forked, Side side, const Context& stepped) {
    const auto& below = forked.stack.nodes();
    const std::size_t shared = below.size() - 1;
    const auto& after = stepped.stack.nodes();
    if (after.size() < shared) throw ContextError("operand removed variables shared with its sibling");
    for (std::size_t i = 0; i < shared; ++i) {
        if (!(after[i] == below[i])) throw ContextError("operand modified variables shared with its sibling");
    }
    EnvNode f = below.back();
    auto& branch = side == Side::Left ? f.left : f.right;
    branch.assign(after.begin() + static_cast<std::ptrdiff_t>(shared), after.end());

    std::vector<EnvNode> nodes(below.begin(), below.begin() + static_cast<std::ptrdiff_t>(shared));
    nodes.push_back(std::move(f));
    Context out = stepped;
    out.stack = EnvStack(std::move(nodes));
    return out;
}

Context init_qubit(const Context& ctx, const std::string& name, int bit) {
    if (ctx.stack.type_of(name) != VarType::Qubit) throw ContextError("'" + name + "' is not a declared qubit");
    if (ctx.qseq.contains(name)) throw ContextError("qubit '" + name + "' is already initialized");
    Context out = ctx;
    out.qseq = ctx.qseq.prepend(name);
    out.state = init_qubit(ctx.state, bit);
    return out;
}

Context set_classical(const Context& ctx, const std::string& name, std::uint64_t value) {
    auto type = ctx.stack.type_of(name);
    if (!type) throw ContextError("undeclared variable '" + name + "'");
    if (*type != VarType::Nat) throw ContextError("'" + name + "' is a qubit, not a Nat variable");
    Context out = ctx;
    out.store[name] = value;
    return out;
}

std::uint64_t get_value(const Context& ctx, const std::string& name) {
    auto it = ctx.store.find(name);
    if (it == ctx.store.end()) {
        if (!ctx.stack.type_of(name)) throw ContextError("undeclared variable '" + name + "'");
        throw ContextError("variable '" + name + "' is unset");
    }
    return it->second;
}

std::vector<std::size_t> qubit_positions(const Context& ctx, const std::vector<std::string>& names) {
    std::vector<std::size_t> out;
    for (const auto& n : names) {
        auto slot = ctx.qseq.find(n);
        if (!slot) throw ContextError("qubit '" + n + "' is not initialized");
        out.push_back(*slot);
    }
    return out;
}

} // namespace qproc
