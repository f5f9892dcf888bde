#include "qproc/semantics.hpp"

#include "qproc/error.hpp"

#include <cstdio>

namespace qproc {

Machine load_machine(const std::string& source, GateRegistry registry) {
    Program parsed = parse_program(source);
    Program program = elaborate(parsed, registry);
    return Machine{std::move(program), std::move(registry)};
}

Label Label::emit(std::string gate, std::uint64_t v) {
    Label l;
    l.kind = Kind::Emit;
    l.gate = std::move(gate);
    l.value = v;
    return l;
}

Label Label::receive(std::string gate, std::string var) {
    Label l;
    l.kind = Kind::Receive;
    l.gate = std::move(gate);
    l.var = std::move(var);
    return l;
}

Label Label::tau() { return Label{}; }

Label Label::delta() {
    Label l;
    l.kind = Kind::Delta;
    return l;
}

Label Label::decl() {
    Label l;
    l.kind = Kind::Decl;
    return l;
}

Label Label::prob(double p, std::string observable, std::int64_t eigenvalue) {
    Label l;
    l.kind = Kind::Prob;
    l.probability = p;
    l.observable = std::move(observable);
    l.eigenvalue = eigenvalue;
    return l;
}

std::string to_string(const Label& label) {
    switch (label.kind) {
    case Label::Kind::Emit: return label.gate + "!" + std::to_string(label.value);
    case Label::Kind::Receive: return label.gate + "?" + label.var;
    case Label::Kind::Tau: return "tau";
    case Label::Kind::Delta: return "delta";
    case Label::Kind::Decl: return "decl";
    case Label::Kind::Prob: {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.12g", label.probability);
        return "prob(" + std::string(buf) + ")";
    }
    }
    return {};
}

bool is_stable(const ExecState& state) { return is_stable(state.ctx); }

bool eval_cond(const Cond& cond, const ClassicalStore& store) {
    auto value = [&](const CondOperand& o) -> std::uint64_t {
        if (const auto* v = std::get_if<std::uint64_t>(&o)) return *v;
        const auto& name = std::get<std::string>(o);
        auto it = store.find(name);
        if (it == store.end()) throw ContextError("condition reads unset variable '" + name + "'");
        return it->second;
    };
    const std::uint64_t a = value(cond.lhs);
    const std::uint64_t b = value(cond.rhs);
    switch (cond.op) {
    case CompOp::Eq: return a == b;
    case CompOp::Ne: return a != b;
    case CompOp::Le: return a <= b;
    case CompOp::Ge: return a >= b;
    case CompOp::Lt: return a < b;
    case CompOp::Gt: return a > b;
    }
    return false;
}

// ---------------------------------------------------------------------------
// Unfolding

namespace {

/// Rename the names of `bound` that occur in `used` to fresh ones.
std::map<std::string, std::string> clash_renaming(const std::set<std::string>& bound, std::set<std::string> used) {
    std::map<std::string, std::string> renaming;
    for (const auto& name : bound) {
        if (!used.contains(name)) continue;
        std::string fresh = fresh_name(base_name(name), used);
        used.insert(fresh);
        renaming.emplace(name, std::move(fresh));
    }
    return renaming;
}

} // namespace

Term unfold(const ast::Invoke& invoke, const Program& program, const std::set<std::string>& used) {
    const Definition* def = program.find(invoke.name);
    if (!def) throw UnfoldError("unknown process '" + invoke.name + "'");

    if (invoke.args.empty()) {
        return rename_bound(def->body, clash_renaming(bound_variables(def->body), used));
    }

    const auto* scope = def->body.as<ast::Scope>();
    if (!scope || invoke.args.size() > scope->decls.size()) {
        throw UnfoldError("arity mismatch invoking '" + invoke.name + "' with " + std::to_string(invoke.args.size()) +
                          " argument(s)");
    }
    const std::size_t k = invoke.args.size();
    std::vector<VarDecl> rest(scope->decls.begin() + static_cast<std::ptrdiff_t>(k), scope->decls.end());

    std::set<std::string> bound = bound_variables(scope->body);
    for (const auto& d : rest) bound.insert(d.name);
    std::set<std::string> avoid = used;
    avoid.insert(invoke.args.begin(), invoke.args.end());
    const auto renaming = clash_renaming(bound, avoid);

    Term body = rename_bound(scope->body, renaming);
    for (auto& d : rest) {
        auto it = renaming.find(d.name);
        if (it != renaming.end()) d.name = it->second;
    }
    std::map<std::string, std::string> actuals;
    for (std::size_t i = 0; i < k; ++i) actuals.emplace(scope->decls[i].name, invoke.args[i]);
    body = substitute(body, actuals);

    if (rest.empty()) return body;
    return Term::scope(std::move(rest), body, def->body.pos());
}

namespace {

Term normalize_at(const Term& t, const Program& program, std::set<std::string>& used, int depth) {
    if (depth > kUnfoldLimit) throw UnfoldError("recursion limit exceeded while unfolding process invocations");
    return std::visit(
        [&](const auto& n) -> Term {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, ast::Invoke>) {
                Term body = unfold(n, program, used);
                auto names = variable_names(body);
                used.insert(names.begin(), names.end());
                return normalize_at(body, program, used, depth + 1);
            } else if constexpr (std::is_same_v<T, ast::Seq>) {
                Term first = normalize_at(n.first, program, used, depth);
                return first.same_node(n.first) ? t : Term::seq(first, n.second, t.pos());
            } else if constexpr (std::is_same_v<T, ast::Par>) {
                Term left = normalize_at(n.left, program, used, depth);
                Term right = normalize_at(n.right, program, used, depth);
                if (left.same_node(n.left) && right.same_node(n.right)) return t;
                return Term::par(left, right, t.pos());
            } else if constexpr (std::is_same_v<T, ast::Choice>) {
                bool changed = false;
                std::vector<std::pair<Cond, Term>> bs;
                for (const auto& [c, body] : n.branches) {
                    Term b = normalize_at(body, program, used, depth);
                    changed |= !b.same_node(body);
                    bs.emplace_back(c, b);
                }
                return changed ? Term::choice(std::move(bs), t.pos()) : t;
            } else if constexpr (std::is_same_v<T, ast::Restrict>) {
                Term body = normalize_at(n.body, program, used, depth);
                return body.same_node(n.body) ? t : Term::restrict(body, n.gates, t.pos());
            } else if constexpr (std::is_same_v<T, ast::Block>) {
                Term body = normalize_at(n.body, program, used, depth);
                return body.same_node(n.body) ? t : Term::block(body, t.pos());
            } else {
                return t;
            }
        },
        t.node().v);
}

void add_context_names(const Context& ctx, std::set<std::string>& out) {
    auto stack = ctx.stack.all_names();
    out.insert(stack.begin(), stack.end());
    for (const auto& s : ctx.qseq.slots())
        if (s) out.insert(*s);
    for (const auto& [k, v] : ctx.store) out.insert(k);
}

} // namespace

Term normalize(const Term& term, const Program& program, const std::set<std::string>& used) {
    std::set<std::string> names = used;
    return normalize_at(term, program, names, 0);
}

std::set<std::string> names_in_use(const ExecState& state) {
    std::set<std::string> out = variable_names(state.term);
    if (const auto* c = std::get_if<Context>(&state.ctx)) {
        add_context_names(*c, out);
    } else {
        for (const auto& b : std::get<ProbContext>(state.ctx).branches()) add_context_names(b.ctx, out);
    }
    return out;
}

ExecState initial_state(const Machine& machine, const std::string& entry) {
    if (!machine.program.find(entry)) throw UnfoldError("entry process '" + entry + "' is not defined");
    ExecState s{Term::invoke(entry, {}), Context{}};
    s.term = normalize(s.term, machine.program, names_in_use(s));
    return s;
}

// ---------------------------------------------------------------------------
// Rules

namespace {

struct RawStep {
    Label label;
    Term term;
    AnyContext ctx;
};

class Stepper {
public:
    Stepper(const Machine& m, const std::set<std::string>& used) : m_(m), used_(used) {}

    std::vector<RawStep> step(const Term& t, const Context& c) {
        return std::visit([&](const auto& n) { return rule(n, t, c); }, t.node().v);
    }

private:
    std::vector<RawStep> rule(const ast::Nil&, const Term&, const Context&) { return {}; }

    // end / C  --delta-->  nil / C      (C stable)
    std::vector<RawStep> rule(const ast::End&, const Term& t, const Context& c) {
        return {{Label::delta(), Term::nil(t.pos()), c}};
    }

    std::vector<RawStep> rule(const ast::Invoke& n, const Term&, const Context& c) {
        std::set<std::string> used = used_;
        add_context_names(c, used);
        return step(normalize(unfold(n, m_.program, used), m_.program, used), c);
    }

    std::vector<RawStep> rule(const ast::Prefix& n, const Term& t, const Context& c) {
        const Action& a = n.action;
        switch (a.kind) {
        case ActionKind::EmitValue: return {{Label::emit(a.gate, a.value), n.body, c}};
        case ActionKind::EmitVar: {
            if (!c.stack.type_of(a.var)) return {};
            auto it = c.store.find(a.var);
            if (it == c.store.end()) return {};
            return {{Label::emit(a.gate, it->second), n.body, c}};
        }
        case ActionKind::Receive: {
            auto type = c.stack.type_of(a.var);
            if (!type) return {};
            if (*type == VarType::Qubit && c.qseq.contains(a.var)) return {};
            return {{Label::receive(a.gate, a.var), n.body, c}};
        }
        case ActionKind::ApplyUnitary: {
            auto positions = target_positions(a.targets, c);
            if (!positions) return {};
            const UnitaryMatrix* u = m_.registry.find_unitary(a.op);
            if (!u) throw QuantumError("unknown unitary '" + a.op + "'");
            Context next = c;
            next.state = apply_unitary(c.state, *positions, *u);
            return {{Label::tau(), n.body, next}};
        }
        case ActionKind::MeasureOnly:
        case ActionKind::EmitMeasure: {
            auto positions = target_positions(a.targets, c);
            if (!positions) return {};
            const Observable* obs = m_.registry.find_observable(a.op);
            if (!obs) throw QuantumError("unknown observable '" + a.op + "'");
            const auto outcomes = measure(c.state, *positions, *obs);

            std::vector<ProbBranch> branches;
            if (a.kind == ActionKind::MeasureOnly) {
                for (const auto& o : outcomes) {
                    Context ci = c;
                    ci.state = o.post_state;
                    branches.push_back({o.probability, std::move(ci), obs->name, o.eigenvalue});
                }
                return {{Label::tau(), n.body, ProbContext(std::move(branches))}};
            }

            // g!M[x..].P  --tau-->  ([: g!y . end]) ; P  with y bound to the outcome
            std::set<std::string> used = used_;
            add_context_names(c, used);
            const std::string y = fresh_name("y", used);
            for (const auto& o : outcomes) {
                if (o.eigenvalue < 0) throw QuantumError("negative eigenvalue cannot be stored in a Nat variable");
                Context ci = declare(c, std::vector<VarDecl>{{y, VarType::Nat}});
                ci.state = o.post_state;
                ci.store[y] = static_cast<std::uint64_t>(o.eigenvalue);
                branches.push_back({o.probability, std::move(ci), obs->name, o.eigenvalue});
            }
            Term send = Term::block(Term::prefix(Action::emit_var(a.gate, y), Term::end(t.pos()), t.pos()), t.pos());
            return {{Label::tau(), Term::seq(send, n.body, t.pos()), ProbContext(std::move(branches))}};
        }
        }
        return {};
    }

    std::vector<RawStep> rule(const ast::Seq& n, const Term& t, const Context& c) {
        std::vector<RawStep> out;
        for (auto& s : step(n.first, c)) {
            if (s.label.kind == Label::Kind::Delta) {
                out.push_back({Label::tau(), n.second, std::move(s.ctx)});
            } else {
                out.push_back({std::move(s.label), Term::seq(s.term, n.second, t.pos()), std::move(s.ctx)});
            }
        }
        return out;
    }

    std::vector<RawStep> rule(const ast::Par& n, const Term& t, const Context& c) {
        const Context forked = c.stack.top_is_fork() ? c : fork(c);
        const Context left_view = view(forked, Side::Left);
        const Context right_view = view(forked, Side::Right);
        const auto left = step(n.left, left_view);
        const auto right = step(n.right, right_view);

        std::vector<RawStep> out;
        bool left_delta = false;
        bool right_delta = false;
        for (const auto& s : left) {
            if (s.label.kind == Label::Kind::Delta) {
                left_delta = true;
                continue;
            }
            out.push_back({s.label, Term::par(s.term, n.right, t.pos()), embed_any(forked, Side::Left, s.ctx)});
        }
        for (const auto& s : right) {
            if (s.label.kind == Label::Kind::Delta) {
                right_delta = true;
                continue;
            }
            out.push_back({s.label, Term::par(n.left, s.term, t.pos()), embed_any(forked, Side::Right, s.ctx)});
        }

        for (int direction = 0; direction < 2; ++direction) {
            const bool left_emits = direction == 0;
            const auto& emitters = left_emits ? left : right;
            const auto& receivers = left_emits ? right : left;
            for (const auto& e : emitters) {
                if (e.label.kind != Label::Kind::Emit) continue;
                for (const auto& r : receivers) {
                    if (r.label.kind != Label::Kind::Receive || r.label.gate != e.label.gate) continue;
                    const Context& ec = std::get<Context>(e.ctx);
                    const Context& rc = std::get<Context>(r.ctx);
                    auto next = communicate(forked, left_emits ? ec : rc, left_emits ? rc : ec, rc, r.label.var,
                                            e.label.value);
                    if (!next) continue;
                    Term lt = left_emits ? e.term : r.term;
                    Term rt = left_emits ? r.term : e.term;
                    out.push_back({Label::tau(), Term::par(lt, rt, t.pos()), std::move(*next)});
                }
            }
        }

        if (left_delta && right_delta) out.push_back({Label::delta(), Term::nil(t.pos()), join(forked)});
        return out;
    }

    std::vector<RawStep> rule(const ast::Choice& n, const Term&, const Context& c) {
        std::vector<RawStep> out;
        for (const auto& [cond, body] : n.branches) {
            bool enabled = false;
            try {
                enabled = eval_cond(cond, c.store);
            } catch (const ContextError&) {
                enabled = false;
            }
            if (!enabled) continue;
            for (auto& s : step(body, c)) out.push_back(std::move(s));
        }
        return out;
    }

    std::vector<RawStep> rule(const ast::Restrict& n, const Term& t, const Context& c) {
        std::vector<RawStep> out;
        for (auto& s : step(n.body, c)) {
            if (s.label.is_open() &&
                std::find(n.gates.begin(), n.gates.end(), s.label.gate) != n.gates.end()) {
                continue;
            }
            out.push_back({std::move(s.label), Term::restrict(s.term, n.gates, t.pos()), std::move(s.ctx)});
        }
        return out;
    }

    // [decls: P] / C  --decl-->  [: P] / C with a new frame
    std::vector<RawStep> rule(const ast::Scope& n, const Term& t, const Context& c) {
        return {{Label::decl(), Term::block(n.body, t.pos()), declare(c, n.decls)}};
    }

    std::vector<RawStep> rule(const ast::Block& n, const Term& t, const Context& c) {
        std::vector<RawStep> out;
        for (auto& s : step(n.body, c)) {
            if (s.label.kind == Label::Kind::Delta) {
                out.push_back({Label::delta(), Term::nil(t.pos()), release_scope(std::get<Context>(s.ctx))});
            } else {
                out.push_back({std::move(s.label), Term::block(s.term, t.pos()), std::move(s.ctx)});
            }
        }
        return out;
    }

    std::optional<std::vector<std::size_t>> target_positions(const std::vector<std::string>& targets,
                                                             const Context& c) const {
        std::vector<std::size_t> positions;
        for (const auto& x : targets) {
            if (c.stack.type_of(x) != VarType::Qubit) return std::nullopt;
            auto slot = c.qseq.find(x);
            if (!slot) return std::nullopt;
            positions.push_back(*slot);
        }
        return positions;
    }

    static AnyContext embed_any(const Context& forked, Side side, const AnyContext& stepped) {
        if (const auto* c = std::get_if<Context>(&stepped)) return embed(forked, side, *c);
        std::vector<ProbBranch> branches = std::get<ProbContext>(stepped).branches();
        for (auto& b : branches) b.ctx = embed(forked, side, b.ctx);
        return ProbContext(std::move(branches));
    }

    /// Synchronize an emit of `value` with a receive into `var`. The
    /// receiver's view decides the variable's type.
    static std::optional<Context> communicate(const Context& forked, const Context& left_stepped,
                                              const Context& right_stepped, const Context& receiver_view,
                                              const std::string& var, std::uint64_t value) {
        Context next = embed(embed(forked, Side::Left, left_stepped), Side::Right, right_stepped);
        next.qseq = forked.qseq;
        next.state = forked.state;
        next.store = forked.store;
        const auto type = receiver_view.stack.type_of(var);
        if (!type) return std::nullopt;
        if (*type == VarType::Nat) {
            next.store[var] = value;
            return next;
        }
        if (next.qseq.contains(var) || value > 1) return std::nullopt;
        next.qseq = next.qseq.prepend(var);
        next.state = init_qubit(next.state, static_cast<int>(value));
        return next;
    }

    const Machine& m_;
    const std::set<std::string>& used_;
};

} // namespace

std::vector<Step> transitions(const ExecState& state, const Machine& machine) {
    std::vector<Step> out;
    if (const auto* pc = std::get_if<ProbContext>(&state.ctx)) {
        for (const auto& b : pc->branches()) {
            out.push_back({Label::prob(b.probability, b.observable, b.eigenvalue), ExecState{state.term, b.ctx}});
        }
        return out;
    }

    const std::set<std::string> used = names_in_use(state);
    Stepper stepper(machine, used);
    for (auto& raw : stepper.step(state.term, std::get<Context>(state.ctx))) {
        ExecState next{std::move(raw.term), std::move(raw.ctx)};
        next.term = normalize(next.term, machine.program, names_in_use(next));
        out.push_back({std::move(raw.label), std::move(next)});
    }
    return out;
}

} // namespace qproc
