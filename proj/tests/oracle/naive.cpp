#include "oracle/naive.hpp"

#include "qproc/error.hpp"
#include "qproc/serialize.hpp"

#include <algorithm>
#include <cstdio>
#include <deque>
#include <functional>
#include <optional>

using namespace qproc;

namespace oracle {

namespace {

Dense to_dense(const Matrix& m) {
    Dense d = zeros(m.dim());
    for (std::size_t i = 0; i < m.dim(); ++i)
        for (std::size_t j = 0; j < m.dim(); ++j) d[i][j] = m(i, j);
    return d;
}

std::string prob_label(double p) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "prob(%.12g)", p);
    return buf;
}

void context_names(const Context& c, std::set<std::string>& out) {
    for (const auto& n : c.stack.all_names()) out.insert(n);
    for (const auto& s : c.qseq.slots())
        if (s) out.insert(*s);
    for (const auto& kv : c.store) out.insert(kv.first);
}

// A raw conclusion of a rule: label, residual term, resulting context.
struct Concl {
    std::string label;
    Term term;
    AnyContext ctx;
};

bool is_emit(const std::string& l) { return l.find('!') != std::string::npos; }
bool is_receive(const std::string& l) { return l.find('?') != std::string::npos; }
std::string gate_of(const std::string& l) { return l.substr(0, l.find_first_of("!?")); }
std::string payload_of(const std::string& l) { return l.substr(l.find_first_of("!?") + 1); }

class Rules {
public:
    Rules(const Machine& m, std::set<std::string> used) : m_(m), used_(std::move(used)) {}

    std::vector<Concl> derive(const Term& t, const Context& c) {
        std::vector<Concl> out;
        using Schema = std::function<void(const Term&, const Context&, std::vector<Concl>&)>;
        const std::vector<Schema> schemas = {
            [&](auto& a, auto& b, auto& o) { r_end(a, b, o); },
            [&](auto& a, auto& b, auto& o) { r_emit_value(a, b, o); },
            [&](auto& a, auto& b, auto& o) { r_emit_var(a, b, o); },
            [&](auto& a, auto& b, auto& o) { r_receive(a, b, o); },
            [&](auto& a, auto& b, auto& o) { r_unitary(a, b, o); },
            [&](auto& a, auto& b, auto& o) { r_measure(a, b, o); },
            [&](auto& a, auto& b, auto& o) { r_measure_send(a, b, o); },
            [&](auto& a, auto& b, auto& o) { r_seq(a, b, o); },
            [&](auto& a, auto& b, auto& o) { r_par(a, b, o); },
            [&](auto& a, auto& b, auto& o) { r_choice(a, b, o); },
            [&](auto& a, auto& b, auto& o) { r_restrict(a, b, o); },
            [&](auto& a, auto& b, auto& o) { r_decl(a, b, o); },
            [&](auto& a, auto& b, auto& o) { r_block(a, b, o); },
            [&](auto& a, auto& b, auto& o) { r_invoke(a, b, o); },
        };
        for (const auto& s : schemas) s(t, c, out);
        return out;
    }

private:
    void r_end(const Term& t, const Context& c, std::vector<Concl>& o) {
        if (t.is<ast::End>()) o.push_back({"delta", Term::nil(), c});
    }

    const ast::Prefix* prefix_of(const Term& t, ActionKind k) {
        const auto* p = t.as<ast::Prefix>();
        return p && p->action.kind == k ? p : nullptr;
    }

    void r_emit_value(const Term& t, const Context& c, std::vector<Concl>& o) {
        if (const auto* p = prefix_of(t, ActionKind::EmitValue))
            o.push_back({p->action.gate + "!" + std::to_string(p->action.value), p->body, c});
    }

    void r_emit_var(const Term& t, const Context& c, std::vector<Concl>& o) {
        const auto* p = prefix_of(t, ActionKind::EmitVar);
        if (!p || !c.stack.type_of(p->action.var) || !c.store.count(p->action.var)) return;
        o.push_back({p->action.gate + "!" + std::to_string(c.store.at(p->action.var)), p->body, c});
    }

    void r_receive(const Term& t, const Context& c, std::vector<Concl>& o) {
        const auto* p = prefix_of(t, ActionKind::Receive);
        if (!p) return;
        auto ty = c.stack.type_of(p->action.var);
        if (!ty) return;
        if (*ty == VarType::Qubit && c.qseq.find(p->action.var)) return;
        o.push_back({p->action.gate + "?" + p->action.var, p->body, c});
    }

    std::optional<std::vector<std::size_t>> slots(const std::vector<std::string>& xs, const Context& c) {
        std::vector<std::size_t> out;
        for (const auto& x : xs) {
            auto s = c.qseq.find(x);
            if (!s || c.stack.type_of(x) != VarType::Qubit) return std::nullopt;
            out.push_back(*s);
        }
        return out;
    }

    static std::vector<C> amps(const StateVector& s) { return s.amplitudes(); }

    void r_unitary(const Term& t, const Context& c, std::vector<Concl>& o) {
        const auto* p = prefix_of(t, ActionKind::ApplyUnitary);
        if (!p) return;
        auto pos = slots(p->action.targets, c);
        if (!pos) return;
        const Dense u = to_dense(m_.registry.find_unitary(p->action.op)->matrix);
        Context n = c;
        n.state = StateVector(c.state.width(), oracle::apply(lift(u, c.state.width(), *pos), amps(c.state)));
        o.push_back({"tau", p->body, n});
    }

    std::vector<ProbBranch> outcomes(const Observable& obs, const std::vector<std::size_t>& pos, const Context& c) {
        std::vector<ProbBranch> out;
        double total = 0;
        for (const auto& b : obs.branches) {
            Outcome r = project(to_dense(b.projector), c.state.width(), pos, amps(c.state));
            if (r.probability <= 1e-12) continue;
            Context n = c;
            n.state = StateVector(c.state.width(), r.post);
            out.push_back({r.probability, n, obs.name, b.eigenvalue});
            total += r.probability;
        }
        for (auto& b : out) b.probability /= total;
        return out;
    }

    void r_measure(const Term& t, const Context& c, std::vector<Concl>& o) {
        const auto* p = prefix_of(t, ActionKind::MeasureOnly);
        if (!p) return;
        auto pos = slots(p->action.targets, c);
        if (!pos) return;
        o.push_back({"tau", p->body, ProbContext(outcomes(*m_.registry.find_observable(p->action.op), *pos, c))});
    }

    void r_measure_send(const Term& t, const Context& c, std::vector<Concl>& o) {
        const auto* p = prefix_of(t, ActionKind::EmitMeasure);
        if (!p) return;
        auto pos = slots(p->action.targets, c);
        if (!pos) return;
        std::set<std::string> used = used_;
        context_names(c, used);
        const std::string y = fresh_name("y", used);
        auto bs = outcomes(*m_.registry.find_observable(p->action.op), *pos, c);
        for (auto& b : bs) {
            Context n = declare(c, std::vector<VarDecl>{{y, VarType::Nat}});
            n.state = b.ctx.state;
            n.store[y] = static_cast<std::uint64_t>(b.eigenvalue);
            b.ctx = n;
        }
        Term cont = Term::seq(Term::block(Term::prefix(Action::emit_var(p->action.gate, y), Term::end())), p->body);
        o.push_back({"tau", cont, ProbContext(bs)});
    }

    void r_seq(const Term& t, const Context& c, std::vector<Concl>& o) {
        const auto* s = t.as<ast::Seq>();
        if (!s) return;
        for (auto& r : derive(s->first, c)) {
            if (r.label == "delta") o.push_back({"tau", s->second, r.ctx});
            else o.push_back({r.label, Term::seq(r.term, s->second), r.ctx});
        }
    }

    static AnyContext put_back(const Context& f, Side side, const AnyContext& a) {
        if (auto* c = std::get_if<Context>(&a)) return embed(f, side, *c);
        auto bs = std::get<ProbContext>(a).branches();
        for (auto& b : bs) b.ctx = embed(f, side, b.ctx);
        return ProbContext(bs);
    }

    void r_par(const Term& t, const Context& c, std::vector<Concl>& o) {
        const auto* p = t.as<ast::Par>();
        if (!p) return;
        const Context f = c.stack.top_is_fork() ? c : fork(c);
        const auto ls = derive(p->left, view(f, Side::Left));
        const auto rs = derive(p->right, view(f, Side::Right));

        // interleaving
        for (const auto& l : ls)
            if (l.label != "delta") o.push_back({l.label, Term::par(l.term, p->right), put_back(f, Side::Left, l.ctx)});
        for (const auto& r : rs)
            if (r.label != "delta") o.push_back({r.label, Term::par(p->left, r.term), put_back(f, Side::Right, r.ctx)});

        // communication, in both directions
        for (const auto& l : ls)
            for (const auto& r : rs) {
                const bool lr = is_emit(l.label) && is_receive(r.label);
                const bool rl = is_receive(l.label) && is_emit(r.label);
                if (!(lr || rl) || gate_of(l.label) != gate_of(r.label)) continue;
                const Concl& em = lr ? l : r;
                const Concl& rc = lr ? r : l;
                const std::string x = payload_of(rc.label);
                const std::uint64_t v = std::stoull(payload_of(em.label));
                Context n = embed(embed(f, Side::Left, std::get<Context>(l.ctx)), Side::Right,
                                  std::get<Context>(r.ctx));
                n.qseq = c.qseq;
                n.state = c.state;
                n.store = c.store;
                const auto ty = std::get<Context>(rc.ctx).stack.type_of(x);
                if (*ty == VarType::Nat) {
                    n.store[x] = v;
                } else {
                    if (v > 1 || n.qseq.find(x)) continue;
                    std::vector<std::optional<std::string>> q{x};
                    for (const auto& s : n.qseq.slots()) q.push_back(s);
                    n.qseq = QubitSeq(q);
                    // |v> (x) psi via the dense oracle's tensor product.
                    Dense ket = zeros(2);
                    ket[0][0] = v == 0 ? 1.0 : 0.0;
                    ket[1][0] = v == 1 ? 1.0 : 0.0;
                    std::vector<C> a;
                    for (int bit = 0; bit < 2; ++bit)
                        for (const auto& z : n.state.amplitudes()) a.push_back(ket[bit][0] * z);
                    n.state = StateVector(n.state.width() + 1, a);
                }
                o.push_back({"tau", Term::par(l.term, r.term), n});
            }

        // synchronized termination
        for (const auto& l : ls)
            for (const auto& r : rs)
                if (l.label == "delta" && r.label == "delta") o.push_back({"delta", Term::nil(), join(f)});
    }

    static bool holds(const Cond& cd, const ClassicalStore& f) {
        auto val = [&](const CondOperand& x) -> std::optional<std::uint64_t> {
            if (x.index() == 1) return std::get<1>(x);
            auto it = f.find(std::get<0>(x));
            if (it == f.end()) return std::nullopt;
            return it->second;
        };
        auto a = val(cd.lhs), b = val(cd.rhs);
        if (!a || !b) return false;
        switch (cd.op) {
        case CompOp::Eq: return *a == *b;
        case CompOp::Ne: return *a != *b;
        case CompOp::Le: return *a <= *b;
        case CompOp::Ge: return *a >= *b;
        case CompOp::Lt: return *a < *b;
        case CompOp::Gt: return *a > *b;
        }
        return false;
    }

    void r_choice(const Term& t, const Context& c, std::vector<Concl>& o) {
        const auto* ch = t.as<ast::Choice>();
        if (!ch) return;
        for (const auto& [cd, body] : ch->branches)
            if (holds(cd, c.store))
                for (auto& r : derive(body, c)) o.push_back(r);
    }

    void r_restrict(const Term& t, const Context& c, std::vector<Concl>& o) {
        const auto* rs = t.as<ast::Restrict>();
        if (!rs) return;
        for (auto& r : derive(rs->body, c)) {
            const bool visible = is_emit(r.label) || is_receive(r.label);
            if (visible && std::count(rs->gates.begin(), rs->gates.end(), gate_of(r.label))) continue;
            o.push_back({r.label, Term::restrict(r.term, rs->gates), r.ctx});
        }
    }

    void r_decl(const Term& t, const Context& c, std::vector<Concl>& o) {
        if (const auto* s = t.as<ast::Scope>()) o.push_back({"decl", Term::block(s->body), declare(c, s->decls)});
    }

    void r_block(const Term& t, const Context& c, std::vector<Concl>& o) {
        const auto* b = t.as<ast::Block>();
        if (!b) return;
        for (auto& r : derive(b->body, c)) {
            if (r.label == "delta") o.push_back({"delta", Term::nil(), release_scope(std::get<Context>(r.ctx))});
            else o.push_back({r.label, Term::block(r.term), r.ctx});
        }
    }

    void r_invoke(const Term& t, const Context& c, std::vector<Concl>& o) {
        if (!t.is<ast::Invoke>()) return;
        std::set<std::string> used = used_;
        context_names(c, used);
        for (auto& r : derive(naive_normalize(t, m_, used), c)) o.push_back(r);
    }

    const Machine& m_;
    std::set<std::string> used_;
};

Term naive_unfold(const ast::Invoke& inv, const Machine& m, const std::set<std::string>& used) {
    const Definition* d = m.program.find(inv.name);
    if (!d) throw UnfoldError("unknown process " + inv.name);
    const auto* sc = d->body.as<ast::Scope>();
    const std::size_t k = inv.args.size();
    std::set<std::string> bound;
    std::vector<VarDecl> keep;
    Term body = d->body;
    if (k > 0) {
        keep.assign(sc->decls.begin() + k, sc->decls.end());
        body = sc->body;
    }
    bound = bound_variables(body);
    for (const auto& v : keep) bound.insert(v.name);
    std::set<std::string> avoid = used;
    for (const auto& a : inv.args) avoid.insert(a);
    std::map<std::string, std::string> ren;
    for (const auto& b : bound)
        if (avoid.count(b)) {
            ren[b] = fresh_name(base_name(b), avoid);
            avoid.insert(ren[b]);
        }
    body = rename_bound(body, ren);
    if (k == 0) return body;
    for (auto& v : keep)
        if (ren.count(v.name)) v.name = ren[v.name];
    std::map<std::string, std::string> sub;
    for (std::size_t i = 0; i < k; ++i) sub[sc->decls[i].name] = inv.args[i];
    body = substitute(body, sub);
    return keep.empty() ? body : Term::scope(keep, body);
}

Term norm(const Term& t, const Machine& m, std::set<std::string>& used, int fuel) {
    if (fuel > 256) throw UnfoldError("unfold limit");
    if (const auto* i = t.as<ast::Invoke>()) {
        Term b = naive_unfold(*i, m, used);
        for (const auto& n : variable_names(b)) used.insert(n);
        return norm(b, m, used, fuel + 1);
    }
    if (const auto* s = t.as<ast::Seq>()) return Term::seq(norm(s->first, m, used, fuel), s->second);
    if (const auto* p = t.as<ast::Par>()) {
        Term l = norm(p->left, m, used, fuel);
        return Term::par(l, norm(p->right, m, used, fuel));
    }
    if (const auto* c = t.as<ast::Choice>()) {
        std::vector<std::pair<Cond, Term>> bs;
        for (const auto& [cd, b] : c->branches) bs.emplace_back(cd, norm(b, m, used, fuel));
        return Term::choice(bs);
    }
    if (const auto* r = t.as<ast::Restrict>()) return Term::restrict(norm(r->body, m, used, fuel), r->gates);
    if (const auto* b = t.as<ast::Block>()) return Term::block(norm(b->body, m, used, fuel));
    return t;
}

std::string key(const NaiveState& s) { return state_key(ExecState{s.term, s.ctx}); }

} // namespace

Term naive_normalize(const Term& t, const Machine& m, std::set<std::string> used) { return norm(t, m, used, 0); }

std::set<std::string> naive_names(const NaiveState& s) {
    std::set<std::string> out = variable_names(s.term);
    if (auto* c = std::get_if<Context>(&s.ctx)) context_names(*c, out);
    else
        for (const auto& b : std::get<ProbContext>(s.ctx).branches()) context_names(b.ctx, out);
    return out;
}

std::vector<NaiveEdge> naive_step(const NaiveState& s, const Machine& m) {
    std::vector<NaiveEdge> out;
    if (auto* pc = std::get_if<ProbContext>(&s.ctx)) {
        for (const auto& b : pc->branches()) out.push_back({prob_label(b.probability), {s.term, b.ctx}});
        return out;
    }
    Rules rules(m, naive_names(s));
    for (auto& r : rules.derive(s.term, std::get<Context>(s.ctx))) {
        NaiveState n{r.term, r.ctx};
        n.term = naive_normalize(n.term, m, naive_names(n));
        out.push_back({r.label, n});
    }
    return out;
}

bool naive_lts(const Machine& m, const std::string& entry, std::size_t limit, Lts& out) {
    NaiveState init{Term::invoke(entry, {}), Context{}};
    init.term = naive_normalize(init.term, m, naive_names(init));
    std::deque<NaiveState> todo{init};
    out.clear();
    out[key(init)];
    while (!todo.empty()) {
        NaiveState s = todo.front();
        todo.pop_front();
        const std::string k = key(s);
        for (auto& e : naive_step(s, m)) {
            const std::string nk = key(e.next);
            out[k].insert({e.label, nk});
            if (!out.count(nk)) {
                if (out.size() >= limit) return false;
                out[nk];
                todo.push_back(e.next);
            }
        }
    }
    return true;
}

} // namespace oracle
