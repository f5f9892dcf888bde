#include "qproc/serialize.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace qproc {

using nlohmann::json;

namespace {

json qseq_json(const QubitSeq& q) {
    json out = json::array();
    for (const auto& s : q.slots()) out.push_back(s ? *s : "*");
    return out;
}

json store_json(const ClassicalStore& store) {
    json out = json::object();
    for (const auto& [k, v] : store) out[k] = v;
    return out;
}

json amplitudes_json(const StateVector& psi) {
    json out = json::array();
    for (const auto& a : psi.amplitudes()) out.push_back(json::array({a.real(), a.imag()}));
    return out;
}

std::string fmt12(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return buf;
}

std::string dot_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
    return out;
}

void stack_key(const std::vector<EnvNode>& nodes, std::ostringstream& os) {
    os << '[';
    for (const auto& n : nodes) {
        if (n.is_fork) {
            os << "fork(";
            stack_key(n.left, os);
            os << '|';
            stack_key(n.right, os);
            os << ')';
        } else {
            os << '{';
            for (const auto& d : n.frame) os << d.name << (d.type == VarType::Nat ? ":N," : ":Q,");
            os << '}';
        }
    }
    os << ']';
}

} // namespace

json to_json(const Context& ctx, const RenderOptions& opts) {
    json out{{"qseq", qseq_json(ctx.qseq)}, {"store", store_json(ctx.store)}};
    if (opts.amplitudes) out["amplitudes"] = amplitudes_json(ctx.state);
    return out;
}

json to_json(const Label* label, const ExecState& state, const RenderOptions& opts) {
    json out;
    out["label"] = label ? json(to_string(*label)) : json(nullptr);
    out["prob"] = label && label->kind == Label::Kind::Prob ? json(label->probability) : json(nullptr);
    out["term"] = pretty_print(state.term);
    if (const auto* c = std::get_if<Context>(&state.ctx)) {
        json ctx = to_json(*c, opts);
        for (auto& [k, v] : ctx.items()) out[k] = v;
    } else {
        const auto& branches = std::get<ProbContext>(state.ctx).branches();
        json ctx = to_json(branches.front().ctx, opts);
        for (auto& [k, v] : ctx.items()) out[k] = v;
        json bs = json::array();
        for (const auto& b : branches) {
            json j = to_json(b.ctx, opts);
            j["prob"] = b.probability;
            j["observable"] = b.observable;
            j["eigenvalue"] = b.eigenvalue;
            bs.push_back(std::move(j));
        }
        out["branches"] = std::move(bs);
    }
    return out;
}

std::string trace_jsonl(const Trace& trace, const RenderOptions& opts) {
    std::string out = to_json(nullptr, trace.initial, opts).dump() + "\n";
    for (const auto& s : trace.steps) out += to_json(&s.label, s.next, opts).dump() + "\n";
    out += json{{"status", to_string(trace.status)}}.dump() + "\n";
    return out;
}

std::string trace_text(const Trace& trace) {
    std::string out = "       " + pretty_print(trace.initial.term) + "\n";
    for (const auto& s : trace.steps) {
        std::string l = to_string(s.label);
        if (l.size() < 6) l.resize(6, ' ');
        out += l + " " + pretty_print(s.next.term) + "\n";
    }
    out += "status: " + to_string(trace.status) + "\n";
    return out;
}

std::string tree_dot(const ExecutionTree& tree) {
    std::ostringstream os;
    os << "digraph execution {\n  node [shape=box, fontname=\"monospace\"];\n";
    for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
        const auto& n = tree.nodes[i];
        os << "  n" << i << " [label=\"" << dot_escape(pretty_print(n.state.term)) << "\"";
        if (n.truncated) os << ", style=dashed, xlabel=\"truncated\"";
        else if (!is_stable(n.state)) os << ", style=rounded";
        os << "];\n";
    }
    for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
        for (const auto& [label, child] : tree.nodes[i].edges) {
            os << "  n" << i << " -> n" << child << " [label=\"" << dot_escape(to_string(label)) << "\"";
            if (label.kind == Label::Kind::Prob) os << ", style=dotted";
            os << "];\n";
        }
    }
    os << "}\n";
    return os.str();
}

json tree_json(const ExecutionTree& tree, const RenderOptions& opts) {
    json nodes = json::array();
    json edges = json::array();
    for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
        const auto& n = tree.nodes[i];
        json j = to_json(nullptr, n.state, opts);
        j.erase("label");
        j.erase("prob");
        j["id"] = i;
        j["depth"] = n.depth;
        j["truncated"] = n.truncated;
        nodes.push_back(std::move(j));
        for (const auto& [label, child] : n.edges) {
            edges.push_back({{"from", i},
                             {"to", child},
                             {"label", to_string(label)},
                             {"prob", label.kind == Label::Kind::Prob ? json(label.probability) : json(nullptr)}});
        }
    }
    return json{{"truncated", tree.truncated}, {"nodes", std::move(nodes)}, {"edges", std::move(edges)}};
}

std::string distribution_text(const std::map<OutcomeKey, double>& dist) {
    std::string out;
    for (const auto& [key, p] : dist) out += to_string(key) + " = " + fmt12(p) + "\n";
    return out;
}

json distribution_json(const std::map<OutcomeKey, double>& dist) {
    json out = json::array();
    for (const auto& [key, p] : dist) {
        json outcome = json::array();
        for (const auto& [obs, v] : key) outcome.push_back({{"observable", obs}, {"value", v}});
        out.push_back({{"outcome", std::move(outcome)}, {"prob", std::stod(fmt12(p))}});
    }
    return out;
}

std::string state_key(const Context& ctx) {
    std::ostringstream os;
    stack_key(ctx.stack.nodes(), os);
    os << " q=";
    for (const auto& s : ctx.qseq.slots()) os << (s ? *s : "*") << ',';
    os << " f=";
    for (const auto& [k, v] : ctx.store) os << k << '=' << v << ',';
    os << " psi=";
    for (const auto& a : ctx.state.amplitudes()) {
        // Fixed point at 1e-9.
        os << std::llround(a.real() * 1e9) << ':' << std::llround(a.imag() * 1e9) << ',';
    }
    return os.str();
}

std::string state_key(const ExecState& state) {
    std::string out = pretty_print(state.term) + " / ";
    if (const auto* c = std::get_if<Context>(&state.ctx)) return out + state_key(*c);
    for (const auto& b : std::get<ProbContext>(state.ctx).branches()) {
        out += "<" + fmt12(b.probability) + " " + b.observable + "=" + std::to_string(b.eigenvalue) + " " +
               state_key(b.ctx) + ">";
    }
    return out;
}

} // namespace qproc
