#include "qproc/syntax.hpp"

#include <algorithm>
#include <cctype>
#include <functional>
#include <sstream>

namespace qproc {

// ---------------------------------------------------------------------------
// Actions and terms

Action Action::emit_value(std::string gate, std::uint64_t v) {
    Action a;
    a.kind = ActionKind::EmitValue;
    a.gate = std::move(gate);
    a.value = v;
    return a;
}

Action Action::emit_var(std::string gate, std::string var) {
    Action a;
    a.kind = ActionKind::EmitVar;
    a.gate = std::move(gate);
    a.var = std::move(var);
    return a;
}

Action Action::emit_measure(std::string gate, std::string observable, std::vector<std::string> targets) {
    Action a;
    a.kind = ActionKind::EmitMeasure;
    a.gate = std::move(gate);
    a.op = std::move(observable);
    a.targets = std::move(targets);
    return a;
}

Action Action::receive(std::string gate, std::string var) {
    Action a;
    a.kind = ActionKind::Receive;
    a.gate = std::move(gate);
    a.var = std::move(var);
    return a;
}

Action Action::apply(std::string unitary, std::vector<std::string> targets) {
    Action a;
    a.kind = ActionKind::ApplyUnitary;
    a.op = std::move(unitary);
    a.targets = std::move(targets);
    return a;
}

Action Action::measure_only(std::string observable, std::vector<std::string> targets) {
    Action a;
    a.kind = ActionKind::MeasureOnly;
    a.op = std::move(observable);
    a.targets = std::move(targets);
    return a;
}

Term Term::nil(SourcePos pos) { return Term(std::make_shared<const Node>(Node{ast::Nil{}, pos})); }
Term Term::end(SourcePos pos) { return Term(std::make_shared<const Node>(Node{ast::End{}, pos})); }
Term Term::invoke(std::string name, std::vector<std::string> args, SourcePos pos) {
    return Term(std::make_shared<const Node>(Node{ast::Invoke{std::move(name), std::move(args)}, pos}));
}
Term Term::prefix(Action action, Term body, SourcePos pos) {
    return Term(std::make_shared<const Node>(Node{ast::Prefix{std::move(action), std::move(body)}, pos}));
}
Term Term::seq(Term first, Term second, SourcePos pos) {
    return Term(std::make_shared<const Node>(Node{ast::Seq{std::move(first), std::move(second)}, pos}));
}
Term Term::par(Term left, Term right, SourcePos pos) {
    return Term(std::make_shared<const Node>(Node{ast::Par{std::move(left), std::move(right)}, pos}));
}
Term Term::choice(std::vector<std::pair<Cond, Term>> branches, SourcePos pos) {
    return Term(std::make_shared<const Node>(Node{ast::Choice{std::move(branches)}, pos}));
}
Term Term::restrict(Term body, std::vector<std::string> gates, SourcePos pos) {
    return Term(std::make_shared<const Node>(Node{ast::Restrict{std::move(body), std::move(gates)}, pos}));
}
Term Term::scope(std::vector<VarDecl> decls, Term body, SourcePos pos) {
    return Term(std::make_shared<const Node>(Node{ast::Scope{std::move(decls), std::move(body)}, pos}));
}
Term Term::block(Term body, SourcePos pos) {
    return Term(std::make_shared<const Node>(Node{ast::Block{std::move(body)}, pos}));
}

SourcePos Term::pos() const { return node_ ? node_->pos : SourcePos{}; }

bool operator==(const Term& a, const Term& b) {
    if (a.node_ == b.node_) return true;
    if (!a.node_ || !b.node_) return false;
    if (a.node_->v.index() != b.node_->v.index()) return false;
    return std::visit(
        [&](const auto& x) -> bool {
            using T = std::decay_t<decltype(x)>;
            const T& y = std::get<T>(b.node_->v);
            if constexpr (std::is_same_v<T, ast::Nil> || std::is_same_v<T, ast::End>) {
                return true;
            } else if constexpr (std::is_same_v<T, ast::Invoke>) {
                return x.name == y.name && x.args == y.args;
            } else if constexpr (std::is_same_v<T, ast::Prefix>) {
                return x.action == y.action && x.body == y.body;
            } else if constexpr (std::is_same_v<T, ast::Seq>) {
                return x.first == y.first && x.second == y.second;
            } else if constexpr (std::is_same_v<T, ast::Par>) {
                return x.left == y.left && x.right == y.right;
            } else if constexpr (std::is_same_v<T, ast::Choice>) {
                return x.branches == y.branches;
            } else if constexpr (std::is_same_v<T, ast::Restrict>) {
                return x.body == y.body && x.gates == y.gates;
            } else if constexpr (std::is_same_v<T, ast::Scope>) {
                return x.decls == y.decls && x.body == y.body;
            } else {
                return x.body == y.body;
            }
        },
        a.node_->v);
}

std::vector<std::string> ast::Scope::classical_vars() const {
    std::vector<std::string> out;
    for (const auto& d : decls)
        if (d.type == VarType::Nat) out.push_back(d.name);
    return out;
}

std::vector<std::string> ast::Scope::quantum_vars() const {
    std::vector<std::string> out;
    for (const auto& d : decls)
        if (d.type == VarType::Qubit) out.push_back(d.name);
    return out;
}

std::vector<VarDecl> Definition::formals() const {
    if (const auto* s = body.as<ast::Scope>()) return s->decls;
    return {};
}

void Program::add(Definition def) {
    index_[def.name] = defs_.size();
    defs_.push_back(std::move(def));
}

const Definition* Program::find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : &defs_[it->second];
}

bool operator==(const Program& a, const Program& b) {
    if (a.defs_.size() != b.defs_.size()) return false;
    for (std::size_t i = 0; i < a.defs_.size(); ++i) {
        if (a.defs_[i].name != b.defs_[i].name || !(a.defs_[i].body == b.defs_[i].body)) return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// Lexer

namespace {

enum class Tok {
    Ident,
    Number,
    Dot,
    Semi,
    Par,      // ||
    Restrict, // |{
    LBrace,
    RBrace,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Box, // []
    Comma,
    Colon,
    Bang,
    Query,
    Eq,
    Ne,
    Le,
    Ge,
    Lt,
    Gt,
    Arrow,
    Eof,
};

struct Token {
    Tok kind = Tok::Eof;
    std::string text;
    SourcePos pos;
};

std::string describe(const Token& t) {
    switch (t.kind) {
    case Tok::Eof: return "end of input";
    case Tok::Ident: return "'" + t.text + "'";
    case Tok::Number: return "number " + t.text;
    default: return "'" + t.text + "'";
    }
}

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '#' || c == '~' || c == '\'';
}

std::vector<Token> lex(const std::string& src) {
    std::vector<Token> out;
    std::size_t i = 0, line = 1, col = 1;
    auto advance = [&](std::size_t n) {
        for (std::size_t k = 0; k < n; ++k) {
            if (src[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
            ++i;
        }
    };
    auto starts = [&](const char* s) { return src.compare(i, std::char_traits<char>::length(s), s) == 0; };

    while (i < src.size()) {
        const char c = src[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            advance(1);
            continue;
        }
        if (starts("--")) {
            while (i < src.size() && src[i] != '\n') advance(1);
            continue;
        }
        const SourcePos pos{line, col};
        if (ident_start(c)) {
            std::size_t j = i;
            while (j < src.size() && ident_char(src[j])) ++j;
            out.push_back({Tok::Ident, src.substr(i, j - i), pos});
            advance(j - i);
            continue;
        }
        if (std::isdigit(static_cast<unsigned char>(c))) {
            std::size_t j = i;
            while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
            if (j < src.size() && ident_start(src[j])) {
                throw SyntaxError(pos, "malformed number '" + src.substr(i, j - i + 1) + "'");
            }
            out.push_back({Tok::Number, src.substr(i, j - i), pos});
            advance(j - i);
            continue;
        }
        struct Fixed {
            const char* text;
            Tok kind;
        };
        static const Fixed fixed[] = {
            {"||", Tok::Par},      {"|{", Tok::Restrict}, {"[]", Tok::Box},     {"->", Tok::Arrow},
            {"!=", Tok::Ne},       {"<=", Tok::Le},       {">=", Tok::Ge},      {"\xE2\x89\xA0", Tok::Ne},
            {"\xE2\x89\xA4", Tok::Le}, {"\xE2\x89\xA5", Tok::Ge}, {".", Tok::Dot}, {";", Tok::Semi},
            {"{", Tok::LBrace},    {"}", Tok::RBrace},    {"(", Tok::LParen},   {")", Tok::RParen},
            {"[", Tok::LBracket},  {"]", Tok::RBracket},  {",", Tok::Comma},    {":", Tok::Colon},
            {"!", Tok::Bang},      {"?", Tok::Query},     {"=", Tok::Eq},       {"<", Tok::Lt},
            {">", Tok::Gt},
        };
        bool matched = false;
        for (const auto& f : fixed) {
            if (starts(f.text)) {
                out.push_back({f.kind, f.text, pos});
                advance(std::char_traits<char>::length(f.text));
                matched = true;
                break;
            }
        }
        if (!matched) {
            std::string shown(1, c);
            if (static_cast<unsigned char>(c) >= 0x80) shown = "non-ASCII character";
            throw SyntaxError(pos, "unknown token '" + shown + "'");
        }
    }
    out.push_back({Tok::Eof, "", {line, col}});
    return out;
}

bool is_keyword(const std::string& s) { return s == "nil" || s == "end" || s == "nat" || s == "qubit"; }

// ---------------------------------------------------------------------------
// Parser

class Parser {
public:
    explicit Parser(const std::string& text) : toks_(lex(text)) {}

    Program program() {
        Program prog;
        while (peek().kind != Tok::Eof) {
            const Token name = expect_name("process name");
            expect(Tok::Eq, "'=' after process name");
            Term body = process();
            if (prog.find(name.text)) throw SyntaxError(name.pos, "duplicate definition of '" + name.text + "'");
            prog.add({name.text, body, name.pos});
            if (peek().kind != Tok::Eof && peek().kind != Tok::Ident) {
                throw SyntaxError(peek().pos, "unexpected " + describe(peek()));
            }
        }
        return prog;
    }

    Term single() {
        Term t = process();
        if (peek().kind != Tok::Eof) throw SyntaxError(peek().pos, "unexpected " + describe(peek()));
        return t;
    }

private:
    const Token& peek(std::size_t ahead = 0) const {
        return toks_[std::min(pos_ + ahead, toks_.size() - 1)];
    }
    Token next() {
        Token t = peek();
        if (pos_ < toks_.size() - 1) ++pos_;
        return t;
    }
    bool accept(Tok k) {
        if (peek().kind != k) return false;
        next();
        return true;
    }
    Token expect(Tok k, const std::string& what) {
        if (peek().kind != k) throw SyntaxError(peek().pos, "expected " + what + ", got " + describe(peek()));
        return next();
    }
    Token expect_name(const std::string& what) {
        if (peek().kind != Tok::Ident || is_keyword(peek().text)) {
            throw SyntaxError(peek().pos, "expected " + what + ", got " + describe(peek()));
        }
        return next();
    }

    std::vector<std::string> name_list(const std::string& what) {
        std::vector<std::string> names;
        names.push_back(expect_name(what).text);
        while (accept(Tok::Comma)) names.push_back(expect_name(what).text);
        return names;
    }

    Term process() {
        const SourcePos pos = peek().pos;
        Term left = seq_term();
        if (accept(Tok::Par)) return Term::par(left, process(), pos);
        return left;
    }

    Term seq_term() {
        const SourcePos pos = peek().pos;
        Term first = prefix_term();
        if (accept(Tok::Semi)) return Term::seq(first, seq_term(), pos);
        return first;
    }

    Term prefix_term() {
        const Token& t = peek();
        if (t.kind != Tok::Ident || is_keyword(t.text)) return postfix(atom());

        const Token name = next();
        switch (peek().kind) {
        case Tok::Bang: {
            next();
            Action action;
            if (peek().kind == Tok::Number) {
                action = Action::emit_value(name.text, parse_number(next()));
            } else if (peek().kind == Tok::Ident && !is_keyword(peek().text)) {
                const Token what = next();
                if (accept(Tok::LBracket)) {
                    auto targets = name_list("qubit variable");
                    expect(Tok::RBracket, "']'");
                    action = Action::emit_measure(name.text, what.text, std::move(targets));
                } else {
                    action = Action::emit_var(name.text, what.text);
                }
            } else {
                throw SyntaxError(peek().pos, "expected value, variable or observable after '" + name.text +
                                                  "!', got " + describe(peek()));
            }
            expect(Tok::Dot, "'.' after action");
            return Term::prefix(std::move(action), prefix_term(), name.pos);
        }
        case Tok::Query: {
            next();
            const Token var = expect_name("variable after '?'");
            expect(Tok::Dot, "'.' after action");
            return Term::prefix(Action::receive(name.text, var.text), prefix_term(), name.pos);
        }
        case Tok::LBracket: {
            next();
            auto args = name_list("variable");
            expect(Tok::RBracket, "']'");
            if (accept(Tok::Dot)) {
                return Term::prefix(Action::apply(name.text, std::move(args)), prefix_term(), name.pos);
            }
            return postfix(Term::invoke(name.text, std::move(args), name.pos));
        }
        default:
            return postfix(Term::invoke(name.text, {}, name.pos));
        }
    }

    Term postfix(Term t) {
        while (peek().kind == Tok::Restrict) {
            const SourcePos pos = next().pos;
            auto gates = name_list("gate");
            expect(Tok::RBrace, "'}'");
            t = Term::restrict(t, std::move(gates), pos);
        }
        return t;
    }

    Term atom() {
        const Token t = peek();
        switch (t.kind) {
        case Tok::Ident:
            if (t.text == "nil") {
                next();
                return Term::nil(t.pos);
            }
            if (t.text == "end") {
                next();
                return Term::end(t.pos);
            }
            throw SyntaxError(t.pos, "unexpected keyword '" + t.text + "'");
        case Tok::LParen: {
            next();
            Term inner = process();
            expect(Tok::RParen, "')'");
            return inner;
        }
        case Tok::LBracket: return scope();
        case Tok::Box: return choice();
        default: throw SyntaxError(t.pos, "expected a process, got " + describe(t));
        }
    }

    Term scope() {
        const SourcePos pos = expect(Tok::LBracket, "'['").pos;
        if (accept(Tok::Colon)) {
            Term body = process();
            expect(Tok::RBracket, "']' closing the scope");
            return Term::block(body, pos);
        }
        std::vector<VarDecl> decls;
        do {
            const Token kw = peek();
            VarType type;
            if (kw.kind == Tok::Ident && kw.text == "nat") {
                type = VarType::Nat;
            } else if (kw.kind == Tok::Ident && kw.text == "qubit") {
                type = VarType::Qubit;
            } else {
                throw SyntaxError(kw.pos, "expected 'nat[' or 'qubit[' declaration, got " + describe(kw));
            }
            next();
            expect(Tok::LBracket, "'[' after '" + kw.text + "'");
            for (auto& n : name_list("variable")) decls.push_back({std::move(n), type});
            expect(Tok::RBracket, "']'");
        } while (peek().kind != Tok::Colon);
        expect(Tok::Colon, "':'");
        Term body = process();
        expect(Tok::RBracket, "']' closing the scope");
        return Term::scope(std::move(decls), body, pos);
    }

    Term choice() {
        const SourcePos pos = peek().pos;
        std::vector<std::pair<Cond, Term>> branches;
        while (accept(Tok::Box)) {
            Cond c;
            c.lhs = operand();
            switch (peek().kind) {
            case Tok::Eq: c.op = CompOp::Eq; break;
            case Tok::Ne: c.op = CompOp::Ne; break;
            case Tok::Le: c.op = CompOp::Le; break;
            case Tok::Ge: c.op = CompOp::Ge; break;
            case Tok::Lt: c.op = CompOp::Lt; break;
            case Tok::Gt: c.op = CompOp::Gt; break;
            default: throw SyntaxError(peek().pos, "expected comparison operator, got " + describe(peek()));
            }
            next();
            c.rhs = operand();
            expect(Tok::Arrow, "'->' after condition");
            branches.emplace_back(std::move(c), process());
        }
        return Term::choice(std::move(branches), pos);
    }

    CondOperand operand() {
        if (peek().kind == Tok::Number) return parse_number(next());
        return expect_name("variable or value").text;
    }

    static std::uint64_t parse_number(const Token& t) {
        try {
            std::size_t used = 0;
            auto v = std::stoull(t.text, &used);
            return v;
        } catch (const std::exception&) {
            throw SyntaxError(t.pos, "number out of range: " + t.text);
        }
    }

    std::vector<Token> toks_;
    std::size_t pos_ = 0;
};

} // namespace

Program parse_program(const std::string& text) { return Parser(text).program(); }

Term parse_term(const std::string& text) { return Parser(text).single(); }

// ---------------------------------------------------------------------------
// Printer

namespace {

enum Level { kPar = 0, kSeq = 1, kPrefix = 2, kAtom = 3 };

std::string join(const std::vector<std::string>& xs, const char* sep = ",") {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) out += sep;
        out += xs[i];
    }
    return out;
}

std::string operand_text(const CondOperand& o) {
    if (const auto* s = std::get_if<std::string>(&o)) return *s;
    return std::to_string(std::get<std::uint64_t>(o));
}

void print(std::ostringstream& out, const Term& t, int level) {
    auto open = [&](int mine) {
        if (level > mine) out << '(';
    };
    auto close = [&](int mine) {
        if (level > mine) out << ')';
    };
    std::visit(
        [&](const auto& n) {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, ast::Nil>) {
                out << "nil";
            } else if constexpr (std::is_same_v<T, ast::End>) {
                out << "end";
            } else if constexpr (std::is_same_v<T, ast::Invoke>) {
                out << n.name;
                if (!n.args.empty()) out << '[' << join(n.args) << ']';
            } else if constexpr (std::is_same_v<T, ast::Prefix>) {
                open(kPrefix);
                out << pretty_print(n.action) << " . ";
                print(out, n.body, kPrefix);
                close(kPrefix);
            } else if constexpr (std::is_same_v<T, ast::Seq>) {
                open(kSeq);
                print(out, n.first, kPrefix);
                out << " ; ";
                print(out, n.second, kSeq);
                close(kSeq);
            } else if constexpr (std::is_same_v<T, ast::Par>) {
                open(kPar);
                print(out, n.left, kSeq);
                out << " || ";
                print(out, n.right, kPar);
                close(kPar);
            } else if constexpr (std::is_same_v<T, ast::Choice>) {
                out << '(';
                for (std::size_t i = 0; i < n.branches.size(); ++i) {
                    if (i) out << ' ';
                    out << "[] " << pretty_print(n.branches[i].first) << " -> ";
                    print(out, n.branches[i].second, kPar);
                }
                out << ')';
            } else if constexpr (std::is_same_v<T, ast::Restrict>) {
                print(out, n.body, kAtom);
                out << " |{" << join(n.gates) << '}';
            } else if constexpr (std::is_same_v<T, ast::Scope>) {
                out << '[';
                // consecutive declarations of one type share a declarator
                for (std::size_t i = 0; i < n.decls.size();) {
                    if (i) out << ' ';
                    const VarType type = n.decls[i].type;
                    out << (type == VarType::Nat ? "nat[" : "qubit[");
                    std::size_t j = i;
                    for (; j < n.decls.size() && n.decls[j].type == type; ++j) {
                        if (j > i) out << ',';
                        out << n.decls[j].name;
                    }
                    out << ']';
                    i = j;
                }
                out << ": ";
                print(out, n.body, kPar);
                out << ']';
            } else {
                out << "[: ";
                print(out, n.body, kPar);
                out << ']';
            }
        },
        t.node().v);
}

} // namespace

std::string pretty_print(const Action& a) {
    switch (a.kind) {
    case ActionKind::EmitValue: return a.gate + "!" + std::to_string(a.value);
    case ActionKind::EmitVar: return a.gate + "!" + a.var;
    case ActionKind::EmitMeasure: return a.gate + "!" + a.op + "[" + join(a.targets) + "]";
    case ActionKind::Receive: return a.gate + "?" + a.var;
    case ActionKind::ApplyUnitary:
    case ActionKind::MeasureOnly: return a.op + "[" + join(a.targets) + "]";
    }
    return {};
}

std::string pretty_print(const Cond& c) {
    static const char* ops[] = {"=", "!=", "<=", ">=", "<", ">"};
    return operand_text(c.lhs) + ops[static_cast<int>(c.op)] + operand_text(c.rhs);
}

std::string pretty_print(const Term& term) {
    std::ostringstream out;
    print(out, term, kPar);
    return out.str();
}

std::string pretty_print(const Program& program) {
    std::string out;
    for (const auto& d : program.definitions()) out += d.name + " = " + pretty_print(d.body) + "\n";
    return out;
}

// ---------------------------------------------------------------------------
// Variable traversal and renaming

namespace {

void collect_variables(const Term& t, std::set<std::string>& out, bool bound_only) {
    std::visit(
        [&](const auto& n) {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, ast::Invoke>) {
                if (!bound_only) out.insert(n.args.begin(), n.args.end());
            } else if constexpr (std::is_same_v<T, ast::Prefix>) {
                if (!bound_only) {
                    if (!n.action.var.empty()) out.insert(n.action.var);
                    out.insert(n.action.targets.begin(), n.action.targets.end());
                }
                collect_variables(n.body, out, bound_only);
            } else if constexpr (std::is_same_v<T, ast::Seq>) {
                collect_variables(n.first, out, bound_only);
                collect_variables(n.second, out, bound_only);
            } else if constexpr (std::is_same_v<T, ast::Par>) {
                collect_variables(n.left, out, bound_only);
                collect_variables(n.right, out, bound_only);
            } else if constexpr (std::is_same_v<T, ast::Choice>) {
                for (const auto& [c, body] : n.branches) {
                    if (!bound_only) {
                        for (const auto* o : {&c.lhs, &c.rhs})
                            if (const auto* s = std::get_if<std::string>(o)) out.insert(*s);
                    }
                    collect_variables(body, out, bound_only);
                }
            } else if constexpr (std::is_same_v<T, ast::Restrict> || std::is_same_v<T, ast::Block>) {
                collect_variables(n.body, out, bound_only);
            } else if constexpr (std::is_same_v<T, ast::Scope>) {
                for (const auto& d : n.decls) out.insert(d.name);
                collect_variables(n.body, out, bound_only);
            }
        },
        t.node().v);
}

std::string mapped(const std::map<std::string, std::string>& m, const std::string& s) {
    auto it = m.find(s);
    return it == m.end() ? s : it->second;
}

CondOperand mapped(const std::map<std::string, std::string>& m, const CondOperand& o) {
    if (const auto* s = std::get_if<std::string>(&o)) return mapped(m, *s);
    return o;
}

/// Rewrites variable occurrences. With `rename_decls`, declarations in the
/// map are renamed too; otherwise a declaration shadows the mapping below it.
Term rewrite(const Term& t, const std::map<std::string, std::string>& m, bool rename_decls) {
    if (m.empty()) return t;
    return std::visit(
        [&](const auto& n) -> Term {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, ast::Nil> || std::is_same_v<T, ast::End>) {
                return t;
            } else if constexpr (std::is_same_v<T, ast::Invoke>) {
                std::vector<std::string> args;
                for (const auto& a : n.args) args.push_back(mapped(m, a));
                return Term::invoke(n.name, std::move(args), t.pos());
            } else if constexpr (std::is_same_v<T, ast::Prefix>) {
                Action a = n.action;
                if (!a.var.empty()) a.var = mapped(m, a.var);
                for (auto& x : a.targets) x = mapped(m, x);
                return Term::prefix(std::move(a), rewrite(n.body, m, rename_decls), t.pos());
            } else if constexpr (std::is_same_v<T, ast::Seq>) {
                return Term::seq(rewrite(n.first, m, rename_decls), rewrite(n.second, m, rename_decls), t.pos());
            } else if constexpr (std::is_same_v<T, ast::Par>) {
                return Term::par(rewrite(n.left, m, rename_decls), rewrite(n.right, m, rename_decls), t.pos());
            } else if constexpr (std::is_same_v<T, ast::Choice>) {
                std::vector<std::pair<Cond, Term>> bs;
                for (const auto& [c, body] : n.branches) {
                    Cond c2{mapped(m, c.lhs), c.op, mapped(m, c.rhs)};
                    bs.emplace_back(std::move(c2), rewrite(body, m, rename_decls));
                }
                return Term::choice(std::move(bs), t.pos());
            } else if constexpr (std::is_same_v<T, ast::Restrict>) {
                return Term::restrict(rewrite(n.body, m, rename_decls), n.gates, t.pos());
            } else if constexpr (std::is_same_v<T, ast::Block>) {
                return Term::block(rewrite(n.body, m, rename_decls), t.pos());
            } else {
                std::vector<VarDecl> decls = n.decls;
                if (rename_decls) {
                    for (auto& d : decls) d.name = mapped(m, d.name);
                    return Term::scope(std::move(decls), rewrite(n.body, m, rename_decls), t.pos());
                }
                auto inner = m;
                for (const auto& d : decls) inner.erase(d.name);
                return Term::scope(std::move(decls), rewrite(n.body, inner, rename_decls), t.pos());
            }
        },
        t.node().v);
}

} // namespace

std::set<std::string> bound_variables(const Term& term) {
    std::set<std::string> out;
    collect_variables(term, out, true);
    return out;
}

std::set<std::string> variable_names(const Term& term) {
    std::set<std::string> out;
    collect_variables(term, out, false);
    return out;
}

Term substitute(const Term& term, const std::map<std::string, std::string>& renaming) {
    return rewrite(term, renaming, false);
}

Term rename_bound(const Term& term, const std::map<std::string, std::string>& renaming) {
    return rewrite(term, renaming, true);
}

std::string base_name(const std::string& name) {
    auto cut = name.find_first_of("#~");
    return cut == std::string::npos ? name : name.substr(0, cut);
}

std::string fresh_name(const std::string& base, const std::set<std::string>& used) {
    for (std::size_t n = 0;; ++n) {
        std::string candidate = base + "~" + std::to_string(n);
        if (!used.contains(candidate)) return candidate;
    }
}

// ---------------------------------------------------------------------------
// Elaboration

namespace {

class Elaborator {
public:
    Elaborator(const Program& program, const GateRegistry& registry) : program_(program), registry_(registry) {}

    Program run() {
        count_declarations();
        Program out;
        for (const auto& def : program_.definitions()) {
            Term renamed = rename(def.body, {});
            out.add({def.name, renamed, def.pos});
        }
        for (auto& def : out.definitions()) def.body = check(def.body, {});
        out.gates = gates_;
        return out;
    }

private:
    void count_declarations() {
        std::function<void(const Term&)> walk = [&](const Term& t) {
            std::visit(
                [&](const auto& n) {
                    using T = std::decay_t<decltype(n)>;
                    if constexpr (std::is_same_v<T, ast::Scope>) {
                        std::set<std::string> here;
                        for (const auto& d : n.decls) {
                            if (!here.insert(d.name).second) {
                                throw ElaborationError(t.pos(), "variable '" + d.name +
                                                                    "' declared twice in one declaration list");
                            }
                            ++decl_count_[d.name];
                            all_names_.insert(d.name);
                        }
                        walk(n.body);
                    } else if constexpr (std::is_same_v<T, ast::Block>) {
                        throw ElaborationError(t.pos(), "empty declaration list");
                    } else if constexpr (std::is_same_v<T, ast::Prefix>) {
                        walk(n.body);
                    } else if constexpr (std::is_same_v<T, ast::Seq>) {
                        walk(n.first);
                        walk(n.second);
                    } else if constexpr (std::is_same_v<T, ast::Par>) {
                        walk(n.left);
                        walk(n.right);
                    } else if constexpr (std::is_same_v<T, ast::Choice>) {
                        for (const auto& b : n.branches) walk(b.second);
                    } else if constexpr (std::is_same_v<T, ast::Restrict>) {
                        walk(n.body);
                    }
                },
                t.node().v);
        };
        for (const auto& def : program_.definitions()) walk(def.body);
    }

    std::string unique_for(const std::string& name) {
        if (decl_count_[name] <= 1) return name;
        for (std::size_t k = ++suffix_[name];; k = ++suffix_[name]) {
            std::string candidate = name + "#" + std::to_string(k);
            if (!all_names_.contains(candidate)) {
                all_names_.insert(candidate);
                return candidate;
            }
        }
    }

    std::string resolve(const std::map<std::string, std::string>& env, const std::string& name, SourcePos pos) {
        auto it = env.find(name);
        if (it == env.end()) throw ElaborationError(pos, "use of undeclared variable '" + name + "'");
        return it->second;
    }

    Term rename(const Term& t, const std::map<std::string, std::string>& env) {
        return std::visit(
            [&](const auto& n) -> Term {
                using T = std::decay_t<decltype(n)>;
                if constexpr (std::is_same_v<T, ast::Nil> || std::is_same_v<T, ast::End>) {
                    return t;
                } else if constexpr (std::is_same_v<T, ast::Invoke>) {
                    std::vector<std::string> args;
                    for (const auto& a : n.args) args.push_back(resolve(env, a, t.pos()));
                    return Term::invoke(n.name, std::move(args), t.pos());
                } else if constexpr (std::is_same_v<T, ast::Prefix>) {
                    Action a = n.action;
                    if (!a.var.empty()) a.var = resolve(env, a.var, t.pos());
                    for (auto& x : a.targets) x = resolve(env, x, t.pos());
                    return Term::prefix(std::move(a), rename(n.body, env), t.pos());
                } else if constexpr (std::is_same_v<T, ast::Seq>) {
                    // left to right, so suffixes follow source order
                    Term first = rename(n.first, env);
                    return Term::seq(std::move(first), rename(n.second, env), t.pos());
                } else if constexpr (std::is_same_v<T, ast::Par>) {
                    Term left = rename(n.left, env);
                    return Term::par(std::move(left), rename(n.right, env), t.pos());
                } else if constexpr (std::is_same_v<T, ast::Choice>) {
                    std::vector<std::pair<Cond, Term>> bs;
                    for (const auto& [c, body] : n.branches) {
                        auto op = [&](const CondOperand& o) -> CondOperand {
                            if (const auto* s = std::get_if<std::string>(&o)) return resolve(env, *s, body.pos());
                            return o;
                        };
                        bs.emplace_back(Cond{op(c.lhs), c.op, op(c.rhs)}, rename(body, env));
                    }
                    return Term::choice(std::move(bs), t.pos());
                } else if constexpr (std::is_same_v<T, ast::Restrict>) {
                    return Term::restrict(rename(n.body, env), n.gates, t.pos());
                } else if constexpr (std::is_same_v<T, ast::Scope>) {
                    auto inner = env;
                    std::vector<VarDecl> decls;
                    for (const auto& d : n.decls) {
                        std::string fresh = unique_for(d.name);
                        inner[d.name] = fresh;
                        decls.push_back({fresh, d.type});
                    }
                    return Term::scope(std::move(decls), rename(n.body, inner), t.pos());
                } else {
                    return Term::block(rename(n.body, env), t.pos());
                }
            },
            t.node().v);
    }

    using TypeEnv = std::map<std::string, VarType>;

    VarType type_of(const TypeEnv& env, const std::string& name, SourcePos pos) const {
        auto it = env.find(name);
        if (it == env.end()) throw ElaborationError(pos, "use of undeclared variable '" + name + "'");
        return it->second;
    }

    void check_targets(const TypeEnv& env, const std::vector<std::string>& targets, std::size_t arity,
                       const std::string& op, SourcePos pos) const {
        std::set<std::string> seen;
        for (const auto& x : targets) {
            if (type_of(env, x, pos) != VarType::Qubit) {
                throw ElaborationError(pos, "'" + x + "' is not a qubit variable");
            }
            if (!seen.insert(x).second) throw ElaborationError(pos, "qubit '" + x + "' listed twice in " + op);
        }
        if (targets.size() != arity) {
            throw ElaborationError(pos, "arity mismatch: '" + op + "' acts on " + std::to_string(arity) +
                                            " qubit(s), given " + std::to_string(targets.size()));
        }
    }

    Term check(const Term& t, const TypeEnv& env) {
        // ApplyUnitary nodes naming an observable are rewritten in place
        Term result = std::visit(
            [&](const auto& n) -> Term {
                using T = std::decay_t<decltype(n)>;
                const SourcePos pos = t.pos();
                if constexpr (std::is_same_v<T, ast::Nil> || std::is_same_v<T, ast::End>) {
                    return t;
                } else if constexpr (std::is_same_v<T, ast::Invoke>) {
                    const Definition* def = program_.find(n.name);
                    if (!def) throw ElaborationError(pos, "unknown process '" + n.name + "'");
                    if (!n.args.empty()) {
                        const auto formals = def->formals();
                        if (n.args.size() > formals.size()) {
                            throw ElaborationError(pos, "arity mismatch: '" + n.name + "' declares " +
                                                            std::to_string(formals.size()) +
                                                            " leading variable(s), given " +
                                                            std::to_string(n.args.size()));
                        }
                        for (std::size_t i = 0; i < n.args.size(); ++i) {
                            if (type_of(env, n.args[i], pos) != formals[i].type) {
                                throw ElaborationError(pos, "argument '" + n.args[i] + "' of '" + n.name +
                                                                "' has the wrong type");
                            }
                        }
                    }
                    return t;
                } else if constexpr (std::is_same_v<T, ast::Prefix>) {
                    Action a = n.action;
                    switch (a.kind) {
                    case ActionKind::EmitValue: gates_.insert(a.gate); break;
                    case ActionKind::EmitVar:
                        gates_.insert(a.gate);
                        if (type_of(env, a.var, pos) != VarType::Nat) {
                            throw ElaborationError(pos, "cannot emit qubit variable '" + a.var + "'");
                        }
                        break;
                    case ActionKind::Receive:
                        gates_.insert(a.gate);
                        type_of(env, a.var, pos);
                        break;
                    case ActionKind::EmitMeasure:
                    case ActionKind::MeasureOnly: {
                        if (a.kind == ActionKind::EmitMeasure) gates_.insert(a.gate);
                        const Observable* obs = registry_.find_observable(a.op);
                        if (!obs) throw ElaborationError(pos, "unknown observable '" + a.op + "'");
                        check_targets(env, a.targets, obs->arity, a.op, pos);
                        break;
                    }
                    case ActionKind::ApplyUnitary: {
                        if (const UnitaryMatrix* u = registry_.find_unitary(a.op)) {
                            check_targets(env, a.targets, u->arity, a.op, pos);
                        } else if (const Observable* obs = registry_.find_observable(a.op)) {
                            check_targets(env, a.targets, obs->arity, a.op, pos);
                            a.kind = ActionKind::MeasureOnly;
                        } else {
                            throw ElaborationError(pos, "unknown unitary or observable '" + a.op + "'");
                        }
                        break;
                    }
                    }
                    return Term::prefix(std::move(a), check(n.body, env), pos);
                } else if constexpr (std::is_same_v<T, ast::Seq>) {
                    Term first = check(n.first, env);
                    return Term::seq(std::move(first), check(n.second, env), pos);
                } else if constexpr (std::is_same_v<T, ast::Par>) {
                    Term left = check(n.left, env);
                    return Term::par(std::move(left), check(n.right, env), pos);
                } else if constexpr (std::is_same_v<T, ast::Choice>) {
                    std::vector<std::pair<Cond, Term>> bs;
                    for (const auto& [c, body] : n.branches) {
                        for (const auto* o : {&c.lhs, &c.rhs}) {
                            if (const auto* s = std::get_if<std::string>(o)) {
                                if (type_of(env, *s, pos) != VarType::Nat) {
                                    throw ElaborationError(pos, "condition uses quantum variable '" + *s + "'");
                                }
                            }
                        }
                        bs.emplace_back(c, check(body, env));
                    }
                    return Term::choice(std::move(bs), pos);
                } else if constexpr (std::is_same_v<T, ast::Restrict>) {
                    gates_.insert(n.gates.begin(), n.gates.end());
                    return Term::restrict(check(n.body, env), n.gates, pos);
                } else if constexpr (std::is_same_v<T, ast::Scope>) {
                    auto inner = env;
                    for (const auto& d : n.decls) inner[d.name] = d.type;
                    return Term::scope(n.decls, check(n.body, inner), pos);
                } else {
                    throw ElaborationError(pos, "empty declaration list");
                }
            },
            t.node().v);
        return result;
    }

    const Program& program_;
    const GateRegistry& registry_;
    std::map<std::string, int> decl_count_;
    std::map<std::string, std::size_t> suffix_;
    std::set<std::string> all_names_;
    std::set<std::string> gates_;
};

} // namespace

Program elaborate(const Program& program, const GateRegistry& registry) {
    return Elaborator(program, registry).run();
}

} // namespace qproc
