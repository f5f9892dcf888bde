#include "support.hpp"

#include "qproc/error.hpp"
#include "qproc/syntax.hpp"

#include <doctest.h>

using namespace qproc;

namespace {

const char* kBuildEpr = "[qubit[x,y]: ((g1?x . g2?y . H[x] . CNot[x,y] . end) || (g1!0 . g2!0 . end)) |{g1,g2} ]";

} // namespace

TEST_CASE("smallest emit program") {
    auto p = parse_program("P = g!0 . end");
    REQUIRE(p.find("P"));
    const Term& body = p.find("P")->body;
    REQUIRE(body.is<ast::Prefix>());
    CHECK(body.as<ast::Prefix>()->action == Action::emit_value("g", 0));
    CHECK(body.as<ast::Prefix>()->body.is<ast::End>());
}

TEST_CASE("BuildEPR shape") {
    Term t = parse_term(kBuildEpr);
    const auto* scope = t.as<ast::Scope>();
    REQUIRE(scope);
    CHECK(scope->classical_vars().empty());
    CHECK(scope->quantum_vars() == std::vector<std::string>{"x", "y"});
    const auto* r = scope->body.as<ast::Restrict>();
    REQUIRE(r);
    CHECK(r->gates == std::vector<std::string>{"g1", "g2"});
    const auto* par = r->body.as<ast::Par>();
    REQUIRE(par);
    const auto* first = par->left.as<ast::Prefix>();
    REQUIRE(first);
    CHECK(first->action == Action::receive("g1", "x"));
}

TEST_CASE("syntax errors carry positions") {
    try {
        parse_program("P = g!");
        FAIL("expected a syntax error");
    } catch (const SyntaxError& e) {
        CHECK(e.pos().line == 1);
        CHECK(e.pos().col == 7);
        CHECK(e.format("f.qp").rfind("f.qp:1:7: ", 0) == 0);
    }
    CHECK_THROWS_AS(parse_program("P = end\nP = nil"), SyntaxError);
    CHECK_THROWS_AS(parse_program("P = end $"), SyntaxError);
    CHECK_THROWS_AS(parse_program("P = (end"), SyntaxError);
    CHECK_THROWS_AS(parse_program("P = [: end]x"), SyntaxError);
    CHECK_THROWS_AS(parse_program("P = ([] x ~ 1 -> end)"), SyntaxError);
    CHECK_THROWS_AS(parse_program("P = g!99999999999999999999999 . end"), SyntaxError);
}

TEST_CASE("pretty printing") {
    CHECK(pretty_print(Term::nil()) == "nil");
    CHECK(pretty_print(Term::prefix(Action::receive("g", "x"), Term::end())) == "g?x . end");
    CHECK(pretty_print(parse_term("(a!0 . end || b!1 . end) ; end")) == "(a!0 . end || b!1 . end) ; end");
    CHECK(pretty_print(parse_term("[nat[k] qubit[z]: c?k . end]")) == "[nat[k] qubit[z]: c?k . end]");
    CHECK(pretty_print(parse_term("([] k = 0 -> end [] k ≠ 1 -> nil)")) == "([] k=0 -> end [] k!=1 -> nil)");
}

TEST_CASE("precedence: prefix, then sequence, then parallel") {
    Term t = parse_term("a!0 . P ; Q || R");
    const auto* par = t.as<ast::Par>();
    REQUIRE(par);
    CHECK(par->right == Term::invoke("R", {}));
    const auto* seq = par->left.as<ast::Seq>();
    REQUIRE(seq);
    CHECK(seq->first.is<ast::Prefix>());
    CHECK(seq->second == Term::invoke("Q", {}));

    // right associativity
    Term s = parse_term("A ; B ; C");
    REQUIRE(s.as<ast::Seq>());
    CHECK(s.as<ast::Seq>()->second.is<ast::Seq>());

    // restriction binds to the atom
    Term r = parse_term("A || B |{g}");
    REQUIRE(r.as<ast::Par>());
    CHECK(r.as<ast::Par>()->right.is<ast::Restrict>());
}

TEST_CASE("round trip over the corpus") {
    for (const auto& file : testing::corpus_files()) {
        CAPTURE(file);
        Program once = parse_program(testing::read_file(file));
        Program twice = parse_program(pretty_print(once));
        CHECK(once == twice);
        Program elaborated = elaborate(once, testing::corpus_registry());
        CHECK(elaborate(parse_program(pretty_print(elaborated)), testing::corpus_registry()) == elaborated);
    }
}

TEST_CASE("elaboration renames sibling declarations apart") {
    Program p = elaborate(parse_program("P = [qubit[x]: nil] ; [qubit[x]: nil]"), GateRegistry::builtins());
    const auto* seq = p.find("P")->body.as<ast::Seq>();
    REQUIRE(seq);
    CHECK(seq->first.as<ast::Scope>()->decls[0].name == "x#1");
    CHECK(seq->second.as<ast::Scope>()->decls[0].name == "x#2");
    // idempotent
    CHECK(elaborate(p, GateRegistry::builtins()) == p);
}

TEST_CASE("elaboration errors") {
    auto reg = GateRegistry::builtins();
    auto fails = [&](const char* src) { return parse_program(src); };
    CHECK_THROWS_AS(elaborate(fails("P = [qubit[x,y]: H[x,y] . end]"), reg), ElaborationError);
    CHECK_THROWS_AS(elaborate(fails("P = [qubit[x]: Foo[x] . end]"), reg), ElaborationError);
    CHECK_THROWS_AS(elaborate(fails("P = g?x . end"), reg), ElaborationError);
    CHECK_THROWS_AS(elaborate(fails("P = [nat[x] qubit[x]: end]"), reg), ElaborationError);
    CHECK_THROWS_AS(elaborate(fails("P = [nat[k]: H[k] . end]"), reg), ElaborationError);
    CHECK_THROWS_AS(elaborate(fails("P = [qubit[q]: g!q . end]"), reg), ElaborationError);
    CHECK_THROWS_AS(elaborate(fails("P = [qubit[q]: ([] q = 0 -> end)]"), reg), ElaborationError);
    CHECK_THROWS_AS(elaborate(fails("P = Q"), reg), ElaborationError);
    CHECK_THROWS_AS(elaborate(fails("P = [qubit[a]: Q[a,a]]\nQ = [qubit[x]: end]"), reg), ElaborationError);
    CHECK_THROWS_AS(elaborate(fails("P = [nat[a]: Q[a]]\nQ = [qubit[x]: end]"), reg), ElaborationError);
    CHECK_THROWS_AS(elaborate(fails("P = [qubit[a]: CNot[a,a] . end]"), reg), ElaborationError);
    CHECK_THROWS_AS(elaborate(fails("P = [: end]"), reg), ElaborationError);
    try {
        elaborate(fails("P = end\nQ = [qubit[x,y]:\n  H[x,y] . end]"), reg);
        FAIL("expected an elaboration error");
    } catch (const ElaborationError& e) {
        CHECK(e.pos().line == 3);
        CHECK(std::string(e.what()).find("arity") != std::string::npos);
    }
}

TEST_CASE("observables in action position are classified") {
    Program p = elaborate(parse_program("P = [qubit[x]: M_std[x] . end]"), GateRegistry::builtins());
    const auto* scope = p.find("P")->body.as<ast::Scope>();
    CHECK(scope->body.as<ast::Prefix>()->action.kind == ActionKind::MeasureOnly);
}

TEST_CASE("teleport elaborates with parameterized invocations") {
    Program p = elaborate(parse_program(testing::program_text("teleport.qp")), GateRegistry::builtins());
    CHECK(p.find("BuildEPR")->formals().size() == 2);
    CHECK(p.find("Alice")->formals().size() == 2);
    CHECK(p.gates.count("meas") == 1);
    CHECK(p.gates.count("g1") == 1);
}

TEST_CASE("names, substitution and freshening") {
    Term t = parse_term("[qubit[x]: g?x . H[y] . end] ; c!y . end");
    CHECK(bound_variables(t) == std::set<std::string>{"x"});
    CHECK(variable_names(t) == std::set<std::string>{"x", "y"});

    Term s = substitute(t, {{"y", "z"}, {"x", "w"}});
    // bound x untouched, free y replaced
    CHECK(pretty_print(s) == "[qubit[x]: g?x . H[z] . end] ; c!z . end");

    Term r = rename_bound(t, {{"x", "x~0"}});
    CHECK(pretty_print(r) == "[qubit[x~0]: g?x~0 . H[y] . end] ; c!y . end");

    CHECK(base_name("x#2") == "x");
    CHECK(base_name("y~10") == "y");
    CHECK(base_name("p'") == "p'");
    CHECK(fresh_name("y", {"y~0", "y~1"}) == "y~2");
    CHECK(fresh_name("y", {}) == "y~0");
}
