#include "qproc/context.hpp"
#include "qproc/error.hpp"

#include <doctest.h>

using namespace qproc;

TEST_CASE("declare and release a scope") {
    Context c;
    c = declare(c, {"k"}, {"x"});
    CHECK(c.stack.type_of("k") == VarType::Nat);
    CHECK(c.stack.type_of("x") == VarType::Qubit);
    c = init_qubit(c, "x", 1);
    c = set_classical(c, "k", 4);
    CHECK(get_value(c, "k") == 4);
    const StateVector before = c.state;

    Context after = release_scope(c);
    CHECK(after.stack.empty());
    REQUIRE(after.qseq.size() == 1);
    CHECK_FALSE(after.qseq.slots()[0].has_value());
    CHECK(after.store.empty());
    CHECK(after.state == before);
    CHECK_THROWS_AS(release_scope(after), ContextError);
}

TEST_CASE("release only touches the popped frame") {
    Context c = declare(Context{}, {"outer"}, {});
    c = set_classical(c, "outer", 1);
    c = declare(c, {"inner"}, {"q"});
    c = set_classical(c, "inner", 2);
    c = init_qubit(c, "q", 0);
    Context r = release_scope(c);
    CHECK(r.store == ClassicalStore{{"outer", 1}});
    CHECK(r.stack.type_of("outer") == VarType::Nat);
    CHECK_FALSE(r.stack.type_of("inner"));
}

TEST_CASE("variable errors") {
    Context c = declare(Context{}, {"k"}, {"x"});
    CHECK_THROWS_AS(get_value(c, "k"), ContextError);    // unset
    CHECK_THROWS_AS(get_value(c, "nope"), ContextError); // undeclared
    CHECK_THROWS_AS(set_classical(c, "x", 1), ContextError);
    CHECK_THROWS_AS(init_qubit(c, "k", 0), ContextError);
    c = init_qubit(c, "x", 0);
    CHECK_THROWS_AS(init_qubit(c, "x", 0), ContextError); // no re-initialization
    CHECK_THROWS_AS(qubit_positions(c, {"y"}), ContextError);
}

TEST_CASE("qubits are prepended to the register") {
    Context c = declare(Context{}, {}, {"a", "b"});
    c = init_qubit(c, "a", 0);
    c = init_qubit(c, "b", 1);
    CHECK(qubit_positions(c, {"a", "b"}) == std::vector<std::size_t>{1, 0});
    CHECK(c.state[0b10] == Complex(1)); // b=1 at the head, a=0
}

TEST_CASE("fork, views and join") {
    Context base = declare(Context{}, {"shared"}, {});
    Context f = fork(base);
    CHECK(f.stack.top_is_fork());

    Context left = view(f, Side::Left);
    CHECK(left.stack.top_is_frame());
    left = declare(left, {"l"}, {"ql"});
    left = init_qubit(left, "ql", 1);
    left = set_classical(left, "l", 3);
    f = embed(f, Side::Left, left);

    Context right = view(f, Side::Right);
    CHECK_FALSE(right.stack.type_of("l")); // not visible to the sibling
    CHECK(right.stack.type_of("shared") == VarType::Nat);
    right = declare(right, {"r"}, {});
    f = embed(f, Side::Right, right);

    CHECK(view(f, Side::Left).stack.type_of("l") == VarType::Nat);
    CHECK(f.stack.all_names() == std::set<std::string>{"shared", "l", "ql", "r"});

    Context j = join(f);
    CHECK(j.stack == base.stack);
    CHECK(j.store.empty());
    REQUIRE(j.qseq.size() == 1);
    CHECK_FALSE(j.qseq.slots()[0].has_value());

    CHECK_THROWS_AS(join(base), ContextError);
    CHECK_THROWS_AS(view(base, Side::Left), ContextError);
}

TEST_CASE("embed rejects changes below the fork") {
    Context f = fork(declare(Context{}, {"s"}, {}));
    Context v = view(f, Side::Left);
    Context popped = release_scope(v);
    CHECK_THROWS_AS(embed(f, Side::Left, popped), ContextError);
}

TEST_CASE("probabilistic contexts") {
    Context a, b;
    b.store["k"] = 1;
    ProbContext pc({{0.25, a, "M", 0}, {0.75, b, "M", 1}});
    CHECK(pc.branches().size() == 2);
    CHECK_FALSE(is_stable(AnyContext{pc}));
    CHECK(is_stable(AnyContext{a}));

    CHECK_THROWS_AS(ProbContext({}), ContextError);
    CHECK_THROWS_AS(ProbContext({{0.5, a, "M", 0}}), ContextError);
    CHECK_THROWS_AS(ProbContext({{0.0, a, "M", 0}, {1.0, b, "M", 1}}), ContextError);

    // A single certain branch collapses into a plain context.
    AnyContext one = mixture({{1.0, b, "M", 1}});
    REQUIRE(is_stable(one));
    CHECK(std::get<Context>(one) == b);
    CHECK_FALSE(is_stable(mixture({{0.5, a, "M", 0}, {0.5, b, "M", 1}})));
}
