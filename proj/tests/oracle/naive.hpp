#pragma once

// Second, deliberately naive implementation of the transition relation.
//
// Every rule schema is a separate function tried against every term; a
// schema either does not match or yields its conclusions. Quantum updates
// go through the dense Pi-matrix oracle. It reuses the library's term and
// context data types (and the context operations, which are tested on
// their own) so that states from both implementations can be compared by
// canonical key.

#include "oracle/dense.hpp"

#include "qproc/context.hpp"
#include "qproc/semantics.hpp"

#include <map>
#include <set>
#include <string>
#include <vector>

namespace oracle {

struct NaiveState {
    qproc::Term term;
    qproc::AnyContext ctx;
};

struct NaiveEdge {
    std::string label;
    NaiveState next;
};

/// Successors of a state, in no particular order.
std::vector<NaiveEdge> naive_step(const NaiveState& s, const qproc::Machine& m);

/// Unfold invocations at active positions.
qproc::Term naive_normalize(const qproc::Term& t, const qproc::Machine& m, std::set<std::string> used);

std::set<std::string> naive_names(const NaiveState& s);

/// key -> set of (label, successor key), over every reachable state.
/// Returns false if more than `limit` states are reachable.
using Lts = std::map<std::string, std::set<std::pair<std::string, std::string>>>;
bool naive_lts(const qproc::Machine& m, const std::string& entry, std::size_t limit, Lts& out);

} // namespace oracle
