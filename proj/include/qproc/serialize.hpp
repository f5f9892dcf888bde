#pragma once

// Text, JSON and DOT renderings of states, traces, trees and distributions.
// All output is deterministic: no timestamps, no addresses, ordered maps.

#include "qproc/explorer.hpp"

#include <json.hpp>

#include <map>
#include <string>

namespace qproc {

struct RenderOptions {
    /// Include state-vector amplitudes (exponential in the register width).
    bool amplitudes = false;
};

nlohmann::json to_json(const Context& ctx, const RenderOptions& opts = {});

/// {"label","prob","term","qseq","store"[,"amplitudes"]}; an unstable
/// context adds "branches" with one object per world.
nlohmann::json to_json(const Label* label, const ExecState& state, const RenderOptions& opts = {});

/// One JSON object per line: the initial state (label null), each step,
/// then {"status": ...}.
std::string trace_jsonl(const Trace& trace, const RenderOptions& opts = {});
std::string trace_text(const Trace& trace);

std::string tree_dot(const ExecutionTree& tree);
nlohmann::json tree_json(const ExecutionTree& tree, const RenderOptions& opts = {});

/// "(0,0) = 0.5" rows, probabilities to 12 significant digits.
std::string distribution_text(const std::map<OutcomeKey, double>& dist);
nlohmann::json distribution_json(const std::map<OutcomeKey, double>& dist);

/// Canonical identity of a state: term, stack, register names, store and
/// amplitudes rounded to 1e-9. Equal states have equal keys.
std::string state_key(const ExecState& state);
std::string state_key(const Context& ctx);

} // namespace qproc
