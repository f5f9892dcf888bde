#include "qproc/cli.hpp"

#include "qproc/error.hpp"
#include "qproc/explorer.hpp"
#include "qproc/serialize.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace qproc::cli {

namespace {

struct RunConfig {
    std::string source_path;
    std::string entry = "Main";
    std::uint64_t seed = 0;
    std::string policy = "first";
    std::size_t max_depth = 1000;
    std::size_t max_nodes = 100000;
    std::size_t max_steps = 10000;
    bool open = false;
    std::string defs_path;
    std::string format;
    bool verbose = false;
};

struct Failure {
    int code;
    std::string message;
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Failure{kIo, path + ": cannot open file"};
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw Failure{kIo, path + ": read error"};
    return ss.str();
}

GateRegistry load_registry(const RunConfig& cfg) {
    GateRegistry reg = GateRegistry::builtins();
    std::string path = cfg.defs_path;
    if (path.empty()) {
        if (const char* env = std::getenv("QPROC_DEFS")) path = env;
    }
    if (path.empty()) return reg;
    const std::string text = read_file(path);
    try {
        reg.load_definitions(text);
    } catch (const QuantumError& e) {
        throw Failure{kInvalidProgram, path + ": " + e.what()};
    }
    return reg;
}

Machine load(const RunConfig& cfg) {
    GateRegistry reg = load_registry(cfg);
    const std::string source = read_file(cfg.source_path);
    try {
        return load_machine(source, std::move(reg));
    } catch (const PositionedError& e) {
        throw Failure{kInvalidProgram, e.format(cfg.source_path)};
    }
}

ExecState entry_state(const Machine& m, const RunConfig& cfg) {
    if (!m.program.find(cfg.entry)) {
        throw Failure{kInvalidProgram, cfg.source_path + ": entry process '" + cfg.entry + "' is not defined"};
    }
    return initial_state(m, cfg.entry);
}

void require_format(const std::string& format, std::initializer_list<const char*> allowed) {
    for (const char* a : allowed)
        if (format == a) return;
    throw Failure{kUsage, "format '" + format + "' is not available for this command"};
}

int cmd_check(const RunConfig& cfg, std::ostream& out) {
    Machine m = load(cfg);
    out << cfg.source_path << ": ok (" << m.program.definitions().size() << " definitions)\n";
    return kOk;
}

int cmd_run(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    const std::string format = cfg.format.empty() ? "json" : cfg.format;
    require_format(format, {"json", "text"});
    Machine m = load(cfg);
    const ExecState init = entry_state(m, cfg);
    Trace trace;
    try {
        trace = sample_trace(init, m, parse_policy(cfg.policy), cfg.seed, cfg.max_steps, cfg.open);
    } catch (const OpenActionError& e) {
        throw Failure{kOpenAction, std::string(e.what())};
    }
    if (format == "json") {
        out << trace_jsonl(trace, RenderOptions{cfg.verbose});
    } else {
        out << trace_text(trace);
    }
    switch (trace.status) {
    case TraceStatus::Terminated: return kOk;
    case TraceStatus::Stuck: err << "run is stuck after " << trace.steps.size() << " steps\n"; return kStuck;
    case TraceStatus::Truncated: err << "run truncated at " << cfg.max_steps << " steps\n"; return kTruncated;
    }
    return kOk;
}

void tree_text(const ExecutionTree& tree, std::size_t id, std::size_t indent, std::ostream& out) {
    const auto& n = tree.nodes[id];
    out << pretty_print(n.state.term) << (n.truncated ? "  ..." : "") << "\n";
    for (const auto& [label, child] : n.edges) {
        out << std::string(indent + 2, ' ') << "--" << to_string(label) << "--> ";
        tree_text(tree, child, indent + 2, out);
    }
}

int cmd_tree(const RunConfig& cfg, std::ostream& out) {
    const std::string format = cfg.format.empty() ? "dot" : cfg.format;
    Machine m = load(cfg);
    const ExecutionTree tree = build_tree(entry_state(m, cfg), m, cfg.max_depth, cfg.max_nodes);
    if (format == "dot") {
        out << tree_dot(tree);
    } else if (format == "json") {
        out << tree_json(tree, RenderOptions{cfg.verbose}).dump(2) << "\n";
    } else {
        tree_text(tree, 0, 0, out);
    }
    return kOk;
}

int cmd_dist(const RunConfig& cfg, std::ostream& out) {
    const std::string format = cfg.format.empty() ? "text" : cfg.format;
    require_format(format, {"text", "json"});
    Machine m = load(cfg);
    std::map<OutcomeKey, double> dist;
    try {
        dist = outcome_distribution(entry_state(m, cfg), m, parse_policy(cfg.policy), cfg.max_depth, cfg.max_nodes);
    } catch (const TruncatedError& e) {
        throw Failure{kTruncated, std::string("distribution unavailable: ") + e.what()};
    }
    if (format == "json") {
        out << distribution_json(dist).dump(2) << "\n";
    } else {
        out << distribution_text(dist);
    }
    return kOk;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Interpreter for a quantum process algebra", "qproc"};
    app.require_subcommand(1);
    RunConfig cfg;

    auto common = [&cfg](CLI::App* sub) {
        sub->add_option("file", cfg.source_path, "Program source")->required();
        sub->add_option("--entry", cfg.entry, "Entry process")->capture_default_str();
        sub->add_option("--defs", cfg.defs_path, "Gate/observable definitions file (default $QPROC_DEFS)");
        sub->add_option("--format", cfg.format, "Output format")->check(CLI::IsMember({"text", "json", "dot"}));
        sub->add_flag("--verbose", cfg.verbose, "Include state-vector amplitudes");
    };
    auto policy = [&cfg](CLI::App* sub) {
        sub->add_option("--policy", cfg.policy, "Scheduler policy")
            ->check(CLI::IsMember({"first", "uniform"}))
            ->capture_default_str();
    };
    auto limits = [&cfg](CLI::App* sub) {
        sub->add_option("--max-depth", cfg.max_depth, "Tree depth limit")->check(CLI::PositiveNumber)->capture_default_str();
        sub->add_option("--max-nodes", cfg.max_nodes, "Tree size limit")->check(CLI::PositiveNumber)->capture_default_str();
    };

    CLI::App* check = app.add_subcommand("check", "Parse and elaborate a program");
    common(check);
    CLI::App* runc = app.add_subcommand("run", "Sample one execution as JSON lines");
    common(runc);
    policy(runc);
    runc->add_option("--seed", cfg.seed, "Random seed")->capture_default_str();
    runc->add_option("--max-steps", cfg.max_steps, "Step limit")->check(CLI::PositiveNumber)->capture_default_str();
    runc->add_flag("--open", cfg.open, "Allow unrestricted emit/receive actions");
    CLI::App* tree = app.add_subcommand("tree", "Build the execution tree");
    common(tree);
    limits(tree);
    CLI::App* dist = app.add_subcommand("dist", "Exact outcome distribution");
    common(dist);
    policy(dist);
    limits(dist);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*check) return cmd_check(cfg, out);
        if (*runc) return cmd_run(cfg, out, err);
        if (*tree) return cmd_tree(cfg, out);
        if (*dist) return cmd_dist(cfg, out);
    } catch (const Failure& f) {
        err << f.message << "\n";
        return f.code;
    } catch (const Error& e) {
        err << cfg.source_path << ": runtime error: " << e.what() << "\n";
        return kRuntime;
    }
    return kUsage;
}

} // namespace qproc::cli
