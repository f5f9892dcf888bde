#pragma once

#include "qproc/semantics.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace testing {

inline std::string programs_dir() { return QPROC_PROGRAMS_DIR; }

inline std::string read_file(const std::string& path) {
    std::ifstream in(path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::string program_text(const std::string& name) { return read_file(programs_dir() + "/" + name); }

inline std::vector<std::string> corpus_files() {
    std::vector<std::string> out;
    for (const auto& e : std::filesystem::directory_iterator(programs_dir()))
        if (e.path().extension() == ".qp") out.push_back(e.path().string());
    std::sort(out.begin(), out.end());
    return out;
}

/// Registry with prep.defs loaded, enough for every corpus program.
inline qproc::GateRegistry corpus_registry() {
    auto reg = qproc::GateRegistry::builtins();
    reg.load_definitions(read_file(programs_dir() + "/prep.defs"));
    return reg;
}

inline qproc::Machine corpus_machine(const std::string& name) {
    return qproc::load_machine(program_text(name), corpus_registry());
}

} // namespace testing
