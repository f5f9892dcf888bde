#include "qproc/quantum.hpp"

#include "qproc/error.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace qproc {

namespace {

bool is_power_of_two_dim(std::size_t dim, std::size_t arity) { return dim == (std::size_t{1} << arity); }

void check_positions(std::size_t width, std::span<const std::size_t> positions) {
    std::vector<bool> seen(width, false);
    for (std::size_t p : positions) {
        if (p >= width) {
            throw QuantumError("register position " + std::to_string(p) + " out of range for width " +
                               std::to_string(width));
        }
        if (seen[p]) {
            throw QuantumError("duplicate register position " + std::to_string(p));
        }
        seen[p] = true;
    }
}

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

} // namespace

Matrix::Matrix(std::size_t dim, std::vector<Complex> entries) : dim_(dim), data_(std::move(entries)) {
    if (data_.size() != dim * dim) {
        throw QuantumError("matrix of dimension " + std::to_string(dim) + " needs " + std::to_string(dim * dim) +
                           " entries, got " + std::to_string(data_.size()));
    }
}

Matrix Matrix::identity(std::size_t dim) {
    Matrix m(dim);
    for (std::size_t i = 0; i < dim; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::adjoint() const {
    Matrix m(dim_);
    for (std::size_t r = 0; r < dim_; ++r)
        for (std::size_t c = 0; c < dim_; ++c) m(c, r) = std::conj((*this)(r, c));
    return m;
}

Matrix Matrix::operator*(const Matrix& rhs) const {
    if (dim_ != rhs.dim_) throw QuantumError("matrix dimension mismatch");
    Matrix m(dim_);
    for (std::size_t r = 0; r < dim_; ++r)
        for (std::size_t k = 0; k < dim_; ++k) {
            const Complex a = (*this)(r, k);
            if (a == Complex{}) continue;
            for (std::size_t c = 0; c < dim_; ++c) m(r, c) += a * rhs(k, c);
        }
    return m;
}

Matrix Matrix::operator+(const Matrix& rhs) const {
    if (dim_ != rhs.dim_) throw QuantumError("matrix dimension mismatch");
    Matrix m(dim_);
    for (std::size_t i = 0; i < data_.size(); ++i) m.data_[i] = data_[i] + rhs.data_[i];
    return m;
}

std::vector<Complex> Matrix::apply(std::span<const Complex> v) const {
    if (v.size() != dim_) throw QuantumError("matrix/vector dimension mismatch");
    std::vector<Complex> out(dim_);
    for (std::size_t r = 0; r < dim_; ++r) {
        Complex acc{};
        for (std::size_t c = 0; c < dim_; ++c) acc += (*this)(r, c) * v[c];
        out[r] = acc;
    }
    return out;
}

double Matrix::max_abs_diff(const Matrix& other) const {
    if (dim_ != other.dim_) return INFINITY;
    double worst = 0.0;
    for (std::size_t i = 0; i < data_.size(); ++i) worst = std::max(worst, std::abs(data_[i] - other.data_[i]));
    return worst;
}

Matrix kron(const Matrix& a, const Matrix& b) {
    Matrix m(a.dim() * b.dim());
    for (std::size_t ar = 0; ar < a.dim(); ++ar)
        for (std::size_t ac = 0; ac < a.dim(); ++ac)
            for (std::size_t br = 0; br < b.dim(); ++br)
                for (std::size_t bc = 0; bc < b.dim(); ++bc)
                    m(ar * b.dim() + br, ac * b.dim() + bc) = a(ar, ac) * b(br, bc);
    return m;
}

StateVector::StateVector(std::size_t width, std::vector<Complex> amplitudes)
    : width_(width), amps_(std::move(amplitudes)) {
    if (amps_.size() != (std::size_t{1} << width)) {
        throw QuantumError("state of width " + std::to_string(width) + " needs " +
                           std::to_string(std::size_t{1} << width) + " amplitudes, got " +
                           std::to_string(amps_.size()));
    }
}

StateVector StateVector::basis(std::size_t width, std::uint64_t index) {
    std::vector<Complex> amps(std::size_t{1} << width);
    if (index >= amps.size()) throw QuantumError("basis index out of range");
    amps[index] = 1.0;
    return StateVector(width, std::move(amps));
}

double StateVector::norm() const {
    double acc = 0.0;
    for (const auto& a : amps_) acc += std::norm(a);
    return std::sqrt(acc);
}

double StateVector::max_abs_diff(const StateVector& other) const {
    if (amps_.size() != other.amps_.size()) return INFINITY;
    double worst = 0.0;
    for (std::size_t i = 0; i < amps_.size(); ++i) worst = std::max(worst, std::abs(amps_[i] - other.amps_[i]));
    return worst;
}

UnitaryMatrix builtin_gate(const std::string& name) {
    const double h = 1.0 / std::sqrt(2.0);
    const Complex i{0.0, 1.0};
    if (name == "H") return {name, 1, Matrix(2, {h, h, h, -h})};
    if (name == "I") return {name, 1, Matrix::identity(2)};
    if (name == "X") return {name, 1, Matrix(2, {0.0, 1.0, 1.0, 0.0})};
    if (name == "Y") return {name, 1, Matrix(2, {0.0, -i, i, 0.0})};
    if (name == "Z") return {name, 1, Matrix(2, {1.0, 0.0, 0.0, -1.0})};
    if (name == "CNot") {
        return {name, 2,
                Matrix(4, {1.0, 0.0, 0.0, 0.0, //
                           0.0, 1.0, 0.0, 0.0, //
                           0.0, 0.0, 0.0, 1.0, //
                           0.0, 0.0, 1.0, 0.0})};
    }
    throw QuantumError("unknown gate '" + name + "'");
}

namespace {

/// Standard-basis observable on `arity` qubits: eigenvalue i for |i>.
Observable standard_basis_observable(const std::string& name, std::size_t arity) {
    Observable obs{name, arity, {}};
    const std::size_t dim = std::size_t{1} << arity;
    for (std::size_t k = 0; k < dim; ++k) {
        Matrix p(dim);
        p(k, k) = 1.0;
        obs.branches.push_back({static_cast<std::int64_t>(k), std::move(p)});
    }
    return obs;
}

} // namespace

Observable builtin_observable(const std::string& name) {
    if (name == "M_std") return standard_basis_observable(name, 1);
    if (name == "M") return standard_basis_observable(name, 2);
    throw QuantumError("unknown observable '" + name + "'");
}

const std::vector<std::string>& builtin_gate_names() {
    static const std::vector<std::string> names{"CNot", "H", "I", "X", "Y", "Z"};
    return names;
}

const std::vector<std::string>& builtin_observable_names() {
    static const std::vector<std::string> names{"M", "M_std"};
    return names;
}

void validate_unitary(const UnitaryMatrix& u, double tol) {
    if (!is_power_of_two_dim(u.matrix.dim(), u.arity)) {
        throw QuantumError("unitary '" + u.name + "': dimension does not match arity " + std::to_string(u.arity));
    }
    const Matrix id = Matrix::identity(u.matrix.dim());
    if ((u.matrix * u.matrix.adjoint()).max_abs_diff(id) > tol ||
        (u.matrix.adjoint() * u.matrix).max_abs_diff(id) > tol) {
        throw QuantumError("unitary '" + u.name + "' is not unitary");
    }
}

void validate_observable(const Observable& obs, double tol) {
    const std::size_t dim = std::size_t{1} << obs.arity;
    if (obs.branches.empty()) throw QuantumError("observable '" + obs.name + "' has no eigenspaces");
    Matrix sum(dim);
    for (std::size_t i = 0; i < obs.branches.size(); ++i) {
        const Matrix& p = obs.branches[i].projector;
        if (p.dim() != dim) {
            throw QuantumError("observable '" + obs.name + "': projector dimension does not match arity");
        }
        if (p.max_abs_diff(p.adjoint()) > tol) {
            throw QuantumError("observable '" + obs.name + "': projector " + std::to_string(i) + " is not hermitian");
        }
        if ((p * p).max_abs_diff(p) > tol) {
            throw QuantumError("observable '" + obs.name + "': projector " + std::to_string(i) +
                               " is not idempotent");
        }
        for (std::size_t j = 0; j < i; ++j) {
            if (obs.branches[j].eigenvalue == obs.branches[i].eigenvalue) {
                throw QuantumError("observable '" + obs.name + "': repeated eigenvalue " +
                                   std::to_string(obs.branches[i].eigenvalue));
            }
            if ((p * obs.branches[j].projector).max_abs_diff(Matrix(dim)) > tol) {
                throw QuantumError("observable '" + obs.name + "': projectors " + std::to_string(j) + " and " +
                                   std::to_string(i) + " are not orthogonal");
            }
        }
        sum = sum + p;
    }
    if (sum.max_abs_diff(Matrix::identity(dim)) > tol) {
        throw QuantumError("observable '" + obs.name + "': projectors do not sum to the identity");
    }
}

StateVector init_qubit(const StateVector& state, int bit) {
    if (bit != 0 && bit != 1) throw QuantumError("qubit can only be initialized to 0 or 1");
    std::vector<Complex> amps(state.size() * 2);
    const std::size_t offset = bit == 0 ? 0 : state.size();
    std::copy(state.amplitudes().begin(), state.amplitudes().end(), amps.begin() + static_cast<std::ptrdiff_t>(offset));
    return StateVector(state.width() + 1, std::move(amps));
}

std::vector<std::uint64_t> front_permutation(std::size_t width, std::span<const std::size_t> positions) {
    check_positions(width, positions);

    // order[j] = slot moved to head position j
    std::vector<std::size_t> order(positions.begin(), positions.end());
    std::vector<bool> taken(width, false);
    for (std::size_t p : positions) taken[p] = true;
    for (std::size_t s = 0; s < width; ++s)
        if (!taken[s]) order.push_back(s);

    const std::uint64_t dim = std::uint64_t{1} << width;
    std::vector<std::uint64_t> perm(dim);
    for (std::uint64_t b = 0; b < dim; ++b) {
        std::uint64_t image = 0;
        for (std::size_t j = 0; j < width; ++j) {
            const std::uint64_t bit = (b >> (width - 1 - order[j])) & 1U;
            image |= bit << (width - 1 - j);
        }
        perm[b] = image;
    }
    return perm;
}

StateVector apply_unitary(const StateVector& state, std::span<const std::size_t> positions, const UnitaryMatrix& u) {
    if (positions.size() != u.arity) {
        throw QuantumError("unitary '" + u.name + "' expects " + std::to_string(u.arity) + " qubits, got " +
                           std::to_string(positions.size()));
    }
    const auto perm = front_permutation(state.width(), positions);
    const std::size_t dim = state.size();
    const std::size_t rest = std::size_t{1} << (state.width() - u.arity);
    const std::size_t block = std::size_t{1} << u.arity;

    std::vector<Complex> front(dim);
    for (std::size_t b = 0; b < dim; ++b) front[perm[b]] = state[b];

    std::vector<Complex> moved(dim);
    for (std::size_t lo = 0; lo < rest; ++lo)
        for (std::size_t r = 0; r < block; ++r) {
            Complex acc{};
            for (std::size_t c = 0; c < block; ++c) acc += u.matrix(r, c) * front[c * rest + lo];
            moved[r * rest + lo] = acc;
        }

    std::vector<Complex> out(dim);
    for (std::size_t b = 0; b < dim; ++b) out[b] = moved[perm[b]];
    return StateVector(state.width(), std::move(out));
}

std::vector<MeasurementBranch> measure(const StateVector& state, std::span<const std::size_t> positions,
                                       const Observable& obs) {
    if (positions.size() != obs.arity) {
        throw QuantumError("observable '" + obs.name + "' expects " + std::to_string(obs.arity) + " qubits, got " +
                           std::to_string(positions.size()));
    }
    const auto perm = front_permutation(state.width(), positions);
    const std::size_t dim = state.size();
    const std::size_t rest = std::size_t{1} << (state.width() - obs.arity);
    const std::size_t block = std::size_t{1} << obs.arity;

    std::vector<Complex> front(dim);
    for (std::size_t b = 0; b < dim; ++b) front[perm[b]] = state[b];

    std::vector<MeasurementBranch> branches;
    double total = 0.0;
    for (const auto& branch : obs.branches) {
        std::vector<Complex> projected(dim);
        for (std::size_t lo = 0; lo < rest; ++lo)
            for (std::size_t r = 0; r < block; ++r) {
                Complex acc{};
                for (std::size_t c = 0; c < block; ++c) acc += branch.projector(r, c) * front[c * rest + lo];
                projected[r * rest + lo] = acc;
            }
        // p = <psi| Pi^t (P (x) I) Pi |psi>
        Complex overlap{};
        for (std::size_t i = 0; i < dim; ++i) overlap += std::conj(front[i]) * projected[i];
        const double p = overlap.real();
        if (p <= kDropProbability) continue;

        const double scale = 1.0 / std::sqrt(p);
        std::vector<Complex> post(dim);
        for (std::size_t b = 0; b < dim; ++b) post[b] = projected[perm[b]] * scale;
        branches.push_back({branch.eigenvalue, p, StateVector(state.width(), std::move(post))});
        total += p;
    }
    for (auto& b : branches) b.probability /= total;
    return branches;
}

GateRegistry GateRegistry::builtins() {
    GateRegistry reg;
    for (const auto& n : builtin_gate_names()) reg.add_unitary(builtin_gate(n));
    for (const auto& n : builtin_observable_names()) reg.add_observable(builtin_observable(n));
    return reg;
}

void GateRegistry::add_unitary(UnitaryMatrix u) {
    if (observables_.contains(u.name)) throw QuantumError("'" + u.name + "' is already an observable");
    unitaries_[u.name] = std::move(u);
}

void GateRegistry::add_observable(Observable obs) {
    if (unitaries_.contains(obs.name)) throw QuantumError("'" + obs.name + "' is already a unitary");
    observables_[obs.name] = std::move(obs);
}

const UnitaryMatrix* GateRegistry::find_unitary(const std::string& name) const {
    auto it = unitaries_.find(name);
    return it == unitaries_.end() ? nullptr : &it->second;
}

const Observable* GateRegistry::find_observable(const std::string& name) const {
    auto it = observables_.find(name);
    return it == observables_.end() ? nullptr : &it->second;
}

Complex parse_complex(const std::string& raw) {
    const std::string token = trim(raw);
    if (token.empty()) throw QuantumError("empty complex literal");
    auto bad = [&] { return QuantumError("malformed complex literal '" + token + "'"); };

    auto parse_real = [&](const std::string& s, bool imaginary) -> double {
        if (imaginary && (s.empty() || s == "+")) return 1.0;
        if (imaginary && s == "-") return -1.0;
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(s, &used);
        } catch (const std::exception&) {
            throw bad();
        }
        if (used != s.size()) throw bad();
        return v;
    };

    if (token.back() != 'i') return {parse_real(token, false), 0.0};

    const std::string body = token.substr(0, token.size() - 1);
    // split at the last sign that is not the leading one and not part of an exponent
    std::size_t split = std::string::npos;
    for (std::size_t k = body.size(); k-- > 1;) {
        if ((body[k] == '+' || body[k] == '-') && body[k - 1] != 'e' && body[k - 1] != 'E') {
            split = k;
            break;
        }
    }
    if (split == std::string::npos) return {0.0, parse_real(body, true)};
    return {parse_real(body.substr(0, split), false), parse_real(body.substr(split), true)};
}

void GateRegistry::load_definitions(const std::string& text) {
    std::vector<std::vector<std::string>> lines;
    std::vector<std::size_t> line_numbers;
    {
        std::istringstream in(text);
        std::string line;
        std::size_t number = 0;
        while (std::getline(in, line)) {
            ++number;
            for (const char* marker : {"#", "--"}) {
                auto pos = line.find(marker);
                if (pos != std::string::npos) line.resize(pos);
            }
            std::istringstream words(line);
            std::vector<std::string> tokens;
            for (std::string w; words >> w;) tokens.push_back(w);
            if (!tokens.empty()) {
                lines.push_back(std::move(tokens));
                line_numbers.push_back(number);
            }
        }
    }

    auto fail = [&](std::size_t idx, const std::string& msg) {
        const std::size_t n = idx < line_numbers.size() ? line_numbers[idx] : line_numbers.empty() ? 0 : line_numbers.back();
        return QuantumError("definitions line " + std::to_string(n) + ": " + msg);
    };
    auto parse_arity = [&](std::size_t idx, const std::string& s) -> std::size_t {
        std::size_t used = 0;
        unsigned long v = 0;
        try {
            v = std::stoul(s, &used);
        } catch (const std::exception&) {
            throw fail(idx, "bad arity '" + s + "'");
        }
        if (used != s.size() || v == 0 || v > 12) throw fail(idx, "bad arity '" + s + "'");
        return v;
    };
    auto parse_eigen = [&](std::size_t idx, const std::string& s) -> std::int64_t {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(s, &used);
        } catch (const std::exception&) {
            throw fail(idx, "bad eigenvalue '" + s + "'");
        }
        if (used != s.size()) throw fail(idx, "bad eigenvalue '" + s + "'");
        if (v != std::floor(v)) throw fail(idx, "eigenvalue " + s + " is not an integer");
        // Outcomes are sent as Nat values.
        if (v < 0) throw fail(idx, "eigenvalue " + s + " is negative");
        return static_cast<std::int64_t>(v);
    };

    std::size_t idx = 0;
    auto read_rows = [&](std::size_t header, std::size_t dim) {
        std::vector<Complex> entries;
        for (std::size_t r = 0; r < dim; ++r, ++idx) {
            if (idx >= lines.size()) throw fail(header, "expected " + std::to_string(dim) + " matrix rows");
            if (lines[idx].size() != dim) {
                throw fail(idx, "expected " + std::to_string(dim) + " entries, got " + std::to_string(lines[idx].size()));
            }
            for (const auto& tok : lines[idx]) {
                try {
                    entries.push_back(parse_complex(tok));
                } catch (const QuantumError& e) {
                    throw fail(idx, e.what());
                }
            }
        }
        return Matrix(dim, std::move(entries));
    };

    std::vector<UnitaryMatrix> new_unitaries;
    std::vector<Observable> new_observables;
    std::map<std::string, std::size_t> declared_at;
    auto known = [&](const std::string& name) {
        if (find_unitary(name) || find_observable(name)) return true;
        for (const auto& u : new_unitaries)
            if (u.name == name) return true;
        return false;
    };

    while (idx < lines.size()) {
        const auto head = lines[idx];
        const std::size_t header = idx++;
        if (head[0] == "unitary") {
            if (head.size() != 4 || head[2] != "arity") throw fail(header, "expected 'unitary NAME arity n'");
            if (known(head[1])) throw fail(header, "'" + head[1] + "' is already defined");
            for (const auto& o : new_observables)
                if (o.name == head[1]) throw fail(header, "'" + head[1] + "' is already defined");
            const std::size_t arity = parse_arity(header, head[3]);
            declared_at[head[1]] = header;
            new_unitaries.push_back({head[1], arity, read_rows(header, std::size_t{1} << arity)});
        } else if (head[0] == "observable") {
            if ((head.size() != 4 && head.size() != 6) || head[2] != "arity" || (head.size() == 6 && head[4] != "eigen")) {
                throw fail(header, "expected 'observable NAME arity n eigen v'");
            }
            const std::size_t arity = parse_arity(header, head[3]);
            Observable* obs = nullptr;
            for (auto& o : new_observables)
                if (o.name == head[1]) obs = &o;
            if (obs == nullptr) {
                if (known(head[1])) throw fail(header, "'" + head[1] + "' is already defined");
                declared_at[head[1]] = header;
                new_observables.push_back({head[1], arity, {}});
                obs = &new_observables.back();
            } else if (obs->arity != arity) {
                throw fail(header, "observable '" + head[1] + "' redeclared with a different arity");
            }
            auto read_branch = [&](std::size_t at, const std::string& eig) {
                const std::int64_t value = parse_eigen(at, eig);
                obs->branches.push_back({value, read_rows(at, std::size_t{1} << arity)});
            };
            if (head.size() == 6) read_branch(header, head[5]);
            while (idx < lines.size() && lines[idx][0] == "eigen") {
                if (lines[idx].size() != 2) throw fail(idx, "expected 'eigen v'");
                const std::size_t at = idx++;
                read_branch(at, lines[at][1]);
            }
        } else {
            throw fail(header, "expected 'unitary' or 'observable', got '" + head[0] + "'");
        }
    }

    for (const auto& u : new_unitaries) {
        try {
            validate_unitary(u);
        } catch (const QuantumError& e) {
            throw fail(declared_at[u.name], e.what());
        }
    }
    for (const auto& o : new_observables) {
        try {
            validate_observable(o);
        } catch (const QuantumError& e) {
            throw fail(declared_at[o.name], e.what());
        }
    }
    for (auto& u : new_unitaries) add_unitary(std::move(u));
    for (auto& o : new_observables) add_observable(std::move(o));
}

} // namespace qproc
