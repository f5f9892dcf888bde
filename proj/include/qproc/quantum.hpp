#pragma once

// Dense state-vector backend.
//
// Register layout: slot 0 of a qubit sequence is the head of the tensor
// product, i.e. the most significant bit of a basis-state index. A register
// of width m has 2^m amplitudes; the empty register has width 0 and the
// single amplitude 1.

#include <complex>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace qproc {

using Complex = std::complex<double>;

inline constexpr double kUnitTolerance = 1e-9;
inline constexpr double kDropProbability = 1e-12;

/// Square complex matrix, row-major.
class Matrix {
public:
    Matrix() = default;
    explicit Matrix(std::size_t dim) : dim_(dim), data_(dim * dim) {}
    Matrix(std::size_t dim, std::vector<Complex> entries);

    static Matrix identity(std::size_t dim);

    std::size_t dim() const { return dim_; }
    Complex& operator()(std::size_t r, std::size_t c) { return data_[r * dim_ + c]; }
    const Complex& operator()(std::size_t r, std::size_t c) const { return data_[r * dim_ + c]; }
    const std::vector<Complex>& entries() const { return data_; }

    Matrix adjoint() const;
    Matrix operator*(const Matrix& rhs) const;
    Matrix operator+(const Matrix& rhs) const;
    std::vector<Complex> apply(std::span<const Complex> v) const;

    /// Largest entrywise |a - b|.
    double max_abs_diff(const Matrix& other) const;

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t dim_ = 0;
    std::vector<Complex> data_;
};

/// Kronecker product a (x) b.
Matrix kron(const Matrix& a, const Matrix& b);

class StateVector {
public:
    /// The width-0 register.
    StateVector() : amps_{Complex{1.0, 0.0}} {}
    StateVector(std::size_t width, std::vector<Complex> amplitudes);

    static StateVector basis(std::size_t width, std::uint64_t index);

    std::size_t width() const { return width_; }
    std::size_t size() const { return amps_.size(); }
    const std::vector<Complex>& amplitudes() const { return amps_; }
    const Complex& operator[](std::size_t i) const { return amps_[i]; }

    double norm() const;
    double max_abs_diff(const StateVector& other) const;

    friend bool operator==(const StateVector&, const StateVector&) = default;

private:
    std::size_t width_ = 0;
    std::vector<Complex> amps_;
};

struct UnitaryMatrix {
    std::string name;
    std::size_t arity = 0;
    Matrix matrix;
};

struct ObservableBranch {
    std::int64_t eigenvalue = 0;
    Matrix projector;
};

/// Spectral form sum_i eigenvalue_i * projector_i.
struct Observable {
    std::string name;
    std::size_t arity = 0;
    std::vector<ObservableBranch> branches;
};

struct MeasurementBranch {
    std::int64_t eigenvalue = 0;
    double probability = 0.0;
    StateVector post_state;
};

UnitaryMatrix builtin_gate(const std::string& name);
Observable builtin_observable(const std::string& name);
const std::vector<std::string>& builtin_gate_names();
const std::vector<std::string>& builtin_observable_names();

/// Throws QuantumError unless U U^dagger = I within tol.
void validate_unitary(const UnitaryMatrix& u, double tol = kUnitTolerance);

/// Throws QuantumError unless every projector is hermitian and idempotent,
/// projectors are mutually orthogonal, sum to I, and eigenvalues are distinct.
void validate_observable(const Observable& obs, double tol = kUnitTolerance);

/// |bit> (x) state. The new qubit becomes slot 0.
StateVector init_qubit(const StateVector& state, int bit);

/// Basis-index bijection pi with pi(b) carrying the bit of b at
/// positions[j] into slot j, and the remaining slots in their original
/// relative order after them. Result has 2^width entries.
std::vector<std::uint64_t> front_permutation(std::size_t width, std::span<const std::size_t> positions);

/// Pi^t (U (x) I^k) Pi |psi>.
StateVector apply_unitary(const StateVector& state, std::span<const std::size_t> positions, const UnitaryMatrix& u);

/// One branch per eigenvalue whose probability exceeds kDropProbability,
/// in the observable's branch order, probabilities renormalized to sum 1.
std::vector<MeasurementBranch> measure(const StateVector& state, std::span<const std::size_t> positions,
                                       const Observable& obs);

/// Named unitaries and observables available to programs.
class GateRegistry {
public:
    /// Registry holding the built-in gates and observables.
    static GateRegistry builtins();

    void add_unitary(UnitaryMatrix u);
    void add_observable(Observable obs);

    const UnitaryMatrix* find_unitary(const std::string& name) const;
    const Observable* find_observable(const std::string& name) const;

    const std::map<std::string, UnitaryMatrix>& unitaries() const { return unitaries_; }
    const std::map<std::string, Observable>& observables() const { return observables_; }

    /// Parse a definitions file and merge its entries (validated) into this registry.
    void load_definitions(const std::string& text);

private:
    std::map<std::string, UnitaryMatrix> unitaries_;
    std::map<std::string, Observable> observables_;
};

/// Parses "a+bi", "a-bi", "a", "bi", "-i" and similar.
Complex parse_complex(const std::string& token);

} // namespace qproc
