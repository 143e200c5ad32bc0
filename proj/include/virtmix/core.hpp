#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "virtmix/error.hpp"

namespace virtmix {

using cplx = std::complex<double>;
using Index = Eigen::Index;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using Mat2 = Eigen::Matrix2cd;

inline constexpr double pi = 3.14159265358979323846;

/// Two-level atom state. g has sigma_z = -1 and sits at local index 0.
enum class Level : std::uint8_t { g = 0, e = 1 };

inline char level_char(Level l) { return l == Level::g ? 'g' : 'e'; }

/// Tensor layout "qubit 1 (x) ... (x) qubit N (x) cavity", qubit 1 slowest.
/// Qubit indices in the public API are 1-based.
class HilbertLayout {
public:
    HilbertLayout(int qubit_count, int fock_cutoff) : qubits_(qubit_count), cutoff_(fock_cutoff) {
        if (qubit_count < 1 || qubit_count > 16)
            throw ValidationError("qubit_count must be in 1..16, got " + std::to_string(qubit_count));
        if (fock_cutoff < 1)
            throw ValidationError("fock_cutoff must be >= 1, got " + std::to_string(fock_cutoff));
    }

    int qubit_count() const noexcept { return qubits_; }
    int fock_cutoff() const noexcept { return cutoff_; }
    Index qubit_dim() const noexcept { return Index{1} << qubits_; }
    Index dim() const noexcept { return qubit_dim() * cutoff_; }

    Index index_of(std::span<const Level> levels, int photons) const {
        if (static_cast<int>(levels.size()) != qubits_)
            throw ValidationError("expected " + std::to_string(qubits_) + " qubit levels, got " +
                                  std::to_string(levels.size()));
        if (photons < 0 || photons >= cutoff_)
            throw ValidationError("photon number " + std::to_string(photons) + " outside 0.." +
                                  std::to_string(cutoff_ - 1));
        Index bits = 0;
        for (Level l : levels) bits = (bits << 1) | static_cast<Index>(l);
        return bits * cutoff_ + photons;
    }

    Level level(Index index, int qubit) const {
        check_qubit(qubit);
        const Index bits = index / cutoff_;
        return static_cast<Level>((bits >> (qubits_ - qubit)) & 1);
    }

    int photons(Index index) const { return static_cast<int>(index % cutoff_); }

    std::vector<Level> levels(Index index) const {
        std::vector<Level> out(qubits_);
        for (int q = 1; q <= qubits_; ++q) out[q - 1] = level(index, q);
        return out;
    }

    /// Number of excited qubits plus photons.
    int excitations(Index index) const {
        int n = photons(index);
        for (int q = 1; q <= qubits_; ++q) n += level(index, q) == Level::e;
        return n;
    }

    /// "|e,g,g,0>" style ket label.
    std::string ket(Index index) const {
        std::string s = "|";
        for (int q = 1; q <= qubits_; ++q) {
            s += level_char(level(index, q));
            s += ',';
        }
        return s + std::to_string(photons(index)) + ">";
    }

    /// "egg0" style label, free of commas so it can live in CSV cells.
    std::string compact(Index index) const {
        std::string s;
        for (int q = 1; q <= qubits_; ++q) s += level_char(level(index, q));
        return s + std::to_string(photons(index));
    }

    /// Accepts both "|e,g,0>" and "eg0".
    Index parse(std::string_view text) const {
        std::vector<Level> lv;
        std::string digits;
        for (char c : text) {
            if (c == 'g' && digits.empty()) lv.push_back(Level::g);
            else if (c == 'e' && digits.empty()) lv.push_back(Level::e);
            else if (c >= '0' && c <= '9') digits += c;
            else if (c == '|' || c == ',' || c == '>' || c == ' ') continue;
            else throw ValidationError("cannot parse bare state label '" + std::string(text) + "'");
        }
        if (digits.empty()) throw ValidationError("bare state label '" + std::string(text) + "' lacks a photon number");
        return index_of(lv, std::stoi(digits));
    }

    void check_qubit(int qubit) const {
        if (qubit < 1 || qubit > qubits_)
            throw ValidationError("qubit index " + std::to_string(qubit) + " outside 1.." + std::to_string(qubits_));
    }

    bool operator==(const HilbertLayout&) const = default;

private:
    int qubits_;
    int cutoff_;
};

/// Dense square operator tied to a layout.
class OperatorMatrix {
public:
    OperatorMatrix(HilbertLayout layout, Matrix m) : layout_(layout), m_(std::move(m)) {
        if (m_.rows() != layout_.dim() || m_.cols() != layout_.dim())
            throw ValidationError("operator shape " + std::to_string(m_.rows()) + "x" + std::to_string(m_.cols()) +
                                  " does not match layout dimension " + std::to_string(layout_.dim()));
    }

    static OperatorMatrix zero(const HilbertLayout& l) { return {l, Matrix::Zero(l.dim(), l.dim())}; }
    static OperatorMatrix identity(const HilbertLayout& l) { return {l, Matrix::Identity(l.dim(), l.dim())}; }

    const HilbertLayout& layout() const noexcept { return layout_; }
    const Matrix& matrix() const noexcept { return m_; }
    Index dim() const noexcept { return m_.rows(); }
    cplx operator()(Index r, Index c) const { return m_(r, c); }

    double hermiticity_error() const { return (m_ - m_.adjoint()).cwiseAbs().maxCoeff(); }
    bool is_hermitian(double tol = 1e-12) const { return hermiticity_error() <= tol; }
    OperatorMatrix adjoint() const { return {layout_, m_.adjoint()}; }

    friend OperatorMatrix operator+(const OperatorMatrix& a, const OperatorMatrix& b) {
        a.require_same(b);
        return {a.layout_, a.m_ + b.m_};
    }
    friend OperatorMatrix operator-(const OperatorMatrix& a, const OperatorMatrix& b) {
        a.require_same(b);
        return {a.layout_, a.m_ - b.m_};
    }
    friend OperatorMatrix operator*(const OperatorMatrix& a, const OperatorMatrix& b) {
        a.require_same(b);
        return {a.layout_, a.m_ * b.m_};
    }
    friend OperatorMatrix operator*(cplx s, const OperatorMatrix& a) { return {a.layout_, s * a.m_}; }
    friend OperatorMatrix operator*(double s, const OperatorMatrix& a) { return {a.layout_, s * a.m_}; }

private:
    void require_same(const OperatorMatrix& o) const {
        if (!(layout_ == o.layout_)) throw ValidationError("operators live on different layouts");
    }

    HilbertLayout layout_;
    Matrix m_;
};

inline OperatorMatrix commutator(const OperatorMatrix& a, const OperatorMatrix& b) { return a * b - b * a; }

class KetVector {
public:
    KetVector(HilbertLayout layout, Vector v) : layout_(layout), v_(std::move(v)) {
        if (v_.size() != layout_.dim())
            throw ValidationError("ket length " + std::to_string(v_.size()) + " does not match layout dimension " +
                                  std::to_string(layout_.dim()));
    }

    const HilbertLayout& layout() const noexcept { return layout_; }
    const Vector& amplitudes() const noexcept { return v_; }
    Index dim() const noexcept { return v_.size(); }
    double norm() const { return v_.norm(); }
    bool is_normalized(double tol = 1e-12) const { return std::abs(v_.norm() - 1.0) <= tol; }

private:
    HilbertLayout layout_;
    Vector v_;
};

namespace pauli {
inline Mat2 identity() { return Mat2::Identity(); }
inline Mat2 x() {
    Mat2 m;
    m << 0, 1, 1, 0;
    return m;
}
inline Mat2 y() {
    Mat2 m;
    m << 0, cplx(0, -1), cplx(0, 1), 0;
    return m;
}
/// diag(-1, +1): g is the lower level.
inline Mat2 z() {
    Mat2 m;
    m << -1, 0, 0, 1;
    return m;
}
/// |e><g|
inline Mat2 plus() {
    Mat2 m = Mat2::Zero();
    m(1, 0) = 1;
    return m;
}
/// |g><e|
inline Mat2 minus() {
    Mat2 m = Mat2::Zero();
    m(0, 1) = 1;
    return m;
}
}  // namespace pauli

/// Identity on every factor except `qubit` (1-based), where `local` acts.
inline OperatorMatrix embed_qubit_op(const HilbertLayout& layout, int qubit, const Mat2& local) {
    layout.check_qubit(qubit);
    const Index d = layout.dim();
    Matrix m = Matrix::Zero(d, d);
    const int shift = layout.qubit_count() - qubit;
    const Index stride = (Index{1} << shift) * layout.fock_cutoff();
    for (Index col = 0; col < d; ++col) {
        const int b = static_cast<int>((col / stride) & 1);
        const Index base = col - b * stride;
        for (int a = 0; a < 2; ++a) {
            const cplx v = local(a, b);
            if (v != cplx(0)) m(base + a * stride, col) += v;
        }
    }
    return {layout, std::move(m)};
}

inline OperatorMatrix cavity_annihilation(const HilbertLayout& layout) {
    const Index d = layout.dim();
    const int c = layout.fock_cutoff();
    Matrix m = Matrix::Zero(d, d);
    for (Index col = 0; col < d; ++col) {
        const int n = static_cast<int>(col % c);
        if (n >= 1) m(col - 1, col) = std::sqrt(static_cast<double>(n));
    }
    return {layout, std::move(m)};
}

inline OperatorMatrix cavity_creation(const HilbertLayout& layout) { return cavity_annihilation(layout).adjoint(); }

inline OperatorMatrix photon_number(const HilbertLayout& layout) {
    Matrix m = Matrix::Zero(layout.dim(), layout.dim());
    for (Index i = 0; i < layout.dim(); ++i) m(i, i) = layout.photons(i);
    return {layout, std::move(m)};
}

/// X = a + a^dag
inline OperatorMatrix cavity_quadrature(const HilbertLayout& layout) {
    const auto a = cavity_annihilation(layout);
    return a + a.adjoint();
}

/// a^dag a + sum_i sigma_+ sigma_- (diagonal).
inline OperatorMatrix excitation_number(const HilbertLayout& layout) {
    Matrix m = Matrix::Zero(layout.dim(), layout.dim());
    for (Index i = 0; i < layout.dim(); ++i) m(i, i) = layout.excitations(i);
    return {layout, std::move(m)};
}

/// exp(i pi N) with N the total excitation number.
inline OperatorMatrix parity_operator(const HilbertLayout& layout) {
    Matrix m = Matrix::Zero(layout.dim(), layout.dim());
    for (Index i = 0; i < layout.dim(); ++i) m(i, i) = (layout.excitations(i) % 2 == 0) ? 1.0 : -1.0;
    return {layout, std::move(m)};
}

inline KetVector basis_ket(const HilbertLayout& layout, Index index) {
    if (index < 0 || index >= layout.dim())
        throw ValidationError("basis index " + std::to_string(index) + " out of range");
    Vector v = Vector::Zero(layout.dim());
    v(index) = 1.0;
    return {layout, std::move(v)};
}

inline KetVector bare_state(const HilbertLayout& layout, std::span<const Level> levels, int photons) {
    return basis_ket(layout, layout.index_of(levels, photons));
}

inline KetVector bare_state(const HilbertLayout& layout, std::initializer_list<Level> levels, int photons) {
    return bare_state(layout, std::span<const Level>(levels.begin(), levels.size()), photons);
}

}  // namespace virtmix
