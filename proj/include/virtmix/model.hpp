#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "virtmix/core.hpp"

namespace virtmix {

// All frequencies and rates are in units of the reference frequency omega0.
struct QubitParams {
    double omega = 1.0;
    double lambda = 0.0;
    double theta = 0.0;
    double gamma = 0.0;
};

struct SystemConfig {
    std::vector<QubitParams> qubits;
    double omega_c = 1.0;
    double kappa = 0.0;
    int fock_cutoff = 8;

    int qubit_count() const noexcept { return static_cast<int>(qubits.size()); }
    HilbertLayout layout() const { return {qubit_count(), fock_cutoff}; }
    const QubitParams& qubit(int i) const { return qubits.at(static_cast<std::size_t>(i - 1)); }
};

inline void validate(const SystemConfig& c) {
    if (c.qubits.empty()) throw ValidationError("config needs at least one qubit");
    if (!(c.omega_c > 0)) throw ValidationError("omega_c must be > 0");
    if (!(c.kappa >= 0)) throw ValidationError("kappa must be >= 0");
    if (c.fock_cutoff < 1) throw ValidationError("fock_cutoff must be >= 1");
    for (std::size_t i = 0; i < c.qubits.size(); ++i) {
        const auto& q = c.qubits[i];
        const std::string tag = "qubits[" + std::to_string(i) + "]";
        if (!(q.omega > 0)) throw ValidationError(tag + ".omega must be > 0");
        if (!(q.lambda >= 0)) throw ValidationError(tag + ".lambda must be >= 0");
        if (!(q.gamma >= 0)) throw ValidationError(tag + ".gamma must be >= 0");
        if (!std::isfinite(q.theta)) throw ValidationError(tag + ".theta must be finite");
    }
}

enum class CouplingModel { generalized_dicke, tavis_cummings };

/// sum_i (omega_i/2) sigma_z + omega_c a^dag a, diagonal in the bare basis.
inline Eigen::VectorXd bare_energies(const SystemConfig& c) {
    validate(c);
    const auto layout = c.layout();
    Eigen::VectorXd e(layout.dim());
    for (Index k = 0; k < layout.dim(); ++k) {
        double v = c.omega_c * layout.photons(k);
        for (int q = 1; q <= c.qubit_count(); ++q)
            v += 0.5 * c.qubit(q).omega * (layout.level(k, q) == Level::e ? 1.0 : -1.0);
        e(k) = v;
    }
    return e;
}

inline OperatorMatrix bare_hamiltonian(const SystemConfig& c) {
    const auto e = bare_energies(c);
    return {c.layout(), e.cast<cplx>().asDiagonal().toDenseMatrix()};
}

/// (a + a^dag) sum_i lambda_i (cos theta_i sigma_x + sin theta_i sigma_z)
inline OperatorMatrix dicke_interaction(const SystemConfig& c) {
    validate(c);
    const auto layout = c.layout();
    Matrix coupling = Matrix::Zero(layout.dim(), layout.dim());
    for (int q = 1; q <= c.qubit_count(); ++q) {
        const auto& p = c.qubit(q);
        if (p.lambda == 0.0) continue;
        const Mat2 local = p.lambda * (std::cos(p.theta) * pauli::x() + std::sin(p.theta) * pauli::z());
        coupling += embed_qubit_op(layout, q, local).matrix();
    }
    return {layout, cavity_quadrature(layout).matrix() * coupling};
}

/// sum_i lambda_i (a sigma_+ + a^dag sigma_-)
inline OperatorMatrix tavis_cummings_interaction(const SystemConfig& c) {
    validate(c);
    const auto layout = c.layout();
    const Matrix a = cavity_annihilation(layout).matrix();
    Matrix v = Matrix::Zero(layout.dim(), layout.dim());
    for (int q = 1; q <= c.qubit_count(); ++q) {
        const double l = c.qubit(q).lambda;
        if (l == 0.0) continue;
        const Matrix sp = embed_qubit_op(layout, q, pauli::plus()).matrix();
        v += l * (a * sp);
    }
    return {layout, v + v.adjoint()};
}

inline OperatorMatrix interaction(const SystemConfig& c, CouplingModel m) {
    return m == CouplingModel::generalized_dicke ? dicke_interaction(c) : tavis_cummings_interaction(c);
}

inline OperatorMatrix build_generalized_dicke(const SystemConfig& c) { return bare_hamiltonian(c) + dicke_interaction(c); }

/// theta is ignored.
inline OperatorMatrix build_tavis_cummings(const SystemConfig& c) {
    return bare_hamiltonian(c) + tavis_cummings_interaction(c);
}

inline OperatorMatrix build_hamiltonian(const SystemConfig& c, CouplingModel m) {
    return m == CouplingModel::generalized_dicke ? build_generalized_dicke(c) : build_tavis_cummings(c);
}

/// Dispersive exchange coupling lambda_i lambda_j (1/D_i + 1/D_j)/2 with D = omega - omega_c.
/// Appends a note to `warnings` when |D| < 10 lambda for either qubit.
inline double effective_J2(const SystemConfig& c, int i, int j, std::vector<std::string>* warnings = nullptr) {
    validate(c);
    c.layout().check_qubit(i);
    c.layout().check_qubit(j);
    double inv[2];
    const int idx[2] = {i, j};
    for (int k = 0; k < 2; ++k) {
        const auto& q = c.qubit(idx[k]);
        const double d = q.omega - c.omega_c;
        if (d == 0.0)
            throw ValidationError("qubit " + std::to_string(idx[k]) + " is resonant with the cavity; J2 undefined");
        if (warnings && std::abs(d) < 10.0 * q.lambda)
            warnings->push_back("qubit " + std::to_string(idx[k]) + " is not dispersive: |omega - omega_c| = " +
                                std::to_string(std::abs(d)) + " < 10 lambda");
        inv[k] = 1.0 / d;
    }
    return c.qubit(i).lambda * c.qubit(j).lambda * (inv[0] + inv[1]) / 2.0;
}

enum class EffectiveKind { two_qubit, three_qubit, four_qubit_type_I, four_qubit_type_II };

inline int required_qubits(EffectiveKind k) {
    switch (k) {
        case EffectiveKind::two_qubit: return 2;
        case EffectiveKind::three_qubit: return 3;
        default: return 4;
    }
}

/// Qubit-only effective Hamiltonian (cavity factor of size 1).
///   two_qubit:          J (s+2 s-1 + h.c.)
///   three_qubit:        J (s+1 s+2 s-3 + h.c.)
///   four_qubit_type_I:  J (s-1 s-2 s+3 s+4 + h.c.)
///   four_qubit_type_II: J (s-1 s+2 s+3 s+4 + h.c.)
inline OperatorMatrix build_effective_hamiltonian(EffectiveKind kind, double J, int qubit_count) {
    if (qubit_count != required_qubits(kind))
        throw ValidationError("effective Hamiltonian kind needs " + std::to_string(required_qubits(kind)) +
                              " qubits, got " + std::to_string(qubit_count));
    const HilbertLayout layout(qubit_count, 1);
    auto sp = [&](int q) { return embed_qubit_op(layout, q, pauli::plus()).matrix(); };
    auto sm = [&](int q) { return embed_qubit_op(layout, q, pauli::minus()).matrix(); };
    Matrix t;
    switch (kind) {
        case EffectiveKind::two_qubit: t = sp(2) * sm(1); break;
        case EffectiveKind::three_qubit: t = sp(1) * sp(2) * sm(3); break;
        case EffectiveKind::four_qubit_type_I: t = sm(1) * sm(2) * sp(3) * sp(4); break;
        case EffectiveKind::four_qubit_type_II: t = sm(1) * sp(2) * sp(3) * sp(4); break;
    }
    return {layout, J * (t + t.adjoint())};
}

}  // namespace virtmix
