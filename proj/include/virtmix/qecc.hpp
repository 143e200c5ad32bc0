#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "virtmix/error.hpp"

namespace virtmix::qecc {

using cplx = std::complex<double>;
using Vec = Eigen::VectorXcd;
using Mat = Eigen::MatrixXcd;

inline constexpr double half_pi = 1.57079632679489661923;

/// Pure register of `n` qubits. Wires are 1-based; wire 1 is the most significant bit,
/// so "|100>" has wire 1 in |1>. |0> is the ground state g. Global phase is not tracked.
struct RegisterState {
    int qubit_count = 0;
    Vec amplitudes;

    static RegisterState zeros(int n) {
        if (n < 1 || n > 20) throw ValidationError("register size must be in 1..20");
        RegisterState s{n, Vec::Zero(Eigen::Index{1} << n)};
        s.amplitudes(0) = 1.0;
        return s;
    }

    /// From a bit string like "0110" (wire 1 first).
    static RegisterState basis(const std::string& bits) {
        auto s = zeros(static_cast<int>(bits.size()));
        s.amplitudes(0) = 0.0;
        Eigen::Index idx = 0;
        for (char c : bits) {
            if (c != '0' && c != '1') throw ValidationError("basis bit string may only contain 0 and 1");
            idx = (idx << 1) | (c == '1');
        }
        s.amplitudes(idx) = 1.0;
        return s;
    }

    /// Logical qubit a|0> + b|1> on wire 1 followed by `extra` wires in |0>.
    static RegisterState logical(cplx a, cplx b, int extra = 0) {
        if (std::abs(std::norm(a) + std::norm(b) - 1.0) > 1e-12) throw ValidationError("|a|^2 + |b|^2 must be 1");
        auto s = zeros(1 + extra);
        s.amplitudes(0) = a;
        s.amplitudes(Eigen::Index{1} << extra) = b;
        return s;
    }

    Eigen::Index dim() const { return amplitudes.size(); }
    double norm() const { return amplitudes.norm(); }
    int shift(int wire) const { return qubit_count - wire; }

    void check_wire(int wire) const {
        if (wire < 1 || wire > qubit_count)
            throw ValidationError("wire " + std::to_string(wire) + " outside 1.." + std::to_string(qubit_count));
    }
};

enum class GateKind { cnot, y, s, x, z, u3mix, u4mix };

struct GateSpec {
    GateKind kind;
    std::vector<int> wires;  // CNOT: control, target. Mix gates: source first.
    double theta = 0.0;      // Y rotation angle

    static GateSpec cnot(int control, int target) { return {GateKind::cnot, {control, target}}; }
    static GateSpec y(double theta, int wire) { return {GateKind::y, {wire}, theta}; }
    static GateSpec s(int wire) { return {GateKind::s, {wire}}; }
    static GateSpec x(int wire) { return {GateKind::x, {wire}}; }
    static GateSpec z(int wire) { return {GateKind::z, {wire}}; }
    static GateSpec u3mix(int a, int b, int c) { return {GateKind::u3mix, {a, b, c}}; }
    static GateSpec u4mix(int a, int b, int c, int d) { return {GateKind::u4mix, {a, b, c, d}}; }
};

/// |10..0> <-> -i|01..1> on k wires, identity elsewhere.
inline Mat mix_matrix(int k) {
    const Eigen::Index d = Eigen::Index{1} << k;
    Mat u = Mat::Identity(d, d);
    const Eigen::Index hi = d / 2, lo = d / 2 - 1;
    u(hi, hi) = u(lo, lo) = 0.0;
    u(lo, hi) = u(hi, lo) = cplx(0, -1);
    return u;
}

/// Local unitary of a gate; the first listed wire is the most significant local bit.
inline Mat gate_matrix(const GateSpec& g) {
    Mat m;
    switch (g.kind) {
        case GateKind::cnot:
            m = Mat::Identity(4, 4);
            m(2, 2) = m(3, 3) = 0.0;
            m(2, 3) = m(3, 2) = 1.0;
            return m;
        case GateKind::y: {
            const double c = std::cos(g.theta / 2), s = std::sin(g.theta / 2);
            m.resize(2, 2);
            m << c, -s, s, c;
            return m;
        }
        case GateKind::s:
            m = Mat::Identity(2, 2);
            m(1, 1) = cplx(0, 1);
            return m;
        case GateKind::x:
            m = Mat::Zero(2, 2);
            m(0, 1) = m(1, 0) = 1.0;
            return m;
        case GateKind::z:
            m = Mat::Identity(2, 2);
            m(1, 1) = -1.0;
            return m;
        case GateKind::u3mix: return mix_matrix(3);
        case GateKind::u4mix: return mix_matrix(4);
    }
    throw ValidationError("unknown gate kind");
}

inline std::size_t gate_arity(GateKind k) {
    switch (k) {
        case GateKind::cnot: return 2;
        case GateKind::u3mix: return 3;
        case GateKind::u4mix: return 4;
        default: return 1;
    }
}

/// Applies a 2^k x 2^k unitary to the listed wires.
inline RegisterState apply_unitary(const RegisterState& st, const std::vector<int>& wires, const Mat& u) {
    const int k = static_cast<int>(wires.size());
    if (u.rows() != (Eigen::Index{1} << k) || u.cols() != u.rows()) throw ValidationError("unitary size does not match wire count");
    Eigen::Index mask = 0;
    for (std::size_t a = 0; a < wires.size(); ++a) {
        st.check_wire(wires[a]);
        for (std::size_t b = 0; b < a; ++b)
            if (wires[a] == wires[b]) throw ValidationError("wire " + std::to_string(wires[a]) + " used twice in one gate");
        mask |= Eigen::Index{1} << st.shift(wires[a]);
    }
    const Eigen::Index ld = Eigen::Index{1} << k;
    auto full_index = [&](Eigen::Index base, Eigen::Index local) {
        Eigen::Index idx = base;
        for (int a = 0; a < k; ++a)
            if ((local >> (k - 1 - a)) & 1) idx |= Eigen::Index{1} << st.shift(wires[a]);
        return idx;
    };
    RegisterState out{st.qubit_count, Vec::Zero(st.dim())};
    Vec in_local(ld), out_local(ld);
    for (Eigen::Index base = 0; base < st.dim(); ++base) {
        if (base & mask) continue;
        for (Eigen::Index l = 0; l < ld; ++l) in_local(l) = st.amplitudes(full_index(base, l));
        out_local.noalias() = u * in_local;
        for (Eigen::Index l = 0; l < ld; ++l) out.amplitudes(full_index(base, l)) = out_local(l);
    }
    return out;
}

inline RegisterState apply_gate(const RegisterState& st, const GateSpec& g) {
    if (g.wires.size() != gate_arity(g.kind))
        throw ValidationError("gate expects " + std::to_string(gate_arity(g.kind)) + " wires, got " + std::to_string(g.wires.size()));
    return apply_unitary(st, g.wires, gate_matrix(g));
}

inline RegisterState u3_mix(const RegisterState& st, const std::array<int, 3>& w) {
    return apply_gate(st, GateSpec::u3mix(w[0], w[1], w[2]));
}

inline RegisterState u4_mix(const RegisterState& st, const std::array<int, 4>& w) {
    return apply_gate(st, GateSpec::u4mix(w[0], w[1], w[2], w[3]));
}

inline double probability_one(const RegisterState& st, int wire) {
    st.check_wire(wire);
    const Eigen::Index bit = Eigen::Index{1} << st.shift(wire);
    double p = 0;
    for (Eigen::Index i = 0; i < st.dim(); ++i)
        if (i & bit) p += std::norm(st.amplitudes(i));
    return p;
}

/// Post-measurement state for a given outcome (renormalized).
inline RegisterState project_qubit(const RegisterState& st, int wire, int outcome) {
    st.check_wire(wire);
    const Eigen::Index bit = Eigen::Index{1} << st.shift(wire);
    RegisterState out = st;
    for (Eigen::Index i = 0; i < st.dim(); ++i)
        if (static_cast<bool>(i & bit) != static_cast<bool>(outcome)) out.amplitudes(i) = 0.0;
    const double n = out.amplitudes.norm();
    if (n == 0.0) throw NumericalError("measurement outcome has zero probability");
    out.amplitudes /= n;
    return out;
}

struct Measurement {
    int outcome = 0;
    RegisterState state;
    double probability = 0.0;
};

/// Projective measurement. `u` in [0,1) selects the branch (outcome 0 when u < p0);
/// the default picks the more likely branch.
inline Measurement measure_qubit(const RegisterState& st, int wire, std::optional<double> u = std::nullopt) {
    const double p1 = probability_one(st, wire), p0 = 1.0 - p1;
    const int outcome = u ? (*u < p0 ? 0 : 1) : (p1 > p0 ? 1 : 0);
    return {outcome, project_qubit(st, wire, outcome), outcome ? p1 : p0};
}

enum class EncodeVariant { cnot, mix };

struct EncodeResult {
    RegisterState state;
    std::optional<int> discarded_wire;  // mix: the source wire, left exactly in |0>
};

/// Copies the logical qubit on `source` into `targets` (each must be |0>).
/// cnot: a CNOT per target. mix: the (k+1)-wire mix gate followed by S on the last target,
/// which leaves the logical state on the targets and |0> on the source.
inline EncodeResult repetition_encode(const RegisterState& st, int source, const std::vector<int>& targets, EncodeVariant v) {
    if (targets.size() < 2 || targets.size() > 3) throw ValidationError("repetition_encode supports 2 or 3 copies");
    for (int t : targets)
        if (probability_one(st, t) > 1e-12) throw ValidationError("repetition_encode: ancilla wire " + std::to_string(t) + " is not in |0>");
    if (v == EncodeVariant::cnot) {
        RegisterState out = st;
        for (int t : targets) out = apply_gate(out, GateSpec::cnot(source, t));
        return {out, std::nullopt};
    }
    std::vector<int> wires{source};
    wires.insert(wires.end(), targets.begin(), targets.end());
    RegisterState out = apply_unitary(st, wires, mix_matrix(static_cast<int>(wires.size())));
    out = apply_gate(out, GateSpec::s(targets.back()));
    return {out, source};
}

/// Encodes a|0> + b|1> into `n_copies` qubits. cnot uses wires 1..n (logical on wire 1);
/// mix uses wires 1..n+1 and discards wire 1.
inline EncodeResult repetition_encode(cplx a, cplx b, int n_copies, EncodeVariant v) {
    if (n_copies < 2 || n_copies > 3) throw ValidationError("n_copies must be 2 or 3");
    if (v == EncodeVariant::cnot) {
        // The logical wire is itself the first copy.
        RegisterState out = RegisterState::logical(a, b, n_copies - 1);
        for (int w = 2; w <= n_copies; ++w) out = apply_gate(out, GateSpec::cnot(1, w));
        return {out, std::nullopt};
    }
    std::vector<int> t;
    for (int w = 2; w <= n_copies + 1; ++w) t.push_back(w);
    return repetition_encode(RegisterState::logical(a, b, n_copies), 1, t, v);
}

/// Reduced density matrix of one wire.
inline Eigen::Matrix2cd reduced_qubit(const RegisterState& st, int wire) {
    st.check_wire(wire);
    const Eigen::Index bit = Eigen::Index{1} << st.shift(wire);
    Eigen::Matrix2cd r = Eigen::Matrix2cd::Zero();
    for (Eigen::Index i = 0; i < st.dim(); ++i) {
        if (i & bit) continue;
        const cplx a0 = st.amplitudes(i), a1 = st.amplitudes(i | bit);
        r(0, 0) += std::norm(a0);
        r(1, 1) += std::norm(a1);
        r(0, 1) += a0 * std::conj(a1);
        r(1, 0) += a1 * std::conj(a0);
    }
    return r;
}

enum class EccMode { bitflip, phaseflip };
enum class EccImplementation { cnot, mix };
enum class ErrorType { none, x, z };

struct InjectedError {
    ErrorType type = ErrorType::none;
    int wire = 0;  // data wire 1..3
};

struct EccReport {
    InjectedError error;
    EccMode mode = EccMode::bitflip;
    EccImplementation implementation = EccImplementation::cnot;
    int m = 0, n = 0;            // syndrome
    int correction_wire = 0;     // data wire flipped, 0 for none
    double syndrome_probability = 1.0;
    double fidelity = 0.0;
};

inline std::string to_string(EccMode m) { return m == EccMode::bitflip ? "bitflip" : "phaseflip"; }
inline std::string to_string(EccImplementation i) { return i == EccImplementation::cnot ? "cnot" : "mix"; }
inline std::string to_string(ErrorType t) { return t == ErrorType::none ? "none" : t == ErrorType::x ? "X" : "Z"; }

namespace detail {

/// Physical wires of one layout.
struct Layout {
    int wires;
    int input;                       // logical input / output wire
    std::array<int, 3> data_before;  // data wires before S1
    std::array<int, 3> data_after;   // data wires after S1
    int anc1, anc2;
};

inline Layout layout_for(EccImplementation impl) {
    if (impl == EccImplementation::cnot) return {5, 1, {1, 2, 3}, {1, 2, 3}, 4, 5};
    // S1 moves data qubit 1 from wire 2 onto the freed input wire 1.
    return {6, 1, {2, 3, 4}, {1, 3, 4}, 5, 6};
}

struct Syndrome {
    RegisterState state;
    int m, n;
    double probability;
};

/// A, B, E, B', S1, S2 and ancilla measurement.
inline Syndrome run_to_syndrome(cplx a, cplx b, InjectedError err, EccMode mode, EccImplementation impl) {
    const Layout L = layout_for(impl);
    RegisterState st = RegisterState::logical(a, b, L.wires - 1);
    const auto& d = L.data_before;
    if (impl == EccImplementation::cnot) {
        st = apply_gate(st, GateSpec::cnot(d[0], d[1]));
        st = apply_gate(st, GateSpec::cnot(d[0], d[2]));
    } else {
        st = u4_mix(st, {L.input, d[0], d[1], d[2]});
        st = apply_gate(st, GateSpec::s(d[2]));
    }
    if (mode == EccMode::phaseflip)
        for (int w : d) st = apply_gate(st, GateSpec::y(half_pi, w));
    if (err.type != ErrorType::none) {
        const int w = d[static_cast<std::size_t>(err.wire - 1)];
        st = apply_gate(st, err.type == ErrorType::x ? GateSpec::x(w) : GateSpec::z(w));
    }
    if (mode == EccMode::phaseflip)
        for (int w : d) st = apply_gate(st, GateSpec::y(-half_pi, w));
    if (impl == EccImplementation::cnot) {
        st = apply_gate(st, GateSpec::cnot(d[0], L.anc1));
        st = apply_gate(st, GateSpec::cnot(d[0], L.anc2));
    } else {
        st = u4_mix(st, {d[0], L.data_after[0], L.anc1, L.anc2});
        st = apply_gate(st, GateSpec::s(L.data_after[0]));
    }
    const auto& da = L.data_after;
    st = apply_gate(st, GateSpec::cnot(da[1], L.anc1));
    st = apply_gate(st, GateSpec::cnot(da[2], L.anc2));
    const auto mm = measure_qubit(st, L.anc1);
    const auto nn = measure_qubit(mm.state, L.anc2);
    return {nn.state, mm.outcome, nn.outcome, mm.probability * nn.probability};
}

}  // namespace detail

/// Syndrome -> data wire (0 means no correction), obtained by simulating each single error once.
struct SyndromeTable {
    std::map<std::pair<int, int>, int> wire_for;
};

inline SyndromeTable calibrate_syndromes(EccMode mode, EccImplementation impl) {
    const cplx a(0.6, 0.0), b(0.0, 0.8);
    const ErrorType t = mode == EccMode::bitflip ? ErrorType::x : ErrorType::z;
    SyndromeTable table;
    for (int w = 0; w <= 3; ++w) {
        const auto s = detail::run_to_syndrome(a, b, {w ? t : ErrorType::none, w}, mode, impl);
        if (s.probability < 1 - 1e-10) throw NumericalError("syndrome calibration: outcome is not deterministic");
        if (!table.wire_for.emplace(std::make_pair(s.m, s.n), w).second)
            throw NumericalError("syndrome calibration: two error cases share syndrome (" + std::to_string(s.m) + "," +
                                 std::to_string(s.n) + ")");
    }
    return table;
}

inline const SyndromeTable& syndrome_table(EccMode mode, EccImplementation impl) {
    static const std::array<SyndromeTable, 4> tables = {
        calibrate_syndromes(EccMode::bitflip, EccImplementation::cnot),
        calibrate_syndromes(EccMode::bitflip, EccImplementation::mix),
        calibrate_syndromes(EccMode::phaseflip, EccImplementation::cnot),
        calibrate_syndromes(EccMode::phaseflip, EccImplementation::mix)};
    return tables[static_cast<std::size_t>(2 * (mode == EccMode::phaseflip) + (impl == EccImplementation::mix))];
}

inline EccReport run_ecc(cplx a, cplx b, InjectedError err, EccMode mode, EccImplementation impl) {
    if (err.type != ErrorType::none && (err.wire < 1 || err.wire > 3))
        throw ValidationError("error wire must be a data wire 1..3, got " + std::to_string(err.wire));
    if (std::abs(std::norm(a) + std::norm(b) - 1.0) > 1e-12) throw ValidationError("|a|^2 + |b|^2 must be 1");
    const auto L = detail::layout_for(impl);
    auto s = detail::run_to_syndrome(a, b, err, mode, impl);
    if (s.probability < 1 - 1e-10)
        throw NumericalError("ECC syndrome is not deterministic (probability " + std::to_string(s.probability) + ")");
    EccReport rep{err, mode, impl, s.m, s.n, 0, s.probability, 0.0};
    const auto& table = syndrome_table(mode, impl).wire_for;
    if (auto it = table.find({s.m, s.n}); it != table.end()) rep.correction_wire = it->second;
    RegisterState st = s.state;
    const auto& da = L.data_after;
    if (rep.correction_wire) st = apply_gate(st, GateSpec::x(da[static_cast<std::size_t>(rep.correction_wire - 1)]));
    int out_wire;
    if (impl == EccImplementation::cnot) {
        st = apply_gate(st, GateSpec::cnot(da[0], da[2]));
        st = apply_gate(st, GateSpec::cnot(da[0], da[1]));
        out_wire = da[0];
    } else {
        // The wire freed by S1 receives the decoded logical qubit.
        const int freed = L.data_before[0];
        st = apply_gate(st, GateSpec::s(da[2]));
        st = u4_mix(st, {freed, da[0], da[1], da[2]});
        out_wire = freed;
    }
    const Eigen::Matrix2cd rho = reduced_qubit(st, out_wire);
    Eigen::Vector2cd psi(a, b);
    rep.fidelity = std::clamp(psi.dot(rho * psi).real(), 0.0, 1.0);
    return rep;
}

inline nlohmann::json to_json(const EccReport& r) {
    return {{"implementation", to_string(r.implementation)},
            {"mode", to_string(r.mode)},
            {"error", to_string(r.error.type)},
            {"error_wire", r.error.wire},
            {"syndrome", {r.m, r.n}},
            {"correction_wire", r.correction_wire},
            {"syndrome_probability", r.syndrome_probability},
            {"fidelity", r.fidelity}};
}

}  // namespace virtmix::qecc
