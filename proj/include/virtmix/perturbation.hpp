#pragma once

#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "virtmix/io.hpp"
#include "virtmix/model.hpp"

namespace virtmix {

struct TransitionPath {
    std::vector<Index> states;  // i, k1, ..., f
    double amplitude = 0.0;
    Index diagram = 0;          // first intermediate state
};

struct PathSumReport {
    int order = 0;
    Index initial = 0, final_state = 0;
    std::vector<TransitionPath> paths;    // lexicographic in the state sequence
    std::map<Index, double> per_diagram;  // keyed by first intermediate
    double total = 0.0;                   // sum of per_diagram values in key order
    std::optional<HilbertLayout> layout;
};

struct PathOptions {
    double epsilon = 1e-9;          // degeneracy guard on E_i - E_intermediate
    double link_threshold = 1e-14;  // |V| below this is not a link
    bool require_resonant = true;   // insist on |E_i - E_f| <= epsilon
};

/// Perturbative path sum  sum_paths V_fn ... V_ki / prod (E_i - E_k)  over chains of `order` links.
/// i and f are never intermediates. An intermediate within epsilon of E_i on a complete path is an error.
inline PathSumReport enumerate_paths(const Eigen::VectorXd& energies, const Matrix& V, Index i, Index f, int order,
                                     const PathOptions& opt = {}) {
    const Index d = energies.size();
    if (V.rows() != d || V.cols() != d) throw ValidationError("enumerate_paths: V and bare energies disagree in size");
    if (order < 2 || order > 4) throw ValidationError("enumerate_paths: order must be 2..4");
    if (i < 0 || f < 0 || i >= d || f >= d || i == f) throw ValidationError("enumerate_paths: invalid initial/final states");
    const double Ei = energies(i);
    if (opt.require_resonant && std::abs(Ei - energies(f)) > opt.epsilon)
        throw ValidationError("enumerate_paths: initial and final states are not resonant (E_i - E_f = " +
                              io::fmt(Ei - energies(f)) + ")");

    // Column adjacency: links[s] lists every k with |V(k, s)| above the threshold, ascending.
    std::vector<std::vector<Index>> links(static_cast<std::size_t>(d));
    for (Index s = 0; s < d; ++s)
        for (Index k = 0; k < d; ++k)
            if (std::abs(V(k, s)) > opt.link_threshold) links[static_cast<std::size_t>(s)].push_back(k);

    PathSumReport rep;
    rep.order = order;
    rep.initial = i;
    rep.final_state = f;
    std::vector<Index> seq{i};
    std::optional<Index> degenerate_on_path;

    auto walk = [&](auto&& self, Index cur, cplx amp, double denom, int depth) -> void {
        if (depth == order - 1) {
            const cplx v = V(f, cur);
            if (std::abs(v) <= opt.link_threshold) return;
            if (degenerate_on_path)
                throw NumericalError("enumerate_paths: intermediate state " + std::to_string(*degenerate_on_path) +
                                     " is degenerate with the initial state; perturbation theory is not valid here");
            const cplx a = amp * v / denom;
            if (std::abs(a.imag()) > 1e-12 * std::abs(a))
                throw NumericalError("enumerate_paths: path amplitude has a non-vanishing imaginary part");
            seq.push_back(f);
            rep.paths.push_back({seq, a.real(), seq[1]});
            seq.pop_back();
            return;
        }
        for (Index k : links[static_cast<std::size_t>(cur)]) {
            if (k == i || k == f) continue;
            const double gap = Ei - energies(k);
            const bool degenerate = std::abs(gap) <= opt.epsilon;
            const auto saved = degenerate_on_path;
            if (degenerate && !degenerate_on_path) degenerate_on_path = k;
            seq.push_back(k);
            self(self, k, amp * V(k, cur), denom * gap, depth + 1);
            seq.pop_back();
            degenerate_on_path = saved;
        }
    };
    walk(walk, i, cplx(1.0), 1.0, 0);

    for (const auto& p : rep.paths) rep.per_diagram[p.diagram] += p.amplitude;
    for (const auto& [k, v] : rep.per_diagram) rep.total += v;
    return rep;
}

inline PathSumReport enumerate_paths(const Eigen::VectorXd& energies, const OperatorMatrix& V, Index i, Index f, int order,
                                     const PathOptions& opt = {}) {
    auto rep = enumerate_paths(energies, V.matrix(), i, f, order, opt);
    rep.layout = V.layout();
    return rep;
}

inline PathSumReport effective_coupling_perturbative(const SystemConfig& config, Index i, Index f, int order,
                                                     const PathOptions& opt = {},
                                                     CouplingModel model = CouplingModel::generalized_dicke) {
    return enumerate_paths(bare_energies(config), interaction(config, model), i, f, order, opt);
}

inline nlohmann::json to_json(const PathSumReport& r) {
    auto name = [&](Index k) -> nlohmann::json {
        if (r.layout) return r.layout->ket(k);
        return k;
    };
    nlohmann::json j;
    j["order"] = r.order;
    j["initial"] = name(r.initial);
    j["final"] = name(r.final_state);
    j["path_count"] = r.paths.size();
    j["total"] = r.total;
    auto& diag = j["per_diagram"] = nlohmann::json::array();
    for (const auto& [k, v] : r.per_diagram) diag.push_back({{"first_intermediate", name(k)}, {"subtotal", v}});
    auto& ps = j["paths"] = nlohmann::json::array();
    for (const auto& p : r.paths) {
        nlohmann::json s = nlohmann::json::array();
        for (Index k : p.states) s.push_back(name(k));
        ps.push_back({{"states", s}, {"amplitude", p.amplitude}});
    }
    return j;
}

/// Shorthand for frequency differences and sums; indices are 1-based.
struct DetuningTable {
    std::vector<double> omega;
    std::vector<double> lambda;
    double omega_c = 1.0;

    static DetuningTable from(const SystemConfig& c) {
        DetuningTable t;
        for (const auto& q : c.qubits) {
            t.omega.push_back(q.omega);
            t.lambda.push_back(q.lambda);
        }
        t.omega_c = c.omega_c;
        return t;
    }

    double w(int n) const { return omega.at(static_cast<std::size_t>(n - 1)); }
    double l(int n) const { return lambda.at(static_cast<std::size_t>(n - 1)); }
    double Delta(int n, int m) const { return w(n) - w(m); }
    double Omega(int n, int m) const { return w(n) + w(m); }
    double Delta_C(int n) const { return 2 * omega_c - w(n); }
    double Omega_C(int n) const { return 2 * omega_c + w(n); }
    double delta_c(int n) const { return w(n) - omega_c; }

    /// lambda_{+-...}: sum of s_k lambda_k for sign pattern s over qubits 1..size.
    double lambda_signed(const std::vector<int>& signs) const {
        double s = 0;
        for (std::size_t k = 0; k < signs.size(); ++k) s += signs[k] * lambda.at(k);
        return s;
    }
    double Lambda3() const { return l(1) * l(2) * l(3); }
    double Lambda4() const { return l(1) * l(2) * l(3) * l(4); }
};

namespace detail {
inline void require_nonzero(double x, double scale, const char* what) {
    if (std::abs(x) <= 1e-13 * std::max(scale, 1e-300)) throw ValidationError(what);
}
}  // namespace detail

/// Three-qubit mixing coupling for equal lambdas and omega1 = omega2 = omega3/2.
inline double j3_closed_form(double lambda, double omega3, double omega_c, double theta) {
    const double w2 = omega3 * omega3, c2 = omega_c * omega_c, scale = w2 + c2;
    detail::require_nonzero(omega3, std::abs(omega_c), "j3_closed_form: omega3 must be nonzero");
    detail::require_nonzero(w2 - c2, scale, "j3_closed_form: cavity becomes resonant with one of the qubits (omega_c = omega3)");
    detail::require_nonzero(w2 - 4 * c2, scale, "j3_closed_form: cavity becomes resonant with one of the qubits (omega_c = omega3/2)");
    const double s = std::sin(theta), c = std::cos(theta);
    const double l4 = lambda * lambda * lambda * lambda;
    const double den = omega3 * (w2 - c2) * (w2 - 4 * c2) * (w2 - 4 * c2);
    return 64 * l4 * c2 * (4 * c2 - 7 * w2) * s * c * c * c / den;
}

/// Tavis-Cummings four-qubit mixing |e,e,g,g,0> -> |g,g,e,e,0>.
inline double j4_tc_closed_form(const std::array<double, 4>& lambdas, const std::array<double, 4>& omegas, double omega_c) {
    const auto& w = omegas;
    const double d13 = w[0] - w[2], d14 = w[0] - w[3], d23 = w[1] - w[2], d24 = w[1] - w[3];
    const double d1c = w[0] - omega_c, d2c = w[1] - omega_c;
    const double scale = std::abs(w[0]) + std::abs(w[1]) + std::abs(w[2]) + std::abs(w[3]) + std::abs(omega_c);
    for (double x : {d13, d14, d23, d24, d1c, d2c})
        detail::require_nonzero(x, scale, "j4_tc_closed_form: vanishing detuning in the denominator");
    const double L4 = lambdas[0] * lambdas[1] * lambdas[2] * lambdas[3];
    return L4 * (d13 + d24) * (d13 * d24 + d14 * d23) / (d13 * d23 * d14 * d24 * d1c * d2c);
}

/// Full quantum Rabi (theta = 0) four-qubit mixing |e,e,g,g,0> -> |g,g,e,e,0>.
inline double j4_rabi_closed_form(const std::array<double, 4>& lambdas, const std::array<double, 4>& omegas, double wc) {
    const double w1 = omegas[0], w2 = omegas[1], w3 = omegas[2], w4 = omegas[3];
    const double O12 = w1 + w2, O34 = w3 + w4, Oc3 = wc + w3, Oc4 = wc + w4;
    const double D13 = w1 - w3, D14 = w1 - w4, D23 = w2 - w3, D24 = w2 - w4, Dc1 = wc - w1, Dc2 = wc - w2;
    const double scale = std::abs(w1) + std::abs(w2) + std::abs(w3) + std::abs(w4) + std::abs(wc);
    for (double x : {O12, O34, Oc3, Oc4, D13, D14, D23, D24, Dc1, Dc2})
        detail::require_nonzero(x, scale, "j4_rabi_closed_form: vanishing factor in the denominator");
    const double wc2 = wc * wc;
    const double quad = w2 * w2 + w3 * w3 + 4 * w3 * w4 + w4 * w4;
    const double num =
        3 * w2 * w3 * w4 * D23 * D24 * O34 +
        (2 * wc * (D23 - w4) - 4 * wc2) *
            (w3 * w3 * w4 * w4 - 3 * w2 * w3 * w4 * O34 + w2 * w2 * (w3 * w3 + 3 * w3 * w4 + w4 * w4)) +
        w1 * w1 * (O12 - O34 - 2 * wc) *
            (3 * D23 * D24 * O34 + 2 * wc * (w2 * w2 + w3 * w3 + w4 * w4 + 3 * w3 * w4 - 3 * w2 * O34)) +
        w1 * (12 * wc2 * D23 * D24 * O34 - 3 * D23 * D24 * O34 * (w2 * O34 - w3 * w4) +
              2 * wc *
                  (w2 * w2 * (7 * w3 * w3 + 15 * w3 * w4 + 7 * w4 * w4) +
                   w3 * w4 * (3 * w3 * w3 + 7 * w3 * w4 + 3 * w4 * w4) - 3 * w2 * O34 * quad));
    const double L4 = lambdas[0] * lambdas[1] * lambdas[2] * lambdas[3];
    return L4 * (O12 - O34) * num / (O12 * O34 * Oc3 * Oc4 * D13 * D14 * D23 * D24 * Dc1 * Dc2);
}

}  // namespace virtmix
