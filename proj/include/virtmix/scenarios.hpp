#pragma once

#include <chrono>
#include <cmath>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "virtmix/dynamics.hpp"
#include "virtmix/io.hpp"
#include "virtmix/perturbation.hpp"
#include "virtmix/qecc.hpp"
#include "virtmix/spectrum.hpp"

namespace virtmix {

inline constexpr const char* version = "1.0.0";

// ---------------------------------------------------------------------------
// Mixing dynamics: one resonant pair, dressed frame, Lindblad evolution.

struct MixingDynamicsSpec {
    SystemConfig system;
    Index initial = 0, partner = 0;             // bare labels of the resonant pair
    double periods = 1.0;                       // run length in units of pi/|J|
    int samples = 401;
    bool lossless = false;
    std::vector<std::vector<int>> correlators;  // {1} -> <S+1 S-1>, {1,2} -> <S+1 S+2 S-2 S-1>
    bool photons = true;
    bool ghz = true;
    EvolveOptions evolve;
};

struct MixingDynamicsResult {
    TimeSeries series;
    double coupling = 0.0;        // <u_d|H|v_d>
    Index frame_size = 0;
    std::size_t dissipator_count = 0;
    double max_trace_drift = 0.0;
    double ground_photons = 0.0;  // <G|a^dag a|G>
    double time_unit = 0.0;       // pi/(2|J|)
};

inline std::string correlator_name(const std::vector<int>& qs) {
    std::string s;
    for (int q : qs) s += "S" + std::to_string(q);
    return s;
}

inline MixingDynamicsResult run_mixing_dynamics(const MixingDynamicsSpec& spec) {
    SystemConfig cfg = spec.system;
    if (spec.lossless) {
        cfg.kappa = 0;
        for (auto& q : cfg.qubits) q.gamma = 0;
    }
    validate(cfg);
    if (spec.samples < 2) throw ValidationError("dynamics needs at least 2 samples");
    const auto H = build_generalized_dicke(cfg);
    const auto s = diagonalize(H);
    auto basis = dressed_basis(s);
    hybridize_pair(basis, spec.initial, spec.partner);
    const double J = pair_coupling(basis, H, spec.initial, spec.partner);
    if (J == 0.0) throw NumericalError("dynamics: the resonant pair is not coupled");

    const Vector psi0 = basis.ket(spec.initial);
    const Index m = std::max(frame_size_for(s, psi0), frame_size_for(s, basis.ket(spec.partner)));
    const auto frame = eigen_frame(s, m);
    const auto diss = build_dissipators(s, cfg, m);

    MixingDynamicsResult res;
    res.coupling = J;
    res.frame_size = m;
    res.dissipator_count = diss.size();
    res.time_unit = pi / (2 * std::abs(J));

    const double t_end = spec.periods * pi / std::abs(J);
    std::vector<double> grid(static_cast<std::size_t>(spec.samples));
    for (int k = 0; k < spec.samples; ++k) grid[static_cast<std::size_t>(k)] = t_end * k / (spec.samples - 1);

    EvolveOptions eo = spec.evolve;
    if (eo.coupling == 0) eo.coupling = J;
    const auto run = evolve(DensityMatrix::pure(frame.project(psi0)), frame.hamiltonian(), diss, grid, eo);

    std::vector<std::pair<std::string, Matrix>> obs;
    std::map<int, Matrix> lowering;
    for (const auto& qs : spec.correlators)
        for (int q : qs)
            if (!lowering.count(q)) lowering[q] = build_dressed_lowering(basis, q, m).matrix();
    for (const auto& qs : spec.correlators) {
        if (qs.empty()) throw ValidationError("empty correlator");
        Matrix raise = Matrix::Identity(s.layout.dim(), s.layout.dim()), lower = raise;
        for (int q : qs) raise = raise * lowering[q].adjoint();
        for (auto it = qs.rbegin(); it != qs.rend(); ++it) lower = lower * lowering[*it];
        obs.emplace_back(correlator_name(qs), frame.project(Matrix(raise * lower)));
    }
    if (spec.photons) {
        const Matrix n = frame.project(photon_number(s.layout));
        res.ground_photons = n(0, 0).real();
        obs.emplace_back("photons", n);
        Matrix excess = n - res.ground_photons * Matrix::Identity(m, m);
        obs.emplace_back("photons_excess", excess);
    }
    if (spec.ghz) {
        const cplx phase(0, J > 0 ? -1.0 : 1.0);
        const Vector target = frame.project(Vector((basis.ket(spec.initial) + phase * basis.ket(spec.partner)) / std::sqrt(2.0)));
        obs.emplace_back("ghz_fidelity", target * target.adjoint());
    }
    res.series = observe(run, obs);
    std::vector<double> tr;
    for (const auto& r : run) {
        tr.push_back(r.rho.trace().real());
        res.max_trace_drift = std::max(res.max_trace_drift, std::abs(tr.back() - 1.0));
    }
    res.series.add("trace", tr);
    return res;
}

/// Time of the first local maximum of a sampled trace, refined by a parabola through
/// the three samples around it.
inline std::optional<double> first_maximum(const std::vector<double>& t, const std::vector<double>& y) {
    for (std::size_t i = 1; i + 1 < y.size(); ++i)
        if (y[i] >= y[i - 1] && y[i] > y[i + 1]) {
            const double h = t[i] - t[i - 1];
            const double den = y[i - 1] - 2 * y[i] + y[i + 1];
            return den < 0 ? t[i] + 0.5 * h * (y[i - 1] - y[i + 1]) / den : t[i];
        }
    return std::nullopt;
}

inline std::optional<double> first_minimum(const std::vector<double>& t, const std::vector<double>& y) {
    std::vector<double> neg(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) neg[i] = -y[i];
    return first_maximum(t, neg);
}

// ---------------------------------------------------------------------------
// Run configuration.

namespace config {

using nlohmann::json;

/// Angles may be numbers or strings like "pi/6", "2*pi/3", "-pi/4".
inline double parse_angle(const json& j, const std::string& where) {
    if (j.is_number()) return j.get<double>();
    if (!j.is_string()) throw ValidationError(where + ": expected a number or an expression like \"pi/6\"");
    std::string s = j.get<std::string>();
    std::string t;
    for (char c : s)
        if (c != ' ') t += c;
    double sign = 1;
    if (!t.empty() && t[0] == '-') sign = -1, t.erase(0, 1);
    const auto p = t.find("pi");
    if (p == std::string::npos) throw ValidationError(where + ": cannot parse angle '" + s + "'");
    double num = 1, den = 1;
    try {
        if (p > 0) {
            if (t[p - 1] != '*') throw std::invalid_argument(s);
            num = std::stod(t.substr(0, p - 1));
        }
        const std::string rest = t.substr(p + 2);
        if (!rest.empty()) {
            if (rest[0] != '/') throw std::invalid_argument(s);
            den = std::stod(rest.substr(1));
        }
    } catch (const std::exception&) {
        throw ValidationError(where + ": cannot parse angle '" + s + "'");
    }
    return sign * num * pi / den;
}

struct Diagnostics {
    std::vector<std::string> errors;
    std::vector<std::string> warnings;
    bool ok() const { return errors.empty(); }
};

inline void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where, Diagnostics& d) {
    if (!obj.is_object()) {
        d.errors.push_back(where + ": expected an object");
        return;
    }
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.count(it.key())) d.errors.push_back("unknown field '" + (where.empty() ? "" : where + ".") + it.key() + "'");
}

inline SystemConfig parse_system(const json& j) {
    SystemConfig c;
    if (!j.contains("qubits") || !j["qubits"].is_array()) throw ValidationError("system.qubits must be an array");
    for (std::size_t i = 0; i < j["qubits"].size(); ++i) {
        const auto& q = j["qubits"][i];
        const std::string tag = "system.qubits[" + std::to_string(i) + "]";
        if (!q.is_object()) throw ValidationError(tag + ": expected an object");
        QubitParams p;
        try {
            p.omega = q.at("omega").get<double>();
            p.lambda = q.value("lambda", 0.0);
            p.theta = q.contains("theta") ? parse_angle(q["theta"], tag + ".theta") : 0.0;
            p.gamma = q.value("gamma", 0.0);
        } catch (const json::exception& e) {
            throw ValidationError(tag + ": " + e.what());
        }
        c.qubits.push_back(p);
    }
    try {
        c.omega_c = j.at("omega_c").get<double>();
        c.kappa = j.value("kappa", 0.0);
        c.fock_cutoff = j.value("fock_cutoff", 8);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("system: ") + e.what());
    }
    validate(c);
    return c;
}

inline json system_to_json(const SystemConfig& c) {
    json q = json::array();
    for (const auto& p : c.qubits) q.push_back({{"omega", p.omega}, {"lambda", p.lambda}, {"theta", p.theta}, {"gamma", p.gamma}});
    return {{"qubits", q}, {"omega_c", c.omega_c}, {"kappa", c.kappa}, {"fock_cutoff", c.fock_cutoff}};
}

inline const std::set<std::string>& scenario_tags() {
    static const std::set<std::string> tags{"fig1b", "fig2", "fig3", "fig4", "fig5a", "fig5b", "figS2a", "figS2b", "ecc", "custom"};
    return tags;
}

/// Schema and physics checks. Never throws; problems are reported as diagnostics.
inline Diagnostics validate_config(const json& j) {
    Diagnostics d;
    check_keys(j, {"scenario", "system", "sweep", "anticrossing", "perturbation", "dynamics", "lambda_scan", "ecc", "threads"}, "", d);
    if (!j.is_object()) return d;
    if (!j.contains("scenario") || !j["scenario"].is_string() || !scenario_tags().count(j["scenario"].get<std::string>()))
        d.errors.push_back("field 'scenario' must be one of fig1b, fig2, fig3, fig4, fig5a, fig5b, figS2a, figS2b, ecc, custom");
    const bool needs_system = j.contains("sweep") || j.contains("anticrossing") || j.contains("perturbation") ||
                              j.contains("dynamics") || j.contains("lambda_scan");
    if (j.contains("system")) {
        const auto& s = j["system"];
        check_keys(s, {"qubits", "omega_c", "kappa", "fock_cutoff"}, "system", d);
        if (s.is_object() && s.contains("qubits") && s["qubits"].is_array())
            for (std::size_t i = 0; i < s["qubits"].size(); ++i)
                check_keys(s["qubits"][i], {"omega", "lambda", "theta", "gamma"}, "system.qubits[" + std::to_string(i) + "]", d);
        try {
            const auto c = parse_system(s);
            for (int q = 1; q <= c.qubit_count(); ++q) {
                const auto& p = c.qubit(q);
                if (p.lambda > 0 && std::abs(p.omega - c.omega_c) < 3 * p.lambda)
                    d.warnings.push_back("qubit " + std::to_string(q) + " is not dispersive: |omega - omega_c| = " +
                                         io::fmt(std::abs(p.omega - c.omega_c)) + " < 3 lambda = " + io::fmt(3 * p.lambda));
            }
        } catch (const Error& e) {
            d.errors.push_back(e.what());
        }
    } else if (needs_system) {
        d.errors.push_back("field 'system' is required by the requested tasks");
    }
    if (j.contains("sweep")) check_keys(j["sweep"], {"parameter", "from", "to", "points", "levels", "model"}, "sweep", d);
    if (j.contains("anticrossing"))
        check_keys(j["anticrossing"], {"parameter", "bracket", "pair", "tolerance", "prescan", "model", "inset_points", "inset_levels"},
                   "anticrossing", d);
    if (j.contains("perturbation"))
        check_keys(j["perturbation"], {"initial", "final", "order", "epsilon", "model", "require_resonant"}, "perturbation", d);
    if (j.contains("dynamics")) {
        check_keys(j["dynamics"], {"pair", "at_anticrossing", "periods", "samples", "lossless", "correlators", "photons", "ghz"},
                   "dynamics", d);
        if (j["dynamics"].value("at_anticrossing", false) && !j.contains("anticrossing"))
            d.errors.push_back("dynamics.at_anticrossing needs an 'anticrossing' section");
    }
    if (j.contains("lambda_scan"))
        check_keys(j["lambda_scan"],
                   {"lambdas", "omega0", "omega_c_mode", "omega_c_fixed", "slope", "parameter", "bracket", "pair", "at", "tolerance"},
                   "lambda_scan", d);
    if (j.contains("ecc")) check_keys(j["ecc"], {"seed", "random_states"}, "ecc", d);
    return d;
}

inline CouplingModel parse_model(const json& sec) {
    const std::string m = sec.value("model", std::string("dicke"));
    if (m == "dicke") return CouplingModel::generalized_dicke;
    if (m == "tc") return CouplingModel::tavis_cummings;
    throw ValidationError("model must be 'dicke' or 'tc', got '" + m + "'");
}

}  // namespace config

// ---------------------------------------------------------------------------
// Presets: built-in scenario configurations.

inline nlohmann::json preset(const std::string& tag) {
    using nlohmann::json;
    auto qubit = [](double w, double l, double g = 0.0) { return json{{"omega", w}, {"lambda", l}, {"theta", "pi/6"}, {"gamma", g}}; };
    const double loss = 3e-5;
    if (tag == "fig1b" || tag == "fig3") {
        const double l = 0.13, wc = 1.0 + 2.5 * l;  // omega_c = omega0 + 2.5 lambda_1
        json j{{"scenario", tag}};
        const double g = tag == "fig3" ? loss : 0.0;
        j["system"] = {{"qubits", {qubit(0.4, l, g), qubit(0.6, l, g), qubit(0.98, 5e-3, g)}},
                       {"omega_c", wc}, {"kappa", g}, {"fock_cutoff", 8}};
        j["anticrossing"] = {{"parameter", "qubits[2].omega"}, {"bracket", {0.95, 1.05}}, {"pair", {"gge0", "eeg0"}},
                             {"tolerance", 1e-6}, {"prescan", 200}, {"model", "dicke"}, {"inset_points", 201}, {"inset_levels", 6}};
        if (tag == "fig1b") {
            j["sweep"] = {{"parameter", "qubits[2].omega"}, {"from", 0.3}, {"to", 1.5}, {"points", 241}, {"levels", 6}, {"model", "dicke"}};
            j["perturbation"] = {{"initial", "gge0"}, {"final", "eeg0"}, {"order", 4}, {"epsilon", 1e-9}, {"model", "dicke"},
                                 {"require_resonant", false}};
        } else {
            j["dynamics"] = {{"pair", {"gge0", "eeg0"}}, {"at_anticrossing", true}, {"periods", 1.0}, {"samples", 801},
                             {"lossless", false}, {"correlators", {{1}, {2}, {3}, {1, 2}}}, {"photons", true}, {"ghz", true}};
        }
        return j;
    }
    if (tag == "fig2") {
        json j{{"scenario", tag}};
        j["system"] = {{"qubits", {qubit(0.5, 0.05), qubit(0.5, 0.05), qubit(1.0, 0.05)}}, {"omega_c", 1.125}, {"kappa", 0.0}, {"fock_cutoff", 8}};
        json lams = json::array();
        for (int k = 1; k <= 15; ++k) lams.push_back(0.01 * k);
        j["lambda_scan"] = {{"lambdas", lams}, {"omega0", 1.0}, {"omega_c_mode", "covary"}, {"omega_c_fixed", 1.325}, {"slope", 2.5},
                            {"parameter", "qubits[2].omega"}, {"bracket", {0.9, 1.05}}, {"pair", {"gge0", "eeg0"}}, {"at", 1.0},
                            {"tolerance", 1e-6}};
        return j;
    }
    if (tag == "fig4" || tag == "fig5a" || tag == "fig5b") {
        const double g = tag == "fig5b" ? loss : 0.0;
        json j{{"scenario", tag}};
        j["system"] = {{"qubits", {qubit(0.25, 0.15, g), qubit(0.4, 0.15, g), qubit(0.55, 0.15, g), qubit(0.7, 0.15, g)}},
                       {"omega_c", 1.4}, {"kappa", g}, {"fock_cutoff", 8}};
        if (tag == "fig4")
            j["sweep"] = {{"parameter", "qubits[0].omega"}, {"from", 0.05}, {"to", 1.2}, {"points", 231}, {"levels", 10}, {"model", "dicke"}};
        j["anticrossing"] = {{"parameter", "qubits[0].omega"}, {"bracket", {0.2, 0.3}}, {"pair", {"egge0", "geeg0"}},
                             {"tolerance", 1e-6}, {"prescan", 200}, {"model", "dicke"}, {"inset_points", 201}, {"inset_levels", 10}};
        j["anticrossing"]["pair"] = {"egge0", "geeg0"};
        if (tag == "fig5a")
            j["perturbation"] = {{"initial", "egge0"}, {"final", "geeg0"}, {"order", 4}, {"epsilon", 1e-9}, {"model", "dicke"},
                                 {"require_resonant", false}};
        if (tag == "fig5b")
            j["dynamics"] = {{"pair", {"egge0", "geeg0"}}, {"at_anticrossing", true}, {"periods", 1.0}, {"samples", 801},
                             {"lossless", false}, {"correlators", {{1}, {2}, {3}, {4}, {1, 4}, {2, 3}}}, {"photons", true}, {"ghz", true}};
        return j;
    }
    if (tag == "figS2a" || tag == "figS2b") {
        const double g = tag == "figS2b" ? loss : 0.0;
        json j{{"scenario", tag}};
        j["system"] = {{"qubits", {qubit(1.6448, 0.05, g), qubit(0.4, 0.15, g), qubit(0.55, 0.15, g), qubit(0.7, 0.15, g)}},
                       {"omega_c", 1.75}, {"kappa", g}, {"fock_cutoff", 8}};
        if (tag == "figS2a")
            j["sweep"] = {{"parameter", "qubits[0].omega"}, {"from", 0.05}, {"to", 1.75}, {"points", 341}, {"levels", 12}, {"model", "dicke"}};
        j["anticrossing"] = {{"parameter", "qubits[0].omega"}, {"bracket", {1.6, 1.68}}, {"pair", {"eggg0", "geee0"}},
                             {"tolerance", 1e-6}, {"prescan", 200}, {"model", "dicke"}, {"inset_points", 201}, {"inset_levels", 16}};
        if (tag == "figS2b")
            j["dynamics"] = {{"pair", {"eggg0", "geee0"}}, {"at_anticrossing", true}, {"periods", 1.0}, {"samples", 801},
                             {"lossless", false}, {"correlators", {{1}, {2}, {3}, {4}, {2, 3, 4}}}, {"photons", true}, {"ghz", true}};
        return j;
    }
    if (tag == "ecc") return {{"scenario", "ecc"}, {"ecc", {{"seed", 20240611}, {"random_states", 10}}}};
    throw ValidationError("no preset for scenario '" + tag + "'");
}

// ---------------------------------------------------------------------------
// Task runners. Each returns named output files held in memory.

struct Outputs {
    std::vector<std::pair<std::string, std::string>> files;
    nlohmann::json summary = nlohmann::json::object();

    void add(std::string name, std::string content) { files.emplace_back(std::move(name), std::move(content)); }
};

struct RunOptions {
    int threads = 1;
    std::optional<int> cutoff;
    std::optional<std::uint64_t> seed;
};

namespace tasks {

using nlohmann::json;

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

inline SystemConfig system_of(const json& cfg, const RunOptions& opt) {
    SystemConfig c = config::parse_system(cfg.at("system"));
    if (opt.cutoff) {
        c.fock_cutoff = *opt.cutoff;
        validate(c);
    }
    return c;
}

inline std::vector<double> linspace(double a, double b, int n) {
    if (n < 0) throw ValidationError("point count must be >= 0");
    std::vector<double> g(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) g[static_cast<std::size_t>(k)] = n == 1 ? a : a + (b - a) * k / (n - 1);
    return g;
}

inline json label_json(const HilbertLayout& l, const StateLabel& s) {
    return {{"label", l.ket(s.bare_index)}, {"overlap", s.overlap}, {"ambiguous", s.ambiguous}};
}

inline json anticrossing_json(const AnticrossingReport& r, const HilbertLayout& l) {
    return {{"parameter", r.parameter},
            {"location", r.location},
            {"splitting", r.splitting},
            {"effective_coupling", r.splitting / 2},
            {"mean_energy", r.mean_energy},
            {"pair", {l.ket(r.u), l.ket(r.v)}},
            {"branches", {{"lower", r.lower}, {"upper", r.upper}}},
            {"lower_label", label_json(l, r.lower_label)},
            {"upper_label", label_json(l, r.upper_label)},
            {"lower_is_symmetric", r.lower_is_symmetric},
            {"symmetric_overlap", r.symmetric_overlap},
            {"antisymmetric_overlap", r.antisymmetric_overlap},
            {"symmetric_overlap_bare", r.symmetric_overlap_bare},
            {"antisymmetric_overlap_bare", r.antisymmetric_overlap_bare},
            {"evaluations", r.evaluations}};
}

inline void levels(const json& cfg, const RunOptions& opt, Outputs& out) {
    const auto& s = cfg.at("sweep");
    const auto sys = system_of(cfg, opt);
    SweepOptions so;
    so.model = config::parse_model(s);
    so.threads = opt.threads;
    const auto grid = linspace(s.at("from").get<double>(), s.at("to").get<double>(), s.at("points").get<int>());
    const auto res = sweep_levels(sys, s.at("parameter").get<std::string>(), grid, s.at("levels").get<int>(), so);
    out.add("levels.csv", sweep_csv(res));
    out.summary["levels"] = {{"parameter", res.parameter}, {"points", grid.size()}, {"levels", s.at("levels").get<int>()}};
}

inline AnticrossingReport locate(const json& a, const SystemConfig& sys) {
    AnticrossingOptions ao;
    ao.model = config::parse_model(a);
    ao.tolerance = a.value("tolerance", 1e-6);
    ao.prescan = a.value("prescan", 200);
    const auto l = sys.layout();
    const auto br = a.at("bracket");
    const auto pr = a.at("pair");
    return find_anticrossing(sys, a.at("parameter").get<std::string>(), br.at(0).get<double>(), br.at(1).get<double>(),
                             l.parse(pr.at(0).get<std::string>()), l.parse(pr.at(1).get<std::string>()), ao);
}

inline AnticrossingReport anticross(const json& cfg, const RunOptions& opt, Outputs& out) {
    const auto& a = cfg.at("anticrossing");
    const auto sys = system_of(cfg, opt);
    const auto rep = locate(a, sys);
    out.add("anticrossing.json", dump(anticrossing_json(rep, sys.layout())));
    out.summary["anticrossing"] = {{"location", rep.location}, {"splitting", rep.splitting}};
    if (const int n = a.value("inset_points", 0); n > 1) {
        // Zoom on +-8 splittings around the minimum, scaled by the level slope ~ 1.
        const double half = std::max(8 * rep.splitting, 1e-4);
        SweepOptions so;
        so.model = config::parse_model(a);
        so.threads = opt.threads;
        const auto grid = linspace(rep.location - half, rep.location + half, n);
        const auto res = sweep_levels(sys, a.at("parameter").get<std::string>(), grid, a.value("inset_levels", 6), so);
        out.add("anticrossing_inset.csv", sweep_csv(res));
    }
    return rep;
}

inline void perturb(const json& cfg, const RunOptions& opt, Outputs& out) {
    const auto& p = cfg.at("perturbation");
    const auto sys = system_of(cfg, opt);
    const auto l = sys.layout();
    PathOptions po;
    po.epsilon = p.value("epsilon", 1e-9);
    po.require_resonant = p.value("require_resonant", true);
    const auto rep = effective_coupling_perturbative(sys, l.parse(p.at("initial").get<std::string>()),
                                                     l.parse(p.at("final").get<std::string>()), p.value("order", 4), po,
                                                     config::parse_model(p));
    auto j = to_json(rep);
    j["bare_detuning"] = bare_energies(sys)(rep.initial) - bare_energies(sys)(rep.final_state);
    out.add("perturbation.json", dump(j));
    out.summary["perturbation"] = {{"paths", rep.paths.size()}, {"total", rep.total}};
}

inline void dynamics(const json& cfg, const RunOptions& opt, Outputs& out) {
    const auto& d = cfg.at("dynamics");
    auto sys = system_of(cfg, opt);
    const auto l = sys.layout();
    std::optional<AnticrossingReport> located;
    if (d.value("at_anticrossing", false)) {
        const auto& a = cfg.at("anticrossing");
        located = locate(a, sys);
        resolve_parameter(a.at("parameter").get<std::string>()).set(sys, located->location);
    }
    MixingDynamicsSpec spec;
    spec.system = sys;
    spec.initial = l.parse(d.at("pair").at(0).get<std::string>());
    spec.partner = l.parse(d.at("pair").at(1).get<std::string>());
    spec.periods = d.value("periods", 1.0);
    spec.samples = d.value("samples", 401);
    spec.lossless = d.value("lossless", false);
    spec.photons = d.value("photons", true);
    spec.ghz = d.value("ghz", true);
    for (const auto& c : d.value("correlators", json::array())) spec.correlators.push_back(c.get<std::vector<int>>());
    const auto res = run_mixing_dynamics(spec);
    out.add("dynamics.csv", res.series.csv());
    json j{{"coupling", res.coupling},
           {"time_unit", res.time_unit},
           {"frame_size", res.frame_size},
           {"dissipators", res.dissipator_count},
           {"max_trace_drift", res.max_trace_drift},
           {"ground_photons", res.ground_photons},
           {"system", config::system_to_json(sys)}};
    if (located) j["anticrossing"] = anticrossing_json(*located, l);
    for (const auto& name : res.series.names) {
        const auto& tr = res.series.trace(name);
        const auto mx = std::max_element(tr.begin(), tr.end());
        j["observables"][name] = {{"max", *mx}, {"t_at_max", res.series.times[static_cast<std::size_t>(mx - tr.begin())]}};
    }
    out.add("dynamics.json", dump(j));
    out.summary["dynamics"] = {{"coupling", res.coupling}, {"max_trace_drift", res.max_trace_drift}};
}

inline void lambda_scan(const json& cfg, const RunOptions& opt, Outputs& out) {
    const auto& s = cfg.at("lambda_scan");
    const auto base = system_of(cfg, opt);
    const auto l = base.layout();
    const Index u = l.parse(s.at("pair").at(0).get<std::string>()), v = l.parse(s.at("pair").at(1).get<std::string>());
    const std::string mode = s.value("omega_c_mode", std::string("covary"));
    if (mode != "covary" && mode != "fixed") throw ValidationError("lambda_scan.omega_c_mode must be 'covary' or 'fixed'");
    const auto param = resolve_parameter(s.at("parameter").get<std::string>());
    const auto lams = s.at("lambdas").get<std::vector<double>>();
    std::vector<std::vector<double>> rows(lams.size());
    detail::parallel_for(lams.size(), opt.threads, [&](std::size_t k) {
        SystemConfig c = base;
        for (auto& q : c.qubits) q.lambda = lams[k];
        c.omega_c = mode == "covary" ? s.value("omega0", 1.0) + s.value("slope", 2.5) * lams[k] : s.value("omega_c_fixed", 1.325);
        AnticrossingOptions ao;
        ao.tolerance = s.value("tolerance", 1e-6);
        // Keep the bracket clear of the qubit-cavity resonance when omega_c moves into it.
        const double at_value = s.value("at", 1.0);
        double lo = s.at("bracket").at(0).get<double>(), hi = s.at("bracket").at(1).get<double>();
        if (c.omega_c > at_value) hi = std::min(hi, 0.5 * (at_value + c.omega_c));
        if (c.omega_c < at_value) lo = std::max(lo, 0.5 * (at_value + c.omega_c));
        const auto rep = find_anticrossing(c, param, lo, hi, u, v, ao);
        SystemConfig at = c;
        param.set(at, at_value);
        PathOptions po;
        po.require_resonant = false;
        const double pt = 2 * std::abs(effective_coupling_perturbative(at, u, v, 4, po).total);
        rows[k] = {lams[k], c.omega_c, rep.location, rep.splitting, pt, pt / rep.splitting - 1.0};
    });
    io::CsvWriter w({"lambda", "omega_c", "location", "splitting", "perturbative_2J", "relative_difference"});
    for (const auto& r : rows) w.row(r);
    out.add("lambda_scan.csv", w.str());
    out.summary["lambda_scan"] = {{"points", rows.size()}, {"omega_c_mode", mode}};
}

/// The 14 reference cases: both implementations x (no error, X on 1..3 in bit-flip mode,
/// Z on 1..3 in phase-flip mode).
inline std::vector<qecc::EccReport> ecc_reference(qecc::cplx a, qecc::cplx b) {
    std::vector<qecc::EccReport> rows;
    for (auto impl : {qecc::EccImplementation::cnot, qecc::EccImplementation::mix}) {
        rows.push_back(qecc::run_ecc(a, b, {}, qecc::EccMode::bitflip, impl));
        for (int w = 1; w <= 3; ++w) rows.push_back(qecc::run_ecc(a, b, {qecc::ErrorType::x, w}, qecc::EccMode::bitflip, impl));
        for (int w = 1; w <= 3; ++w) rows.push_back(qecc::run_ecc(a, b, {qecc::ErrorType::z, w}, qecc::EccMode::phaseflip, impl));
    }
    return rows;
}

inline std::pair<qecc::cplx, qecc::cplx> random_logical(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> U(0.0, 1.0);
    const double th = std::acos(1 - 2 * U(rng)), ph = 2 * pi * U(rng);
    return {std::cos(th / 2), std::polar(std::sin(th / 2), ph)};
}

inline void ecc(const json& cfg, const RunOptions& opt, Outputs& out) {
    const auto e = cfg.value("ecc", json::object());
    std::mt19937_64 rng(opt.seed ? *opt.seed : e.value("seed", std::uint64_t{20240611}));
    const auto [a, b] = random_logical(rng);
    json rows = json::array();
    double min_f = 1.0;
    for (const auto& r : ecc_reference(a, b)) {
        rows.push_back(qecc::to_json(r));
        min_f = std::min(min_f, r.fidelity);
    }
    const int extra = e.value("random_states", 0);
    double min_extra = 1.0;
    for (int k = 0; k < extra; ++k) {
        const auto [x, y] = random_logical(rng);
        for (const auto& r : ecc_reference(x, y)) min_extra = std::min(min_extra, r.fidelity);
    }
    json j{{"logical_state", {{"a", {a.real(), a.imag()}}, {"b", {b.real(), b.imag()}}}},
           {"rows", rows},
           {"min_fidelity", min_f},
           {"random_states", extra},
           {"random_states_min_fidelity", min_extra}};
    out.add("ecc.json", dump(j));
    out.summary["ecc"] = {{"rows", rows.size()}, {"min_fidelity", min_f}};
}

}  // namespace tasks

/// Tasks selectable from the command line.
enum class Task { run, levels, anticross, perturb, dynamics, ecc };

/// Validates and executes; throws ValidationError/NumericalError. Nothing is written here.
inline Outputs execute(const nlohmann::json& cfg, Task task, const RunOptions& opt) {
    const auto diag = config::validate_config(cfg);
    if (!diag.ok()) {
        std::string msg = "invalid config:";
        for (const auto& e : diag.errors) msg += "\n  " + e;
        throw ValidationError(msg);
    }
    Outputs out;
    auto need = [&](const char* key) {
        if (!cfg.contains(key)) throw ValidationError(std::string("config has no '") + key + "' section");
    };
    RunOptions o = opt;
    if (cfg.contains("threads") && o.threads <= 1) o.threads = cfg["threads"].get<int>();
    try {
        switch (task) {
            case Task::levels: need("sweep"); tasks::levels(cfg, o, out); break;
            case Task::anticross: need("anticrossing"); tasks::anticross(cfg, o, out); break;
            case Task::perturb: need("perturbation"); tasks::perturb(cfg, o, out); break;
            case Task::dynamics: need("dynamics"); tasks::dynamics(cfg, o, out); break;
            case Task::ecc: tasks::ecc(cfg, o, out); break;
            case Task::run:
                if (cfg.contains("sweep")) tasks::levels(cfg, o, out);
                if (cfg.contains("anticrossing") && !cfg.contains("dynamics")) tasks::anticross(cfg, o, out);
                if (cfg.contains("perturbation")) tasks::perturb(cfg, o, out);
                if (cfg.contains("lambda_scan")) tasks::lambda_scan(cfg, o, out);
                if (cfg.contains("dynamics")) tasks::dynamics(cfg, o, out);
                if (cfg.contains("ecc") || cfg.at("scenario") == "ecc") tasks::ecc(cfg, o, out);
                break;
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("config: ") + e.what());
    }
    return out;
}

/// Manifest with the resolved config, output checksums and timing.
inline nlohmann::json manifest(const nlohmann::json& cfg, const Outputs& out, double wall_seconds) {
    nlohmann::json files = nlohmann::json::array();
    for (const auto& [name, content] : out.files)
        files.push_back({{"name", name}, {"bytes", content.size()}, {"fnv1a64", io::hex64(io::fnv1a(content))}});
    return {{"version", version}, {"config", cfg}, {"summary", out.summary}, {"outputs", files}, {"wall_seconds", wall_seconds}};
}

}  // namespace virtmix
