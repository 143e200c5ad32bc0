#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <tuple>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "virtmix/io.hpp"
#include "virtmix/model.hpp"

namespace virtmix {

struct StateLabel {
    Index bare_index = 0;
    double overlap = 0.0;    // |<bare|psi>|^2
    bool ambiguous = false;  // dominant label already taken by a lower eigenstate
};

struct SpectrumResult {
    HilbertLayout layout;
    double ground_energy = 0.0;   // absolute, before the offset
    Eigen::VectorXd energies;     // ascending, energies[0] == 0
    Matrix eigenvectors;          // columns in the bare basis
    std::vector<StateLabel> labels;

    Index size() const noexcept { return energies.size(); }
    Vector state(Index k) const { return eigenvectors.col(k); }

    /// Eigenstate whose label is `bare`, if any.
    std::optional<Index> find_label(Index bare) const {
        for (Index k = 0; k < size(); ++k)
            if (labels[static_cast<std::size_t>(k)].bare_index == bare) return k;
        return std::nullopt;
    }
};

namespace detail {

/// Label each eigenstate with its dominant bare index, one label per eigenstate.
/// A clash keeps the lower-energy owner; the later state takes its best free index and is flagged.
inline std::vector<StateLabel> assign_labels(const Matrix& vecs) {
    const Index n = vecs.cols();
    std::vector<StateLabel> out(static_cast<std::size_t>(n));
    std::vector<char> taken(static_cast<std::size_t>(vecs.rows()), 0);
    for (Index k = 0; k < n; ++k) {
        const Eigen::VectorXd w = vecs.col(k).cwiseAbs2();
        Index best = 0;
        for (Index r = 1; r < w.size(); ++r)
            if (w(r) > w(best)) best = r;
        StateLabel lab{best, w(best), false};
        if (taken[static_cast<std::size_t>(best)]) {
            lab.ambiguous = true;
            Index alt = -1;
            for (Index r = 0; r < w.size(); ++r)
                if (!taken[static_cast<std::size_t>(r)] && (alt < 0 || w(r) > w(alt))) alt = r;
            lab.bare_index = alt;
            lab.overlap = w(alt);
        }
        taken[static_cast<std::size_t>(lab.bare_index)] = 1;
        out[static_cast<std::size_t>(k)] = lab;
    }
    return out;
}

template <class F>
void parallel_for(std::size_t n, int threads, F&& body) {
    const std::size_t t = std::max<std::size_t>(1, std::min<std::size_t>(n, threads > 0 ? threads : 1));
    if (t == 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::atomic<bool> failed{false};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < t; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n && !failed; i = next++) {
                try {
                    body(i);
                } catch (...) {
                    if (!failed.exchange(true)) failure = std::current_exception();
                }
            }
        });
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
}

}  // namespace detail

inline SpectrumResult diagonalize(const OperatorMatrix& H) {
    const double herm = H.hermiticity_error();
    if (herm > 1e-9) throw ValidationError("diagonalize: input is not Hermitian (max |H - H^dag| = " + io::fmt(herm) + ")");
    Eigen::SelfAdjointEigenSolver<Matrix> es(H.matrix());
    if (es.info() != Eigen::Success) throw NumericalError("diagonalize: eigensolver did not converge");
    Matrix vecs = es.eigenvectors();
    // Fix the gauge: dominant component real and positive.
    for (Index k = 0; k < vecs.cols(); ++k) {
        Index r;
        vecs.col(k).cwiseAbs2().maxCoeff(&r);
        const cplx a = vecs(r, k);
        vecs.col(k) *= std::conj(a) / std::abs(a);
    }
    const Eigen::VectorXd ev = es.eigenvalues();
    SpectrumResult out{H.layout(), ev(0), ev.array() - ev(0), std::move(vecs), {}};
    out.labels = detail::assign_labels(out.eigenvectors);
    return out;
}

/// A named scalar knob on SystemConfig.
struct Parameter {
    std::string name;
    std::function<void(SystemConfig&, double)> set;
    std::function<double(const SystemConfig&)> get;
};

/// Resolves "omega_c", "kappa", "qubits[K].field" (K is 0-based, as in the JSON array)
/// and "qubits[*].field" (all qubits), with field one of omega, lambda, theta, gamma.
inline Parameter resolve_parameter(std::string_view path) {
    const std::string p(path);
    if (p == "omega_c") return {p, [](SystemConfig& c, double v) { c.omega_c = v; }, [](const SystemConfig& c) { return c.omega_c; }};
    if (p == "kappa") return {p, [](SystemConfig& c, double v) { c.kappa = v; }, [](const SystemConfig& c) { return c.kappa; }};
    const auto open = p.find('['), close = p.find(']');
    if (p.rfind("qubits[", 0) != 0 || close == std::string::npos || close + 1 >= p.size() || p[close + 1] != '.')
        throw ValidationError("unresolvable parameter path '" + p + "'");
    const std::string sel = p.substr(open + 1, close - open - 1);
    const std::string field = p.substr(close + 2);
    double QubitParams::*member = nullptr;
    if (field == "omega") member = &QubitParams::omega;
    else if (field == "lambda") member = &QubitParams::lambda;
    else if (field == "theta") member = &QubitParams::theta;
    else if (field == "gamma") member = &QubitParams::gamma;
    else throw ValidationError("unresolvable parameter path '" + p + "': unknown field '" + field + "'");
    if (sel == "*")
        return {p,
                [member](SystemConfig& c, double v) {
                    for (auto& q : c.qubits) q.*member = v;
                },
                [member, p](const SystemConfig& c) {
                    if (c.qubits.empty()) throw ValidationError("parameter '" + p + "': no qubits");
                    return c.qubits.front().*member;
                }};
    std::size_t k = 0;
    try {
        std::size_t used = 0;
        k = std::stoul(sel, &used);
        if (used != sel.size()) throw std::invalid_argument(sel);
    } catch (const std::exception&) {
        throw ValidationError("unresolvable parameter path '" + p + "': bad index '" + sel + "'");
    }
    auto check = [k, p](const SystemConfig& c) {
        if (k >= c.qubits.size())
            throw ValidationError("parameter '" + p + "' indexes qubit " + std::to_string(k) + " but config has " +
                                  std::to_string(c.qubits.size()));
    };
    return {p,
            [member, k, check](SystemConfig& c, double v) {
                check(c);
                c.qubits[k].*member = v;
            },
            [member, k, check](const SystemConfig& c) {
                check(c);
                return c.qubits[k].*member;
            }};
}

struct SweepPoint {
    Eigen::VectorXd energies;          // lowest excited levels, ground-offset
    std::vector<StateLabel> labels;
    Matrix vectors;                    // empty unless requested
};

struct SweepResult {
    std::string parameter;
    HilbertLayout layout;
    std::vector<double> grid;
    std::vector<SweepPoint> points;
};

struct SweepOptions {
    CouplingModel model = CouplingModel::generalized_dicke;
    int threads = 1;
    bool keep_vectors = false;
};

inline void require_monotone(const std::vector<double>& grid) {
    if (grid.size() < 2) return;
    const bool up = grid[1] > grid[0];
    for (std::size_t i = 1; i < grid.size(); ++i)
        if (up ? !(grid[i] > grid[i - 1]) : !(grid[i] < grid[i - 1]))
            throw ValidationError("sweep grid is not strictly monotone at position " + std::to_string(i));
}

inline SweepResult sweep_levels(const SystemConfig& config, const Parameter& param, const std::vector<double>& grid,
                                int level_count, const SweepOptions& opt = {}) {
    validate(config);
    require_monotone(grid);
    if (level_count < 1) throw ValidationError("level_count must be >= 1");
    SweepResult out{param.name, config.layout(), grid, std::vector<SweepPoint>(grid.size())};
    const Index dim = config.layout().dim();
    if (level_count > dim - 1) throw ValidationError("level_count exceeds the number of excited states");
    detail::parallel_for(grid.size(), opt.threads, [&](std::size_t i) {
        SystemConfig c = config;
        param.set(c, grid[i]);
        const auto s = diagonalize(build_hamiltonian(c, opt.model));
        SweepPoint& pt = out.points[i];
        pt.energies = s.energies.segment(1, level_count);
        pt.labels.assign(s.labels.begin() + 1, s.labels.begin() + 1 + level_count);
        if (opt.keep_vectors) pt.vectors = s.eigenvectors.middleCols(1, level_count);
    });
    return out;
}

inline SweepResult sweep_levels(const SystemConfig& config, std::string_view path, const std::vector<double>& grid,
                                int level_count, const SweepOptions& opt = {}) {
    return sweep_levels(config, resolve_parameter(path), grid, level_count, opt);
}

/// Follows branches by eigenvector overlap between neighbouring grid points (greedy).
/// Returns, per point, the level slot occupied by each branch (branch b starts in slot b).
inline std::vector<std::vector<int>> track_branches(const SweepResult& sweep) {
    std::vector<std::vector<int>> slots;
    if (sweep.points.empty()) return slots;
    const int n = static_cast<int>(sweep.points.front().energies.size());
    if (sweep.points.front().vectors.cols() != n)
        throw ValidationError("track_branches needs a sweep run with keep_vectors");
    std::vector<int> cur(n);
    for (int b = 0; b < n; ++b) cur[b] = b;
    slots.push_back(cur);
    for (std::size_t i = 1; i < sweep.points.size(); ++i) {
        const Eigen::MatrixXd ov = (sweep.points[i - 1].vectors.adjoint() * sweep.points[i].vectors).cwiseAbs2();
        std::vector<std::tuple<double, int, int>> cand;
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b) cand.emplace_back(-ov(a, b), a, b);
        std::sort(cand.begin(), cand.end());
        std::vector<int> map_prev(n, -1);
        std::vector<char> used(n, 0);
        for (auto& [w, a, b] : cand) {
            if (map_prev[a] >= 0 || used[b]) continue;
            map_prev[a] = b;
            used[b] = 1;
        }
        std::vector<int> next(n);
        for (int br = 0; br < n; ++br) next[br] = map_prev[cur[br]];
        slots.push_back(next);
        cur = next;
    }
    return slots;
}

inline std::string sweep_csv(const SweepResult& s) {
    const std::size_t n = s.points.empty() ? 0 : static_cast<std::size_t>(s.points.front().energies.size());
    std::vector<std::string> header{"param"};
    for (std::size_t k = 1; k <= n; ++k) header.push_back("E" + std::to_string(k));
    for (std::size_t k = 1; k <= n; ++k) header.push_back("label" + std::to_string(k));
    io::CsvWriter csv(header);
    for (std::size_t i = 0; i < s.points.size(); ++i) {
        std::vector<std::string> row{io::fmt(s.grid[i])};
        for (std::size_t k = 0; k < n; ++k) row.push_back(io::fmt(s.points[i].energies(static_cast<Index>(k))));
        for (std::size_t k = 0; k < n; ++k) row.push_back(s.layout.compact(s.points[i].labels[k].bare_index));
        csv.row(row);
    }
    return csv.str();
}

struct AnticrossingOptions {
    CouplingModel model = CouplingModel::generalized_dicke;
    double tolerance = 1e-6;       // golden-section bracket width
    int prescan = 0;               // grid points used to narrow the bracket first
    bool polish = true;            // parabolic refinement of gap^2 after the golden section
    double max_third_weight = 0.2; // third-largest pair weight above this means the pair is not isolated
};

struct AnticrossingReport {
    std::string parameter;
    double location = 0.0;
    double splitting = 0.0;        // 2 J_eff
    double mean_energy = 0.0;      // ground-offset
    Index lower = 0, upper = 0;    // eigen indices of the two branches at the minimum
    StateLabel lower_label, upper_label;
    Index u = 0, v = 0;
    // Which branch is closer to (u+v)/sqrt2; the other one is compared with (u-v)/sqrt2.
    bool lower_is_symmetric = false;
    double symmetric_overlap = 0.0;       // in-pair normalized
    double antisymmetric_overlap = 0.0;
    double symmetric_overlap_bare = 0.0;  // raw |<(u+-v)/sqrt2|psi>|^2
    double antisymmetric_overlap_bare = 0.0;
    int evaluations = 0;
};

namespace detail {

struct PairGap {
    double gap;
    Index a, b;  // a below b
    SpectrumResult spec;
};

inline PairGap pair_gap(const SystemConfig& c, Index u, Index v, const AnticrossingOptions& opt,
                        const std::string& param, double at) {
    auto s = diagonalize(build_hamiltonian(c, opt.model));
    const Index n = s.size();
    Eigen::VectorXd w(n);
    for (Index k = 0; k < n; ++k) w(k) = std::norm(s.eigenvectors(u, k)) + std::norm(s.eigenvectors(v, k));
    std::vector<Index> order(static_cast<std::size_t>(n));
    for (Index k = 0; k < n; ++k) order[static_cast<std::size_t>(k)] = k;
    std::partial_sort(order.begin(), order.begin() + 3, order.end(), [&](Index x, Index y) { return w(x) > w(y); });
    const Index a = std::min(order[0], order[1]), b = std::max(order[0], order[1]);
    if (w(order[0]) + w(order[1]) < 1.0)
        throw NumericalError("find_anticrossing: branches for " + s.layout.ket(u) + " / " + s.layout.ket(v) +
                             " not found at " + param + " = " + io::fmt(at));
    if (w(order[2]) > opt.max_third_weight)
        throw NumericalError("find_anticrossing: more than two levels share the pair at " + param + " = " + io::fmt(at) +
                             ": levels " + std::to_string(order[0]) + ", " + std::to_string(order[1]) + ", " +
                             std::to_string(order[2]) + " (" + s.layout.ket(s.labels[order[2]].bare_index) + ")");
    const double gap = s.energies(b) - s.energies(a);
    return {gap, a, b, std::move(s)};
}

}  // namespace detail

inline AnticrossingReport find_anticrossing(const SystemConfig& config, const Parameter& param, double lo, double hi,
                                            Index u, Index v, const AnticrossingOptions& opt = {}) {
    validate(config);
    if (!(lo < hi)) throw ValidationError("find_anticrossing: bracket must satisfy lo < hi");
    const auto layout = config.layout();
    if (u < 0 || v < 0 || u >= layout.dim() || v >= layout.dim() || u == v)
        throw ValidationError("find_anticrossing: invalid bare pair");
    int evals = 0;
    auto eval = [&](double p) {
        SystemConfig c = config;
        param.set(c, p);
        ++evals;
        return detail::pair_gap(c, u, v, opt, param.name, p);
    };
    auto gap = [&](double p) { return eval(p).gap; };

    double a = lo, b = hi;
    if (opt.prescan > 2) {
        double best = std::numeric_limits<double>::infinity();
        int ib = 0;
        for (int k = 0; k < opt.prescan; ++k) {
            const double p = lo + (hi - lo) * k / (opt.prescan - 1);
            const double g = gap(p);
            if (g < best) best = g, ib = k;
        }
        const double h = (hi - lo) / (opt.prescan - 1);
        a = std::max(lo, lo + h * (ib - 1));
        b = std::min(hi, lo + h * (ib + 1));
    }

    const double r = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - r * (b - a), d = a + r * (b - a);
    double fc = gap(c), fd = gap(d);
    double best_p = fc < fd ? c : d, best_g = std::min(fc, fd);
    while (b - a > opt.tolerance) {
        if (fc < fd) {
            b = d, d = c, fd = fc;
            c = b - r * (b - a);
            fc = gap(c);
            if (fc < best_g) best_g = fc, best_p = c;
        } else {
            a = c, c = d, fc = fd;
            d = a + r * (b - a);
            fd = gap(d);
            if (fd < best_g) best_g = fd, best_p = d;
        }
    }
    const double mid = 0.5 * (a + b);
    if (const double g = gap(mid); g < best_g) best_g = g, best_p = mid;

    if (opt.polish) {
        // Near the minimum gap^2 is quadratic in the parameter; one vertex step lands on it.
        const double h = std::max(opt.tolerance, 1e-9 * std::max(1.0, std::abs(best_p)));
        for (int it = 0; it < 3; ++it) {
            const double g0 = gap(best_p - h), g1 = best_g, g2 = gap(best_p + h);
            const double y0 = g0 * g0, y1 = g1 * g1, y2 = g2 * g2;
            const double den = y0 - 2 * y1 + y2;
            if (!(den > 0)) break;
            const double step = 0.5 * h * (y0 - y2) / den;
            if (std::abs(step) > 4 * h) break;
            const double p = std::clamp(best_p + step, lo, hi);
            const double g = gap(p);
            if (!(g < best_g)) break;
            best_g = g, best_p = p;
        }
    }

    auto fin = eval(best_p);
    AnticrossingReport rep;
    rep.parameter = param.name;
    rep.location = best_p;
    rep.splitting = fin.gap;
    rep.lower = fin.a;
    rep.upper = fin.b;
    rep.lower_label = fin.spec.labels[static_cast<std::size_t>(fin.a)];
    rep.upper_label = fin.spec.labels[static_cast<std::size_t>(fin.b)];
    rep.mean_energy = 0.5 * (fin.spec.energies(fin.a) + fin.spec.energies(fin.b));
    rep.u = u;
    rep.v = v;
    auto overlaps = [&](Index k, double sign, bool normalize) {
        const cplx cu = fin.spec.eigenvectors(u, k), cv = fin.spec.eigenvectors(v, k);
        double o = std::norm(cu + sign * cv) / 2.0;
        if (normalize) o /= std::norm(cu) + std::norm(cv);
        return o;
    };
    const double sa = overlaps(fin.a, +1, true), sb = overlaps(fin.b, +1, true);
    rep.lower_is_symmetric = sa >= sb;
    const Index sym = rep.lower_is_symmetric ? fin.a : fin.b, anti = rep.lower_is_symmetric ? fin.b : fin.a;
    rep.symmetric_overlap = overlaps(sym, +1, true);
    rep.antisymmetric_overlap = overlaps(anti, -1, true);
    rep.symmetric_overlap_bare = overlaps(sym, +1, false);
    rep.antisymmetric_overlap_bare = overlaps(anti, -1, false);
    rep.evaluations = evals;
    return rep;
}

inline AnticrossingReport find_anticrossing(const SystemConfig& config, std::string_view path, double lo, double hi,
                                            Index u, Index v, const AnticrossingOptions& opt = {}) {
    return find_anticrossing(config, resolve_parameter(path), lo, hi, u, v, opt);
}

}  // namespace virtmix
