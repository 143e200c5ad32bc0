#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "virtmix/io.hpp"
#include "virtmix/model.hpp"
#include "virtmix/spectrum.hpp"

namespace virtmix {

/// Eigenstates relabelled as dressed kets. A hybridized resonant pair (u, v) is replaced by
/// the orthonormalized projections of the bare kets onto the span of its two eigenstates.
struct DressedBasis {
    HilbertLayout layout;
    Eigen::VectorXd energies;  // eigen energies per column, ground-offset
    Matrix kets;               // columns in the bare basis
    std::vector<Index> labels;
    std::vector<bool> ambiguous;

    Index size() const noexcept { return kets.cols(); }

    Index column_of(Index bare) const {
        for (std::size_t c = 0; c < labels.size(); ++c)
            if (labels[c] == bare) return static_cast<Index>(c);
        throw ValidationError("no dressed state carries the label " + layout.ket(bare));
    }
    Vector ket(Index bare) const { return kets.col(column_of(bare)); }
};

inline DressedBasis dressed_basis(const SpectrumResult& s) {
    DressedBasis b{s.layout, s.energies, s.eigenvectors, {}, {}};
    for (const auto& l : s.labels) {
        b.labels.push_back(l.bare_index);
        b.ambiguous.push_back(l.ambiguous);
    }
    return b;
}

/// Replaces the two eigenstates that carry most of the weight of bare states u and v by the
/// Lowdin-orthonormalized projections of |u> and |v> onto their span.
inline void hybridize_pair(DressedBasis& b, Index u, Index v) {
    const Index n = b.size();
    std::vector<std::pair<double, Index>> w;
    for (Index k = 0; k < n; ++k) w.emplace_back(-(std::norm(b.kets(u, k)) + std::norm(b.kets(v, k))), k);
    std::partial_sort(w.begin(), w.begin() + 2, w.end());
    const Index a = std::min(w[0].second, w[1].second), c = std::max(w[0].second, w[1].second);
    const std::vector<Index> pair_labels{b.labels[static_cast<std::size_t>(a)], b.labels[static_cast<std::size_t>(c)]};
    if (!((pair_labels[0] == u && pair_labels[1] == v) || (pair_labels[0] == v && pair_labels[1] == u)))
        throw ValidationError("hybridize_pair: eigenstates " + std::to_string(a) + " and " + std::to_string(c) +
                              " are labelled " + b.layout.ket(pair_labels[0]) + " and " + b.layout.ket(pair_labels[1]) +
                              ", not " + b.layout.ket(u) + " and " + b.layout.ket(v));
    Matrix P(b.kets.rows(), 2);
    P.col(0) = b.kets.col(a);
    P.col(1) = b.kets.col(c);
    // C(r, j) = <psi_r | bare_j>: columns hold the projected |u>, |v> in the (a, c) basis.
    Eigen::Matrix2cd C;
    C << std::conj(P(u, 0)), std::conj(P(v, 0)), std::conj(P(u, 1)), std::conj(P(v, 1));
    Eigen::JacobiSVD<Eigen::Matrix2cd> svd(C, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Eigen::Matrix2cd W = svd.matrixU() * svd.matrixV().adjoint();
    const Matrix rotated = P * W;
    b.kets.col(a) = rotated.col(0);
    b.kets.col(c) = rotated.col(1);
    b.labels[static_cast<std::size_t>(a)] = u;
    b.labels[static_cast<std::size_t>(c)] = v;
    b.ambiguous[static_cast<std::size_t>(a)] = b.ambiguous[static_cast<std::size_t>(c)] = false;
}

/// <u_d|H|v_d> for a hybridized pair.
inline double pair_coupling(const DressedBasis& b, const OperatorMatrix& H, Index u, Index v) {
    const cplx j = b.ket(u).dot(H.matrix() * b.ket(v));
    return j.real();
}

/// S_-^(q) = sum over contexts of |psi(g_q, rest)><psi(e_q, rest)|, restricted to the first
/// `level_limit` dressed states (all when negative).
inline OperatorMatrix build_dressed_lowering(const DressedBasis& b, int qubit, Index level_limit = -1) {
    b.layout.check_qubit(qubit);
    const Index m = level_limit < 0 ? b.size() : std::min(level_limit, b.size());
    const Index stride = (Index{1} << (b.layout.qubit_count() - qubit)) * b.layout.fock_cutoff();
    std::vector<Index> col_of(static_cast<std::size_t>(b.layout.dim()), -1);
    for (Index c = 0; c < m; ++c) col_of[static_cast<std::size_t>(b.labels[static_cast<std::size_t>(c)])] = c;
    Matrix S = Matrix::Zero(b.layout.dim(), b.layout.dim());
    for (Index c = 0; c < m; ++c) {
        const Index lab = b.labels[static_cast<std::size_t>(c)];
        if (b.layout.level(lab, qubit) != Level::e) continue;
        const Index partner = lab - stride;
        const Index pc = col_of[static_cast<std::size_t>(partner)];
        if (pc < 0)
            throw ValidationError("build_dressed_lowering: no dressed state labelled " + b.layout.ket(partner) +
                                  " below level " + std::to_string(m));
        if (b.ambiguous[static_cast<std::size_t>(c)] || b.ambiguous[static_cast<std::size_t>(pc)])
            throw ValidationError("build_dressed_lowering: ambiguous label on " + b.layout.ket(lab) + " or " +
                                  b.layout.ket(partner));
        S += b.kets.col(pc) * b.kets.col(c).adjoint();
    }
    return {b.layout, std::move(S)};
}

inline OperatorMatrix build_dressed_lowering(const SpectrumResult& s, int qubit, Index level_limit = -1) {
    return build_dressed_lowering(dressed_basis(s), qubit, level_limit);
}

/// Coordinates of the lowest `size` eigenstates; H is diagonal here.
struct EigenFrame {
    Eigen::VectorXd energies;
    Matrix basis;  // bare-basis columns

    Index size() const noexcept { return basis.cols(); }
    Matrix hamiltonian() const { return energies.cast<cplx>().asDiagonal().toDenseMatrix(); }
    Matrix project(const Matrix& A) const { return basis.adjoint() * A * basis; }
    Matrix project(const OperatorMatrix& A) const { return project(A.matrix()); }
    Vector project(const Vector& v) const { return basis.adjoint() * v; }
};

inline EigenFrame eigen_frame(const SpectrumResult& s, Index size) {
    if (size < 1 || size > s.size()) throw ValidationError("eigen_frame: size out of range");
    return {s.energies.head(size), s.eigenvectors.leftCols(size)};
}

/// Smallest frame that holds `ket` up to `tol` in weight.
inline Index frame_size_for(const SpectrumResult& s, const Vector& ket, double tol = 1e-14) {
    const Eigen::VectorXd w = (s.eigenvectors.adjoint() * ket).cwiseAbs2();
    Index last = 0;
    for (Index k = 0; k < w.size(); ++k)
        if (w(k) > tol) last = k;
    return last + 1;
}

struct Dissipator {
    Index lower = 0, upper = 0;  // eigen indices, E_upper > E_lower
    cplx amplitude{};            // sqrt(base rate) * <lower|A|upper>
    double rate = 0.0;           // |amplitude|^2
    int channel = 0;             // 0 cavity, q for qubit q
};

/// Downward dyads for the cavity quadrature and each qubit's sigma_x, among the first
/// `level_count` eigenstates (all when negative).
inline std::vector<Dissipator> build_dissipators(const SpectrumResult& s, const SystemConfig& config,
                                                 Index level_count = -1) {
    const Index m = level_count < 0 ? s.size() : std::min(level_count, s.size());
    const Matrix V = s.eigenvectors.leftCols(m);
    std::vector<Dissipator> out;
    auto add_channel = [&](const Matrix& A, double base, int channel) {
        if (base <= 0) return;
        const Matrix Ae = V.adjoint() * A * V;
        for (Index k = 0; k < m; ++k)
            for (Index j = 0; j < k; ++j) {
                if (!(s.energies(k) > s.energies(j))) continue;
                const cplx el = Ae(j, k);
                if (std::norm(el) <= 1e-24) continue;
                const cplx amp = std::sqrt(base) * el;
                out.push_back({j, k, amp, std::norm(amp), channel});
            }
    };
    add_channel(cavity_quadrature(s.layout).matrix(), config.kappa, 0);
    for (int q = 1; q <= config.qubit_count(); ++q)
        add_channel(embed_qubit_op(s.layout, q, pauli::x()).matrix(), config.qubit(q).gamma, q);
    return out;
}

struct DensityMatrix {
    Matrix rho;
    double time = 0.0;

    static DensityMatrix pure(const Vector& ket, double t = 0.0) { return {ket * ket.adjoint(), t}; }
};

/// Hermitian to 1e-10, unit trace to 1e-8, eigenvalues above -1e-8.
inline void check_density(const Matrix& rho) {
    const double herm = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
    if (herm > 1e-10) throw NumericalError("density matrix is not Hermitian (" + io::fmt(herm) + ")");
    const double tr = rho.trace().real();
    if (std::abs(tr - 1.0) > 1e-8) throw NumericalError("density matrix trace is " + io::fmt(tr));
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (rho + rho.adjoint()), Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-8)
        throw NumericalError("density matrix has eigenvalue " + io::fmt(es.eigenvalues().minCoeff()));
}

enum class JumpGrouping { per_channel, per_transition };
enum class Propagation { automatic, direct, step_matrix };

struct EvolveOptions {
    double step = 0.0;            // 0: min(0.01/omega_max, 0.001 pi/coupling)
    double coupling = 0.0;        // effective coupling J used by the default step rule
    double trace_tolerance = 1e-7;
    JumpGrouping grouping = JumpGrouping::per_channel;
    Propagation method = Propagation::automatic;
};

namespace detail {

inline Matrix kron(const Matrix& A, const Matrix& B) {
    Matrix out(A.rows() * B.rows(), A.cols() * B.cols());
    for (Index i = 0; i < A.rows(); ++i)
        for (Index j = 0; j < A.cols(); ++j) out.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
    return out;
}

inline std::vector<Matrix> jump_operators(const std::vector<Dissipator>& ds, Index dim, JumpGrouping g) {
    std::vector<Matrix> Ls;
    if (g == JumpGrouping::per_transition) {
        for (const auto& d : ds) {
            Matrix L = Matrix::Zero(dim, dim);
            L(d.lower, d.upper) = d.amplitude;
            Ls.push_back(std::move(L));
        }
        return Ls;
    }
    std::map<int, Matrix> by_channel;
    for (const auto& d : ds) {
        if (d.lower >= dim || d.upper >= dim) throw ValidationError("dissipator outside the evolution space");
        auto [it, fresh] = by_channel.try_emplace(d.channel, Matrix::Zero(dim, dim));
        it->second(d.lower, d.upper) += d.amplitude;
    }
    for (auto& [c, L] : by_channel) Ls.push_back(std::move(L));
    return Ls;
}

/// d rho/dt = -i (K rho - rho K^dag) + sum L rho L^dag with K = H - (i/2) sum L^dag L.
struct Lindbladian {
    Matrix K;
    std::vector<Matrix> L;

    Matrix operator()(const Matrix& rho) const {
        const cplx mi(0, -1);
        Matrix out = mi * (K * rho - rho * K.adjoint());
        for (const auto& l : L) out.noalias() += l * rho * l.adjoint();
        return out;
    }

    /// Column-stacked superoperator.
    Matrix superoperator() const {
        const Index n = K.rows();
        const Matrix I = Matrix::Identity(n, n);
        const cplx mi(0, -1);
        Matrix S = mi * (kron(I, K) - kron(K.conjugate(), I));
        for (const auto& l : L) S += kron(l.conjugate(), l);
        return S;
    }
};

inline Matrix rk4_step(const Lindbladian& f, const Matrix& rho, double h) {
    const Matrix k1 = f(rho);
    const Matrix k2 = f(rho + 0.5 * h * k1);
    const Matrix k3 = f(rho + 0.5 * h * k2);
    const Matrix k4 = f(rho + h * k3);
    return rho + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace detail

/// Classical RK4 with a fixed step. For long runs the identical one-step RK4 map
/// I + hL + (hL)^2/2 + (hL)^3/6 + (hL)^4/24 is assembled once and reused.
inline std::vector<DensityMatrix> evolve(const DensityMatrix& rho0, const Matrix& H, const std::vector<Dissipator>& dissipators,
                                         const std::vector<double>& t_grid, const EvolveOptions& opt = {}) {
    const Index n = rho0.rho.rows();
    if (rho0.rho.cols() != n || H.rows() != n || H.cols() != n) throw ValidationError("evolve: dimension mismatch");
    check_density(rho0.rho);
    for (std::size_t k = 0; k < t_grid.size(); ++k) {
        if (k ? !(t_grid[k] > t_grid[k - 1]) : t_grid[k] < rho0.time)
            throw ValidationError("evolve: time grid must be strictly increasing and start at or after rho0");
    }

    detail::Lindbladian f;
    f.L = detail::jump_operators(dissipators, n, opt.grouping);
    f.K = H;
    for (const auto& l : f.L) f.K -= cplx(0, 0.5) * (l.adjoint() * l);

    double h = opt.step;
    if (h <= 0) {
        Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (H + H.adjoint()), Eigen::EigenvaluesOnly);
        const double wmax = es.eigenvalues().cwiseAbs().maxCoeff();
        h = std::numeric_limits<double>::infinity();
        if (wmax > 0) h = 0.01 / wmax;
        if (opt.coupling != 0) h = std::min(h, 0.001 * pi / std::abs(opt.coupling));
        if (!std::isfinite(h)) h = t_grid.empty() ? 1.0 : std::max(1e-3, (t_grid.back() - rho0.time) / 1000.0);
    }

    auto substeps = [&](double dt) { return std::max<long>(1, static_cast<long>(std::ceil(dt / h - 1e-9))); };
    long total = 0;
    {
        double t = rho0.time;
        for (double tk : t_grid) total += (tk > t) ? substeps(tk - t) : 0, t = tk;
    }
    Propagation method = opt.method;
    if (method == Propagation::automatic) method = (n <= 40 && total > 4 * n * n) ? Propagation::step_matrix : Propagation::direct;

    std::map<std::pair<double, long>, Matrix> cache;  // (substep, count) -> P^count
    Matrix S;
    if (method == Propagation::step_matrix) S = f.superoperator();
    auto interval_map = [&](double hh, long count) -> const Matrix& {
        auto key = std::make_pair(hh, count);
        if (auto it = cache.find(key); it != cache.end()) return it->second;
        const Index nn = n * n;
        const Matrix A = hh * S;
        const Matrix I = Matrix::Identity(nn, nn);
        // Horner form of the RK4 polynomial.
        Matrix P = I + A * (I + A * (I + A * (I + A / 4.0) / 3.0) / 2.0);
        Matrix R = I;
        for (long e = count; e > 0; e >>= 1) {
            if (e & 1) R = R * P;
            if (e > 1) P = P * P;
        }
        return cache.emplace(key, std::move(R)).first->second;
    };

    const double tr0 = rho0.rho.trace().real();
    std::vector<DensityMatrix> out;
    out.reserve(t_grid.size());
    Matrix rho = rho0.rho;
    double t = rho0.time;
    for (double tk : t_grid) {
        if (tk > t) {
            const long count = substeps(tk - t);
            const double hh = (tk - t) / static_cast<double>(count);
            if (method == Propagation::direct) {
                for (long s = 0; s < count; ++s) rho = detail::rk4_step(f, rho, hh);
            } else {
                const Matrix& R = interval_map(hh, count);
                const Vector v = R * Eigen::Map<const Vector>(rho.data(), n * n);
                rho = Eigen::Map<const Matrix>(v.data(), n, n);
            }
            t = tk;
        }
        const double drift = std::abs(rho.trace().real() - tr0);
        if (drift > opt.trace_tolerance)
            throw NumericalError("evolve: trace drift " + io::fmt(drift) + " at t = " + io::fmt(tk) +
                                 " exceeds tolerance; use a smaller step");
        out.push_back({rho, tk});
    }
    return out;
}

using OperatorProduct = std::vector<std::reference_wrapper<const Matrix>>;

/// Tr[rho * ops[0] * ops[1] * ...]; the imaginary residue must stay below 1e-10.
inline double expectation(const DensityMatrix& rho, const OperatorProduct& ops) {
    Matrix prod = rho.rho;
    for (const Matrix& op : ops) {
        if (op.rows() != prod.cols() || op.cols() != prod.cols()) throw ValidationError("expectation: dimension mismatch");
        prod = prod * op;
    }
    const cplx v = prod.trace();
    if (std::abs(v.imag()) > 1e-10 * std::max(1.0, std::abs(v.real())))
        throw NumericalError("expectation: imaginary residue " + io::fmt(v.imag()));
    return v.real();
}

inline double expectation(const DensityMatrix& rho, const Matrix& op) { return expectation(rho, OperatorProduct{std::cref(op)}); }

inline double state_fidelity(const DensityMatrix& rho, const Vector& target) {
    if (target.size() != rho.rho.rows()) throw ValidationError("state_fidelity: dimension mismatch");
    const double f = target.dot(rho.rho * target).real();
    return std::clamp(f, 0.0, 1.0);
}

struct TimeSeries {
    std::vector<double> times;
    std::vector<std::string> names;
    std::vector<std::vector<double>> traces;  // traces[k][i] is observable k at times[i]

    void add(std::string name, std::vector<double> values) {
        if (values.size() != times.size()) throw ValidationError("TimeSeries: trace length mismatch for " + name);
        names.push_back(std::move(name));
        traces.push_back(std::move(values));
    }

    const std::vector<double>& trace(const std::string& name) const {
        for (std::size_t k = 0; k < names.size(); ++k)
            if (names[k] == name) return traces[k];
        throw ValidationError("TimeSeries: no trace named " + name);
    }

    std::string csv() const {
        std::vector<std::string> header{"t"};
        header.insert(header.end(), names.begin(), names.end());
        io::CsvWriter w(header);
        for (std::size_t i = 0; i < times.size(); ++i) {
            std::vector<double> row{times[i]};
            for (const auto& tr : traces) row.push_back(tr[i]);
            w.row(row);
        }
        return w.str();
    }
};

/// Observable traces over a run: each entry is a name and an operator (already in the frame).
inline TimeSeries observe(const std::vector<DensityMatrix>& run, const std::vector<std::pair<std::string, Matrix>>& observables) {
    TimeSeries ts;
    for (const auto& r : run) ts.times.push_back(r.time);
    for (const auto& [name, op] : observables) {
        std::vector<double> v;
        v.reserve(run.size());
        for (const auto& r : run) v.push_back(expectation(r, op));
        ts.add(name, std::move(v));
    }
    return ts;
}

}  // namespace virtmix
