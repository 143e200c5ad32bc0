#include <random>

#include <gtest/gtest.h>

#include "virtmix/scenarios.hpp"

using namespace virtmix;

namespace {

SystemConfig fig1b(double loss) {
    SystemConfig c;
    c.qubits = {{0.4, 0.13, pi / 6, loss}, {0.6, 0.13, pi / 6, loss}, {0.98448223180669, 5e-3, pi / 6, loss}};
    c.omega_c = 1.325;
    c.kappa = loss;
    return c;
}

SystemConfig small(double lambda, double loss) {
    SystemConfig c;
    c.qubits = {{0.7, lambda, 0.4, loss}, {0.9, lambda, 0.2, loss}};
    c.omega_c = 1.1;
    c.kappa = loss;
    c.fock_cutoff = 4;
    return c;
}

MixingDynamicsSpec fig3_spec(double loss) {
    MixingDynamicsSpec spec;
    spec.system = fig1b(loss);
    const auto l = spec.system.layout();
    spec.initial = l.parse("gge0");
    spec.partner = l.parse("eeg0");
    spec.samples = 401;
    spec.correlators = {{1}, {3}};
    return spec;
}

}  // namespace

TEST(DressedLowering, DecoupledEqualsBareLowering) {
    auto c = small(0.0, 0.0);
    const auto s = diagonalize(build_generalized_dicke(c));
    for (int q = 1; q <= 2; ++q) {
        const Matrix dressed = build_dressed_lowering(s, q).matrix();
        const Matrix bare = embed_qubit_op(c.layout(), q, pauli::minus()).matrix();
        EXPECT_LE((dressed - bare).cwiseAbs().maxCoeff(), 1e-14);
    }
}

TEST(DressedBasis, HybridizedPairIsOrthonormalAndSpansTheEigenpair) {
    const auto c = fig1b(0);
    const auto H = build_generalized_dicke(c);
    const auto s = diagonalize(H);
    auto b = dressed_basis(s);
    const auto l = c.layout();
    hybridize_pair(b, l.parse("gge0"), l.parse("eeg0"));
    const Vector u = b.ket(l.parse("gge0")), v = b.ket(l.parse("eeg0"));
    EXPECT_NEAR(u.norm(), 1.0, 1e-12);
    EXPECT_NEAR(std::abs(u.dot(v)), 0.0, 1e-12);
    EXPECT_GT(std::norm(u(l.parse("gge0"))), 0.9);
    EXPECT_GT(std::norm(v(l.parse("eeg0"))), 0.9);
    const double J = pair_coupling(b, H, l.parse("gge0"), l.parse("eeg0"));
    EXPECT_GT(J, 0.0);
    EXPECT_LT(J, 1e-3);
}

TEST(Dissipators, EmptyWithoutLoss) {
    const auto c = small(0.05, 0.0);
    EXPECT_TRUE(build_dissipators(diagonalize(build_generalized_dicke(c)), c).empty());
}

TEST(Dissipators, CavityRateScalesWithPhotonNumber) {
    SystemConfig c;
    c.qubits = {{0.7, 0.0, 0, 0}};
    c.omega_c = 1.0;
    c.kappa = 2e-3;
    c.fock_cutoff = 5;
    const auto s = diagonalize(build_generalized_dicke(c));
    const auto ds = build_dissipators(s, c);
    const auto l = c.layout();
    int found = 0;
    for (const auto& d : ds) {
        const Index from = s.labels[static_cast<std::size_t>(d.upper)].bare_index;
        const Index to = s.labels[static_cast<std::size_t>(d.lower)].bare_index;
        EXPECT_EQ(d.channel, 0);
        EXPECT_EQ(l.photons(from), l.photons(to) + 1);
        EXPECT_NEAR(d.rate, c.kappa * l.photons(from), 1e-15);
        ++found;
    }
    EXPECT_EQ(found, 2 * 4);
}

TEST(Evolve, FrozenWithoutDynamics) {
    const Index n = 4;
    Vector psi = Vector::Zero(n);
    psi(1) = std::sqrt(0.3);
    psi(2) = std::sqrt(0.7);
    const auto run = evolve(DensityMatrix::pure(psi), Matrix::Zero(n, n), {}, {0.0, 1.0, 5.0});
    for (const auto& r : run) EXPECT_LE((r.rho - run.front().rho).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Evolve, LosslessMatchesExactPropagation) {
    const auto c = small(0.08, 0.0);
    const auto s = diagonalize(build_generalized_dicke(c));
    std::mt19937 rng(5);
    std::normal_distribution<double> N;
    Vector psi(s.size());
    for (Index k = 0; k < 6; ++k) psi(k) = cplx(N(rng), N(rng));
    for (Index k = 6; k < s.size(); ++k) psi(k) = 0;
    psi.normalize();
    const Matrix H = s.energies.cast<cplx>().asDiagonal().toDenseMatrix();
    std::vector<double> grid;
    for (int k = 0; k <= 20; ++k) grid.push_back(2.5 * k);
    for (auto method : {Propagation::direct, Propagation::step_matrix}) {
        EvolveOptions eo;
        eo.method = method;
        const auto run = evolve(DensityMatrix::pure(psi), H, {}, grid, eo);
        for (const auto& r : run) {
            Vector exact = psi;
            for (Index k = 0; k < s.size(); ++k) exact(k) *= std::exp(cplx(0, -s.energies(k) * r.time));
            EXPECT_GE(state_fidelity(r, exact), 1 - 1e-8);
        }
    }
}

TEST(Evolve, StepMatrixAgreesWithDirectStepping) {
    const auto c = small(0.08, 2e-3);
    const auto s = diagonalize(build_generalized_dicke(c));
    const Index m = 8;
    const auto frame = eigen_frame(s, m);
    const auto ds = build_dissipators(s, c, m);
    Vector psi = Vector::Zero(m);
    psi(3) = 1.0;
    psi(4) = cplx(0, 1);
    psi.normalize();
    std::vector<double> grid{0.0, 7.0, 30.0, 31.0};
    EvolveOptions a, b;
    a.method = Propagation::direct;
    b.method = Propagation::step_matrix;
    const auto ra = evolve(DensityMatrix::pure(psi), frame.hamiltonian(), ds, grid, a);
    const auto rb = evolve(DensityMatrix::pure(psi), frame.hamiltonian(), ds, grid, b);
    for (std::size_t k = 0; k < grid.size(); ++k) {
        EXPECT_LE((ra[k].rho - rb[k].rho).cwiseAbs().maxCoeff(), 1e-11);
        EXPECT_NO_THROW(check_density(ra[k].rho));
    }
}

TEST(Evolve, GroupingsBothPreserveTheDensityMatrix) {
    const auto c = small(0.08, 5e-3);
    const auto s = diagonalize(build_generalized_dicke(c));
    const auto frame = eigen_frame(s, 8);
    const auto ds = build_dissipators(s, c, 8);
    Vector psi = Vector::Zero(8);
    psi(5) = 1;
    for (auto g : {JumpGrouping::per_channel, JumpGrouping::per_transition}) {
        EvolveOptions eo;
        eo.grouping = g;
        const auto run = evolve(DensityMatrix::pure(psi), frame.hamiltonian(), ds, {0.0, 50.0, 200.0}, eo);
        for (const auto& r : run) EXPECT_NO_THROW(check_density(r.rho));
        EXPECT_LT(run.back().rho(5, 5).real(), 1.0);
    }
}

TEST(Evolve, TraceDriftIsReported) {
    Matrix H = Matrix::Identity(2, 2) * cplx(0, -1e-3);
    Vector psi = Vector::Zero(2);
    psi(0) = 1;
    EXPECT_THROW(evolve(DensityMatrix::pure(psi), H, {}, {0.0, 10.0}), NumericalError);
}

TEST(Evolve, RejectsBadGrid) {
    Vector psi = Vector::Zero(2);
    psi(0) = 1;
    EXPECT_THROW(evolve(DensityMatrix::pure(psi), Matrix::Zero(2, 2), {}, {1.0, 0.5}), ValidationError);
}

TEST(Observables, FidelityAndExpectationBasics) {
    Vector a = Vector::Zero(3), b = Vector::Zero(3);
    a(0) = 1;
    b(1) = 1;
    const auto rho = DensityMatrix::pure(a);
    EXPECT_DOUBLE_EQ(state_fidelity(rho, a), 1.0);
    EXPECT_DOUBLE_EQ(state_fidelity(rho, b), 0.0);
    Matrix P = a * a.adjoint();
    EXPECT_DOUBLE_EQ(expectation(rho, P), 1.0);
}

TEST(Observables, TimeSeriesCsv) {
    TimeSeries ts;
    ts.times = {0.0, 0.5};
    ts.add("S1", {1.0, 0.25});
    EXPECT_EQ(ts.csv(), "t,S1\n0,1\n0.5,0.25\n");
    EXPECT_THROW(ts.add("S2", {1.0}), ValidationError);
}

TEST(MixingDynamics, InitialExcitationAndRabiPeriod) {
    const auto res = run_mixing_dynamics(fig3_spec(0.0));
    const auto& S3 = res.series.trace("S3");
    EXPECT_NEAR(S3.front(), 1.0, 1e-10);
    const auto tmin = first_minimum(res.series.times, S3);
    ASSERT_TRUE(tmin.has_value());
    EXPECT_NEAR(*tmin / res.time_unit, 1.0, 0.05);
    EXPECT_LT(res.max_trace_drift, 1e-7);
}

TEST(MixingDynamics, CavityLossBarelyMovesTheTransferMaximum) {
    auto base = fig3_spec(3e-5);
    auto lossy = base;
    lossy.system.kappa *= 10;
    const auto a = run_mixing_dynamics(base), b = run_mixing_dynamics(lossy);
    const auto ta = first_maximum(a.series.times, a.series.trace("S1"));
    const auto tb = first_maximum(b.series.times, b.series.trace("S1"));
    ASSERT_TRUE(ta && tb);
    EXPECT_LT(std::abs(*tb / *ta - 1), 0.05);
}
