#include <gtest/gtest.h>

#include "virtmix/spectrum.hpp"

using namespace virtmix;

namespace {

SystemConfig fig1b(int cutoff = 8) {
    SystemConfig c;
    c.qubits = {{0.4, 0.13, pi / 6, 0}, {0.6, 0.13, pi / 6, 0}, {0.98, 5e-3, pi / 6, 0}};
    c.omega_c = 1.325;
    c.fock_cutoff = cutoff;
    return c;
}

SystemConfig fig4() {
    SystemConfig c;
    c.qubits = {{0.25, 0.15, pi / 6, 0}, {0.4, 0.15, pi / 6, 0}, {0.55, 0.15, pi / 6, 0}, {0.7, 0.15, pi / 6, 0}};
    c.omega_c = 1.4;
    return c;
}

}  // namespace

TEST(Diagonalize, DecoupledLabelsAreExact) {
    auto c = fig1b(4);
    for (auto& q : c.qubits) q.lambda = 0;
    const auto s = diagonalize(build_generalized_dicke(c));
    EXPECT_EQ(s.energies(0), 0.0);
    for (Index k = 0; k < s.size(); ++k) {
        EXPECT_NEAR(s.labels[static_cast<std::size_t>(k)].overlap, 1.0, 1e-12);
        EXPECT_FALSE(s.labels[static_cast<std::size_t>(k)].ambiguous);
        if (k > 0) {
            EXPECT_GE(s.energies(k), s.energies(k - 1));
        }
    }
    EXPECT_EQ(s.labels[1].bare_index, c.layout().parse("egg0"));
}

TEST(Diagonalize, LabelsAreOneToOne) {
    const auto s = diagonalize(build_generalized_dicke(fig1b(6)));
    std::vector<char> seen(static_cast<std::size_t>(s.size()), 0);
    for (const auto& l : s.labels) {
        EXPECT_FALSE(seen[static_cast<std::size_t>(l.bare_index)]);
        seen[static_cast<std::size_t>(l.bare_index)] = 1;
    }
    EXPECT_TRUE(s.find_label(s.layout.parse("gge0")).has_value());
}

TEST(Diagonalize, RejectsNonHermitian) {
    const HilbertLayout l(1, 3);
    EXPECT_THROW(diagonalize(cavity_annihilation(l)), ValidationError);
}

TEST(Parameters, PathsResolveAndReject) {
    auto c = fig1b();
    resolve_parameter("qubits[2].omega").set(c, 0.9);
    EXPECT_EQ(c.qubit(3).omega, 0.9);
    resolve_parameter("qubits[*].lambda").set(c, 0.07);
    for (const auto& q : c.qubits) EXPECT_EQ(q.lambda, 0.07);
    resolve_parameter("omega_c").set(c, 1.5);
    EXPECT_EQ(c.omega_c, 1.5);
    EXPECT_THROW(resolve_parameter("qubits[2].mass"), ValidationError);
    EXPECT_THROW(resolve_parameter("photons"), ValidationError);
    EXPECT_THROW(resolve_parameter("qubits[9].omega").set(c, 1.0), ValidationError);
}

TEST(Sweep, EmptyGridGivesEmptyResult) {
    const auto r = sweep_levels(fig1b(4), "qubits[2].omega", {}, 3);
    EXPECT_TRUE(r.points.empty());
    EXPECT_EQ(sweep_csv(r), "param\n");
}

TEST(Sweep, RejectsNonMonotoneGrid) {
    EXPECT_THROW(sweep_levels(fig1b(4), "qubits[2].omega", {0.5, 0.7, 0.6}, 3), ValidationError);
}

TEST(Sweep, CsvHeaderAndThreadIndependence) {
    std::vector<double> grid;
    for (int k = 0; k < 12; ++k) grid.push_back(0.3 + 0.1 * k);
    SweepOptions one, many;
    many.threads = 4;
    const auto a = sweep_csv(sweep_levels(fig1b(5), "qubits[2].omega", grid, 4, one));
    const auto b = sweep_csv(sweep_levels(fig1b(5), "qubits[2].omega", grid, 4, many));
    EXPECT_EQ(a, b);
    EXPECT_EQ(a.substr(0, a.find('\n')), "param,E1,E2,E3,E4,label1,label2,label3,label4");
}

TEST(Anticrossing, ThreeQubitMixingMinimum) {
    const auto r = find_anticrossing(fig1b(), "qubits[2].omega", 0.95, 1.05, fig1b().layout().parse("gge0"),
                                     fig1b().layout().parse("eeg0"));
    EXPECT_NEAR(r.location, 1.0, 0.02);
    EXPECT_GT(r.splitting, 1e-4);
    EXPECT_LT(r.splitting, 3e-4);
    EXPECT_GE(r.symmetric_overlap, 0.49);
    EXPECT_GE(r.antisymmetric_overlap, 0.49);

    // Branches sit symmetrically about their mean at the minimum.
    auto c = fig1b();
    c.qubits[2].omega = r.location;
    const auto s = diagonalize(build_generalized_dicke(c));
    EXPECT_NEAR(s.energies(r.upper) - r.mean_energy, r.mean_energy - s.energies(r.lower), 1e-8);
    EXPECT_NEAR(s.energies(r.upper) - s.energies(r.lower), r.splitting, 1e-12);
}

TEST(Anticrossing, BranchLabelsChangeOnlyInsideWindow) {
    const auto c = fig1b(6);
    const auto r = find_anticrossing(c, "qubits[2].omega", 0.95, 1.05, c.layout().parse("gge0"), c.layout().parse("eeg0"));
    std::vector<double> grid;
    for (int k = 0; k <= 60; ++k) grid.push_back(0.96 + 0.0005 * k);
    SweepOptions so;
    so.keep_vectors = true;
    const auto sw = sweep_levels(c, "qubits[2].omega", grid, 5, so);
    const auto slots = track_branches(sw);
    for (int b = 0; b < 5; ++b)
        for (std::size_t i = 1; i < grid.size(); ++i) {
            const auto prev = sw.points[i - 1].labels[static_cast<std::size_t>(slots[i - 1][b])].bare_index;
            const auto cur = sw.points[i].labels[static_cast<std::size_t>(slots[i][b])].bare_index;
            if (prev != cur) {
                EXPECT_LE(grid[i - 1], r.location + 1e-3);
                EXPECT_GE(grid[i], r.location - 1e-3);
            }
        }
}

TEST(Anticrossing, CutoffRobustness) {
    auto search = [](const SystemConfig& c) {
        const auto l = c.layout();
        return find_anticrossing(c, "qubits[2].omega", 0.95, 1.05, l.parse("gge0"), l.parse("eeg0"));
    };
    const auto a = search(fig1b(8)), b = search(fig1b(12));
    EXPECT_LT(std::abs(a.splitting / b.splitting - 1), 1e-6);
}

TEST(Anticrossing, TypeOneSplittingExistsOnlyBeyondRotatingWave) {
    const auto c = fig4();
    const auto l = c.layout();
    AnticrossingOptions opt;
    opt.prescan = 50;
    const auto dicke = find_anticrossing(c, "qubits[0].omega", 0.2, 0.3, l.parse("egge0"), l.parse("geeg0"), opt);
    EXPECT_GT(dicke.splitting, 5e-4);
    EXPECT_LT(dicke.splitting, 5e-3);
    opt.model = CouplingModel::tavis_cummings;
    const auto tc = find_anticrossing(c, "qubits[0].omega", 0.2, 0.3, l.parse("egge0"), l.parse("geeg0"), opt);
    EXPECT_LT(tc.splitting, 1e-10);
}

TEST(Anticrossing, ErrorsOnBadInput) {
    const auto l = fig1b().layout();
    EXPECT_THROW(find_anticrossing(fig1b(), "qubits[2].omega", 1.05, 0.95, l.parse("gge0"), l.parse("eeg0")), ValidationError);
    EXPECT_THROW(find_anticrossing(fig1b(), "qubits[2].omega", 0.95, 1.05, l.parse("gge0"), l.parse("gge0")), ValidationError);
}
