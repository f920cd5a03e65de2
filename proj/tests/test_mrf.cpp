#include "fpgnn/errors.hpp"
#include "fpgnn/mrf.hpp"
#include "support/mrf_gen.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <sstream>

using namespace fpgnn;
using testutil::MrfSpec;
using testutil::random_mrf;

namespace {

PairwiseMrf two_node_attractive() {
    return PairwiseMrf(2, {{1, 1}, {1, 1}}, {{0, 1, {2, 1, 1, 2}}});
}

void expect_on_simplex(const Tensor& q) {
    for (std::size_t i = 0; i < q.rows(); ++i) {
        double s = 0.0;
        for (double v : q.row(i)) {
            EXPECT_GE(v, 0.0);
            s += v;
        }
        EXPECT_NEAR(s, 1.0, 1e-12);
    }
}

} // namespace

TEST(PairwiseMrf, RejectsNonPositivePotentials) {
    EXPECT_THROW(PairwiseMrf(2, {{1, 0}}, {}), DomainError);
    EXPECT_THROW(PairwiseMrf(2, {{1, 1}, {1, 1}}, {{0, 1, {1, -1, 1, 1}}}), DomainError);
    EXPECT_THROW(PairwiseMrf(2, {{1, 1}}, {{0, 3, {1, 1, 1, 1}}}), IndexError);
}

TEST(PairwiseMrf, ReverseDirectionReadsTranspose) {
    const PairwiseMrf m(2, {{1, 1}, {1, 1}}, {{1, 0, {1, 2, 3, 4}}});
    const auto [a, b] = m.edge(0);
    // Stored as the (0, 1) table whatever order the caller used.
    EXPECT_EQ(a, 0u);
    EXPECT_EQ(b, 1u);
    EXPECT_NEAR(std::exp(m.log_psi(0, 0, 1)), 3.0, 1e-15);
    EXPECT_NEAR(std::exp(m.log_psi(0, 1, 0)), 2.0, 1e-15);
}

TEST(MeanFieldUpdate, IsolatedNodeNormalisesPhi) {
    const PairwiseMrf m(2, {{1, 3}}, {});
    const MeanFieldState s = mean_field_update(m, uniform_state(m), 0);
    EXPECT_NEAR(s.q(0, 0), 0.25, 1e-15);
    EXPECT_NEAR(s.q(0, 1), 0.75, 1e-15);
}

TEST(MeanFieldUpdate, UniformPotentialsStayUniform) {
    MrfSpec spec{.n = 6, .k = 3, .density = 0.6};
    std::vector<std::vector<double>> phi(6, std::vector<double>(3, 1.0));
    std::vector<PairwiseMrf::EdgePotential> edges;
    for (std::size_t i = 0; i + 1 < spec.n; ++i) edges.push_back({i, i + 1, std::vector<double>(9, 2.0)});
    const PairwiseMrf m(3, phi, edges);
    MeanFieldState s = uniform_state(m);
    for (std::size_t i = 0; i < 6; ++i) s = mean_field_update(m, s, i);
    for (double v : s.q.data()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
}

TEST(MeanFieldUpdate, TwoNodeHandEvaluation) {
    const PairwiseMrf m = two_node_attractive();
    MeanFieldState s = uniform_state(m);
    s.q(1, 0) = 1.0;
    s.q(1, 1) = 0.0;
    const MeanFieldState out = mean_field_update(m, s, 0);
    EXPECT_NEAR(out.q(0, 0), 2.0 / 3.0, 1e-15);
    EXPECT_NEAR(out.q(0, 1), 1.0 / 3.0, 1e-15);
    // Other rows untouched.
    EXPECT_EQ(out.q(1, 0), 1.0);
    EXPECT_EQ(out.q(1, 1), 0.0);
}

TEST(MeanFieldUpdate, KeepsRowsOnSimplex) {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const PairwiseMrf m = random_mrf({.n = 7, .k = 4, .density = 0.5, .coupling = 3.0}, seed);
        MeanFieldState s = random_state(m, seed);
        expect_on_simplex(s.q);
        for (std::size_t i = 0; i < 7; ++i) {
            s = mean_field_update(m, s, i);
            expect_on_simplex(s.q);
        }
    }
}

TEST(RunMeanField, ConvergedStateIsAFixedPoint) {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const PairwiseMrf m = random_mrf({.n = 8, .k = 3, .density = 0.4, .coupling = 0.8}, seed);
        const MeanFieldState s = run_mean_field(m, uniform_state(m), {.tol = 1e-10});
        ASSERT_TRUE(s.converged) << "seed " << seed;
        EXPECT_LT(fixed_point_residual(m, s), 1e-8);
        expect_on_simplex(s.q);
    }
}

TEST(RunMeanField, SequentialFreeEnergyNonincreasing) {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const PairwiseMrf m = random_mrf({.n = 6, .k = 3, .density = 0.7, .coupling = 2.0}, seed);
        const MeanFieldState s = run_mean_field(m, random_state(m, seed + 7), {.tol = 1e-12, .max_iters = 500});
        for (std::size_t t = 1; t < s.free_energy_trace.size(); ++t)
            EXPECT_LE(s.free_energy_trace[t], s.free_energy_trace[t - 1] + 1e-10) << "seed " << seed << " sweep " << t;
    }
}

TEST(RunMeanField, TraceRecomputesFromState) {
    const PairwiseMrf m = random_mrf({.n = 5, .k = 2}, 3);
    const MeanFieldState s = run_mean_field(m, uniform_state(m));
    EXPECT_EQ(s.free_energy_trace.size(), s.iteration + 1);
    EXPECT_DOUBLE_EQ(s.free_energy_trace.back(), free_energy(m, s));
}

TEST(RunMeanField, UnconvergedIsFlaggedNotThrown) {
    const PairwiseMrf m = random_mrf({.n = 6, .k = 3, .density = 0.8, .coupling = 2.0}, 1);
    const MeanFieldState s = run_mean_field(m, random_state(m, 2), {.tol = 1e-300, .max_iters = 3});
    EXPECT_FALSE(s.converged);
    EXPECT_EQ(s.iteration, 3u);
}

TEST(RunMeanField, BadToleranceThrows) {
    const PairwiseMrf m = two_node_attractive();
    EXPECT_THROW(run_mean_field(m, uniform_state(m), {.tol = 0.0}), DomainError);
}

TEST(RunMeanField, WeakCouplingTreeCloseToExact) {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const PairwiseMrf m = random_mrf({.n = 8, .k = 3, .coupling = 0.1, .tree = true}, seed);
        const MeanFieldState s = run_mean_field(m, uniform_state(m));
        EXPECT_LT(testutil::max_total_variation(s.q, exact_marginals(m).marginals), 0.05);
    }
}

TEST(RunMeanField, PermutationEquivariance) {
    const PairwiseMrf m = random_mrf({.n = 6, .k = 3, .density = 0.5, .coupling = 0.7}, 12);
    const std::vector<std::size_t> perm{3, 0, 5, 1, 4, 2};
    std::vector<std::vector<double>> phi(6, std::vector<double>(3));
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t a = 0; a < 3; ++a) phi[perm[i]][a] = std::exp(m.log_phi(i, a));
    std::vector<PairwiseMrf::EdgePotential> edges;
    for (std::size_t e = 0; e < m.num_edges(); ++e) {
        const auto [i, j] = m.edge(e);
        PairwiseMrf::EdgePotential p{perm[i], perm[j], std::vector<double>(9)};
        for (std::size_t a = 0; a < 3; ++a)
            for (std::size_t b = 0; b < 3; ++b) p.psi[a * 3 + b] = std::exp(m.log_psi(e, a, b));
        edges.push_back(std::move(p));
    }
    const PairwiseMrf pm(3, phi, edges);
    // Parallel sweeps do not depend on node order.
    const MeanFieldOptions opts{.schedule = Schedule::parallel, .tol = 1e-13};
    const MeanFieldState a = run_mean_field(m, uniform_state(m), opts);
    const MeanFieldState b = run_mean_field(pm, uniform_state(pm), opts);
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t z = 0; z < 3; ++z) EXPECT_NEAR(b.q(perm[i], z), a.q(i, z), 1e-12);
}

TEST(FreeEnergy, SingleNodeAtNormalisedPhiIsExact) {
    const PairwiseMrf m(3, {{1, 2, 5}}, {});
    MeanFieldState s = uniform_state(m);
    s.q = Tensor::matrix({{0.125, 0.25, 0.625}});
    EXPECT_NEAR(free_energy(m, s), -std::log(8.0), 1e-14);
}

TEST(FreeEnergy, UniformEverythingIsMinusNLogK) {
    const std::size_t n = 5, k = 4;
    std::vector<PairwiseMrf::EdgePotential> edges{{0, 1, std::vector<double>(16, 1.0)}, {2, 4, std::vector<double>(16, 1.0)}};
    const PairwiseMrf m(k, std::vector<std::vector<double>>(n, std::vector<double>(k, 1.0)), edges);
    EXPECT_NEAR(free_energy(m, uniform_state(m)), -static_cast<double>(n) * std::log(4.0), 1e-13);
}

TEST(FreeEnergy, MatchesDirectFormula) {
    const PairwiseMrf m = random_mrf({.n = 5, .k = 3, .density = 0.6}, 4);
    const MeanFieldState s = random_state(m, 5);
    double f = 0.0;
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t a = 0; a < 3; ++a) f += s.q(i, a) * (std::log(s.q(i, a)) - m.log_phi(i, a));
    for (std::size_t e = 0; e < m.num_edges(); ++e) {
        const auto [i, j] = m.edge(e);
        for (std::size_t a = 0; a < 3; ++a)
            for (std::size_t b = 0; b < 3; ++b) f -= s.q(i, a) * s.q(j, b) * m.log_psi(e, a, b);
    }
    EXPECT_NEAR(free_energy(m, s), f, 1e-12);
}

TEST(FreeEnergy, UpperBoundsNegativeLogPartition) {
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        const PairwiseMrf m = random_mrf({.n = 3, .k = 3, .density = 0.8, .coupling = 1.5}, seed);
        const MeanFieldState s = run_mean_field(m, uniform_state(m));
        EXPECT_GE(free_energy(m, s) + exact_marginals(m).log_partition, -1e-12);
    }
}

TEST(ExactMarginals, SingleNode) {
    const ExactResult r = exact_marginals(PairwiseMrf(2, {{1, 3}}, {}));
    EXPECT_NEAR(r.marginals(0, 1), 0.75, 1e-15);
    EXPECT_NEAR(r.log_partition, std::log(4.0), 1e-15);
}

TEST(ExactMarginals, IndependentNodesFactorise) {
    const ExactResult r = exact_marginals(PairwiseMrf(2, {{1, 3}, {2, 2}}, {}));
    EXPECT_NEAR(r.marginals(0, 0), 0.25, 1e-15);
    EXPECT_NEAR(r.marginals(1, 0), 0.5, 1e-15);
    EXPECT_NEAR(r.log_partition, std::log(16.0), 1e-14);
}

TEST(ExactMarginals, ThreeNodeAttractiveChain) {
    const std::vector<double> psi{2, 1, 1, 2};
    const PairwiseMrf m(2, {{1, 1}, {1, 1}, {1, 1}}, {{0, 1, psi}, {1, 2, psi}});
    // Eight configurations: psi(z0,z1) psi(z1,z2).
    double z = 0.0;
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
            for (int c = 0; c < 2; ++c) z += (a == b ? 2.0 : 1.0) * (b == c ? 2.0 : 1.0);
    const ExactResult r = exact_marginals(m);
    EXPECT_NEAR(r.log_partition, std::log(z), 1e-14);
    EXPECT_NEAR(z, 18.0, 0.0);
    for (double v : r.marginals.data()) EXPECT_NEAR(v, 0.5, 1e-15);
}

TEST(ExactMarginals, EnumerationBoundEnforced) {
    const PairwiseMrf m(2, std::vector<std::vector<double>>(21, {1.0, 1.0}), {});
    EXPECT_THROW(exact_marginals(m), DomainError);
}

TEST(ExactMarginals, EdgelessMeanFieldIsExact) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const PairwiseMrf m = random_mrf({.n = 5, .k = 3, .density = 0.0}, seed);
        const MeanFieldState s = run_mean_field(m, uniform_state(m));
        EXPECT_NEAR(free_energy(m, s), -exact_marginals(m).log_partition, 1e-10);
    }
}

TEST(MrfFile, RoundTrip) {
    const PairwiseMrf m = random_mrf({.n = 4, .k = 3, .density = 0.7}, 8);
    std::stringstream ss;
    write_mrf(ss, m);
    const PairwiseMrf back = read_mrf(ss);
    ASSERT_EQ(back.num_edges(), m.num_edges());
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t a = 0; a < 3; ++a) EXPECT_NEAR(back.log_phi(i, a), m.log_phi(i, a), 1e-15);
    for (std::size_t e = 0; e < m.num_edges(); ++e)
        for (std::size_t a = 0; a < 3; ++a)
            for (std::size_t b = 0; b < 3; ++b) EXPECT_NEAR(back.log_psi(e, a, b), m.log_psi(e, a, b), 1e-15);
}

TEST(MrfFile, ParsesDocumentedFormat) {
    std::istringstream in("2 2\nphi 0 1 3\npsi 0 1\n2 1\n1 2\n");
    const PairwiseMrf m = read_mrf(in);
    EXPECT_EQ(m.num_nodes(), 2u);
    EXPECT_NEAR(std::exp(m.log_phi(0, 1)), 3.0, 1e-15);
    EXPECT_NEAR(std::exp(m.log_phi(1, 0)), 1.0, 1e-15);
    EXPECT_NEAR(std::exp(m.log_psi(0, 0, 0)), 2.0, 1e-15);
}

TEST(MrfFile, MalformedInputRejected) {
    std::istringstream bad_index("2 2\nphi 4 1 1\n");
    EXPECT_THROW(read_mrf(bad_index), IndexError);
    std::istringstream truncated("2 2\npsi 0 1\n1 1\n");
    EXPECT_THROW(read_mrf(truncated), DataError);
}

// ---- Taylor order ------------------------------------------------------------

namespace {

SmoothFunction exp_sum(std::size_t dim) {
    return {dim, [](std::span<const double> u) { return std::exp(std::accumulate(u.begin(), u.end(), 0.0)); }};
}

const std::vector<double> kRadii{1e-1, 1e-1 / 2, 1e-2, 1e-2 / 2, 1e-3};

} // namespace

TEST(TaylorOrder, LinearFunctionIsExactAtFirstOrder) {
    const SmoothFunction f{3, [](std::span<const double> u) { return 2.0 + u[0] - 3.0 * u[1] + 0.5 * u[2]; }};
    const TaylorReport r = taylor_order_check(f, 1, kRadii);
    EXPECT_TRUE(r.degenerate);
    EXPECT_TRUE(std::isnan(r.slope));
    for (double e : r.errors) EXPECT_LT(e, 1e-12);
}

TEST(TaylorOrder, ExpSumSlopes) {
    const std::vector<double> radii{1e-1, 1e-2, 1e-3, 1e-4};
    const TaylorReport first = taylor_order_check(exp_sum(3), 1, radii);
    EXPECT_NEAR(first.slope, 2.0, 0.3);
    const TaylorReport second = taylor_order_check(exp_sum(3), 2, kRadii);
    EXPECT_NEAR(second.slope, 3.0, 0.3);
    EXPECT_FALSE(first.degenerate);
}

TEST(TaylorOrder, ThirdOrderAlongProbeDirections) {
    const std::vector<double> radii{2e-1, 1e-1, 5e-2, 2.5e-2};
    EXPECT_NEAR(taylor_order_check(exp_sum(2), 3, radii).slope, 4.0, 0.3);
}

TEST(TaylorOrder, BadArgumentsThrow) {
    EXPECT_THROW(taylor_order_check(exp_sum(2), 0, kRadii), DomainError);
    const std::vector<double> one{0.1};
    EXPECT_THROW(taylor_order_check(exp_sum(2), 1, one), DomainError);
}
