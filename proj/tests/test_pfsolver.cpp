#include <gtest/gtest.h>

#include <map>
#include <numbers>
#include <sstream>

#include "graphpf/netgraph.hpp"
#include "graphpf/oracle.hpp"
#include "graphpf/pfsolver.hpp"
#include "graphpf/worker_pool.hpp"
#include "test_oracles.hpp"

using namespace graphpf;
using testoracle::cd;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

NetworkGraph fixture(const char* file) {
    return make_network(load_matpower(testoracle::data_path(file)));
}

double max_diff(const std::vector<Complex>& a, const std::vector<cd>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

/// Slack 1 - 2 - 3 - 4 path with loads on the far buses.
RawCase four_bus_path() {
    RawCase c = testoracle::two_bus_case(30.0, 0.1, 10.0);
    for (int id : {3, 4}) {
        BusRecord b = c.buses[1];
        b.id = id;
        b.pd = 10.0 * id;
        b.qd = 2.0 * id;
        c.buses.push_back(b);
        BranchRecord br = c.branches[0];
        br.from_bus = id - 1;
        br.to_bus = id;
        br.r = 0.01 * id;
        br.x = 0.05 * id;
        c.branches.push_back(br);
    }
    return c;
}

}  // namespace

TEST(SolverConfig, RejectsBadFields) {
    SolverConfig c;
    EXPECT_NO_THROW(c.validate());
    for (double a : {0.0, -0.5, 1.5}) {
        SolverConfig bad;
        bad.damping = a;
        EXPECT_THROW(bad.validate(), std::invalid_argument) << a;
    }
    SolverConfig bad;
    bad.block_size = 0;
    EXPECT_THROW(bad.validate(), std::invalid_argument);
    bad = SolverConfig{};
    bad.tol_v = 0.0;
    EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(InitState, FlatStartTwoBus) {
    const NetworkGraph g = make_network(testoracle::two_bus_case(50.0));
    const auto s = init_state(g, SolverConfig{});
    EXPECT_EQ(s.v[0], Complex(1.0, 0.0));
    EXPECT_EQ(s.v[1], Complex(1.0, 0.0));
}

TEST(InitState, CaseStartIeee118) {
    const RawCase c = load_matpower(testoracle::data_path("case118.m"));
    const NetworkGraph g = make_network(c);
    SolverConfig cfg;
    cfg.flat_start = false;
    const auto s = init_state(g, cfg);
    std::map<int, double> vg;
    for (const auto& gen : c.gens) vg[gen.bus_id] = gen.vg;
    for (std::size_t i = 0; i < c.buses.size(); ++i) {
        const auto& b = c.buses[i];
        const double mag = b.bus_type == BusType::PQ ? b.vm : vg.at(b.id);
        EXPECT_NEAR(std::abs(s.v[i] - std::polar(mag, b.va * kDeg)), 0.0, 1e-15) << b.id;
    }
}

TEST(InitState, FlatStartFollowsIslandSlackAngle) {
    const NetworkGraph g = fixture("case118.m");
    const auto s = init_state(g, SolverConfig{});
    for (const auto& bus : g.vertices) {
        EXPECT_NEAR(std::arg(s.v[bus.id]), 30.0 * kDeg, 1e-15);
        if (bus.kind == BusType::PQ) EXPECT_NEAR(std::abs(s.v[bus.id]), 1.0, 1e-15);
    }
}

TEST(InitState, ZeroLoadIsAlreadySolved) {
    const NetworkGraph g = make_network(testoracle::two_bus_case(0.0));
    const auto s = init_state(g, SolverConfig{});
    const auto mm = evaluate_mismatch(g, s.v);
    EXPECT_EQ(mm.max(), 0.0);
    for (auto crit : {StopCriterion::VoltageDelta, StopCriterion::PowerMismatch}) {
        SolverConfig cfg;
        cfg.criterion = crit;
        const auto r = solve(g, cfg);
        EXPECT_TRUE(r.converged);
        EXPECT_LE(r.iterations, 1u);
    }
}

TEST(Partition, Ieee118SingleBlock) {
    const auto p = partition_levels(fixture("case118.m"), 128);
    ASSERT_EQ(p.blocks.size(), 1u);
    EXPECT_EQ(p.blocks[0].size(), 117u);
    EXPECT_TRUE(std::is_sorted(p.blocks[0].begin(), p.blocks[0].end()));
}

TEST(Partition, SingletonBlocks) {
    const NetworkGraph g = fixture("case14.m");
    const auto p = partition_levels(g, 1);
    EXPECT_EQ(p.blocks.size(), 13u);
    for (const auto& b : p.blocks) EXPECT_EQ(b.size(), 1u);
    EXPECT_EQ(p.block_of[0], LevelPartition::kNoBlock);
}

TEST(Partition, TenVerticesInBlocksOfFour) {
    const auto p = partition_levels(make_network(testoracle::synthetic_case(11, 3, 1)), 4);
    ASSERT_EQ(p.blocks.size(), 3u);
    EXPECT_EQ(p.blocks[0].size(), 4u);
    EXPECT_EQ(p.blocks[1].size(), 4u);
    EXPECT_EQ(p.blocks[2].size(), 2u);
}

TEST(BusUpdate, ZeroResidualFixedPoint) {
    BusVertex bus;
    bus.y_self = Complex(2.0, -20.0);
    const Complex mutual = -bus.y_self * Complex(1.0, 0.0);
    EXPECT_EQ(gs_update_bus(bus, Complex(1.0, 0.0), 0.0, mutual), Complex(1.0, 0.0));
}

TEST(BusUpdate, TwoBusFirstCandidate) {
    const NetworkGraph g = make_network(testoracle::two_bus_case(50.0));
    const auto s = init_state(g, SolverConfig{});
    const Complex sum = mutual_sum(g, 1, [&](VertexId j) { return s.v[j]; });
    const Complex cand = gs_update_bus(g.vertices[1], s.v[1], g.vertices[1].q_sched, sum);
    EXPECT_NEAR(std::abs(cand - Complex(1.0, -0.05)), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(apply_damping(s.v[1], cand, 0.85) - Complex(1.0, -0.0425)), 0.0, 1e-15);
}

TEST(BusUpdate, CollapseAtZeroVoltage) {
    BusVertex bus;
    bus.id = 3;
    bus.external_id = 42;
    bus.y_self = Complex(1.0, -10.0);
    try {
        gs_update_bus(bus, Complex(0.0, 0.0), 0.0, Complex(0.0, 0.0));
        FAIL();
    } catch (const NumericCollapse& e) {
        EXPECT_EQ(e.vertex(), 3u);
        EXPECT_EQ(e.external_id(), 42);
    }
}

TEST(Damping, Identities) {
    const Complex a(1.0, 0.0), b(0.97, -0.05);
    EXPECT_EQ(apply_damping(a, b, 1.0), b);
    for (double alpha : {0.1, 0.5, 0.85, 1.0}) EXPECT_EQ(apply_damping(b, b, alpha), b);
}

TEST(PvBus, RescaleIsIdentityAtSetpoint) {
    const Complex v = std::polar(1.045, -0.1);
    EXPECT_NEAR(std::abs(rescale_to_setpoint(v, 1.045) - v), 0.0, 1e-15);
}

TEST(PvBus, IsolatedReactiveInjection) {
    BusVertex bus;
    bus.kind = BusType::PV;
    bus.y_self = Complex(0.0, 0.3);
    const Complex v = std::polar(1.02, 0.2);
    EXPECT_DOUBLE_EQ(pv_reactive_injection(bus, v, Complex(0.0, 0.0)), -std::imag(std::conj(v) * bus.y_self * v));
}

TEST(PvBus, Ieee14ReactiveMatchesNewton) {
    const RawCase c = load_matpower(testoracle::data_path("case14.m"));
    const NetworkGraph g = make_network(c);
    const auto nr = oracle::newton_solve(c, 1e-12);
    ASSERT_TRUE(nr.converged);
    for (const auto& bus : g.vertices) {
        if (bus.kind != BusType::PV) continue;
        const Complex sum = mutual_sum(g, bus.id, [&](VertexId j) { return nr.v[j]; });
        const double q = pv_reactive_injection(bus, nr.v[bus.id], sum);
        EXPECT_NEAR(q, nr.q_gen[bus.id] - bus.q_load, 1e-8) << bus.external_id;
    }
}

TEST(Mismatch, FlatExamples) {
    const NetworkGraph zero = make_network(testoracle::two_bus_case(0.0));
    EXPECT_EQ(evaluate_mismatch(zero, init_state(zero, SolverConfig{}).v).max(), 0.0);

    const NetworkGraph g = make_network(testoracle::two_bus_case(50.0));
    const auto s = init_state(g, SolverConfig{});
    const auto m = compute_mismatch(g.vertices[1], s.v[1], mutual_sum(g, 1, [&](VertexId j) { return s.v[j]; }));
    EXPECT_DOUBLE_EQ(m.dp, -0.5);
    EXPECT_DOUBLE_EQ(m.dq, 0.0);
}

TEST(Mismatch, Ieee118AtNewtonSolution) {
    const RawCase c = load_matpower(testoracle::data_path("case118.m"));
    const auto nr = oracle::newton_solve(c, 1e-10);
    ASSERT_TRUE(nr.converged);
    EXPECT_LT(evaluate_mismatch(make_network(c), nr.v).max(), 1e-8);
}

TEST(Sweep, SingletonBlocksAreJacobi) {
    const RawCase c = load_matpower(testoracle::data_path("case14.m"));
    const NetworkGraph g = make_network(c);
    const auto dense = testoracle::dense_problem(c);
    SolverConfig cfg;
    cfg.block_size = 1;
    auto state = init_state(g, cfg);
    const auto part = partition_levels(g, 1);
    WorkerPool pool(1);
    std::vector<cd> ref = dense.v0;
    ASSERT_LT(max_diff(state.v, ref), 1e-15);
    for (int it = 0; it < 10; ++it) {
        bilevel_sweep(g, part, state, cfg, pool);
        ref = testoracle::dense_jacobi_step(dense, ref, 1.0);
        EXPECT_LT(max_diff(state.v, ref), 1e-12) << "iteration " << it + 1;
    }
}

TEST(Sweep, WholeBlockIsGaussSeidel) {
    const RawCase c = load_matpower(testoracle::data_path("case14.m"));
    const NetworkGraph g = make_network(c);
    const auto dense = testoracle::dense_problem(c);
    for (double alpha : {1.0, 0.85}) {
        SolverConfig cfg;
        cfg.damping = alpha;
        cfg.block_size = 14;
        auto state = init_state(g, cfg);
        const auto part = partition_levels(g, cfg.block_size);
        WorkerPool pool(1);
        std::vector<cd> ref = dense.v0;
        for (int it = 0; it < 10; ++it) {
            bilevel_sweep(g, part, state, cfg, pool);
            ref = testoracle::dense_gauss_seidel_step(dense, ref, alpha);
            EXPECT_LT(max_diff(state.v, ref), 1e-12) << "alpha " << alpha << " iteration " << it + 1;
        }
    }
}

TEST(Sweep, FourBusPathTwoBlocks) {
    const RawCase c = four_bus_path();
    const NetworkGraph g = make_network(c);
    const auto dense = testoracle::dense_problem(c);
    SolverConfig cfg;
    cfg.block_size = 2;
    cfg.damping = 0.9;
    auto state = init_state(g, cfg);
    const auto part = partition_levels(g, 2);
    ASSERT_EQ(part.blocks, (std::vector<std::vector<VertexId>>{{1, 2}, {3}}));
    WorkerPool pool(2);

    // Block {2,3}: bus 2 sees only the snapshot; bus 3 sees fresh bus 2 and snapshot bus 4.
    // Block {4}: bus 4 sees snapshot bus 3.
    const std::vector<cd> v0 = dense.v0;
    std::vector<cd> expect = v0;
    expect[1] = testoracle::dense_bus_update(dense, 1, v0, v0[1], 0.9);
    std::vector<cd> read3 = v0;
    read3[1] = expect[1];
    expect[2] = testoracle::dense_bus_update(dense, 2, read3, v0[2], 0.9);
    expect[3] = testoracle::dense_bus_update(dense, 3, v0, v0[3], 0.9);

    bilevel_sweep(g, part, state, cfg, pool);
    EXPECT_LT(max_diff(state.v, expect), 1e-15);
}

TEST(Sweep, PvMagnitudePinnedEveryIteration) {
    const NetworkGraph g = fixture("case118.m");
    for (std::size_t bs : {1u, 16u, 128u}) {
        SolverConfig cfg;
        cfg.block_size = bs;
        auto state = init_state(g, cfg);
        const auto part = partition_levels(g, bs);
        WorkerPool pool(1);
        for (int it = 0; it < 25; ++it) {
            bilevel_sweep(g, part, state, cfg, pool);
            for (const auto& bus : g.vertices) {
                if (bus.kind == BusType::PV) ASSERT_NEAR(std::abs(state.v[bus.id]), bus.v_set, 4.5e-16 * bus.v_set);
            }
        }
    }
}

TEST(Solve, Ieee118AgreesWithNewton) {
    const RawCase c = load_matpower(testoracle::data_path("case118.m"));
    const NetworkGraph g = make_network(c);
    const auto r = solve(g, SolverConfig{});
    ASSERT_TRUE(r.converged);
    EXPECT_EQ(r.iterations, 668u);
    EXPECT_EQ(r.trace.size(), r.iterations);
    EXPECT_LT(r.trace.back().max_dv, 3e-5);
    const auto nr = oracle::newton_solve(c);
    std::vector<int> ids;
    for (const auto& b : g.vertices) ids.push_back(b.external_id);
    const auto d = oracle::diff_solutions({ids, r.final_v}, {nr.bus_ids, nr.v});
    EXPECT_LE(d.max_angle_diff, 0.03);
    EXPECT_LE(d.max_mag_diff, 1e-3);
}

TEST(Solve, BlocksBeatJacobiOnIeee118) {
    const NetworkGraph g = fixture("case118.m");
    SolverConfig one, all;
    one.block_size = 1;
    all.block_size = 128;
    const auto r1 = solve(g, one), r128 = solve(g, all);
    ASSERT_TRUE(r1.converged && r128.converged);
    EXPECT_LT(r128.iterations, r1.iterations);
}

TEST(Solve, PowerMismatchStopIsSelfConsistent) {
    for (const char* f : {"case5.m", "case14.m", "case30.m", "case118.m"}) {
        const NetworkGraph g = fixture(f);
        SolverConfig cfg;
        cfg.criterion = StopCriterion::PowerMismatch;
        cfg.tol_s = 1e-6;
        const auto r = solve(g, cfg);
        ASSERT_TRUE(r.converged) << f;
        EXPECT_LT(evaluate_mismatch(g, r.final_v).max(), 1e-6) << f;
        EXPECT_LT(r.mismatch_final, 1e-6) << f;
    }
}

TEST(Solve, ThreadCountInvariance) {
    const RawCase base = load_matpower(testoracle::data_path("case118.m"));
    for (const RawCase& c : {base, replicate_case(base, 10)}) {
        const NetworkGraph g = make_network(c);
        for (std::size_t bs : {1u, 128u}) {
            SolverConfig cfg;
            cfg.block_size = bs;
            const auto ref = solve(g, cfg, EngineConfig{1});
            for (unsigned w : {2u, 4u, 8u}) {
                const auto r = solve(g, cfg, EngineConfig{w});
                EXPECT_EQ(r.iterations, ref.iterations);
                EXPECT_EQ(r.final_v, ref.final_v) << c.name << " bs " << bs << " threads " << w;
            }
        }
    }
}

TEST(Solve, IterationCapIsReportedNotThrown) {
    SolverConfig cfg;
    cfg.max_iter = 5;
    const auto r = solve(fixture("case118.m"), cfg);
    EXPECT_FALSE(r.converged);
    EXPECT_EQ(r.status, SolveStatus::MaxIterations);
    EXPECT_EQ(r.iterations, 5u);
    EXPECT_FALSE(r.message.empty());
}

TEST(Solve, CollapseIsReportedAsDiverged) {
    // Non-positive case magnitudes are replaced at build time, so zero the start directly.
    NetworkGraph g = fixture("case14.m");
    g.vertices[9].v_start = Complex(0.0, 0.0);
    SolverConfig cfg;
    cfg.flat_start = false;
    const auto r = solve(g, cfg);
    EXPECT_EQ(r.status, SolveStatus::Diverged);
    ASSERT_TRUE(r.collapsed_bus.has_value());
    EXPECT_EQ(*r.collapsed_bus, 10);
    EXPECT_TRUE(r.branch_flows.empty());
}

TEST(Flows, OpenNetworkCarriesNothing) {
    const NetworkGraph g = make_network(testoracle::synthetic_case(20, 5, 9));
    const std::vector<Complex> flat(g.num_vertices(), Complex(1.0, 0.0));
    for (const auto& f : branch_flows(g, flat)) {
        EXPECT_EQ(f.p_from, 0.0);
        EXPECT_EQ(f.q_from, 0.0);
        EXPECT_EQ(f.p_to, 0.0);
        EXPECT_EQ(f.q_to, 0.0);
    }
}

TEST(Flows, TwoBusCarriesTheLoad) {
    const RawCase c = testoracle::two_bus_case(50.0);
    const NetworkGraph g = make_network(c);
    SolverConfig cfg;
    cfg.tol_v = 1e-13;
    const auto r = solve(g, cfg);
    ASSERT_TRUE(r.converged);
    EXPECT_NEAR(std::abs(r.final_v[1] - testoracle::two_bus_closed_form(-0.5, 0.1)), 0.0, 1e-10);
    ASSERT_EQ(r.branch_flows.size(), 1u);
    const auto& f = r.branch_flows[0];
    // Lossless line: the sending end supplies exactly the 50 MW load; reactive losses are
    // x|I|^2 with |I| = |S|/|V|.
    EXPECT_NEAR(f.p_from, 50.0, 1e-7);
    EXPECT_NEAR(f.p_to, -50.0, 1e-7);
    EXPECT_NEAR(f.loss.real(), 0.0, 1e-9);
    const double i2 = 0.5 * 0.5 / std::norm(r.final_v[1]);
    EXPECT_NEAR(f.loss.imag(), 0.1 * i2 * 100.0, 1e-6);
}

TEST(Flows, PowerBalanceOnFixtures) {
    for (const char* f : {"case5.m", "case14.m", "case30.m", "case118.m"}) {
        const NetworkGraph g = fixture(f);
        const auto r = solve(g, SolverConfig{});
        ASSERT_TRUE(r.converged) << f;
        const auto pb = power_balance(g, r.final_v, r.branch_flows);
        EXPECT_LT(std::abs(pb.residual()), 1e-6) << f;
    }
}

TEST(Output, ResultsAndTraceSchemas) {
    const NetworkGraph g = make_network(testoracle::two_bus_case(50.0));
    const auto r = solve(g, SolverConfig{});
    std::ostringstream res, tr;
    write_results(res, g, r.final_v, r.branch_flows);
    write_trace_csv(tr, r.trace);
    std::istringstream lines(res.str());
    std::string line;
    std::vector<std::string> all;
    while (std::getline(lines, line)) all.push_back(line);
    ASSERT_EQ(all.size(), 5u);
    EXPECT_EQ(all[0], "# bus,external_id,vm_pu,va_deg");
    EXPECT_EQ(all[1].rfind("bus,1,", 0), 0u);
    EXPECT_EQ(all[3], "# branch,from,to,p_from_mw,q_from_mvar,p_to_mw,q_to_mvar");
    EXPECT_EQ(all[4].rfind("branch,1,2,", 0), 0u);
    EXPECT_EQ(tr.str().substr(0, tr.str().find('\n')), "iter,max_dv,max_dp,max_dq,ms");
}
