#include <gtest/gtest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "graphpf/netgraph.hpp"
#include "graphpf/oracle.hpp"
#include "graphpf/worker_pool.hpp"
#include "test_oracles.hpp"

using namespace graphpf;
using testoracle::cd;

namespace {

RawCase single_line(double b_charge) {
    // y_series = 1 - j10  <=>  z = (1 + j10) / 101
    RawCase c = testoracle::two_bus_case(0.0, 10.0 / 101.0);
    c.branches[0].r = 1.0 / 101.0;
    c.branches[0].b = b_charge;
    return c;
}

double max_abs_diff(const std::vector<Complex>& flat, const Eigen::MatrixXcd& ref) {
    const auto n = static_cast<std::size_t>(ref.rows());
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            m = std::max(m, std::abs(flat[i * n + j] - ref(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))));
        }
    }
    return m;
}

}  // namespace

TEST(NetGraph, TwoBusZeroLoad) {
    const NetworkGraph g = make_network(testoracle::two_bus_case(0.0));
    EXPECT_EQ(g.num_vertices(), 2u);
    EXPECT_EQ(g.num_edges(), 1u);
    EXPECT_EQ(g.vertices[1].p_sched, 0.0);
    EXPECT_EQ(g.vertices[1].q_sched, 0.0);
}

TEST(NetGraph, PerUnitLoad) {
    const NetworkGraph g = build_graph(testoracle::two_bus_case(100.0));
    EXPECT_DOUBLE_EQ(g.vertices[1].p_sched, -1.0);
    EXPECT_DOUBLE_EQ(g.vertices[1].p_load, 1.0);
}

TEST(NetGraph, Ieee14Injections) {
    const RawCase c = load_matpower(testoracle::data_path("case14.m"));
    const NetworkGraph g = build_graph(c);
    ASSERT_EQ(g.num_vertices(), 14u);
    ASSERT_EQ(g.num_edges(), 20u);
    // Bus 2: Pg 40, Pd 21.7, Qd 12.7; the generator's Qg 42.4 lands in q_sched.
    const auto& b2 = g.vertices[g.vertex_of(2)];
    EXPECT_NEAR(b2.p_sched, (40.0 - 21.7) / 100.0, 1e-15);
    EXPECT_NEAR(b2.q_sched, (42.4 - 12.7) / 100.0, 1e-15);
    EXPECT_EQ(b2.v_set, 1.045);
    // Bus 9 carries a 19 MVAr shunt capacitor.
    EXPECT_EQ(g.vertices[g.vertex_of(9)].y_shunt, Complex(0.0, 0.19));
    const auto dense = testoracle::dense_problem(c);
    for (std::size_t i = 0; i < 14; ++i) {
        EXPECT_NEAR(g.vertices[i].p_sched, dense.p[i], 1e-15);
        if (g.vertices[i].kind == BusType::PQ) EXPECT_NEAR(g.vertices[i].q_sched, dense.q[i], 1e-15);
    }
}

TEST(NetGraph, NeighbourListsAreSymmetric) {
    for (const char* f : {"case14.m", "case118.m"}) {
        const NetworkGraph g = make_network(load_matpower(testoracle::data_path(f)));
        for (VertexId i = 0; i < g.num_vertices(); ++i) {
            for (const auto& inc : g.incident(i)) {
                const auto back = g.incident(inc.other);
                EXPECT_TRUE(std::any_of(back.begin(), back.end(),
                                        [&](const Incidence& b) { return b.other == i && b.edge == inc.edge; }));
            }
        }
    }
}

TEST(NetGraph, SingleLineAdmittance) {
    const NetworkGraph g = make_network(single_line(0.0));
    const auto y = assemble_dense(g);
    EXPECT_NEAR(std::abs(y[0] - cd(1, -10)), 0.0, 1e-12);
    EXPECT_NEAR(std::abs(y[1] - cd(-1, 10)), 0.0, 1e-12);
    EXPECT_NEAR(std::abs(y[2] - cd(-1, 10)), 0.0, 1e-12);
    EXPECT_NEAR(std::abs(y[3] - cd(1, -10)), 0.0, 1e-12);
    for (const auto& r : row_sum_residual(g)) EXPECT_EQ(r, Complex(0.0, 0.0));
}

TEST(NetGraph, LineChargingShowsInRowSum) {
    const NetworkGraph g = make_network(single_line(0.2));
    for (const auto& v : g.vertices) EXPECT_NEAR(std::abs(v.y_self - cd(1, -10 + 0.1)), 0.0, 1e-12);
    for (const auto& r : row_sum_residual(g)) EXPECT_NEAR(std::abs(r - cd(0, 0.1)), 0.0, 1e-15);
}

TEST(NetGraph, ShuntShowsInRowSum) {
    RawCase c = testoracle::synthetic_case(12, 6, 5);
    c.buses[4].bs = 5.0;
    const auto r = row_sum_residual(make_network(c));
    for (std::size_t i = 0; i < r.size(); ++i) {
        EXPECT_NEAR(std::abs(r[i] - (i == 4 ? cd(0, 0.05) : cd(0))), 0.0, 1e-14);
    }
}

TEST(NetGraph, Ieee118RowSumsMatchDenseRowSums) {
    const RawCase c = load_matpower(testoracle::data_path("case118.m"));
    const auto r = row_sum_residual(make_network(c));
    const auto y = oracle::dense_admittance(c);
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
        EXPECT_NEAR(std::abs(r[static_cast<std::size_t>(i)] - y.row(i).sum()), 0.0, 1e-10) << "row " << i;
    }
}

TEST(NetGraph, ZeroImpedanceNamesBranch) {
    RawCase c = load_matpower(testoracle::data_path("case14.m"));
    c.branches[7].r = 0.0;
    c.branches[7].x = 0.0;
    try {
        make_network(c);
        FAIL();
    } catch (const SingularBranchError& e) {
        EXPECT_EQ(e.branch_index(), 7u);
        EXPECT_NE(std::string(e.what()).find("#7"), std::string::npos);
    }
}

TEST(NetGraph, OutOfServiceBranchesAreSkipped) {
    RawCase c = load_matpower(testoracle::data_path("case14.m"));
    c.branches[3].in_service = false;
    const NetworkGraph g = make_network(c);
    EXPECT_EQ(g.num_edges(), 19u);
    EXPECT_LT(max_abs_diff(assemble_dense(g), oracle::dense_admittance(c)), 1e-12);
}

TEST(NetGraph, ComputeAdmittanceIsIdempotent) {
    NetworkGraph g = make_network(load_matpower(testoracle::data_path("case118.m")));
    const auto first = assemble_dense(g);
    compute_admittance(g);
    EXPECT_EQ(assemble_dense(g), first);
}

TEST(NetGraph, ParallelAdmittanceIsBitIdentical) {
    const RawCase c = load_matpower(testoracle::data_path("case118.m"));
    const auto serial = assemble_dense(make_network(c));
    for (unsigned w : {2u, 4u, 8u}) {
        WorkerPool pool(w);
        EXPECT_EQ(assemble_dense(make_network(c, &pool)), serial);
    }
}

TEST(NetGraph, MatchesDenseOracleOnFixtures) {
    for (const char* f : {"case5.m", "case14.m", "case30.m", "case118.m"}) {
        const RawCase c = load_matpower(testoracle::data_path(f));
        EXPECT_LT(max_abs_diff(assemble_dense(make_network(c)), oracle::dense_admittance(c)), 1e-12) << f;
    }
}

TEST(NetGraph, MatchesNaivePiModel) {
    const RawCase c = load_matpower(testoracle::data_path("case118.m"));
    const auto y = assemble_dense(make_network(c));
    const auto ref = testoracle::naive_ybus(c);
    for (std::size_t i = 0; i < ref.size(); ++i) {
        for (std::size_t j = 0; j < ref.size(); ++j) EXPECT_NEAR(std::abs(y[i * ref.size() + j] - ref[i][j]), 0.0, 1e-12);
    }
}

TEST(NetGraph, MutationBreaksCrossCheck) {
    // Perturbing any single formula result must be visible to the dense comparison.
    const RawCase c = load_matpower(testoracle::data_path("case14.m"));
    const auto ref = oracle::dense_admittance(c);
    NetworkGraph g = make_network(c);
    ASSERT_LT(max_abs_diff(assemble_dense(g), ref), 1e-12);

    auto mutate = [&](auto&& edit) {
        NetworkGraph m = g;
        edit(m);
        return max_abs_diff(assemble_dense(m), ref);
    };
    // First transformer with its tap dropped from y_ft.
    EXPECT_GT(mutate([](NetworkGraph& m) {
                  for (auto& e : m.edges) {
                      if (e.tap != Complex(1.0, 0.0)) {
                          e.y_ft = -e.y_series;
                          break;
                      }
                  }
              }),
              1e-6);
    EXPECT_GT(mutate([](NetworkGraph& m) { m.edges[0].y_tf = std::conj(m.edges[0].y_tf); }), 1e-6);
    EXPECT_GT(mutate([](NetworkGraph& m) { m.vertices[8].y_self -= m.vertices[8].y_shunt; }), 1e-6);
    EXPECT_GT(mutate([](NetworkGraph& m) { m.vertices[3].y_self *= 1.0 + 1e-9; }), 1e-12);
}

TEST(NetGraph, AdmittanceCsvSchemas) {
    const NetworkGraph g = make_network(testoracle::two_bus_case(0.0));
    std::ostringstream v, e;
    write_vertex_admittance_csv(v, g);
    write_edge_admittance_csv(e, g);
    const std::string vs = v.str(), es = e.str();
    EXPECT_EQ(vs.substr(0, vs.find('\n')), "vertex_id,external_id,y_self_re,y_self_im");
    EXPECT_EQ(es.substr(0, es.find('\n')),
              "edge,from,to,y_ft_re,y_ft_im,y_tf_re,y_tf_im,y_ff_re,y_ff_im,y_tt_re,y_tt_im");
    EXPECT_EQ(std::count(vs.begin(), vs.end(), '\n'), 3);
}

TEST(NetGraph, BuildErrors) {
    RawCase c = testoracle::two_bus_case(10.0);
    c.base_mva = 0.0;
    EXPECT_THROW(build_graph(c), BuildError);
    c = testoracle::two_bus_case(10.0);
    c.branches[0].to_bus = 7;
    EXPECT_THROW(build_graph(c), BuildError);
    c = testoracle::two_bus_case(10.0);
    c.gens[0].bus_id = 7;
    EXPECT_THROW(build_graph(c), BuildError);
}
