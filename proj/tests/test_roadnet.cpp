#include "vrpsa/roadnet.hpp"

#include "helpers.hpp"

#include <doctest.h>

#include <algorithm>
#include <map>
#include <random>
#include <set>

using namespace vrpsa;
using namespace vrpsa::testing;

namespace {

// Every simple path src->dst by depth-first enumeration.
void enumerate_paths(const RoadNetwork& net, NodeId at, NodeId dst, std::vector<bool>& seen,
                     double cost, const WeightMode& mode, double& best) {
    if (at == dst) {
        best = std::min(best, cost);
        return;
    }
    for (int e : net.out_edges(at)) {
        NodeId v = net.edge(e).head;
        if (seen[static_cast<size_t>(v)]) continue;
        seen[static_cast<size_t>(v)] = true;
        enumerate_paths(net, v, dst, seen, cost + mode.weigh(net.edge(e)).first, mode, best);
        seen[static_cast<size_t>(v)] = false;
    }
}

double brute_shortest(const RoadNetwork& net, NodeId src, NodeId dst, const WeightMode& mode) {
    std::vector<bool> seen(static_cast<size_t>(net.node_count()), false);
    seen[static_cast<size_t>(src)] = true;
    double best = std::numeric_limits<double>::infinity();
    enumerate_paths(net, src, dst, seen, 0.0, mode, best);
    return best;
}

} // namespace

TEST_CASE("shortest path degenerate and small cases") {
    auto net = make_net(2, {{0, 1}}, true);
    auto self = shortest_path(net, 1, 1, WeightMode::hdv());
    REQUIRE(self.has_value());
    CHECK(self->nodes == std::vector<NodeId>{1});
    CHECK(self->cost == 0.0);

    // 2x2 grid with unit costs: opposite corners are two hops apart and the
    // lexicographically smaller of the two optimal paths wins.
    std::vector<EdgeSpec> grid = {{0, 1}, {0, 2}, {1, 3}, {2, 3}};
    auto g = make_net(4, grid, true);
    auto p = shortest_path(g, 0, 3, WeightMode::hdv());
    REQUIRE(p.has_value());
    CHECK(p->cost == doctest::Approx(2.0));
    CHECK(p->nodes == std::vector<NodeId>{0, 1, 3});
}

TEST_CASE("shortest path equals exhaustive enumeration on random graphs") {
    for (unsigned seed = 0; seed < 20; ++seed) {
        auto net = random_net(6, seed);
        auto mode = WeightMode::hdv();
        for (NodeId s = 0; s < 6; ++s)
            for (NodeId t = 0; t < 6; ++t) {
                auto got = shortest_path(net, s, t, mode);
                double want = s == t ? 0.0 : brute_shortest(net, s, t, mode);
                REQUIRE(got.has_value());
                CHECK(got->cost == doctest::Approx(want).epsilon(1e-9));
            }
    }
}

TEST_CASE("AV cost with unit factors matches HDV cost") {
    for (unsigned seed = 100; seed < 110; ++seed) {
        auto net = random_net(7, seed, 0.4);
        for (NodeId s = 0; s < 7; ++s)
            for (NodeId t = 0; t < 7; ++t) {
                auto a = shortest_path(net, s, t, WeightMode::av(1.0, 1.0));
                auto h = shortest_path(net, s, t, WeightMode::hdv());
                REQUIRE(a.has_value());
                REQUIRE(h.has_value());
                CHECK(a->cost == doctest::Approx(h->cost).epsilon(1e-12));
            }
    }
}

TEST_CASE("remote duration prefers controller-free detours and breaks ties by AV cost") {
    // 0 -> 3 either directly over an ordinary segment or around AV-enabled
    // ones; the detour costs more but needs no controller time.
    std::vector<EdgeSpec> specs = {
        {0, 3, RoadType::Ordinary, 2.0, 2.0},
        {0, 1, RoadType::AvEnabled, 2.0, 2.0},
        {1, 3, RoadType::AvEnabled, 2.0, 2.0},
        {0, 2, RoadType::AvEnabled, 1.0, 1.0},
        {2, 3, RoadType::AvEnabled, 1.0, 1.0},
    };
    auto net = make_net(4, specs);
    auto p = shortest_path(net, 0, 3, WeightMode::remote_duration(0.5, 1.2));
    REQUIRE(p.has_value());
    CHECK(p->cost == doctest::Approx(0.0)); // no ordinary time at all
    CHECK(p->nodes == std::vector<NodeId>{0, 2, 3}); // cheaper of the two detours
}

TEST_CASE("unreachable pair reports no path") {
    auto net = make_net(3, {{0, 1}}); // directed, node 2 isolated
    CHECK(!shortest_path(net, 0, 2, WeightMode::hdv()).has_value());
    CHECK(!shortest_path(net, 1, 0, WeightMode::hdv()).has_value());
}

TEST_CASE("compute_k prefix rule") {
    CHECK(compute_k({1, 1, 1}, 2.0) == 2);
    CHECK(compute_k({5}, 4.0) == 0);
    CHECK(compute_k({}, 10.0) == 0);

    std::mt19937 rng(7);
    std::uniform_real_distribution<double> d(1.0, 10.0);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> demands;
        for (int i = 0; i < 10; ++i) demands.push_back(d(rng));
        double cap = 25.0;
        int got = compute_k(demands, cap);
        // Oracle: sort ascending, count the longest feasible prefix.
        auto sorted = demands;
        std::sort(sorted.begin(), sorted.end());
        int want = 0;
        double acc = 0.0;
        for (double x : sorted) {
            acc += x;
            if (acc <= cap)
                ++want;
            else
                break;
        }
        CHECK(got == want);
    }
}

namespace {

// Reachability-matrix SCC oracle.
std::vector<std::vector<NodeId>> scc_oracle(const RoadNetwork& net) {
    int n = net.node_count();
    std::vector<std::vector<bool>> reach(static_cast<size_t>(n),
                                         std::vector<bool>(static_cast<size_t>(n), false));
    for (int i = 0; i < n; ++i) reach[static_cast<size_t>(i)][static_cast<size_t>(i)] = true;
    for (const auto& e : net.edges())
        if (e.type == RoadType::AvEnabled)
            reach[static_cast<size_t>(e.tail)][static_cast<size_t>(e.head)] = true;
    for (int k = 0; k < n; ++k)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                if (reach[static_cast<size_t>(i)][static_cast<size_t>(k)] &&
                    reach[static_cast<size_t>(k)][static_cast<size_t>(j)])
                    reach[static_cast<size_t>(i)][static_cast<size_t>(j)] = true;
    std::vector<std::vector<NodeId>> comps;
    std::vector<bool> done(static_cast<size_t>(n), false);
    for (int i = 0; i < n; ++i) {
        if (done[static_cast<size_t>(i)]) continue;
        std::vector<NodeId> comp;
        for (int j = 0; j < n; ++j)
            if (reach[static_cast<size_t>(i)][static_cast<size_t>(j)] &&
                reach[static_cast<size_t>(j)][static_cast<size_t>(i)]) {
                comp.push_back(j);
                done[static_cast<size_t>(j)] = true;
            }
        comps.push_back(comp);
    }
    std::sort(comps.begin(), comps.end());
    return comps;
}

} // namespace

TEST_CASE("AV components") {
    // All ordinary: everyone alone.
    auto net = make_net(4, {{0, 1, RoadType::Ordinary}, {1, 2, RoadType::Ordinary}}, true);
    CHECK(av_sccs(net).size() == 4);

    // Bidirected AV triangle plus a stray node.
    auto tri = make_net(4, {{0, 1}, {1, 2}, {2, 0}}, true);
    auto comps = av_sccs(tri);
    REQUIRE(comps.size() == 2);
    CHECK(comps[0] == std::vector<NodeId>{0, 1, 2});

    for (unsigned seed = 0; seed < 10; ++seed) {
        auto rnd = random_net(8, seed, 0.5);
        auto got = av_sccs(rnd);
        std::sort(got.begin(), got.end());
        CHECK(got == scc_oracle(rnd));
    }
}

TEST_CASE("AV components partition the node set") {
    for (unsigned seed = 50; seed < 60; ++seed) {
        auto net = random_net(9, seed, 0.6);
        auto comps = av_sccs(net);
        std::set<NodeId> all;
        size_t total = 0;
        for (const auto& c : comps) {
            total += c.size();
            all.insert(c.begin(), c.end());
        }
        CHECK(total == all.size());
        CHECK(static_cast<int>(all.size()) == net.node_count());
    }
}

TEST_CASE("closed-walk search on the star network visits the hub once per leaf") {
    auto net = star_network();
    auto res = brute_force_stsp(net, {1, 2, 3, 4, 5}, 0, WeightMode::hdv());
    CHECK(res.cost == doctest::Approx(10.0));
    int hub_visits = static_cast<int>(std::count(res.tour.begin(), res.tour.end(), 0));
    CHECK(hub_visits == 6);
    CHECK(res.tour ==
          std::vector<NodeId>{0, 1, 0, 2, 0, 3, 0, 4, 0, 5, 0});
}

TEST_CASE("closed-walk search reuses the forced corridor of the one-way network") {
    auto net = one_way_network();
    auto res = brute_force_stsp(net, {6, 8, 10}, 0, WeightMode::hdv());
    std::vector<NodeId> want{0, 1, 2, 6, 5, 1, 2, 3, 8, 7, 5, 1, 2, 3, 4, 10, 9, 7, 5, 1, 0};
    CHECK(res.cost == doctest::Approx(20.0));
    CHECK(res.tour == want);
    CHECK(std::count(res.tour.begin(), res.tour.end(), 1) == 4);
    int uses_12 = 0;
    for (size_t i = 0; i + 1 < res.tour.size(); ++i)
        if (res.tour[i] == 1 && res.tour[i + 1] == 2) ++uses_12;
    CHECK(uses_12 == 3);
}

TEST_CASE("closed-walk search corner cases") {
    auto net = star_network();
    auto res = brute_force_stsp(net, {0}, 0, WeightMode::hdv());
    CHECK(res.tour == std::vector<NodeId>{0});
    CHECK(res.cost == 0.0);

    auto directed = make_net(3, {{0, 1}}); // node 2 unreachable
    CHECK_THROWS_AS(brute_force_stsp(directed, {2}, 0, WeightMode::hdv()), InfeasibleStsp);
}

TEST_CASE("closed-walk cost stays within twice the farthest required node") {
    // Required nodes on one line: walking out and back bounds the tour.
    for (unsigned seed = 0; seed < 5; ++seed) {
        std::mt19937 rng(seed);
        std::uniform_real_distribution<double> c(1.0, 5.0);
        std::vector<EdgeSpec> specs;
        for (NodeId i = 0; i < 5; ++i) {
            double w = c(rng);
            specs.push_back({i, i + 1, RoadType::AvEnabled, w, w});
        }
        auto net = make_net(6, specs, true);
        auto mode = WeightMode::hdv();
        auto res = brute_force_stsp(net, {2, 4, 5}, 0, mode);
        double far = shortest_path(net, 0, 5, mode)->cost;
        CHECK(res.cost <= 2.0 * far + 1e-9);
    }
}
