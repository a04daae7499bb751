#include "vrpsa/expand.hpp"

#include "vrpsa/instance.hpp"

#include "helpers.hpp"

#include <doctest.h>

#include <algorithm>
#include <set>

using namespace vrpsa;
using namespace vrpsa::testing;

TEST_CASE("complete AV triangle survives pruning whole") {
    auto net = make_net(3, {{0, 1}, {1, 2}, {0, 2}}, true);
    auto pn = prune_network(net, {1, 2}, 0, 0.5, 1.2);
    CHECK(pn.graph.node_count() == 3);
    CHECK(pn.graph.edge_count() == 6);
}

TEST_CASE("dead-end spur is pruned away") {
    // 0 - 1 - 2 ordinary path with a dangling 1 - 3 spur: no minimum-cost
    // path and no attached AV component ever uses the spur.
    auto net = make_net(4,
                        {{0, 1, RoadType::Ordinary},
                         {1, 2, RoadType::Ordinary},
                         {1, 3, RoadType::Ordinary}},
                        true);
    auto pn = prune_network(net, {2}, 0, 0.5, 1.2);
    CHECK(pn.graph.node_count() == 3);
    CHECK(pn.compact_of.count(3) == 0);
    CHECK(pn.graph.edge_count() == 4);
}

TEST_CASE("pruning keeps provenance sets consistent") {
    for (unsigned seed = 0; seed < 8; ++seed) {
        auto net = random_net(9, seed, 0.5, 6);
        auto pn = prune_network(net, {2, 5, 7}, 0, 0.5, 1.2);
        // Node and edge sets are exactly the set unions.
        std::set<NodeId> nodes(pn.v1.begin(), pn.v1.end());
        nodes.insert(pn.v2.begin(), pn.v2.end());
        nodes.insert(pn.v3.begin(), pn.v3.end());
        CHECK(nodes.size() == static_cast<size_t>(pn.graph.node_count()));
        std::set<std::pair<NodeId, NodeId>> edges(pn.p1.begin(), pn.p1.end());
        edges.insert(pn.p2.begin(), pn.p2.end());
        edges.insert(pn.p3.begin(), pn.p3.end());
        CHECK(edges.size() == static_cast<size_t>(pn.graph.edge_count()));
        for (NodeId r : {0, 2, 5, 7}) CHECK(pn.compact_of.count(r) == 1);
    }
}

TEST_CASE("pruning a pruned network changes nothing") {
    for (unsigned seed = 20; seed < 26; ++seed) {
        auto net = random_net(10, seed, 0.4, 8);
        std::vector<NodeId> customers{1, 4, 8};
        auto pn = prune_network(net, customers, 0, 0.5, 1.2);

        std::vector<NodeId> cust_c;
        for (NodeId c : customers) cust_c.push_back(pn.to_compact(c));
        auto again = prune_network(pn.graph, cust_c, pn.to_compact(0), 0.5, 1.2);
        CHECK(again.graph.node_count() == pn.graph.node_count());
        CHECK(again.graph.edge_count() == pn.graph.edge_count());
    }
}

TEST_CASE("pruned benchmark network is strictly smaller") {
    auto cvrp = parse_cvrp(read_file(data_path("P-n16-k8.vrp")));
    auto [net, placement] = generate_network(cvrp.coordinates, cvrp.depot, 5, 5);
    std::vector<NodeId> customers;
    for (int id : cvrp.customer_ids()) customers.push_back(placement.at(id));
    auto pn = prune_network(net, customers, placement.at(cvrp.depot), 0.5, 1.2);
    CHECK(pn.graph.edge_count() < net.edge_count());
    CHECK(pn.graph.node_count() <= net.node_count());

    // Any route cost in the pruned graph re-costs identically: attributes
    // are preserved bit-for-bit.
    for (int e = 0; e < pn.graph.edge_count(); ++e) {
        const RoadEdge& ed = pn.graph.edge(e);
        int orig = net.find_edge(pn.to_original(ed.tail), pn.to_original(ed.head));
        REQUIRE(orig >= 0);
        CHECK(net.edge(orig).cost == ed.cost);
        CHECK(net.edge(orig).travel_time == ed.travel_time);
        CHECK(net.edge(orig).type == ed.type);
    }
}

TEST_CASE("single layer keeps one sink edge and no customer dummies") {
    auto net = make_net(3, {{0, 1}, {1, 2}}, true);
    auto pn = prune_network(net, {2}, 0, 0.5, 1.2);
    auto ge = expand_graph(pn, 1, {2}, 0);
    int dummies = 0;
    for (const auto& e : ge.edges)
        if (e.kind == ExpEdgeKind::Dummy) ++dummies;
    CHECK(dummies == 1);
    CHECK(ge.node_count() == pn.graph.node_count() + 1);
}

TEST_CASE("three layers over two customers create seven dummies") {
    auto net = make_net(4, {{0, 1}, {1, 2}, {1, 3}, {2, 3}}, true);
    auto pn = prune_network(net, {2, 3}, 0, 0.5, 1.2);
    auto ge = expand_graph(pn, 3, {2, 3}, 0);
    int customer_dummies = 0, sink_dummies = 0;
    for (const auto& e : ge.edges) {
        if (e.kind != ExpEdgeKind::Dummy) continue;
        (e.dummy_customer >= 0 ? customer_dummies : sink_dummies)++;
    }
    CHECK(customer_dummies == 2 * 2);
    CHECK(sink_dummies == 3);
    CHECK(ge.node_count() == 3 * pn.graph.node_count() + 1);
}

TEST_CASE("two layers double the node count plus the sink") {
    for (unsigned seed = 0; seed < 5; ++seed) {
        auto net = random_net(7, seed);
        auto pn = prune_network(net, {2, 4}, 0, 0.5, 1.2);
        auto ge = expand_graph(pn, 2, {2, 4}, 0);
        CHECK(ge.node_count() == 2 * pn.graph.node_count() + 1);
        int expected_dummies = 1 * 2 + 2;
        int dummies = 0;
        for (const auto& e : ge.edges)
            if (e.kind == ExpEdgeKind::Dummy) ++dummies;
        CHECK(dummies == expected_dummies);
        // Per-layer copies preserve attributes exactly.
        for (const auto& e : ge.edges) {
            if (e.base_edge < 0) continue;
            const RoadEdge& base = pn.graph.edge(e.base_edge);
            CHECK(e.cost == base.cost);
            CHECK(e.time == base.travel_time);
        }
    }
}

TEST_CASE("layer structure is acyclic upward") {
    auto net = random_net(6, 3);
    auto pn = prune_network(net, {1, 3}, 0, 0.5, 1.2);
    auto ge = expand_graph(pn, 3, {1, 3}, 0);
    for (const auto& e : ge.edges) {
        if (e.head == ge.sink) continue;
        CHECK(ge.layer_of(e.head) >= ge.layer_of(e.tail));
        if (e.kind != ExpEdgeKind::Dummy) CHECK(ge.layer_of(e.head) == ge.layer_of(e.tail));
    }
    // Customer columns and duplicates are consistent.
    auto dups = ge.customer_duplicates();
    CHECK(dups.size() == ge.customers_base.size() * 3);
    for (NodeId c : ge.customers_base) CHECK(ge.column_of(c).size() == 3);
}

TEST_CASE("every source-sink path projects to a closed walk") {
    auto net = random_net(6, 11, 0.5);
    auto pn = prune_network(net, {2, 5}, 0, 0.5, 1.2);
    auto ge = expand_graph(pn, 2, {2, 5}, 0);
    // Depth-first enumeration of node-distinct source->sink paths.
    std::vector<int> stack_edges;
    std::vector<bool> seen(static_cast<size_t>(ge.node_count()), false);
    int checked = 0;
    std::function<void(NodeId)> dfs = [&](NodeId at) {
        if (checked > 500) return;
        if (at == ge.sink) {
            ++checked;
            std::vector<NodeId> walk;
            walk.push_back(pn.to_original(ge.base_of(ge.source)));
            for (int e : stack_edges) {
                const auto& ed = ge.edges[static_cast<size_t>(e)];
                if (ed.kind == ExpEdgeKind::Dummy) continue;
                walk.push_back(pn.to_original(ge.base_of(ed.head)));
            }
            CHECK(walk.front() == 0);
            CHECK(walk.back() == 0);
            for (size_t i = 0; i + 1 < walk.size(); ++i)
                CHECK(net.find_edge(walk[i], walk[i + 1]) >= 0);
            return;
        }
        for (int e : ge.out[static_cast<size_t>(at)]) {
            NodeId v = ge.edges[static_cast<size_t>(e)].head;
            if (v != ge.sink && seen[static_cast<size_t>(v)]) continue;
            if (v != ge.sink) seen[static_cast<size_t>(v)] = true;
            stack_edges.push_back(e);
            dfs(v);
            stack_edges.pop_back();
            if (v != ge.sink) seen[static_cast<size_t>(v)] = false;
        }
    };
    seen[static_cast<size_t>(ge.source)] = true;
    dfs(ge.source);
    CHECK(checked > 0);
}

TEST_CASE("expanded graph renders to dot") {
    auto net = make_net(3, {{0, 1}, {1, 2}}, true);
    auto pn = prune_network(net, {2}, 0, 0.5, 1.2);
    auto ge = expand_graph(pn, 2, {2}, 0);
    auto dot = to_dot(ge);
    CHECK(dot.find("digraph") != std::string::npos);
    CHECK(dot.find("sink") != std::string::npos);
    CHECK(dot.find("style=dashed") != std::string::npos);
}
