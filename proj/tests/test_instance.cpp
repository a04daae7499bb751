#include "vrpsa/instance.hpp"

#include "vrpsa/pipeline.hpp"

#include "helpers.hpp"

#include <doctest.h>

#include <cmath>
#include <queue>
#include <set>

using namespace vrpsa;
using namespace vrpsa::testing;

TEST_CASE("benchmark file parses") {
    auto inst = parse_cvrp(read_file(data_path("P-n16-k8.vrp")));
    CHECK(inst.name == "P-n16-k8");
    CHECK(inst.coordinates.size() == 16);
    CHECK(inst.customer_ids().size() == 15);
    CHECK(inst.depot == 1);
    CHECK(inst.capacity == 35.0);
    CHECK(inst.demands.at(2) == 19.0);
}

TEST_CASE("minimal two-node file parses") {
    std::string text =
        "NAME : tiny\nDIMENSION : 2\nCAPACITY : 10\nNODE_COORD_SECTION\n1 0 0\n2 3 4\n"
        "DEMAND_SECTION\n1 0\n2 5\nDEPOT_SECTION\n1\n-1\nEOF\n";
    auto inst = parse_cvrp(text);
    CHECK(inst.customer_ids() == std::vector<int>{2});
}

TEST_CASE("malformed files are rejected") {
    std::string short_coords =
        "NAME : bad\nDIMENSION : 5\nCAPACITY : 10\nNODE_COORD_SECTION\n1 0 0\n2 1 0\n3 2 0\n"
        "4 3 0\nDEMAND_SECTION\n1 0\n2 1\n3 1\n4 1\nDEPOT_SECTION\n1\n-1\nEOF\n";
    CHECK_THROWS_AS(parse_cvrp(short_coords), ParseError);

    std::string no_demand =
        "NAME : bad\nDIMENSION : 1\nCAPACITY : 10\nNODE_COORD_SECTION\n1 0 0\n"
        "DEPOT_SECTION\n1\n-1\nEOF\n";
    CHECK_THROWS_AS(parse_cvrp(no_demand), MissingSection);
}

namespace {

bool strongly_connected(const RoadNetwork& net) {
    auto bfs = [&](bool reversed) {
        std::vector<bool> seen(static_cast<size_t>(net.node_count()), false);
        std::queue<NodeId> q;
        q.push(0);
        seen[0] = true;
        int n = 1;
        while (!q.empty()) {
            NodeId u = q.front();
            q.pop();
            for (int e : reversed ? net.in_edges(u) : net.out_edges(u)) {
                NodeId v = reversed ? net.edge(e).tail : net.edge(e).head;
                if (!seen[static_cast<size_t>(v)]) {
                    seen[static_cast<size_t>(v)] = true;
                    ++n;
                    q.push(v);
                }
            }
        }
        return n == net.node_count();
    };
    return bfs(false) && bfs(true);
}

double av_length(const RoadNetwork& net) {
    double total = 0.0;
    for (const auto& e : net.edges())
        if (e.type == RoadType::AvEnabled) total += e.cost;
    return total;
}

} // namespace

TEST_CASE("four corner points with a single cell yield the primary grid only") {
    std::map<int, NodePoint> coords{
        {1, {0, 0}}, {2, {10, 0}}, {3, {0, 10}}, {4, {10, 10}}};
    auto [net, placement] = generate_network(coords, 1, 1, 1);
    CHECK(net.node_count() == 4);
    for (const auto& e : net.edges()) CHECK(e.type == RoadType::AvEnabled);
    CHECK(net.edge_count() == 8); // four sides, both directions
    CHECK(placement.at(1) != placement.at(4));
}

TEST_CASE("one interior customer adds one cross of local lines") {
    std::map<int, NodePoint> coords{
        {1, {0, 0}}, {2, {10, 0}}, {3, {0, 10}}, {4, {10, 10}}, {5, {4, 6}}};
    auto [net, placement] = generate_network(coords, 1, 1, 1);
    // Corners, the interior point and four border crossings.
    CHECK(net.node_count() == 9);
    int ordinary = 0, av = 0;
    for (const auto& e : net.edges()) (e.type == RoadType::Ordinary ? ordinary : av)++;
    // The cross is 4 ordinary segments; each border splits into two AV parts.
    CHECK(ordinary == 2 * 4);
    CHECK(av == 2 * 8);
    const auto& p = net.point(placement.at(5));
    CHECK(p.x == 4.0);
    CHECK(p.y == 6.0);
}

TEST_CASE("generated benchmark network is connected and hosts every node") {
    auto cvrp = parse_cvrp(read_file(data_path("P-n40-k5.vrp")));
    auto [net, placement] = generate_network(cvrp.coordinates, cvrp.depot, 5, 5);
    CHECK(strongly_connected(net));
    CHECK(placement.size() == 40);
    std::set<NodeId> mapped;
    for (const auto& [id, node] : placement) {
        mapped.insert(node);
        const auto& p = net.point(node);
        CHECK(p.x == cvrp.coordinates.at(id).x);
        CHECK(p.y == cvrp.coordinates.at(id).y);
    }
    CHECK(mapped.size() == 40); // no two originals merged
    bool has_av = false, has_ord = false;
    for (const auto& e : net.edges()) (e.type == RoadType::AvEnabled ? has_av : has_ord) = true;
    CHECK(has_av);
    CHECK(has_ord);
}

TEST_CASE("primary grid length grows with the division count") {
    auto cvrp = parse_cvrp(read_file(data_path("P-n16-k8.vrp")));
    double prev = 0.0;
    for (int g = 1; g <= 6; ++g) {
        auto [net, placement] = generate_network(cvrp.coordinates, cvrp.depot, g, g);
        double len = av_length(net);
        CHECK(len >= prev - 1e-9);
        prev = len;
    }
}

TEST_CASE("degenerate boxes widen instead of failing") {
    std::map<int, NodePoint> coords{{1, {0, 0}}, {2, {5, 0}}, {3, {9, 0}}};
    auto [net, placement] = generate_network(coords, 1, 2, 2);
    CHECK(strongly_connected(net));
    CHECK(placement.size() == 3);
}

TEST_CASE("coincident coordinates are rejected") {
    std::map<int, NodePoint> coords{{1, {0, 0}}, {2, {3, 3}}, {3, {3, 3}}};
    CHECK_THROWS_AS(generate_network(coords, 1, 2, 2), InfeasibleInstance);
}

TEST_CASE("instance assembly calibrates fleet, horizon and budget") {
    auto cvrp = parse_cvrp(read_file(data_path("P-n16-k8.vrp")));
    GenParams params;
    params.g_x = params.g_y = 3;
    auto inst = build_instance(cvrp, params);
    CHECK(inst.av_count == inst.hdv_count);
    CHECK(inst.av_count >= 1);
    CHECK(inst.budget == std::max(1L, std::lround(inst.av_count / 3.0)));
    CHECK(inst.horizon > 0.0);

    // The baseline stays time-feasible even with no slack at all.
    GenParams tight = params;
    tight.t_factor = 1.0;
    auto exact = build_instance(cvrp, tight);
    auto base = phase1_routes(exact, FleetMode::HdvOnly, tight.seed);
    double t_bar = 0.0;
    for (const auto& r : base.routes) t_bar = std::max(t_bar, r.return_time());
    CHECK(t_bar == doctest::Approx(exact.horizon));
}

TEST_CASE("budget rounding clamps at one") {
    // One lonely customer leads to a single vehicle and budget one.
    std::string text =
        "NAME : lone\nDIMENSION : 2\nCAPACITY : 10\nNODE_COORD_SECTION\n1 0 0\n2 6 7\n"
        "DEMAND_SECTION\n1 0\n2 5\nDEPOT_SECTION\n1\n-1\nEOF\n";
    auto inst = build_instance(parse_cvrp(text), GenParams{});
    CHECK(inst.av_count == 1);
    CHECK(inst.budget == 1);
}

TEST_CASE("document round trip preserves every field") {
    auto cvrp = parse_cvrp(read_file(data_path("P-n16-k8.vrp")));
    GenParams params;
    params.g_x = params.g_y = 2;
    auto inst = build_instance(cvrp, params);

    auto text = save_instance(inst);
    auto back = load_instance(text);
    CHECK(back.name == inst.name);
    CHECK(back.eta1 == inst.eta1);
    CHECK(back.eta2 == inst.eta2);
    CHECK(back.capacity == inst.capacity);
    CHECK(back.horizon == inst.horizon);
    CHECK(back.budget == inst.budget);
    CHECK(back.av_count == inst.av_count);
    CHECK(back.hdv_count == inst.hdv_count);
    CHECK(back.intervals == inst.intervals);
    CHECK(back.layers == inst.layers);
    CHECK(back.depot == inst.depot);
    CHECK(back.customers == inst.customers);
    CHECK(back.demands == inst.demands);
    CHECK(back.network.node_count() == inst.network.node_count());
    CHECK(back.network.edge_count() == inst.network.edge_count());
    for (int e = 0; e < inst.network.edge_count(); ++e) {
        CHECK(back.network.edge(e).tail == inst.network.edge(e).tail);
        CHECK(back.network.edge(e).head == inst.network.edge(e).head);
        CHECK(back.network.edge(e).cost == inst.network.edge(e).cost);
        CHECK(back.network.edge(e).travel_time == inst.network.edge(e).travel_time);
    }
    // Canonical form is stable under a second round trip.
    CHECK(save_instance(back) == text);
}

TEST_CASE("schema violations are rejected on load") {
    auto cvrp = parse_cvrp(read_file(data_path("P-n16-k8.vrp")));
    GenParams params;
    params.g_x = params.g_y = 2;
    auto inst = build_instance(cvrp, params);
    auto text = save_instance(inst);

    auto bad_eta = text;
    bad_eta.replace(bad_eta.find("\"eta1\": 0.5"), 11, "\"eta1\": 1.5");
    CHECK_THROWS_AS(load_instance(bad_eta), SchemaError);

    auto bad_version = text;
    bad_version.replace(bad_version.find("\"format_version\": 1"), 19, "\"format_version\": 9");
    CHECK_THROWS_AS(load_instance(bad_version), SchemaError);

    CHECK_THROWS_AS(load_instance("{}"), SchemaError);
    CHECK_THROWS_AS(load_instance("not json"), SchemaError);
}

TEST_CASE("hand-written instance document loads and validates") {
    std::string doc = R"({
  "format_version": 1,
  "name": "hand",
  "eta1": 0.5,
  "eta2": 1.2,
  "capacity": 10,
  "horizon": 50,
  "budget": 1,
  "av_count": 1,
  "hdv_count": 1,
  "fixed_cost_av": 1,
  "fixed_cost_hdv": 1,
  "intervals": 4,
  "layers": 2,
  "depot": 0,
  "customers": [1, 2],
  "demands": [3, 4],
  "network": {
    "nodes": [[0, 0], [1, 0], [2, 0]],
    "edges": [
      [0, 1, "av", 1, 1, 0.8, 1.25], [1, 0, "av", 1, 1, 0.8, 1.25],
      [1, 2, "ord", 1, 1, 0.8, 1.25], [2, 1, "ord", 1, 1, 0.8, 1.25]
    ]
  }
})";
    auto inst = load_instance(doc);
    CHECK(inst.customers.size() == 2);
    CHECK(inst.network.edge_count() == 4);
}
