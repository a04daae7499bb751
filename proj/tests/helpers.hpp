#pragma once

#include "vrpsa/instance.hpp"
#include "vrpsa/roadnet.hpp"

#include <fstream>
#include <random>
#include <sstream>
#include <vector>

namespace vrpsa::testing {

struct EdgeSpec {
    NodeId tail, head;
    RoadType type = RoadType::AvEnabled;
    double cost = 1.0;
    double time = 1.0;
};

inline RoadNetwork make_net(int nodes, const std::vector<EdgeSpec>& specs,
                            bool bidirected = false) {
    std::vector<NodePoint> pts(static_cast<size_t>(nodes));
    for (int i = 0; i < nodes; ++i) pts[static_cast<size_t>(i)] = {double(i), 0.0};
    std::vector<RoadEdge> edges;
    for (const auto& s : specs) {
        edges.push_back({s.tail, s.head, s.type, s.cost, s.time, 0.8, 1.25});
        if (bidirected) edges.push_back({s.head, s.tail, s.type, s.cost, s.time, 0.8, 1.25});
    }
    return RoadNetwork(std::move(pts), std::move(edges));
}

// Five unit spokes around a central depot; every node required.
inline RoadNetwork star_network() {
    std::vector<EdgeSpec> specs;
    for (NodeId leaf = 1; leaf <= 5; ++leaf) specs.push_back({0, leaf});
    return make_net(6, specs, /*bidirected=*/true);
}

// One-way-dominated network: three loops hanging off a forced corridor.
inline RoadNetwork one_way_network() {
    std::vector<EdgeSpec> specs = {
        {0, 1}, {1, 0}, {1, 2}, {2, 3}, {3, 4},
        {2, 6}, {6, 5}, {5, 1},
        {3, 8}, {8, 7}, {7, 5},
        {4, 10}, {10, 9}, {9, 7},
    };
    return make_net(11, specs, /*bidirected=*/false);
}

// Random strongly-connected mixed network: a bidirected ring plus chords.
inline RoadNetwork random_net(int nodes, unsigned seed, double av_share = 0.5,
                              int extra_chords = 4) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> cost(1.0, 9.0);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    std::vector<EdgeSpec> specs;
    auto type_of = [&]() {
        return coin(rng) < av_share ? RoadType::AvEnabled : RoadType::Ordinary;
    };
    for (NodeId i = 0; i < nodes; ++i) {
        NodeId j = (i + 1) % nodes;
        RoadType ty = type_of();
        double c = cost(rng);
        specs.push_back({i, j, ty, c, c});
        specs.push_back({j, i, ty, c, c});
    }
    std::uniform_int_distribution<NodeId> pick(0, nodes - 1);
    for (int k = 0; k < extra_chords; ++k) {
        NodeId a = pick(rng), b = pick(rng);
        if (a == b) continue;
        bool dup = false;
        for (const auto& s : specs)
            if (s.tail == a && s.head == b) dup = true;
        if (dup) continue;
        double c = cost(rng);
        specs.push_back({a, b, type_of(), c, c});
    }
    return make_net(nodes, specs);
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::string data_path(const std::string& name) {
    return std::string(VRPSA_DATA_DIR) + "/" + name;
}

} // namespace vrpsa::testing
