#pragma once

#include "vrpsa/roadnet.hpp"

#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace vrpsa {

struct Disconnected : std::runtime_error {
    explicit Disconnected(const std::string& what) : std::runtime_error(what) {}
};

/// Sparse subgraph produced by the pre-pruning pass, with provenance:
/// p1/v1 hold minimum-cost path members (both HDV and AV cost vectors),
/// p2/v2 minimum-remote-duration path members, p3/v3 the attached
/// AV-enabled strongly connected components. All provenance is expressed
/// in original node ids; `graph` is re-indexed compactly.
struct PrunedNetwork {
    RoadNetwork graph;
    std::vector<NodeId> orig_of;       // compact id -> original id
    std::map<NodeId, NodeId> compact_of;

    std::set<std::pair<NodeId, NodeId>> p1, p2, p3;
    std::set<NodeId> v1, v2, v3;

    NodeId to_compact(NodeId orig) const { return compact_of.at(orig); }
    NodeId to_original(NodeId compact) const { return orig_of.at(static_cast<size_t>(compact)); }
};

/// Keep only edges on minimum-cost or minimum-remote-duration paths between
/// required nodes, plus AV-enabled components attached to them.
PrunedNetwork prune_network(const RoadNetwork& net, const std::vector<NodeId>& customers,
                            NodeId depot, double eta1, double eta2);

enum class ExpEdgeKind { Av, Ord, Dummy };

/// Layered duplication of a (pruned) network. Node (layer l, base v) has id
/// l * base_nodes + v for l in 0..layers-1; the sink depot is the last id.
/// Dummy edges carry zero cost and zero travel time: one per customer per
/// adjacent layer pair, plus one depot-to-sink edge per layer.
struct ExpandedGraph {
    int layers = 1;
    int base_nodes = 0;

    struct Edge {
        NodeId tail = -1;
        NodeId head = -1;
        ExpEdgeKind kind = ExpEdgeKind::Dummy;
        double cost = 0.0; // base cost of the copied segment, 0 on dummies
        double time = 0.0;
        double gamma_lo = 1.0;
        double gamma_hi = 1.0;
        int base_edge = -1;       // index into the base graph, -1 on dummies
        int layer = 0;            // layer of the tail node
        NodeId dummy_customer = -1; // base customer id for transition dummies
    };

    std::vector<Edge> edges;
    std::vector<std::vector<int>> out, in; // edge indices per node, sink included

    NodeId source = 0;
    NodeId sink = 0;
    NodeId depot_base = 0;
    std::vector<NodeId> customers_base; // ascending compact ids
    std::vector<NodeId> base_orig;      // compact base id -> original network id

    int node_count() const { return layers * base_nodes + 1; }
    NodeId node_at(int layer, NodeId base) const { return layer * base_nodes + base; }
    int layer_of(NodeId v) const { return v == sink ? 0 : v / base_nodes; }
    NodeId base_of(NodeId v) const { return v == sink ? -1 : v % base_nodes; }

    /// Duplicates of one base customer across layers (the vertical set).
    std::vector<NodeId> column_of(NodeId base_customer) const;
    /// All customer duplicates, layer-major.
    std::vector<NodeId> customer_duplicates() const;
    NodeId original_of_base(NodeId base) const {
        return base_orig.at(static_cast<size_t>(base));
    }
};

/// Build the layered graph for customers/depot given in original ids of the
/// network `pn` was pruned from.
ExpandedGraph expand_graph(const PrunedNetwork& pn, int layers,
                           const std::vector<NodeId>& customers, NodeId depot);

/// Graphviz rendering for debugging.
std::string to_dot(const ExpandedGraph& ge);

} // namespace vrpsa
