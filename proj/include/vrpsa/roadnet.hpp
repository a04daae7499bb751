#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace vrpsa {

using NodeId = int;

enum class RoadType { AvEnabled, Ordinary };

struct RoadEdge {
    NodeId tail = -1;
    NodeId head = -1;
    RoadType type = RoadType::Ordinary;
    double cost = 0.0;        // base routing cost, > 0; an HDV pays this on any road
    double travel_time = 0.0; // > 0
    double gamma_lo = 0.8;    // travel-time shrink factor, in (0, 1]
    double gamma_hi = 1.25;   // travel-time stretch factor, >= 1
};

struct NodePoint {
    double x = 0.0;
    double y = 0.0;
};

struct NetworkError : std::runtime_error {
    explicit NetworkError(const std::string& what) : std::runtime_error(what) {}
};

/// Directed road network with AV-enabled and ordinary segments.
/// Immutable after construction; safe to share across threads.
class RoadNetwork {
public:
    RoadNetwork() = default;
    RoadNetwork(std::vector<NodePoint> nodes, std::vector<RoadEdge> edges);

    int node_count() const { return static_cast<int>(nodes_.size()); }
    int edge_count() const { return static_cast<int>(edges_.size()); }

    const NodePoint& point(NodeId v) const { return nodes_.at(static_cast<size_t>(v)); }
    const std::vector<NodePoint>& points() const { return nodes_; }
    const RoadEdge& edge(int e) const { return edges_.at(static_cast<size_t>(e)); }
    const std::vector<RoadEdge>& edges() const { return edges_; }

    /// Edge indices leaving v (the delta-minus list of the formulations).
    const std::vector<int>& out_edges(NodeId v) const { return out_.at(static_cast<size_t>(v)); }
    /// Edge indices entering v (the delta-plus list).
    const std::vector<int>& in_edges(NodeId v) const { return in_.at(static_cast<size_t>(v)); }

    /// Index of the directed edge tail->head, or -1 when absent.
    int find_edge(NodeId tail, NodeId head) const;

private:
    std::vector<NodePoint> nodes_;
    std::vector<RoadEdge> edges_;
    std::vector<std::vector<int>> out_;
    std::vector<std::vector<int>> in_;
};

enum class WeightKind { HdvCost, AvCost, RemoteDuration };

/// Edge-weight selector for path queries. AvCost scales the base cost by
/// eta1 on AV-enabled segments and eta2 on ordinary ones. RemoteDuration
/// counts travel time spent on ordinary segments and breaks ties by AvCost.
struct WeightMode {
    WeightKind kind = WeightKind::HdvCost;
    double eta1 = 1.0;
    double eta2 = 1.0;

    static WeightMode hdv() { return {WeightKind::HdvCost, 1.0, 1.0}; }
    static WeightMode av(double eta1, double eta2) { return {WeightKind::AvCost, eta1, eta2}; }
    static WeightMode remote_duration(double eta1, double eta2) {
        return {WeightKind::RemoteDuration, eta1, eta2};
    }

    /// (primary, secondary) weight of an edge; paths are compared
    /// lexicographically on the summed pair.
    std::pair<double, double> weigh(const RoadEdge& e) const;
};

struct PathResult {
    std::vector<NodeId> nodes; // src..dst inclusive
    double cost = 0.0;         // sum of primary mode weights
};

/// Minimum-cost directed path, deterministic: among equal-cost paths the
/// lexicographically smallest node sequence is returned.
std::optional<PathResult> shortest_path(const RoadNetwork& net, NodeId src, NodeId dst,
                                        const WeightMode& mode);

/// Lexicographic (primary, secondary) distances from src to every node, or
/// to src when reversed. Infinity marks unreachable nodes.
std::vector<std::pair<double, double>> pair_distances(const RoadNetwork& net, NodeId src,
                                                      const WeightMode& mode, bool reversed);

/// Smallest node sequence among minimum-weight src->dst paths, given
/// pair_distances(net, dst, mode, /*reversed=*/true).
std::optional<PathResult> lex_min_path(const RoadNetwork& net, NodeId src, NodeId dst,
                                       const WeightMode& mode,
                                       const std::vector<std::pair<double, double>>& dist_to_dst);

/// Largest j such that the j smallest demands sum to at most capacity.
int compute_k(std::vector<double> demands, double capacity);

/// Strongly connected components of the subgraph induced by AV-enabled
/// edges only; singletons included. Components are sorted by smallest
/// member id, members ascending.
std::vector<std::vector<NodeId>> av_sccs(const RoadNetwork& net);

struct InfeasibleStsp : std::runtime_error {
    explicit InfeasibleStsp(const std::string& what) : std::runtime_error(what) {}
};

struct StspResult {
    std::vector<NodeId> tour; // closed walk, depot first and last
    double cost = 0.0;
};

/// Exhaustive minimum-cost closed walk from the depot through all required
/// nodes. The search caps node visits at n and edge traversals at n-1,
/// n = |required + depot|, which is sufficient for an optimal walk. Among
/// optimal walks, ties are broken by the first-service order of required
/// nodes, then by the node sequence itself. Oracle-scale only.
StspResult brute_force_stsp(const RoadNetwork& net, const std::vector<NodeId>& required,
                            NodeId depot, const WeightMode& mode);

} // namespace vrpsa
