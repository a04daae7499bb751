#pragma once

#include "vrpsa/roadnet.hpp"

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace vrpsa {

struct ParseError : std::runtime_error {
    int line = 0;
    ParseError(const std::string& what, int line_no)
        : std::runtime_error("line " + std::to_string(line_no) + ": " + what), line(line_no) {}
};

struct MissingSection : std::runtime_error {
    explicit MissingSection(const std::string& section)
        : std::runtime_error("missing section: " + section) {}
};

struct SchemaError : std::runtime_error {
    explicit SchemaError(const std::string& what) : std::runtime_error(what) {}
};

struct InfeasibleInstance : std::runtime_error {
    explicit InfeasibleInstance(const std::string& what) : std::runtime_error(what) {}
};

/// A plain CVRP benchmark instance (EUC_2D). Node ids follow the file,
/// i.e. 1-based and dense.
struct CvrpInstance {
    std::string name;
    std::map<int, NodePoint> coordinates;
    std::map<int, double> demands;
    int depot = 0;
    double capacity = 0.0;

    std::vector<int> customer_ids() const;
};

/// Parse TSPLIB-style CVRP content. Requires NAME, DIMENSION, CAPACITY,
/// NODE_COORD_SECTION, DEMAND_SECTION and DEPOT_SECTION.
CvrpInstance parse_cvrp(const std::string& text);

enum class VehicleType { Av, Hdv };

struct VrpSaInstance {
    std::string name;
    RoadNetwork network;
    NodeId depot = 0;
    std::vector<NodeId> customers;
    std::vector<double> demands; // aligned with customers
    double capacity = 0.0;
    int av_count = 0;
    int hdv_count = 0;
    double fixed_cost_av = 1.0;
    double fixed_cost_hdv = 1.0;
    double eta1 = 0.5; // in (0, 1)
    double eta2 = 1.2; // > 1
    double horizon = 0.0;
    int budget = 0;
    int intervals = 64; // |Q| for the time-discretized builder
    int layers = 2;     // expanded-graph layer count

    double demand_of(NodeId customer) const;
    /// Throws SchemaError when a field violates the model's assumptions.
    void validate_fields() const;
};

/// Generation knobs mirroring the benchmark construction.
struct GenParams {
    int g_x = 5;
    int g_y = 5;
    double eta1 = 0.5;
    double eta2 = 1.2;
    double t_factor = 1.2;
    double b_factor = 1.0 / 3.0;
    double fixed_cost = 1.0;
    int layers = 2;
    int intervals = 64;
    unsigned seed = 0;
};

/// Stratified grid road network: an AV-enabled primary grid over the tight
/// bounding box plus per-cell ordinary local grids whose lines pass through
/// every contained point. Returns the network and the map from original
/// node id to network node id. Every edge is bidirected; cost and travel
/// time both equal the Euclidean segment length.
std::pair<RoadNetwork, std::map<int, NodeId>> generate_network(
    const std::map<int, NodePoint>& coords, int depot, int g_x, int g_y);

/// Assemble a full instance from CVRP data: fleet sizes and the horizon are
/// calibrated on a baseline HDV-only heuristic solution of the generated
/// network.
VrpSaInstance build_instance(const CvrpInstance& cvrp, const GenParams& params);

std::string save_instance(const VrpSaInstance& inst);
VrpSaInstance load_instance(const std::string& text);

} // namespace vrpsa
