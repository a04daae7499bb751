#pragma once

#include "vrpsa/instance.hpp"
#include "vrpsa/solve.hpp"
#include "vrpsa/subroute.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace vrpsa {

enum class FleetMode { AvOnly, HdvOnly, Mixed };

struct FleetExhausted : std::runtime_error {
    explicit FleetExhausted(const std::string& what) : std::runtime_error(what) {}
};

struct VehicleRoute {
    int vehicle = 0;
    VehicleType type = VehicleType::Hdv;
    std::vector<NodeId> nodes;  // full node path, depot..depot
    std::vector<double> times;  // aligned with nodes
    std::vector<NodeId> served; // customers in service order
    double cost = 0.0;          // routing cost under this vehicle's cost vector

    double departure() const { return times.empty() ? 0.0 : times.front(); }
    double return_time() const { return times.empty() ? 0.0 : times.back(); }
};

struct Phase1Result {
    std::vector<VehicleRoute> routes;
    double total_cost = 0.0; // routing cost only
};

/// Savings construction plus relocate/swap/2-opt improvement on the metric
/// closure of the pruned network, expanded back to full node paths. All
/// departures are zero. Deterministic for a fixed seed.
Phase1Result phase1_routes(const VrpSaInstance& inst, FleetMode mode, unsigned seed);

/// Split one vehicle's schedule at the transitions between AV-enabled and
/// ordinary segments.
std::vector<SubRoute> derive_subroutes(const VehicleRoute& route, const RoadNetwork& net);

struct BudgetViolation {
    TimeInterval window;
    int usage = 0;
};

struct BudgetReport {
    bool feasible = true;
    int max_usage = 0;
    std::vector<BudgetViolation> violations; // maximal windows above budget
};

/// Closed-interval sweep: strips sharing even a single instant count as
/// simultaneous.
BudgetReport check_budget(const std::vector<TimeInterval>& strips, int budget);
BudgetReport check_budget(const std::vector<VehicleRoute>& av_routes, const RoadNetwork& net,
                          int budget);

/// Shift departures (or re-time sub-routes within their adjustment windows
/// when flexible) until the controller budget holds; nullopt when no
/// recovery was found. Routing costs are untouched.
std::optional<std::vector<VehicleRoute>> reschedule(const std::vector<VehicleRoute>& av_routes,
                                                    const RoadNetwork& net, int budget,
                                                    double horizon, bool flexible);

/// Saving of running the route autonomously instead of with a driver.
double route_value(const VehicleRoute& route, const RoadNetwork& net, double eta1, double eta2);

/// Windows of [0, horizon], split at the accepted schedules' transition
/// timestamps, during which every controller is taken.
std::vector<TimeInterval> infeasible_intervals(const std::vector<VehicleRoute>& accepted,
                                               const RoadNetwork& net, int budget,
                                               double horizon);

/// Closed tour cost over the customers and depot on the metric closure
/// under HDV costs: nearest neighbour plus 2-opt.
double tsp_upper_bound(const std::vector<NodeId>& customers, const VrpSaInstance& inst);

struct SolveConfig {
    bool priority = true; // value-ordered re-routing; false = seeded random order
    bool flexible = false;
    unsigned seed = 0;
    Backend backend = Backend::builtin();
    double time_limit = 300.0;
};

struct RerouteResult {
    std::vector<VehicleRoute> routes;
    std::vector<NodeId> unserved; // customers handed to the HDV fallback
};

/// Ruin-and-recreate recovery: accept routes in priority order while the
/// budget holds, otherwise rebuild the route as a constrained tour around
/// the exhausted windows; routes that stay too expensive surrender their
/// customers. Appends one trace row per step.
RerouteResult reroute(const std::vector<VehicleRoute>& av_routes, const VrpSaInstance& inst,
                      const SolveConfig& config, std::vector<std::string>& trace);

struct FeasibilityReport {
    bool pass = true;
    std::vector<std::string> reasons;
};

struct Solution {
    std::vector<VehicleRoute> av_routes;
    std::vector<VehicleRoute> hdv_routes; // phase-1 HDVs plus fallback coverage
    std::vector<NodeId> fallback_customers;
    double f1 = 0.0; // budget-free AV relaxation cost
    double f2 = 0.0; // HDV-only baseline cost
    double fP = 0.0; // final routing cost
    bool priority_used = true;
    bool flexible = false;    // AV travel times were adjustable
    bool rescheduled = false; // recovery succeeded without re-routing
    FeasibilityReport report;
    std::vector<std::string> trace; // CSV rows: step,vehicle,detail,value
};

struct PipelineInfeasible : std::runtime_error {
    explicit PipelineInfeasible(const std::string& what) : std::runtime_error(what) {}
};

/// Full relax-then-recover pipeline; throws PipelineInfeasible when the
/// fallback needs more HDVs than the fleet holds.
Solution solve_vrpsa(const VrpSaInstance& inst, const SolveConfig& config);

/// Re-check every contract on a finished solution.
FeasibilityReport validate(const VrpSaInstance& inst, const Solution& sol);

} // namespace vrpsa
