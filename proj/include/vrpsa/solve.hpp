#pragma once

#include "vrpsa/expand.hpp"
#include "vrpsa/instance.hpp"
#include "vrpsa/model.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace vrpsa {

enum class SolveStatus { Optimal, Feasible, Infeasible, TimeLimit, Unknown };

struct SolveResult {
    SolveStatus status = SolveStatus::Unknown;
    double objective = 0.0;
    std::vector<double> assignment; // by variable index; empty unless solved
    double wall_time = 0.0;

    bool has_solution() const {
        return status == SolveStatus::Optimal || status == SolveStatus::Feasible;
    }
    double value(int var) const { return assignment.at(static_cast<size_t>(var)); }
};

struct BackendUnavailable : std::runtime_error {
    explicit BackendUnavailable(const std::string& what) : std::runtime_error(what) {}
};
struct SolverCrash : std::runtime_error {
    explicit SolverCrash(const std::string& what) : std::runtime_error(what) {}
};
struct ModelTooLarge : std::runtime_error {
    explicit ModelTooLarge(const std::string& what) : std::runtime_error(what) {}
};
struct DecodeError : std::runtime_error {
    explicit DecodeError(const std::string& what) : std::runtime_error(what) {}
};

struct Backend {
    enum Kind { BuiltIn, External } kind = BuiltIn;
    std::string command; // template with {lp} and {sol} placeholders

    static Backend builtin() { return {BuiltIn, ""}; }
    static Backend external(std::string command_template) {
        return {External, std::move(command_template)};
    }
};

/// Largest binary count the built-in solver accepts.
constexpr int kBuiltinBinaryCap = 1024;

/// Exhaustive branch-and-bound over the binaries in declaration order.
/// Continuous feasibility is decided by difference-constraint propagation,
/// which every builder's timestamp rows reduce to once the binaries are
/// fixed. Deterministic.
SolveResult builtin_solve(const MilpModel& model, double time_limit_s = 300.0);

/// Dispatch to the built-in solver or run the external command on the
/// exported LP file. The external command must write a solution file with
/// optional `status <word>` / `objective <value>` lines followed by
/// `<name> <value>` rows; absent variables default to zero.
SolveResult solve(const MilpModel& model, const Backend& backend, double time_limit_s = 300.0);

struct DecodedRoute {
    int vehicle = 0;
    VehicleType type = VehicleType::Av;
    std::vector<NodeId> nodes;  // original network ids, depot..depot
    std::vector<double> times;  // aligned with nodes
    std::vector<NodeId> served; // original customer ids
    double routing_cost = 0.0;
    double fixed_cost = 0.0;
    double departure() const { return times.empty() ? 0.0 : times.front(); }
};

struct DecodedSolution {
    std::vector<DecodedRoute> routes;
    double routing_cost = 0.0;
    double fixed_cost = 0.0;
};

/// Follow the unit x-arcs of each dispatched vehicle from source to sink,
/// drop dummy hops, project to original node ids and read the timestamps.
/// The recomputed cost is checked against the solver objective.
DecodedSolution decode_solution(const SolveResult& result, const MilpModel& model,
                                const ExpandedGraph& ge, const VrpSaInstance& inst);

} // namespace vrpsa
