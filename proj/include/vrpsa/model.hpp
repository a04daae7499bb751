#pragma once

#include "vrpsa/expand.hpp"
#include "vrpsa/instance.hpp"
#include "vrpsa/subroute.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace vrpsa {

enum class VarKind { Binary, Continuous };
enum class Sense { Le, Eq, Ge };

/// Semantic role of a variable; the decoder and the tests navigate models
/// through these instead of parsing names.
struct VarTag {
    enum Kind {
        None,
        RouteEdge,     // x: vehicle, edge
        Dispatch,      // y_o: vehicle
        Serve,         // y: vehicle, node (customer duplicate)
        Timestamp,     // t: vehicle, node
        ControllerUse, // u: vehicle, interval
        AlphaInd,      // alpha: vehicle, edge, interval | pair components
        BetaInd,
        ControllerAssign, // u_b: controller, vehicle, edge | subroute
        Departure,        // rescheduling: vehicle
        SubrouteStart,    // rescheduling: subroute
        SubrouteEnd
    } kind = None;
    int vehicle = -1;
    int edge = -1;
    int node = -1;
    int interval = -1;
    int subroute = -1;
    int controller = -1;
    int other_vehicle = -1;
    int other_edge = -1;
};

struct Variable {
    std::string name;
    VarKind kind = VarKind::Continuous;
    double lb = 0.0;
    double ub = 0.0;
    VarTag tag;
};

struct LinTerm {
    int var = -1;
    double coef = 0.0;
};

struct LinExpr {
    std::vector<LinTerm> terms;
    double constant = 0.0;
};

struct Constraint {
    std::string name;
    LinExpr expr;
    Sense sense = Sense::Le;
    double rhs = 0.0;
};

struct NameCollision : std::runtime_error {
    explicit NameCollision(const std::string& what) : std::runtime_error(what) {}
};

/// Solver-agnostic MILP: variables, linear constraints, a linear minimize
/// objective, and semantic annotations. Immutable once built.
class MilpModel {
public:
    int add_variable(std::string name, VarKind kind, double lb, double ub, VarTag tag = {});
    void add_constraint(std::string name, LinExpr expr, Sense sense, double rhs);
    void set_objective(LinExpr expr) { objective_ = std::move(expr); }

    const std::vector<Variable>& variables() const { return vars_; }
    const std::vector<Constraint>& constraints() const { return cons_; }
    const LinExpr& objective() const { return objective_; }
    const Variable& variable(int v) const { return vars_.at(static_cast<size_t>(v)); }
    int var_count() const { return static_cast<int>(vars_.size()); }
    int binary_count() const;

    /// Empty result means the model lints clean: indices in range, bounds
    /// consistent, binaries within [0,1] and referenced somewhere,
    /// timestamps finitely bounded.
    std::vector<std::string> lint() const;

private:
    std::vector<Variable> vars_;
    std::vector<Constraint> cons_;
    LinExpr objective_;
};

/// CPLEX-LP text with deterministic ordering.
std::string export_lp(const MilpModel& model);

/// Per-family variable/constraint counts, one CSV row per family.
std::string model_stats_csv(const MilpModel& model);

/// Consecutive intervals covering [0, horizon]; interval q is
/// [a(q), b(q)] with b(q) == a(q+1) bit-for-bit.
class TimeGrid {
public:
    TimeGrid() = default;
    explicit TimeGrid(std::vector<double> boundaries);
    static TimeGrid uniform(double horizon, int intervals);

    int count() const { return static_cast<int>(bounds_.size()) - 1; }
    double a(int q) const { return bounds_.at(static_cast<size_t>(q)); }
    double b(int q) const { return bounds_.at(static_cast<size_t>(q) + 1); }
    double horizon() const { return bounds_.back(); }

private:
    std::vector<double> bounds_;
};

struct BuildOptions {
    bool soft_transition = true; // inequality form of the layer transition
    bool flexible_time = false;  // adjustable AV travel times
};

/// Time-discretized exact formulation on the expanded graph: routing,
/// service, capacity, timestamp consistency, and the per-interval
/// controller budget.
MilpModel build_exact_milp(const VrpSaInstance& inst, const ExpandedGraph& ge,
                           const TimeGrid& grid, const BuildOptions& options = {});

/// Variant enforcing the budget by assigning individual controllers to
/// vehicle-edge pairs with pairwise no-overlap constraints; no time grid.
MilpModel build_resource_allocation_milp(const VrpSaInstance& inst, const ExpandedGraph& ge,
                                         const BuildOptions& options = {});

/// Feasibility program that shifts departures (and, when flexible, re-times
/// sub-routes within their adjustment bounds) so that simultaneous ordinary
/// sub-routes fit the controller budget. `separation` > 0 demands that gap
/// between sub-routes sharing a controller.
MilpModel build_rescheduling_milp(const std::vector<SubRoute>& subroutes, int budget,
                                  double horizon, bool flexible, double separation = 0.0);

/// Single-vehicle tour over the customers `ge` was expanded for, minimizing
/// AV routing cost while avoiding ordinary segments during the given
/// exhausted-budget intervals.
MilpModel build_rerouting_milp(const ExpandedGraph& ge, double eta1, double eta2,
                               const std::vector<TimeInterval>& infeasible, double horizon,
                               double separation = 0.0);

} // namespace vrpsa
