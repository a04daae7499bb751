#include "vrpsa/model.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

namespace vrpsa {

namespace {

std::string id(int v) { return std::to_string(v); }

// Shared routing core of the expanded-graph formulations: flow conservation
// with unit caps, dispatch linking, service, capacity, layer transitions,
// timestamp consistency and return-time rows. Returns the variable index
// tables the budget parts build on.
struct RoutingCore {
    int vehicles = 0;
    int av_count = 0;
    std::vector<std::vector<int>> x; // [m][edge]
    std::vector<int> yo;             // [m]
    std::vector<std::map<NodeId, int>> y; // [m][duplicate node]
    std::vector<std::vector<int>> t; // [m][node]
};

RoutingCore build_routing_core(MilpModel& model, const VrpSaInstance& inst,
                               const ExpandedGraph& ge, const BuildOptions& options) {
    RoutingCore core;
    core.av_count = inst.av_count;
    core.vehicles = inst.av_count + inst.hdv_count;
    const int M = core.vehicles;
    const double T = inst.horizon;
    const auto duplicates = ge.customer_duplicates();

    core.x.resize(static_cast<size_t>(M));
    core.yo.resize(static_cast<size_t>(M));
    core.y.resize(static_cast<size_t>(M));
    core.t.resize(static_cast<size_t>(M));
    for (int m = 0; m < M; ++m) {
        bool is_av = m < core.av_count;
        for (int e = 0; e < static_cast<int>(ge.edges.size()); ++e) {
            VarTag tag;
            tag.kind = VarTag::RouteEdge;
            tag.vehicle = m;
            tag.edge = e;
            core.x[static_cast<size_t>(m)].push_back(
                model.add_variable("x_m" + id(m) + "_e" + id(e), VarKind::Binary, 0, 1, tag));
        }
        {
            VarTag tag;
            tag.kind = VarTag::Dispatch;
            tag.vehicle = m;
            core.yo[static_cast<size_t>(m)] =
                model.add_variable("yo_m" + id(m), VarKind::Binary, 0, 1, tag);
        }
        for (NodeId i : duplicates) {
            VarTag tag;
            tag.kind = VarTag::Serve;
            tag.vehicle = m;
            tag.node = i;
            core.y[static_cast<size_t>(m)][i] =
                model.add_variable("y_m" + id(m) + "_n" + id(i), VarKind::Binary, 0, 1, tag);
        }
        (void)is_av;
    }
    // Timestamps follow all routing binaries so that the enumeration order
    // of a branching solver sees the decision variables first.
    for (int m = 0; m < M; ++m) {
        for (NodeId i = 0; i < ge.node_count(); ++i) {
            VarTag tag;
            tag.kind = VarTag::Timestamp;
            tag.vehicle = m;
            tag.node = i;
            core.t[static_cast<size_t>(m)].push_back(
                model.add_variable("t_m" + id(m) + "_n" + id(i), VarKind::Continuous, 0, T, tag));
        }
    }

    for (int m = 0; m < M; ++m) {
        const auto& x = core.x[static_cast<size_t>(m)];
        // Flow conservation away from source and sink, flow capped at one.
        for (NodeId i = 0; i < ge.node_count(); ++i) {
            if (i == ge.source || i == ge.sink) continue;
            if (ge.out[static_cast<size_t>(i)].empty() && ge.in[static_cast<size_t>(i)].empty())
                continue;
            LinExpr flow;
            for (int e : ge.out[static_cast<size_t>(i)])
                flow.terms.push_back({x[static_cast<size_t>(e)], 1.0});
            for (int e : ge.in[static_cast<size_t>(i)])
                flow.terms.push_back({x[static_cast<size_t>(e)], -1.0});
            model.add_constraint("flow_n" + id(i) + "_m" + id(m), flow, Sense::Eq, 0.0);
            LinExpr cap;
            for (int e : ge.out[static_cast<size_t>(i)])
                cap.terms.push_back({x[static_cast<size_t>(e)], 1.0});
            if (!cap.terms.empty())
                model.add_constraint("visitcap_n" + id(i) + "_m" + id(m), cap, Sense::Le, 1.0);
        }
        // Leaving the source means reaching the sink, exactly once each.
        LinExpr srcsink;
        for (int e : ge.out[static_cast<size_t>(ge.source)])
            srcsink.terms.push_back({x[static_cast<size_t>(e)], 1.0});
        for (int e : ge.in[static_cast<size_t>(ge.sink)])
            srcsink.terms.push_back({x[static_cast<size_t>(e)], -1.0});
        model.add_constraint("srcsink_m" + id(m), srcsink, Sense::Eq, 0.0);
        LinExpr dispatch;
        for (int e : ge.out[static_cast<size_t>(ge.source)])
            dispatch.terms.push_back({x[static_cast<size_t>(e)], 1.0});
        dispatch.terms.push_back({core.yo[static_cast<size_t>(m)], -1.0});
        model.add_constraint("dispatch_m" + id(m), dispatch, Sense::Eq, 0.0);
    }

    // Each customer is served exactly once, on any layer, by any vehicle.
    for (NodeId c : ge.customers_base) {
        LinExpr serve;
        for (int m = 0; m < M; ++m)
            for (NodeId i : ge.column_of(c))
                serve.terms.push_back({core.y[static_cast<size_t>(m)].at(i), 1.0});
        model.add_constraint("serve_c" + id(c), serve, Sense::Eq, 1.0);
    }
    // Capacity over all customer duplicates.
    for (int m = 0; m < M; ++m) {
        LinExpr cap;
        for (NodeId c : ge.customers_base) {
            double demand = inst.demand_of(ge.original_of_base(c));
            for (NodeId i : ge.column_of(c))
                cap.terms.push_back({core.y[static_cast<size_t>(m)].at(i), demand});
        }
        if (!cap.terms.empty())
            model.add_constraint("capacity_m" + id(m), cap, Sense::Le, inst.capacity);
    }
    // Serving requires visiting; a pass-through visit stays allowed.
    for (int m = 0; m < M; ++m)
        for (NodeId i : duplicates) {
            LinExpr vs;
            vs.terms.push_back({core.y[static_cast<size_t>(m)].at(i), 1.0});
            for (int e : ge.in[static_cast<size_t>(i)])
                vs.terms.push_back({core.x[static_cast<size_t>(m)][static_cast<size_t>(e)], -1.0});
            model.add_constraint("visitserve_n" + id(i) + "_m" + id(m), vs, Sense::Le, 0.0);
        }
    // Layer transition after a service: optional in the soft form,
    // mandatory in the hard form.
    for (int m = 0; m < M; ++m)
        for (int e = 0; e < static_cast<int>(ge.edges.size()); ++e) {
            const auto& ed = ge.edges[static_cast<size_t>(e)];
            if (ed.kind != ExpEdgeKind::Dummy || ed.dummy_customer < 0) continue;
            LinExpr tr;
            tr.terms.push_back({core.x[static_cast<size_t>(m)][static_cast<size_t>(e)], 1.0});
            tr.terms.push_back({core.y[static_cast<size_t>(m)].at(ed.tail), -1.0});
            model.add_constraint("transition_e" + id(e) + "_m" + id(m), tr,
                                 options.soft_transition ? Sense::Le : Sense::Eq, 0.0);
        }

    // Timestamp consistency along used edges; the horizon is the big-M.
    for (int m = 0; m < M; ++m) {
        bool flexible = options.flexible_time && m < core.av_count;
        const auto& t = core.t[static_cast<size_t>(m)];
        const auto& x = core.x[static_cast<size_t>(m)];
        for (int e = 0; e < static_cast<int>(ge.edges.size()); ++e) {
            const auto& ed = ge.edges[static_cast<size_t>(e)];
            double lo_time = flexible ? ed.gamma_lo * ed.time : ed.time;
            LinExpr lo;
            lo.terms.push_back({t[static_cast<size_t>(ed.head)], 1.0});
            lo.terms.push_back({t[static_cast<size_t>(ed.tail)], -1.0});
            lo.terms.push_back({x[static_cast<size_t>(e)], -T});
            model.add_constraint("mtz_e" + id(e) + "_m" + id(m), lo, Sense::Ge, lo_time - T);
            if (flexible) {
                LinExpr hi;
                hi.terms.push_back({t[static_cast<size_t>(ed.head)], 1.0});
                hi.terms.push_back({t[static_cast<size_t>(ed.tail)], -1.0});
                hi.terms.push_back({x[static_cast<size_t>(e)], T});
                model.add_constraint("mtzhi_e" + id(e) + "_m" + id(m), hi, Sense::Le,
                                     ed.gamma_hi * ed.time + T);
            }
        }
        if (!(options.flexible_time && m < core.av_count)) {
            // Return time accumulates the travel times of the route.
            LinExpr ret;
            ret.terms.push_back({t[static_cast<size_t>(ge.sink)], 1.0});
            ret.terms.push_back({t[static_cast<size_t>(ge.source)], -1.0});
            for (int e = 0; e < static_cast<int>(ge.edges.size()); ++e) {
                double dt = ge.edges[static_cast<size_t>(e)].time;
                if (dt != 0.0) ret.terms.push_back({x[static_cast<size_t>(e)], -dt});
            }
            model.add_constraint("return_m" + id(m), ret, Sense::Eq, 0.0);
        }
    }
    return core;
}

LinExpr routing_objective(const VrpSaInstance& inst, const ExpandedGraph& ge,
                          const RoutingCore& core) {
    LinExpr obj;
    for (int m = 0; m < core.vehicles; ++m) {
        bool is_av = m < core.av_count;
        for (int e = 0; e < static_cast<int>(ge.edges.size()); ++e) {
            const auto& ed = ge.edges[static_cast<size_t>(e)];
            if (ed.kind == ExpEdgeKind::Dummy) continue;
            double c = is_av ? (ed.kind == ExpEdgeKind::Av ? inst.eta1 : inst.eta2) * ed.cost
                             : ed.cost;
            obj.terms.push_back({core.x[static_cast<size_t>(m)][static_cast<size_t>(e)], c});
        }
        obj.terms.push_back(
            {core.yo[static_cast<size_t>(m)], is_av ? inst.fixed_cost_av : inst.fixed_cost_hdv});
    }
    return obj;
}

std::vector<int> ordinary_edges(const ExpandedGraph& ge) {
    std::vector<int> ord;
    for (int e = 0; e < static_cast<int>(ge.edges.size()); ++e)
        if (ge.edges[static_cast<size_t>(e)].kind == ExpEdgeKind::Ord) ord.push_back(e);
    return ord;
}

} // namespace

MilpModel build_exact_milp(const VrpSaInstance& inst, const ExpandedGraph& ge,
                           const TimeGrid& grid, const BuildOptions& options) {
    MilpModel model;
    RoutingCore core = build_routing_core(model, inst, ge, options);
    const double T = inst.horizon;
    const auto ord = ordinary_edges(ge);
    const int Q = grid.count();

    // Controller-demand indicators: u_qm says vehicle m holds a controller
    // during interval q; alpha/beta decide the interval-edge overlap.
    std::vector<std::vector<int>> u(static_cast<size_t>(core.av_count));
    for (int m = 0; m < core.av_count; ++m)
        for (int q = 0; q < Q; ++q) {
            VarTag tag;
            tag.kind = VarTag::ControllerUse;
            tag.vehicle = m;
            tag.interval = q;
            u[static_cast<size_t>(m)].push_back(
                model.add_variable("u_q" + id(q) + "_m" + id(m), VarKind::Binary, 0, 1, tag));
        }
    std::map<std::tuple<int, int, int>, std::pair<int, int>> ab; // (q,e,m) -> (alpha,beta)
    for (int m = 0; m < core.av_count; ++m)
        for (int q = 0; q < Q; ++q)
            for (int e : ord) {
                VarTag ta;
                ta.kind = VarTag::AlphaInd;
                ta.vehicle = m;
                ta.edge = e;
                ta.interval = q;
                int a = model.add_variable("al_q" + id(q) + "_e" + id(e) + "_m" + id(m),
                                           VarKind::Binary, 0, 1, ta);
                VarTag tb = ta;
                tb.kind = VarTag::BetaInd;
                int b = model.add_variable("be_q" + id(q) + "_e" + id(e) + "_m" + id(m),
                                           VarKind::Binary, 0, 1, tb);
                ab[{q, e, m}] = {a, b};
            }

    for (int m = 0; m < core.av_count; ++m) {
        const auto& t = core.t[static_cast<size_t>(m)];
        const auto& x = core.x[static_cast<size_t>(m)];
        for (int q = 0; q < Q; ++q)
            for (int e : ord) {
                const auto& ed = ge.edges[static_cast<size_t>(e)];
                auto [a, b] = ab.at({q, e, m});
                std::string sfx = "_q" + id(q) + "_e" + id(e) + "_m" + id(m);
                // alpha = 1 exactly when the edge is left after the interval
                // starts; beta = 1 when it is entered before the interval ends.
                LinExpr a1;
                a1.terms.push_back({t[static_cast<size_t>(ed.head)], 1.0});
                a1.terms.push_back({a, -T});
                model.add_constraint("alo" + sfx, a1, Sense::Le, grid.a(q));
                LinExpr a2;
                a2.terms.push_back({t[static_cast<size_t>(ed.head)], 1.0});
                a2.terms.push_back({a, -T});
                model.add_constraint("ahi" + sfx, a2, Sense::Ge, grid.a(q) - T);
                LinExpr b1;
                b1.terms.push_back({t[static_cast<size_t>(ed.tail)], 1.0});
                b1.terms.push_back({b, T});
                model.add_constraint("blo" + sfx, b1, Sense::Ge, grid.b(q));
                LinExpr b2;
                b2.terms.push_back({t[static_cast<size_t>(ed.tail)], 1.0});
                b2.terms.push_back({b, T});
                model.add_constraint("bhi" + sfx, b2, Sense::Le, grid.b(q) + T);
                // Traversal overlapping the interval forces the indicator.
                LinExpr use;
                use.terms.push_back({u[static_cast<size_t>(m)][static_cast<size_t>(q)], 3.0});
                use.terms.push_back({a, -1.0});
                use.terms.push_back({b, -1.0});
                use.terms.push_back({x[static_cast<size_t>(e)], -1.0});
                model.add_constraint("use" + sfx, use, Sense::Ge, -2.0);
            }
    }
    for (int q = 0; q < Q; ++q) {
        LinExpr cap;
        for (int m = 0; m < core.av_count; ++m)
            cap.terms.push_back({u[static_cast<size_t>(m)][static_cast<size_t>(q)], 1.0});
        if (!cap.terms.empty())
            model.add_constraint("budget_q" + id(q), cap, Sense::Le,
                                 static_cast<double>(inst.budget));
    }

    model.set_objective(routing_objective(inst, ge, core));
    return model;
}

MilpModel build_resource_allocation_milp(const VrpSaInstance& inst, const ExpandedGraph& ge,
                                         const BuildOptions& options) {
    MilpModel model;
    RoutingCore core = build_routing_core(model, inst, ge, options);
    const double T = inst.horizon;
    const auto ord = ordinary_edges(ge);
    const int B = inst.budget;

    // One assignment variable per controller-vehicle-edge triple; exactly
    // one controller backs each traversed ordinary edge.
    std::map<std::tuple<int, int, int>, int> assign; // (b,m,e) -> var
    for (int b = 0; b < B; ++b)
        for (int m = 0; m < core.av_count; ++m)
            for (int e : ord) {
                VarTag tag;
                tag.kind = VarTag::ControllerAssign;
                tag.controller = b;
                tag.vehicle = m;
                tag.edge = e;
                assign[{b, m, e}] = model.add_variable(
                    "u_b" + id(b) + "_m" + id(m) + "_e" + id(e), VarKind::Binary, 0, 1, tag);
            }
    for (int m = 0; m < core.av_count; ++m)
        for (int e : ord) {
            LinExpr row;
            for (int b = 0; b < B; ++b) row.terms.push_back({assign.at({b, m, e}), 1.0});
            row.terms.push_back({core.x[static_cast<size_t>(m)][static_cast<size_t>(e)], -1.0});
            model.add_constraint("assign_m" + id(m) + "_e" + id(e), row, Sense::Eq, 0.0);
        }

    // Ordered pairs of vehicle-edge tuples with distinct vehicles.
    for (int m1 = 0; m1 < core.av_count; ++m1)
        for (int e1 : ord)
            for (int m2 = 0; m2 < core.av_count; ++m2) {
                if (m2 == m1) continue;
                for (int e2 : ord) {
                    const auto& ed1 = ge.edges[static_cast<size_t>(e1)];
                    const auto& ed2 = ge.edges[static_cast<size_t>(e2)];
                    std::string sfx = "_m" + id(m1) + "_e" + id(e1) + "_m" + id(m2) + "_e" + id(e2);
                    VarTag ta;
                    ta.kind = VarTag::AlphaInd;
                    ta.vehicle = m1;
                    ta.edge = e1;
                    ta.other_vehicle = m2;
                    ta.other_edge = e2;
                    int a = model.add_variable("al" + sfx, VarKind::Binary, 0, 1, ta);
                    VarTag tb = ta;
                    tb.kind = VarTag::BetaInd;
                    int b = model.add_variable("be" + sfx, VarKind::Binary, 0, 1, tb);

                    const auto& t1 = core.t[static_cast<size_t>(m1)];
                    const auto& t2 = core.t[static_cast<size_t>(m2)];
                    // alpha: vehicle 1 enters its edge no later than vehicle 2
                    // leaves its own; beta is the mirrored condition.
                    LinExpr a1;
                    a1.terms.push_back({t2[static_cast<size_t>(ed2.head)], 1.0});
                    a1.terms.push_back({t1[static_cast<size_t>(ed1.tail)], -1.0});
                    a1.terms.push_back({a, -T});
                    model.add_constraint("raalo" + sfx, a1, Sense::Le, 0.0);
                    LinExpr a2 = a1;
                    model.add_constraint("raahi" + sfx, a2, Sense::Ge, -T);
                    LinExpr b1;
                    b1.terms.push_back({t1[static_cast<size_t>(ed1.head)], 1.0});
                    b1.terms.push_back({t2[static_cast<size_t>(ed2.tail)], -1.0});
                    b1.terms.push_back({b, -T});
                    model.add_constraint("rablo" + sfx, b1, Sense::Le, 0.0);
                    LinExpr b2 = b1;
                    model.add_constraint("rabhi" + sfx, b2, Sense::Ge, -T);

                    // A controller cannot back both tuples when both run and
                    // their traversal windows overlap.
                    for (int bb = 0; bb < B; ++bb) {
                        LinExpr pair;
                        pair.terms.push_back({assign.at({bb, m1, e1}), 1.0});
                        pair.terms.push_back({assign.at({bb, m2, e2}), 1.0});
                        pair.terms.push_back(
                            {core.x[static_cast<size_t>(m1)][static_cast<size_t>(e1)], 0.25});
                        pair.terms.push_back(
                            {core.x[static_cast<size_t>(m2)][static_cast<size_t>(e2)], 0.25});
                        pair.terms.push_back({a, 0.25});
                        pair.terms.push_back({b, 0.25});
                        model.add_constraint("rapair_b" + id(bb) + sfx, pair, Sense::Le,
                                             11.0 / 4.0);
                    }
                }
            }

    model.set_objective(routing_objective(inst, ge, core));
    return model;
}

MilpModel build_rescheduling_milp(const std::vector<SubRoute>& subroutes, int budget,
                                  double horizon, bool flexible, double separation) {
    MilpModel model;
    const double T = horizon;

    std::vector<int> vehicles;
    for (const auto& r : subroutes)
        if (std::find(vehicles.begin(), vehicles.end(), r.vehicle) == vehicles.end())
            vehicles.push_back(r.vehicle);
    std::sort(vehicles.begin(), vehicles.end());

    std::map<int, int> depart; // vehicle -> var
    for (int m : vehicles) {
        VarTag tag;
        tag.kind = VarTag::Departure;
        tag.vehicle = m;
        depart[m] = model.add_variable("tdep_m" + id(m), VarKind::Continuous, 0, T, tag);
    }
    const int R = static_cast<int>(subroutes.size());
    std::vector<int> t1(static_cast<size_t>(R)), t2(static_cast<size_t>(R));
    for (int r = 0; r < R; ++r) {
        VarTag tag;
        tag.kind = VarTag::SubrouteStart;
        tag.vehicle = subroutes[static_cast<size_t>(r)].vehicle;
        tag.subroute = r;
        t1[static_cast<size_t>(r)] =
            model.add_variable("t1_r" + id(r), VarKind::Continuous, 0, T, tag);
        tag.kind = VarTag::SubrouteEnd;
        t2[static_cast<size_t>(r)] =
            model.add_variable("t2_r" + id(r), VarKind::Continuous, 0, T, tag);
    }
    std::vector<int> ord;
    for (int r = 0; r < R; ++r)
        if (subroutes[static_cast<size_t>(r)].kind == RoadType::Ordinary) ord.push_back(r);

    std::map<std::pair<int, int>, int> assign; // (b, r) -> var
    for (int b = 0; b < budget; ++b)
        for (int r : ord) {
            VarTag tag;
            tag.kind = VarTag::ControllerAssign;
            tag.controller = b;
            tag.subroute = r;
            assign[{b, r}] =
                model.add_variable("u_b" + id(b) + "_r" + id(r), VarKind::Binary, 0, 1, tag);
        }

    // Timestamps accumulate along each vehicle's sub-route chain; flexible
    // mode replaces the equalities with the aggregated adjustment windows.
    for (int r = 0; r < R; ++r) {
        const SubRoute& sr = subroutes[static_cast<size_t>(r)];
        double fixed_offset = 0.0, lo_offset = 0.0, hi_offset = 0.0;
        for (int p = 0; p < r; ++p) {
            const SubRoute& prev = subroutes[static_cast<size_t>(p)];
            if (prev.vehicle != sr.vehicle) continue;
            fixed_offset += prev.duration;
            lo_offset += prev.gamma_lo * prev.duration;
            hi_offset += prev.gamma_hi * prev.duration;
        }
        LinExpr chain;
        chain.terms.push_back({t1[static_cast<size_t>(r)], 1.0});
        chain.terms.push_back({depart.at(sr.vehicle), -1.0});
        LinExpr dur;
        dur.terms.push_back({t2[static_cast<size_t>(r)], 1.0});
        dur.terms.push_back({t1[static_cast<size_t>(r)], -1.0});
        if (!flexible) {
            model.add_constraint("chain_r" + id(r), chain, Sense::Eq, fixed_offset);
            model.add_constraint("dur_r" + id(r), dur, Sense::Eq, sr.duration);
        } else {
            model.add_constraint("chainlo_r" + id(r), chain, Sense::Ge, lo_offset);
            LinExpr chain_hi = chain;
            model.add_constraint("chainhi_r" + id(r), chain_hi, Sense::Le, hi_offset);
            model.add_constraint("durlo_r" + id(r), dur, Sense::Ge, sr.gamma_lo * sr.duration);
            LinExpr dur_hi = dur;
            model.add_constraint("durhi_r" + id(r), dur_hi, Sense::Le,
                                 sr.gamma_hi * sr.duration);
        }
    }
    // Exactly one controller backs each ordinary sub-route.
    for (int r : ord) {
        LinExpr row;
        for (int b = 0; b < budget; ++b) row.terms.push_back({assign.at({b, r}), 1.0});
        model.add_constraint("assign_r" + id(r), row, Sense::Eq, 1.0);
    }
    // Pairwise overlap indicators across routes.
    for (int r1 : ord)
        for (int r2 : ord) {
            if (subroutes[static_cast<size_t>(r1)].vehicle ==
                subroutes[static_cast<size_t>(r2)].vehicle)
                continue;
            std::string sfx = "_r" + id(r1) + "_r" + id(r2);
            VarTag ta;
            ta.kind = VarTag::AlphaInd;
            ta.subroute = r1;
            ta.other_edge = r2;
            int a = model.add_variable("al" + sfx, VarKind::Binary, 0, 1, ta);
            VarTag tb = ta;
            tb.kind = VarTag::BetaInd;
            int b = model.add_variable("be" + sfx, VarKind::Binary, 0, 1, tb);

            LinExpr a1;
            a1.terms.push_back({t2[static_cast<size_t>(r2)], 1.0});
            a1.terms.push_back({t1[static_cast<size_t>(r1)], -1.0});
            a1.terms.push_back({a, -(T + separation)});
            model.add_constraint("rsalo" + sfx, a1, Sense::Le, -separation);
            LinExpr a2;
            a2.terms.push_back({t2[static_cast<size_t>(r2)], 1.0});
            a2.terms.push_back({t1[static_cast<size_t>(r1)], -1.0});
            a2.terms.push_back({a, -T});
            model.add_constraint("rsahi" + sfx, a2, Sense::Ge, -T);
            LinExpr b1;
            b1.terms.push_back({t2[static_cast<size_t>(r1)], 1.0});
            b1.terms.push_back({t1[static_cast<size_t>(r2)], -1.0});
            b1.terms.push_back({b, -(T + separation)});
            model.add_constraint("rsblo" + sfx, b1, Sense::Le, -separation);
            LinExpr b2;
            b2.terms.push_back({t2[static_cast<size_t>(r1)], 1.0});
            b2.terms.push_back({t1[static_cast<size_t>(r2)], -1.0});
            b2.terms.push_back({b, -T});
            model.add_constraint("rsbhi" + sfx, b2, Sense::Ge, -T);

            for (int bb = 0; bb < budget; ++bb) {
                LinExpr pair;
                pair.terms.push_back({assign.at({bb, r1}), 1.0});
                pair.terms.push_back({assign.at({bb, r2}), 1.0});
                pair.terms.push_back({a, 0.5});
                pair.terms.push_back({b, 0.5});
                model.add_constraint("rspair_b" + id(bb) + sfx, pair, Sense::Le, 5.0 / 2.0);
            }
        }
    // Final return explicitly before the end of operations.
    for (int m : vehicles) {
        int last = -1;
        for (int r = 0; r < R; ++r)
            if (subroutes[static_cast<size_t>(r)].vehicle == m) last = r;
        if (last < 0) continue;
        LinExpr row;
        row.terms.push_back({t2[static_cast<size_t>(last)], 1.0});
        model.add_constraint("horizon_m" + id(m), row, Sense::Le, T);
    }

    model.set_objective({}); // pure feasibility
    return model;
}

MilpModel build_rerouting_milp(const ExpandedGraph& ge, double eta1, double eta2,
                               const std::vector<TimeInterval>& infeasible, double horizon,
                               double separation) {
    MilpModel model;
    const double T = horizon;
    const auto ord = ordinary_edges(ge);
    const auto duplicates = ge.customer_duplicates();

    std::vector<int> x;
    for (int e = 0; e < static_cast<int>(ge.edges.size()); ++e) {
        VarTag tag;
        tag.kind = VarTag::RouteEdge;
        tag.vehicle = 0;
        tag.edge = e;
        x.push_back(model.add_variable("x_e" + id(e), VarKind::Binary, 0, 1, tag));
    }
    std::map<NodeId, int> y;
    for (NodeId i : duplicates) {
        VarTag tag;
        tag.kind = VarTag::Serve;
        tag.vehicle = 0;
        tag.node = i;
        y[i] = model.add_variable("y_n" + id(i), VarKind::Binary, 0, 1, tag);
    }
    std::vector<int> t;
    for (NodeId i = 0; i < ge.node_count(); ++i) {
        VarTag tag;
        tag.kind = VarTag::Timestamp;
        tag.vehicle = 0;
        tag.node = i;
        t.push_back(model.add_variable("t_n" + id(i), VarKind::Continuous, 0, T, tag));
    }

    for (NodeId i = 0; i < ge.node_count(); ++i) {
        if (i == ge.source || i == ge.sink) continue;
        if (ge.out[static_cast<size_t>(i)].empty() && ge.in[static_cast<size_t>(i)].empty())
            continue;
        LinExpr flow;
        for (int e : ge.out[static_cast<size_t>(i)])
            flow.terms.push_back({x[static_cast<size_t>(e)], 1.0});
        for (int e : ge.in[static_cast<size_t>(i)])
            flow.terms.push_back({x[static_cast<size_t>(e)], -1.0});
        model.add_constraint("flow_n" + id(i), flow, Sense::Eq, 0.0);
        LinExpr cap;
        for (int e : ge.out[static_cast<size_t>(i)])
            cap.terms.push_back({x[static_cast<size_t>(e)], 1.0});
        if (!cap.terms.empty())
            model.add_constraint("visitcap_n" + id(i), cap, Sense::Le, 1.0);
    }
    {
        LinExpr srcsink;
        for (int e : ge.out[static_cast<size_t>(ge.source)])
            srcsink.terms.push_back({x[static_cast<size_t>(e)], 1.0});
        for (int e : ge.in[static_cast<size_t>(ge.sink)])
            srcsink.terms.push_back({x[static_cast<size_t>(e)], -1.0});
        model.add_constraint("srcsink", srcsink, Sense::Eq, 0.0);
        LinExpr once;
        for (int e : ge.out[static_cast<size_t>(ge.source)])
            once.terms.push_back({x[static_cast<size_t>(e)], 1.0});
        model.add_constraint("dispatchcap", once, Sense::Le, 1.0);
    }
    for (NodeId c : ge.customers_base) {
        LinExpr serve;
        for (NodeId i : ge.column_of(c)) serve.terms.push_back({y.at(i), 1.0});
        model.add_constraint("serve_c" + id(c), serve, Sense::Eq, 1.0);
    }
    for (NodeId i : duplicates) {
        LinExpr vs;
        vs.terms.push_back({y.at(i), 1.0});
        for (int e : ge.in[static_cast<size_t>(i)])
            vs.terms.push_back({x[static_cast<size_t>(e)], -1.0});
        model.add_constraint("visitserve_n" + id(i), vs, Sense::Le, 0.0);
    }
    for (int e = 0; e < static_cast<int>(ge.edges.size()); ++e) {
        const auto& ed = ge.edges[static_cast<size_t>(e)];
        if (ed.kind != ExpEdgeKind::Dummy || ed.dummy_customer < 0) continue;
        LinExpr tr;
        tr.terms.push_back({x[static_cast<size_t>(e)], 1.0});
        tr.terms.push_back({y.at(ed.tail), -1.0});
        model.add_constraint("transition_e" + id(e), tr, Sense::Le, 0.0);
    }
    for (int e = 0; e < static_cast<int>(ge.edges.size()); ++e) {
        const auto& ed = ge.edges[static_cast<size_t>(e)];
        LinExpr lo;
        lo.terms.push_back({t[static_cast<size_t>(ed.head)], 1.0});
        lo.terms.push_back({t[static_cast<size_t>(ed.tail)], -1.0});
        lo.terms.push_back({x[static_cast<size_t>(e)], -T});
        model.add_constraint("mtz_e" + id(e), lo, Sense::Ge, ed.time - T);
    }
    {
        LinExpr ret;
        ret.terms.push_back({t[static_cast<size_t>(ge.sink)], 1.0});
        ret.terms.push_back({t[static_cast<size_t>(ge.source)], -1.0});
        for (int e = 0; e < static_cast<int>(ge.edges.size()); ++e) {
            double dt = ge.edges[static_cast<size_t>(e)].time;
            if (dt != 0.0) ret.terms.push_back({x[static_cast<size_t>(e)], -dt});
        }
        model.add_constraint("return", ret, Sense::Eq, 0.0);
    }

    // No ordinary traversal may overlap an exhausted-budget interval.
    for (int q = 0; q < static_cast<int>(infeasible.size()); ++q) {
        const TimeInterval& iv = infeasible[static_cast<size_t>(q)];
        for (int e : ord) {
            const auto& ed = ge.edges[static_cast<size_t>(e)];
            std::string sfx = "_q" + id(q) + "_e" + id(e);
            VarTag ta;
            ta.kind = VarTag::AlphaInd;
            ta.edge = e;
            ta.interval = q;
            int a = model.add_variable("al" + sfx, VarKind::Binary, 0, 1, ta);
            VarTag tb = ta;
            tb.kind = VarTag::BetaInd;
            int b = model.add_variable("be" + sfx, VarKind::Binary, 0, 1, tb);

            LinExpr a1;
            a1.terms.push_back({t[static_cast<size_t>(ed.head)], 1.0});
            a1.terms.push_back({a, -(T + separation)});
            model.add_constraint("alo" + sfx, a1, Sense::Le, iv.lo - separation);
            LinExpr a2;
            a2.terms.push_back({t[static_cast<size_t>(ed.head)], 1.0});
            a2.terms.push_back({a, -T});
            model.add_constraint("ahi" + sfx, a2, Sense::Ge, iv.lo - T);
            LinExpr b1;
            b1.terms.push_back({t[static_cast<size_t>(ed.tail)], 1.0});
            b1.terms.push_back({b, T + separation});
            model.add_constraint("blo" + sfx, b1, Sense::Ge, iv.hi + separation);
            LinExpr b2;
            b2.terms.push_back({t[static_cast<size_t>(ed.tail)], 1.0});
            b2.terms.push_back({b, T});
            model.add_constraint("bhi" + sfx, b2, Sense::Le, iv.hi + T);
            LinExpr avoid;
            avoid.terms.push_back({a, 1.0});
            avoid.terms.push_back({b, 1.0});
            avoid.terms.push_back({x[static_cast<size_t>(e)], 1.0});
            model.add_constraint("avoid" + sfx, avoid, Sense::Le, 2.0);
        }
    }

    LinExpr obj;
    for (int e = 0; e < static_cast<int>(ge.edges.size()); ++e) {
        const auto& ed = ge.edges[static_cast<size_t>(e)];
        if (ed.kind == ExpEdgeKind::Dummy) continue;
        obj.terms.push_back(
            {x[static_cast<size_t>(e)], (ed.kind == ExpEdgeKind::Av ? eta1 : eta2) * ed.cost});
    }
    model.set_objective(obj);
    return model;
}

} // namespace vrpsa
