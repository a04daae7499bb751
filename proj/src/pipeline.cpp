#include "vrpsa/pipeline.hpp"

#include "vrpsa/expand.hpp"
#include "vrpsa/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <sstream>

namespace vrpsa {

namespace {

constexpr double kEps = 1e-9;
// Relative gap demanded between sub-routes that share a controller, so that
// the closed-interval checker cannot see them as simultaneous.
constexpr double kSeparationFactor = 1e-7;

std::string csv_row(const std::string& step, const std::string& vehicle,
                    const std::string& detail, const std::string& value) {
    return step + "," + vehicle + "," + detail + "," + value;
}

// Metric closure over the required nodes of a pruned network.
struct Closure {
    const PrunedNetwork* pn = nullptr;
    WeightMode mode;
    std::vector<NodeId> required;                         // compact ids, depot first
    std::map<NodeId, std::vector<std::pair<double, double>>> to_dist; // target -> distances

    double d(NodeId a, NodeId b) const {
        if (a == b) return 0.0;
        return to_dist.at(b)[static_cast<size_t>(a)].first;
    }
    PathResult path(NodeId a, NodeId b) const {
        auto p = lex_min_path(pn->graph, a, b, mode, to_dist.at(b));
        if (!p) throw Disconnected("pruned network lost a required connection");
        return *p;
    }
};

Closure build_closure(const PrunedNetwork& pn, const std::vector<NodeId>& customers_c,
                      NodeId depot_c, const WeightMode& mode) {
    Closure cl;
    cl.pn = &pn;
    cl.mode = mode;
    cl.required.push_back(depot_c);
    for (NodeId c : customers_c) cl.required.push_back(c);
    for (NodeId r : cl.required) cl.to_dist[r] = pair_distances(pn.graph, r, mode, true);
    return cl;
}

struct CwRoutes {
    std::vector<std::vector<int>> seqs; // indices into the customer list
    std::vector<double> loads;
};

double seq_cost(const Closure& cl, const std::vector<NodeId>& cust, const std::vector<int>& seq) {
    NodeId depot = cl.required.front();
    if (seq.empty()) return 0.0;
    double c = cl.d(depot, cust[static_cast<size_t>(seq.front())]);
    for (size_t i = 0; i + 1 < seq.size(); ++i)
        c += cl.d(cust[static_cast<size_t>(seq[i])], cust[static_cast<size_t>(seq[i + 1])]);
    c += cl.d(cust[static_cast<size_t>(seq.back())], depot);
    return c;
}

// Parallel savings construction followed by relocate/swap/2-opt descent.
CwRoutes clarke_wright(const Closure& cl, const std::vector<NodeId>& cust,
                       const std::vector<double>& demands, double capacity, unsigned seed) {
    const int n = static_cast<int>(cust.size());
    const NodeId depot = cl.required.front();
    CwRoutes cw;
    std::vector<int> route_of(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        cw.seqs.push_back({i});
        cw.loads.push_back(demands[static_cast<size_t>(i)]);
        route_of[static_cast<size_t>(i)] = i;
    }

    struct Saving {
        double s;
        int i, j;
    };
    std::vector<Saving> savings;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            if (i == j) continue;
            double s = cl.d(cust[static_cast<size_t>(i)], depot) +
                       cl.d(depot, cust[static_cast<size_t>(j)]) -
                       cl.d(cust[static_cast<size_t>(i)], cust[static_cast<size_t>(j)]);
            savings.push_back({s, i, j});
        }
    std::mt19937 rng(seed);
    std::shuffle(savings.begin(), savings.end(), rng);
    std::stable_sort(savings.begin(), savings.end(),
                     [](const Saving& a, const Saving& b) { return a.s > b.s; });

    for (const Saving& sv : savings) {
        if (sv.s <= kEps) break;
        int ri = route_of[static_cast<size_t>(sv.i)];
        int rj = route_of[static_cast<size_t>(sv.j)];
        if (ri == rj) continue;
        if (cw.seqs[static_cast<size_t>(ri)].back() != sv.i) continue;
        if (cw.seqs[static_cast<size_t>(rj)].front() != sv.j) continue;
        if (cw.loads[static_cast<size_t>(ri)] + cw.loads[static_cast<size_t>(rj)] >
            capacity + kEps)
            continue;
        for (int c : cw.seqs[static_cast<size_t>(rj)]) {
            cw.seqs[static_cast<size_t>(ri)].push_back(c);
            route_of[static_cast<size_t>(c)] = ri;
        }
        cw.loads[static_cast<size_t>(ri)] += cw.loads[static_cast<size_t>(rj)];
        cw.seqs[static_cast<size_t>(rj)].clear();
        cw.loads[static_cast<size_t>(rj)] = 0.0;
    }
    cw.seqs.erase(std::remove_if(cw.seqs.begin(), cw.seqs.end(),
                                 [](const std::vector<int>& s) { return s.empty(); }),
                  cw.seqs.end());
    cw.loads.clear();
    for (const auto& s : cw.seqs) {
        double load = 0.0;
        for (int c : s) load += demands[static_cast<size_t>(c)];
        cw.loads.push_back(load);
    }
    return cw;
}

void local_search(const Closure& cl, const std::vector<NodeId>& cust,
                  const std::vector<double>& demands, double capacity, CwRoutes& cw) {
    auto cost_of = [&](const std::vector<int>& s) { return seq_cost(cl, cust, s); };
    bool improved = true;
    int guard = 0;
    while (improved && ++guard < 5000) {
        improved = false;
        // Relocate one customer anywhere.
        for (size_t r1 = 0; r1 < cw.seqs.size() && !improved; ++r1)
            for (size_t p1 = 0; p1 < cw.seqs[r1].size() && !improved; ++p1)
                for (size_t r2 = 0; r2 < cw.seqs.size() && !improved; ++r2) {
                    int c = cw.seqs[r1][p1];
                    if (r2 != r1 &&
                        cw.loads[r2] + demands[static_cast<size_t>(c)] > capacity + kEps)
                        continue;
                    for (size_t p2 = 0; p2 <= cw.seqs[r2].size() && !improved; ++p2) {
                        if (r1 == r2 && (p2 == p1 || p2 == p1 + 1)) continue;
                        auto s1 = cw.seqs[r1];
                        auto s2 = cw.seqs[r2];
                        double before = cost_of(s1) + (r1 == r2 ? 0.0 : cost_of(s2));
                        auto& src = s1;
                        auto& dst = r1 == r2 ? s1 : s2;
                        src.erase(src.begin() + static_cast<long>(p1));
                        size_t at = p2;
                        if (r1 == r2 && p2 > p1) --at;
                        dst.insert(dst.begin() + static_cast<long>(at), c);
                        double after = cost_of(s1) + (r1 == r2 ? 0.0 : cost_of(s2));
                        if (after < before - 1e-9) {
                            cw.seqs[r1] = s1;
                            if (r1 != r2) cw.seqs[r2] = s2;
                            if (r1 != r2) {
                                cw.loads[r1] -= demands[static_cast<size_t>(c)];
                                cw.loads[r2] += demands[static_cast<size_t>(c)];
                            }
                            improved = true;
                        }
                    }
                }
        if (improved) continue;
        // Swap customers across routes.
        for (size_t r1 = 0; r1 < cw.seqs.size() && !improved; ++r1)
            for (size_t r2 = r1 + 1; r2 < cw.seqs.size() && !improved; ++r2)
                for (size_t p1 = 0; p1 < cw.seqs[r1].size() && !improved; ++p1)
                    for (size_t p2 = 0; p2 < cw.seqs[r2].size() && !improved; ++p2) {
                        int c1 = cw.seqs[r1][p1];
                        int c2 = cw.seqs[r2][p2];
                        double d1 = demands[static_cast<size_t>(c1)];
                        double d2 = demands[static_cast<size_t>(c2)];
                        if (cw.loads[r1] - d1 + d2 > capacity + kEps) continue;
                        if (cw.loads[r2] - d2 + d1 > capacity + kEps) continue;
                        auto s1 = cw.seqs[r1];
                        auto s2 = cw.seqs[r2];
                        double before = cost_of(s1) + cost_of(s2);
                        std::swap(s1[p1], s2[p2]);
                        double after = cost_of(s1) + cost_of(s2);
                        if (after < before - 1e-9) {
                            cw.seqs[r1] = s1;
                            cw.seqs[r2] = s2;
                            cw.loads[r1] += d2 - d1;
                            cw.loads[r2] += d1 - d2;
                            improved = true;
                        }
                    }
        if (improved) continue;
        // Intra-route segment reversal.
        for (size_t r = 0; r < cw.seqs.size() && !improved; ++r) {
            auto& s = cw.seqs[r];
            for (size_t i = 0; i + 1 < s.size() && !improved; ++i)
                for (size_t j = i + 1; j < s.size() && !improved; ++j) {
                    auto cand = s;
                    std::reverse(cand.begin() + static_cast<long>(i),
                                 cand.begin() + static_cast<long>(j) + 1);
                    if (cost_of(cand) < cost_of(s) - 1e-9) {
                        s = cand;
                        improved = true;
                    }
                }
        }
        cw.seqs.erase(std::remove_if(cw.seqs.begin(), cw.seqs.end(),
                                     [](const std::vector<int>& s) { return s.empty(); }),
                      cw.seqs.end());
        while (cw.loads.size() > cw.seqs.size()) cw.loads.pop_back();
    }
}

} // namespace

Phase1Result phase1_routes(const VrpSaInstance& inst, FleetMode mode, unsigned seed) {
    Phase1Result out;
    if (inst.customers.empty()) return out;

    PrunedNetwork pn =
        prune_network(inst.network, inst.customers, inst.depot, inst.eta1, inst.eta2);
    NodeId depot_c = pn.to_compact(inst.depot);
    std::vector<NodeId> cust_c;
    for (NodeId c : inst.customers) cust_c.push_back(pn.to_compact(c));

    const WeightMode av_mode = WeightMode::av(inst.eta1, inst.eta2);
    const WeightMode hdv_mode = WeightMode::hdv();
    const WeightMode& build_mode = mode == FleetMode::AvOnly ? av_mode : hdv_mode;
    Closure cl = build_closure(pn, cust_c, depot_c, build_mode);

    CwRoutes cw = clarke_wright(cl, cust_c, inst.demands, inst.capacity, seed);
    local_search(cl, cust_c, inst.demands, inst.capacity, cw);

    const int route_count = static_cast<int>(cw.seqs.size());
    int fleet_limit = mode == FleetMode::AvOnly    ? inst.av_count
                      : mode == FleetMode::HdvOnly ? inst.hdv_count
                                                   : inst.av_count + inst.hdv_count;
    if (route_count > fleet_limit)
        throw FleetExhausted("needs " + std::to_string(route_count) + " vehicles, only " +
                             std::to_string(fleet_limit) + " available");

    // Mixed mode hands the routes with the highest autonomous saving to AVs.
    std::vector<int> order(cw.seqs.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::optional<Closure> cl_alt;
    if (mode == FleetMode::Mixed) {
        cl_alt = build_closure(pn, cust_c, depot_c, av_mode);
        std::vector<double> saving(cw.seqs.size());
        for (size_t i = 0; i < cw.seqs.size(); ++i)
            saving[i] = seq_cost(cl, cust_c, cw.seqs[i]) - seq_cost(*cl_alt, cust_c, cw.seqs[i]);
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
            return saving[static_cast<size_t>(a)] > saving[static_cast<size_t>(b)];
        });
    }

    int av_used = 0, hdv_used = 0;
    for (int oi = 0; oi < route_count; ++oi) {
        const auto& seq = cw.seqs[static_cast<size_t>(order[static_cast<size_t>(oi)])];
        VehicleRoute route;
        bool is_av = mode == FleetMode::AvOnly ||
                     (mode == FleetMode::Mixed && av_used < inst.av_count);
        route.type = is_av ? VehicleType::Av : VehicleType::Hdv;
        route.vehicle = is_av ? av_used++ : hdv_used++;
        const Closure& expand_cl =
            route.type == VehicleType::Av ? (cl_alt ? *cl_alt : cl) : cl;

        std::vector<NodeId> stops{depot_c};
        for (int c : seq) stops.push_back(cust_c[static_cast<size_t>(c)]);
        stops.push_back(depot_c);

        route.nodes.push_back(pn.to_original(depot_c));
        route.times.push_back(0.0);
        double clock = 0.0;
        for (size_t leg = 0; leg + 1 < stops.size(); ++leg) {
            PathResult leg_path = expand_cl.path(stops[leg], stops[leg + 1]);
            for (size_t k = 1; k < leg_path.nodes.size(); ++k) {
                int e = pn.graph.find_edge(leg_path.nodes[k - 1], leg_path.nodes[k]);
                const RoadEdge& ed = pn.graph.edge(e);
                clock += ed.travel_time;
                route.nodes.push_back(pn.to_original(leg_path.nodes[k]));
                route.times.push_back(clock);
            }
            route.cost += leg_path.cost;
        }
        for (int c : seq) route.served.push_back(pn.to_original(cust_c[static_cast<size_t>(c)]));
        out.total_cost += route.cost;
        out.routes.push_back(std::move(route));
    }
    return out;
}

std::vector<SubRoute> derive_subroutes(const VehicleRoute& route, const RoadNetwork& net) {
    std::vector<SubRoute> subs;
    for (size_t k = 0; k + 1 < route.nodes.size(); ++k) {
        int e = net.find_edge(route.nodes[k], route.nodes[k + 1]);
        if (e < 0)
            throw NetworkError("route uses missing edge " + std::to_string(route.nodes[k]) +
                               "->" + std::to_string(route.nodes[k + 1]));
        const RoadEdge& ed = net.edge(e);
        double enter = route.times[k];
        double exit = route.times[k + 1];
        if (!subs.empty() && subs.back().kind == ed.type) {
            SubRoute& last = subs.back();
            last.t_exit = exit;
            last.duration += ed.travel_time;
            last.edges.push_back(e);
        } else {
            SubRoute sr;
            sr.vehicle = route.vehicle;
            sr.kind = ed.type;
            sr.t_enter = enter;
            sr.t_exit = exit;
            sr.duration = ed.travel_time;
            sr.edges.push_back(e);
            subs.push_back(sr);
        }
    }
    // Aggregated adjustment bounds weight each segment by its travel time.
    for (SubRoute& sr : subs) {
        double lo = 0.0, hi = 0.0;
        for (int e : sr.edges) {
            const RoadEdge& ed = net.edge(e);
            lo += ed.gamma_lo * ed.travel_time;
            hi += ed.gamma_hi * ed.travel_time;
        }
        sr.gamma_lo = sr.duration > 0 ? lo / sr.duration : 1.0;
        sr.gamma_hi = sr.duration > 0 ? hi / sr.duration : 1.0;
    }
    return subs;
}

BudgetReport check_budget(const std::vector<TimeInterval>& strips, int budget) {
    BudgetReport report;
    report.max_usage = 0;
    if (strips.empty()) return report;

    std::vector<double> points;
    for (const auto& s : strips) {
        points.push_back(s.lo);
        points.push_back(s.hi);
    }
    std::sort(points.begin(), points.end());
    points.erase(std::unique(points.begin(), points.end()), points.end());

    // Closed counts at every event point and on every open gap between
    // consecutive points.
    auto count_at = [&](double t) {
        int c = 0;
        for (const auto& s : strips)
            if (s.lo <= t && t <= s.hi) ++c;
        return c;
    };
    auto count_gap = [&](double lo, double hi) {
        int c = 0;
        for (const auto& s : strips)
            if (s.lo <= lo && hi <= s.hi) ++c;
        return c;
    };

    struct Piece {
        double lo, hi;
        int count;
    };
    std::vector<Piece> pieces;
    for (size_t i = 0; i < points.size(); ++i) {
        pieces.push_back({points[i], points[i], count_at(points[i])});
        if (i + 1 < points.size())
            pieces.push_back({points[i], points[i + 1], count_gap(points[i], points[i + 1])});
    }
    for (const Piece& p : pieces) report.max_usage = std::max(report.max_usage, p.count);
    report.feasible = report.max_usage <= budget;

    // Merge consecutive overloaded pieces into maximal windows.
    for (size_t i = 0; i < pieces.size();) {
        if (pieces[i].count <= budget) {
            ++i;
            continue;
        }
        BudgetViolation v;
        v.window = {pieces[i].lo, pieces[i].hi};
        v.usage = pieces[i].count;
        size_t j = i + 1;
        while (j < pieces.size() && pieces[j].count > budget) {
            v.window.hi = pieces[j].hi;
            v.usage = std::max(v.usage, pieces[j].count);
            ++j;
        }
        report.violations.push_back(v);
        i = j;
    }
    return report;
}

namespace {

std::vector<TimeInterval> ordinary_strips(const std::vector<VehicleRoute>& av_routes,
                                          const RoadNetwork& net) {
    std::vector<TimeInterval> strips;
    for (const auto& r : av_routes)
        for (const auto& sr : derive_subroutes(r, net))
            if (sr.kind == RoadType::Ordinary) strips.push_back({sr.t_enter, sr.t_exit});
    return strips;
}

} // namespace

BudgetReport check_budget(const std::vector<VehicleRoute>& av_routes, const RoadNetwork& net,
                          int budget) {
    return check_budget(ordinary_strips(av_routes, net), budget);
}

namespace {

VehicleRoute shifted(const VehicleRoute& route, double delta) {
    VehicleRoute out = route;
    for (double& t : out.times) t += delta;
    return out;
}

// First-fit departure stagger, one of several deterministic orderings.
std::optional<std::vector<VehicleRoute>> greedy_stagger(
    const std::vector<VehicleRoute>& av_routes, const RoadNetwork& net, int budget,
    double horizon, const std::vector<size_t>& order) {
    const double nudge = kSeparationFactor * std::max(horizon, 1.0);
    std::vector<VehicleRoute> placed;
    std::vector<TimeInterval> placed_strips;
    for (size_t idx : order) {
        const VehicleRoute& r = av_routes[idx];
        std::vector<TimeInterval> own;
        for (const auto& sr : derive_subroutes(r, net))
            if (sr.kind == RoadType::Ordinary) own.push_back({sr.t_enter, sr.t_exit});

        std::vector<double> candidates{0.0};
        for (const auto& p : placed_strips)
            for (const auto& o : own)
                if (p.hi + nudge - o.lo > 0) candidates.push_back(p.hi + nudge - o.lo);
        std::sort(candidates.begin(), candidates.end());

        bool done = false;
        for (double delta : candidates) {
            if (r.return_time() + delta > horizon + kEps) break;
            std::vector<TimeInterval> trial = placed_strips;
            for (const auto& o : own) trial.push_back({o.lo + delta, o.hi + delta});
            if (!check_budget(trial, budget).feasible) continue;
            placed.push_back(shifted(r, delta));
            placed_strips = std::move(trial);
            done = true;
            break;
        }
        if (!done) return std::nullopt;
    }
    // Restore the input order.
    std::vector<VehicleRoute> out(av_routes.size());
    std::vector<bool> set_(av_routes.size(), false);
    for (size_t k = 0; k < order.size(); ++k) {
        out[order[k]] = placed[k];
        set_[order[k]] = true;
    }
    for (bool b : set_)
        if (!b) return std::nullopt;
    return out;
}

// Distribute a sub-route's solved duration over its segments within the
// per-segment adjustment windows.
std::vector<double> distribute_duration(const RoadNetwork& net, const SubRoute& sr,
                                        double total) {
    std::vector<double> durs;
    double acc = 0.0;
    for (int e : sr.edges) {
        const RoadEdge& ed = net.edge(e);
        durs.push_back(ed.gamma_lo * ed.travel_time);
        acc += durs.back();
    }
    double slack = total - acc;
    for (size_t k = 0; k < sr.edges.size() && slack > kEps; ++k) {
        const RoadEdge& ed = net.edge(sr.edges[k]);
        double room = (ed.gamma_hi - ed.gamma_lo) * ed.travel_time;
        double take = std::min(room, slack);
        durs[k] += take;
        slack -= take;
    }
    return durs;
}

} // namespace

std::optional<std::vector<VehicleRoute>> reschedule(const std::vector<VehicleRoute>& av_routes,
                                                    const RoadNetwork& net, int budget,
                                                    double horizon, bool flexible) {
    bool returns_ok = true;
    for (const auto& r : av_routes)
        if (r.return_time() > horizon + kEps) returns_ok = false;
    if (returns_ok && check_budget(av_routes, net, budget).feasible) {
        return av_routes; // zero shifts
    }
    if (!flexible && !returns_ok) return std::nullopt; // shifts cannot shorten a route

    // Sub-routes per vehicle, in travel order, vehicles in input order.
    std::vector<SubRoute> subs;
    std::vector<std::vector<size_t>> of_route(av_routes.size());
    for (size_t i = 0; i < av_routes.size(); ++i) {
        for (auto& sr : derive_subroutes(av_routes[i], net)) {
            sr.vehicle = static_cast<int>(i); // dense ids for the model
            of_route[i].push_back(subs.size());
            subs.push_back(sr);
        }
    }

    const double sep = kSeparationFactor * std::max(horizon, 1.0);
    auto rebuild = [&](const SolveResult& res,
                       const MilpModel& model) -> std::optional<std::vector<VehicleRoute>> {
        std::vector<VehicleRoute> out = av_routes;
        std::map<int, double> depart;
        std::map<int, std::pair<double, double>> window; // subroute -> (t1, t2)
        for (int v = 0; v < model.var_count(); ++v) {
            const VarTag& tag = model.variable(v).tag;
            if (tag.kind == VarTag::Departure) depart[tag.vehicle] = res.value(v);
            if (tag.kind == VarTag::SubrouteStart) window[tag.subroute].first = res.value(v);
            if (tag.kind == VarTag::SubrouteEnd) window[tag.subroute].second = res.value(v);
        }
        for (size_t i = 0; i < av_routes.size(); ++i) {
            double t0 = depart.count(static_cast<int>(i)) ? depart[static_cast<int>(i)] : 0.0;
            if (!flexible) {
                double delta = t0 - av_routes[i].times.front();
                out[i] = shifted(av_routes[i], delta);
                continue;
            }
            // Re-time each sub-route to its solved window.
            VehicleRoute& r = out[i];
            size_t node_at = 0;
            double clock = t0;
            r.times[0] = clock;
            for (size_t si : of_route[i]) {
                const SubRoute& sr = subs[si];
                double target = window.at(static_cast<int>(si)).second -
                                window.at(static_cast<int>(si)).first;
                auto durs = distribute_duration(net, sr, target);
                for (size_t k = 0; k < durs.size(); ++k) {
                    clock += durs[k];
                    r.times[node_at + k + 1] = clock;
                }
                node_at += durs.size();
            }
        }
        for (const auto& r : out)
            if (r.return_time() > horizon + kEps) return std::nullopt;
        if (!check_budget(out, net, budget).feasible) return std::nullopt;
        return out;
    };

    // Exact feasibility program when it fits the built-in solver; the
    // abutting variant keeps consecutive sub-routes joined so the solution
    // maps back to one concrete schedule per vehicle.
    MilpModel probe = build_rescheduling_milp(subs, budget, horizon, flexible, sep);
    if (probe.binary_count() <= kBuiltinBinaryCap) {
        for (double margin : {sep, 0.0}) {
            MilpModel model = build_rescheduling_milp(subs, budget, horizon, flexible, margin);
            if (flexible) {
                // Join consecutive sub-routes explicitly.
                for (size_t i = 0; i < av_routes.size(); ++i) {
                    for (size_t k = 0; k + 1 < of_route[i].size(); ++k) {
                        int prev = static_cast<int>(of_route[i][k]);
                        int next = static_cast<int>(of_route[i][k + 1]);
                        int t2_prev = -1, t1_next = -1;
                        for (int v = 0; v < model.var_count(); ++v) {
                            const VarTag& tag = model.variable(v).tag;
                            if (tag.kind == VarTag::SubrouteEnd && tag.subroute == prev)
                                t2_prev = v;
                            if (tag.kind == VarTag::SubrouteStart && tag.subroute == next)
                                t1_next = v;
                        }
                        LinExpr join;
                        join.terms.push_back({t1_next, 1.0});
                        join.terms.push_back({t2_prev, -1.0});
                        model.add_constraint("abut_r" + std::to_string(prev) + "_r" +
                                                 std::to_string(next),
                                             join, Sense::Eq, 0.0);
                    }
                }
            }
            SolveResult res = builtin_solve(model, 300.0);
            if (res.status == SolveStatus::Optimal || res.status == SolveStatus::Feasible) {
                auto out = rebuild(res, model);
                if (out) return out;
            }
            if (res.status == SolveStatus::Infeasible && margin == 0.0) return std::nullopt;
        }
        if (!flexible) return std::nullopt;
    }

    // Model too large (or flexible retiming failed): first-fit departure
    // staggering over a few deterministic orderings.
    std::vector<size_t> base(av_routes.size());
    for (size_t i = 0; i < base.size(); ++i) base[i] = i;
    std::vector<std::vector<size_t>> orders{base};
    {
        auto by_ord = base;
        std::vector<double> ord_time(av_routes.size(), 0.0);
        for (size_t i = 0; i < av_routes.size(); ++i)
            for (const auto& sr : derive_subroutes(av_routes[i], net))
                if (sr.kind == RoadType::Ordinary) ord_time[i] += sr.duration;
        std::stable_sort(by_ord.begin(), by_ord.end(),
                         [&](size_t a, size_t b) { return ord_time[a] > ord_time[b]; });
        orders.push_back(by_ord);
        auto by_ret = base;
        std::stable_sort(by_ret.begin(), by_ret.end(), [&](size_t a, size_t b) {
            return av_routes[a].return_time() > av_routes[b].return_time();
        });
        orders.push_back(by_ret);
    }
    if (!flexible || returns_ok) {
        for (const auto& order : orders) {
            auto out = greedy_stagger(av_routes, net, budget, horizon, order);
            if (out) return out;
        }
    }
    return std::nullopt;
}

double route_value(const VehicleRoute& route, const RoadNetwork& net, double eta1, double eta2) {
    double c1 = 0.0, c2 = 0.0;
    for (size_t k = 0; k + 1 < route.nodes.size(); ++k) {
        int e = net.find_edge(route.nodes[k], route.nodes[k + 1]);
        if (e < 0) throw NetworkError("route uses a missing edge");
        const RoadEdge& ed = net.edge(e);
        if (ed.type == RoadType::AvEnabled)
            c1 += eta1 * ed.cost;
        else
            c2 += eta2 * ed.cost;
    }
    return (1.0 - eta1) / eta1 * c1 + (1.0 - eta2) / eta2 * c2;
}

std::vector<TimeInterval> infeasible_intervals(const std::vector<VehicleRoute>& accepted,
                                               const RoadNetwork& net, int budget,
                                               double horizon) {
    std::vector<double> points{0.0, horizon};
    std::vector<TimeInterval> strips;
    for (const auto& r : accepted)
        for (const auto& sr : derive_subroutes(r, net)) {
            points.push_back(sr.t_enter);
            points.push_back(sr.t_exit);
            if (sr.kind == RoadType::Ordinary) strips.push_back({sr.t_enter, sr.t_exit});
        }
    std::sort(points.begin(), points.end());
    points.erase(std::unique(points.begin(), points.end()), points.end());

    std::vector<TimeInterval> result;
    for (size_t i = 0; i + 1 < points.size(); ++i) {
        double lo = points[i], hi = points[i + 1];
        if (lo >= horizon || !(hi > lo)) continue;
        int usage = 0;
        for (const auto& s : strips)
            if (s.lo <= lo && hi <= s.hi) ++usage;
        if (usage >= budget) result.push_back({lo, hi});
    }
    return result;
}

double tsp_upper_bound(const std::vector<NodeId>& customers, const VrpSaInstance& inst) {
    if (customers.empty()) throw std::invalid_argument("tsp_upper_bound needs customers");
    PrunedNetwork pn = prune_network(inst.network, customers, inst.depot, inst.eta1, inst.eta2);
    std::vector<NodeId> cust_c;
    for (NodeId c : customers) cust_c.push_back(pn.to_compact(c));
    Closure cl = build_closure(pn, cust_c, pn.to_compact(inst.depot), WeightMode::hdv());

    // Nearest neighbour, then 2-opt.
    std::vector<int> seq;
    std::vector<bool> used(cust_c.size(), false);
    NodeId at = cl.required.front();
    for (size_t step = 0; step < cust_c.size(); ++step) {
        int pick = -1;
        double best = std::numeric_limits<double>::infinity();
        for (size_t i = 0; i < cust_c.size(); ++i) {
            if (used[i]) continue;
            double d = cl.d(at, cust_c[i]);
            if (d < best) {
                best = d;
                pick = static_cast<int>(i);
            }
        }
        used[static_cast<size_t>(pick)] = true;
        seq.push_back(pick);
        at = cust_c[static_cast<size_t>(pick)];
    }
    bool improved = true;
    int guard = 0;
    while (improved && ++guard < 2000) {
        improved = false;
        for (size_t i = 0; i + 1 < seq.size() && !improved; ++i)
            for (size_t j = i + 1; j < seq.size() && !improved; ++j) {
                auto cand = seq;
                std::reverse(cand.begin() + static_cast<long>(i),
                             cand.begin() + static_cast<long>(j) + 1);
                if (seq_cost(cl, cust_c, cand) < seq_cost(cl, cust_c, seq) - 1e-9) {
                    seq = cand;
                    improved = true;
                }
            }
    }
    return seq_cost(cl, cust_c, seq);
}

RerouteResult reroute(const std::vector<VehicleRoute>& av_routes, const VrpSaInstance& inst,
                      const SolveConfig& config, std::vector<std::string>& trace) {
    RerouteResult out;
    const double sep = kSeparationFactor * std::max(inst.horizon, 1.0);

    std::vector<size_t> order(av_routes.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::vector<double> values(av_routes.size());
    for (size_t i = 0; i < av_routes.size(); ++i)
        values[i] = route_value(av_routes[i], inst.network, inst.eta1, inst.eta2);
    if (config.priority) {
        std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
            if (values[a] != values[b]) return values[a] > values[b];
            return av_routes[a].vehicle < av_routes[b].vehicle;
        });
    } else {
        std::mt19937 rng(config.seed);
        std::shuffle(order.begin(), order.end(), rng);
    }

    for (size_t idx : order) {
        const VehicleRoute& candidate = av_routes[idx];
        std::string vid = std::to_string(candidate.vehicle);
        std::string val = std::to_string(values[idx]);

        std::vector<VehicleRoute> with = out.routes;
        with.push_back(candidate);
        if (candidate.return_time() <= inst.horizon + kEps &&
            check_budget(with, inst.network, inst.budget).feasible) {
            out.routes.push_back(candidate);
            trace.push_back(csv_row("reroute_accept", vid, "value", val));
            continue;
        }

        // Ruin and recreate: rebuild this vehicle's tour around the windows
        // where the accepted schedules exhaust the budget.
        bool salvaged = false;
        if (!candidate.served.empty()) {
            auto intervals =
                infeasible_intervals(out.routes, inst.network, inst.budget, inst.horizon);
            PrunedNetwork pn = prune_network(inst.network, candidate.served, inst.depot,
                                             inst.eta1, inst.eta2);
            ExpandedGraph ge = expand_graph(pn, inst.layers, candidate.served, inst.depot);
            MilpModel model = build_rerouting_milp(ge, inst.eta1, inst.eta2, intervals,
                                                   inst.horizon, sep);
            if (model.binary_count() <= kBuiltinBinaryCap) {
                SolveResult res = builtin_solve(model, config.time_limit);
                if (res.status == SolveStatus::Optimal || res.status == SolveStatus::Feasible) {
                    double ub = tsp_upper_bound(candidate.served, inst);
                    if (res.objective + inst.fixed_cost_av <= ub + inst.fixed_cost_hdv + kEps) {
                        DecodedSolution dec = decode_solution(res, model, ge, inst);
                        if (dec.routes.size() == 1) {
                            VehicleRoute rebuilt;
                            rebuilt.vehicle = candidate.vehicle;
                            rebuilt.type = VehicleType::Av;
                            rebuilt.nodes = dec.routes[0].nodes;
                            rebuilt.times = dec.routes[0].times;
                            rebuilt.served = candidate.served;
                            rebuilt.cost = dec.routes[0].routing_cost;
                            std::vector<VehicleRoute> trial = out.routes;
                            trial.push_back(rebuilt);
                            if (rebuilt.return_time() <= inst.horizon + kEps &&
                                check_budget(trial, inst.network, inst.budget).feasible) {
                                out.routes.push_back(rebuilt);
                                trace.push_back(csv_row("reroute_rebuild", vid, "cost",
                                                        std::to_string(rebuilt.cost)));
                                salvaged = true;
                            }
                        }
                    }
                }
            }
        }
        if (!salvaged) {
            out.unserved.insert(out.unserved.end(), candidate.served.begin(),
                                candidate.served.end());
            trace.push_back(csv_row("reroute_drop", vid, "customers",
                                    std::to_string(candidate.served.size())));
        }
    }
    return out;
}

Solution solve_vrpsa(const VrpSaInstance& inst, const SolveConfig& config) {
    inst.validate_fields();
    Solution sol;
    sol.priority_used = config.priority;
    sol.trace.push_back("step,vehicle,detail,value");

    Phase1Result relaxed;
    try {
        relaxed = phase1_routes(inst, FleetMode::AvOnly, config.seed);
    } catch (const FleetExhausted&) {
        relaxed = phase1_routes(inst, FleetMode::Mixed, config.seed);
    }
    sol.f1 = relaxed.total_cost;
    std::vector<VehicleRoute> av_routes, phase1_hdv;
    for (auto& r : relaxed.routes)
        (r.type == VehicleType::Av ? av_routes : phase1_hdv).push_back(r);
    for (const auto& r : relaxed.routes)
        sol.trace.push_back(csv_row("phase1", std::to_string(r.vehicle), "cost",
                                    std::to_string(r.cost)));

    Phase1Result baseline = phase1_routes(inst, FleetMode::HdvOnly, config.seed);
    sol.f2 = baseline.total_cost;

    auto rescheduled =
        reschedule(av_routes, inst.network, inst.budget, inst.horizon, config.flexible);
    if (rescheduled) {
        sol.av_routes = *rescheduled;
        sol.rescheduled = true;
        sol.trace.push_back(csv_row("reschedule", "", "status", "ok"));
    } else {
        sol.trace.push_back(csv_row("reschedule", "", "status", "none"));
        RerouteResult rr = reroute(av_routes, inst, config, sol.trace);
        sol.av_routes = rr.routes;
        sol.fallback_customers = rr.unserved;
    }

    sol.hdv_routes = phase1_hdv;
    if (!sol.fallback_customers.empty()) {
        VrpSaInstance cover = inst;
        cover.customers = sol.fallback_customers;
        cover.demands.clear();
        for (NodeId c : cover.customers) cover.demands.push_back(inst.demand_of(c));
        cover.hdv_count = inst.hdv_count - static_cast<int>(phase1_hdv.size());
        cover.horizon = inst.horizon;
        Phase1Result fallback;
        try {
            fallback = phase1_routes(cover, FleetMode::HdvOnly, config.seed);
        } catch (const FleetExhausted& e) {
            throw PipelineInfeasible(std::string("fallback coverage exhausts the HDV fleet: ") +
                                     e.what());
        }
        int base_id = static_cast<int>(phase1_hdv.size());
        for (auto& r : fallback.routes) {
            r.vehicle += base_id;
            sol.trace.push_back(csv_row("fallback", std::to_string(r.vehicle), "cost",
                                        std::to_string(r.cost)));
            sol.hdv_routes.push_back(r);
        }
    }

    sol.fP = 0.0;
    for (const auto& r : sol.av_routes) sol.fP += r.cost;
    for (const auto& r : sol.hdv_routes) sol.fP += r.cost;
    sol.flexible = config.flexible;
    sol.report = validate(inst, sol);
    sol.trace.push_back(csv_row("done", "", "fP", std::to_string(sol.fP)));
    return sol;
}

FeasibilityReport validate(const VrpSaInstance& inst, const Solution& sol) {
    FeasibilityReport rep;
    auto fail = [&](const std::string& why) {
        rep.pass = false;
        rep.reasons.push_back(why);
    };

    std::map<NodeId, int> service_count;
    for (NodeId c : inst.customers) service_count[c] = 0;
    auto check_route = [&](const VehicleRoute& r) {
        if (r.nodes.empty()) {
            fail("empty route");
            return;
        }
        if (r.nodes.front() != inst.depot || r.nodes.back() != inst.depot)
            fail("route does not start and end at the depot");
        if (r.nodes.size() != r.times.size()) {
            fail("route and schedule lengths differ");
            return;
        }
        double load = 0.0;
        for (NodeId c : r.served) {
            auto it = service_count.find(c);
            if (it == service_count.end()) {
                fail("route serves unknown customer " + std::to_string(c));
                continue;
            }
            ++it->second;
            load += inst.demand_of(c);
        }
        if (load > inst.capacity + 1e-6) fail("route exceeds capacity");
        if (r.times.front() < -1e-9) fail("departure before time zero");
        if (r.return_time() > inst.horizon + 1e-6)
            fail("return time " + std::to_string(r.return_time()) + " beyond horizon");
        for (size_t k = 0; k + 1 < r.nodes.size(); ++k) {
            int e = inst.network.find_edge(r.nodes[k], r.nodes[k + 1]);
            if (e < 0) {
                fail("route uses a missing edge");
                continue;
            }
            const RoadEdge& ed = inst.network.edge(e);
            double elapsed = r.times[k + 1] - r.times[k];
            bool flex = sol.flexible && r.type == VehicleType::Av;
            double lo = flex ? ed.gamma_lo * ed.travel_time : ed.travel_time;
            double hi = flex ? ed.gamma_hi * ed.travel_time : ed.travel_time;
            if (elapsed < lo - 1e-6 || elapsed > hi + 1e-6)
                fail("segment time " + std::to_string(elapsed) + " outside its window");
        }
        double recost = 0.0;
        for (size_t k = 0; k + 1 < r.nodes.size(); ++k) {
            const RoadEdge& ed =
                inst.network.edge(inst.network.find_edge(r.nodes[k], r.nodes[k + 1]));
            recost += r.type == VehicleType::Av
                          ? (ed.type == RoadType::AvEnabled ? inst.eta1 : inst.eta2) * ed.cost
                          : ed.cost;
        }
        if (std::abs(recost - r.cost) > 1e-6 * (1.0 + std::abs(recost)))
            fail("reported route cost disagrees with the network");
    };

    for (const auto& r : sol.av_routes) check_route(r);
    for (const auto& r : sol.hdv_routes) check_route(r);
    for (const auto& [c, n] : service_count)
        if (n != 1)
            fail("customer " + std::to_string(c) + " served " + std::to_string(n) + " times");

    if (!check_budget(sol.av_routes, inst.network, inst.budget).feasible)
        fail("controller budget exceeded");

    double total = 0.0;
    for (const auto& r : sol.av_routes) total += r.cost;
    for (const auto& r : sol.hdv_routes) total += r.cost;
    if (std::abs(total - sol.fP) > 1e-6 * (1.0 + std::abs(total)))
        fail("reported total cost disagrees with the routes");
    return rep;
}

} // namespace vrpsa
