#include "vrpsa/roadnet.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <set>

namespace vrpsa {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

using Weight = std::pair<double, double>;

Weight add(const Weight& a, const Weight& b) { return {a.first + b.first, a.second + b.second}; }

bool approx_eq(double a, double b, double scale) {
    return std::abs(a - b) <= 1e-9 * (1.0 + std::abs(scale));
}

bool approx_eq(const Weight& a, const Weight& b) {
    return approx_eq(a.first, b.first, a.first) && approx_eq(a.second, b.second, a.second);
}

} // namespace

RoadNetwork::RoadNetwork(std::vector<NodePoint> nodes, std::vector<RoadEdge> edges)
    : nodes_(std::move(nodes)), edges_(std::move(edges)) {
    const int n = node_count();
    out_.assign(static_cast<size_t>(n), {});
    in_.assign(static_cast<size_t>(n), {});
    for (int e = 0; e < edge_count(); ++e) {
        const RoadEdge& ed = edges_[static_cast<size_t>(e)];
        if (ed.tail < 0 || ed.tail >= n || ed.head < 0 || ed.head >= n)
            throw NetworkError("edge endpoint out of range");
        if (ed.tail == ed.head) throw NetworkError("self-loop edge");
        if (!(ed.cost > 0.0)) throw NetworkError("edge cost must be positive");
        if (!(ed.travel_time > 0.0)) throw NetworkError("edge travel time must be positive");
        if (!(ed.gamma_lo > 0.0 && ed.gamma_lo <= 1.0) || !(ed.gamma_hi >= 1.0))
            throw NetworkError("edge adjustment factors out of range");
        out_[static_cast<size_t>(ed.tail)].push_back(e);
        in_[static_cast<size_t>(ed.head)].push_back(e);
    }
}

int RoadNetwork::find_edge(NodeId tail, NodeId head) const {
    for (int e : out_.at(static_cast<size_t>(tail)))
        if (edges_[static_cast<size_t>(e)].head == head) return e;
    return -1;
}

std::pair<double, double> WeightMode::weigh(const RoadEdge& e) const {
    switch (kind) {
    case WeightKind::HdvCost:
        return {e.cost, 0.0};
    case WeightKind::AvCost:
        return {(e.type == RoadType::AvEnabled ? eta1 : eta2) * e.cost, 0.0};
    case WeightKind::RemoteDuration: {
        double av_cost = (e.type == RoadType::AvEnabled ? eta1 : eta2) * e.cost;
        return {e.type == RoadType::Ordinary ? e.travel_time : 0.0, av_cost};
    }
    }
    return {e.cost, 0.0};
}

namespace {

// Dijkstra over (primary, secondary) weights compared lexicographically.
// `reversed` walks edges head->tail.
std::vector<Weight> dijkstra(const RoadNetwork& net, NodeId src, const WeightMode& mode,
                             bool reversed) {
    const int n = net.node_count();
    std::vector<Weight> dist(static_cast<size_t>(n), {kInf, kInf});
    using QItem = std::pair<Weight, NodeId>;
    std::priority_queue<QItem, std::vector<QItem>, std::greater<>> pq;
    dist[static_cast<size_t>(src)] = {0.0, 0.0};
    pq.push({{0.0, 0.0}, src});
    while (!pq.empty()) {
        auto [d, u] = pq.top();
        pq.pop();
        if (dist[static_cast<size_t>(u)] < d) continue;
        const auto& adj = reversed ? net.in_edges(u) : net.out_edges(u);
        for (int e : adj) {
            const RoadEdge& ed = net.edge(e);
            NodeId v = reversed ? ed.tail : ed.head;
            Weight nd = add(d, mode.weigh(ed));
            if (nd < dist[static_cast<size_t>(v)]) {
                dist[static_cast<size_t>(v)] = nd;
                pq.push({nd, v});
            }
        }
    }
    return dist;
}

} // namespace

std::vector<std::pair<double, double>> pair_distances(const RoadNetwork& net, NodeId src,
                                                      const WeightMode& mode, bool reversed) {
    if (src < 0 || src >= net.node_count())
        throw NetworkError("pair_distances: node id out of range");
    return dijkstra(net, src, mode, reversed);
}

std::optional<PathResult> lex_min_path(const RoadNetwork& net, NodeId src, NodeId dst,
                                       const WeightMode& mode,
                                       const std::vector<std::pair<double, double>>& dist_to_dst) {
    if (src == dst) return PathResult{{src}, 0.0};
    const Weight total = dist_to_dst[static_cast<size_t>(src)];
    if (total.first == kInf) return std::nullopt;

    // Greedily take the smallest next node that still lies on some optimal
    // continuation; this yields the lexicographically smallest sequence.
    std::vector<NodeId> path{src};
    Weight prefix{0.0, 0.0};
    NodeId u = src;
    while (u != dst) {
        NodeId best = -1;
        Weight best_prefix{};
        for (int e : net.out_edges(u)) {
            const RoadEdge& ed = net.edge(e);
            Weight cand = add(prefix, mode.weigh(ed));
            Weight through = add(cand, dist_to_dst[static_cast<size_t>(ed.head)]);
            if (!approx_eq(through, total)) continue;
            if (best == -1 || ed.head < best) {
                best = ed.head;
                best_prefix = cand;
            }
        }
        if (best == -1) throw NetworkError("lex_min_path: reconstruction failed");
        path.push_back(best);
        prefix = best_prefix;
        u = best;
    }
    return PathResult{std::move(path), total.first};
}

std::optional<PathResult> shortest_path(const RoadNetwork& net, NodeId src, NodeId dst,
                                        const WeightMode& mode) {
    if (src < 0 || src >= net.node_count() || dst < 0 || dst >= net.node_count())
        throw NetworkError("shortest_path: node id out of range");
    if (src == dst) return PathResult{{src}, 0.0};
    auto bwd = dijkstra(net, dst, mode, true);
    return lex_min_path(net, src, dst, mode, bwd);
}

int compute_k(std::vector<double> demands, double capacity) {
    std::sort(demands.begin(), demands.end());
    double sum = 0.0;
    int k = 0;
    for (double d : demands) {
        sum += d;
        if (sum <= capacity)
            ++k;
        else
            break;
    }
    return k;
}

namespace {

// Iterative Tarjan restricted to AV-enabled edges.
struct TarjanState {
    std::vector<int> index, low, stack;
    std::vector<bool> on_stack;
    int counter = 0;
    std::vector<std::vector<NodeId>> comps;
};

} // namespace

std::vector<std::vector<NodeId>> av_sccs(const RoadNetwork& net) {
    const int n = net.node_count();
    TarjanState st;
    st.index.assign(static_cast<size_t>(n), -1);
    st.low.assign(static_cast<size_t>(n), 0);
    st.on_stack.assign(static_cast<size_t>(n), false);

    struct Frame {
        NodeId v;
        size_t next_edge;
    };
    for (NodeId root = 0; root < n; ++root) {
        if (st.index[static_cast<size_t>(root)] != -1) continue;
        std::vector<Frame> frames{{root, 0}};
        st.index[static_cast<size_t>(root)] = st.low[static_cast<size_t>(root)] = st.counter++;
        st.stack.push_back(root);
        st.on_stack[static_cast<size_t>(root)] = true;
        while (!frames.empty()) {
            Frame& f = frames.back();
            const auto& adj = net.out_edges(f.v);
            bool descended = false;
            while (f.next_edge < adj.size()) {
                const RoadEdge& ed = net.edge(adj[f.next_edge]);
                ++f.next_edge;
                if (ed.type != RoadType::AvEnabled) continue;
                NodeId w = ed.head;
                if (st.index[static_cast<size_t>(w)] == -1) {
                    st.index[static_cast<size_t>(w)] = st.low[static_cast<size_t>(w)] =
                        st.counter++;
                    st.stack.push_back(w);
                    st.on_stack[static_cast<size_t>(w)] = true;
                    frames.push_back({w, 0});
                    descended = true;
                    break;
                }
                if (st.on_stack[static_cast<size_t>(w)])
                    st.low[static_cast<size_t>(f.v)] =
                        std::min(st.low[static_cast<size_t>(f.v)], st.index[static_cast<size_t>(w)]);
            }
            if (descended) continue;
            if (st.low[static_cast<size_t>(f.v)] == st.index[static_cast<size_t>(f.v)]) {
                std::vector<NodeId> comp;
                NodeId w;
                do {
                    w = st.stack.back();
                    st.stack.pop_back();
                    st.on_stack[static_cast<size_t>(w)] = false;
                    comp.push_back(w);
                } while (w != f.v);
                std::sort(comp.begin(), comp.end());
                st.comps.push_back(std::move(comp));
            }
            NodeId v = f.v;
            frames.pop_back();
            if (!frames.empty())
                st.low[static_cast<size_t>(frames.back().v)] = std::min(
                    st.low[static_cast<size_t>(frames.back().v)], st.low[static_cast<size_t>(v)]);
        }
    }
    std::sort(st.comps.begin(), st.comps.end(),
              [](const auto& a, const auto& b) { return a.front() < b.front(); });
    return st.comps;
}

namespace {

struct StspSearch {
    const RoadNetwork& net;
    const WeightMode& mode;
    NodeId depot;
    std::vector<bool> is_required; // indexed by node, depot included
    int n_required;                // |required + depot|
    std::vector<std::vector<double>> sp; // all-pairs primary-weight distances

    std::vector<int> visits, edge_uses;
    std::vector<NodeId> seq;
    std::vector<NodeId> first_service; // required nodes in first-visit order
    int remaining;                     // required nodes not yet visited
    double cost = 0.0;

    double best_cost = kInf;
    std::vector<NodeId> best_seq;
    std::vector<NodeId> best_order;

    double lower_bound(NodeId u) const {
        double lb = remaining == 0 ? sp[static_cast<size_t>(u)][static_cast<size_t>(depot)] : 0.0;
        if (remaining > 0) {
            for (NodeId r = 0; r < net.node_count(); ++r) {
                if (!is_required[static_cast<size_t>(r)]) continue;
                if (std::find(first_service.begin(), first_service.end(), r) !=
                        first_service.end() ||
                    r == depot)
                    continue;
                double via = sp[static_cast<size_t>(u)][static_cast<size_t>(r)] +
                             sp[static_cast<size_t>(r)][static_cast<size_t>(depot)];
                lb = std::max(lb, via);
            }
        }
        return lb;
    }

    void consider_leaf() {
        const double eps = 1e-9 * (1.0 + std::abs(cost));
        bool better;
        if (best_seq.empty())
            better = cost <= best_cost + eps;
        else if (cost < best_cost - eps)
            better = true;
        else if (std::abs(cost - best_cost) <= eps)
            better = first_service < best_order ||
                     (first_service == best_order && seq < best_seq);
        else
            better = false;
        if (better) {
            best_cost = cost;
            best_seq = seq;
            best_order = first_service;
        }
    }

    void dfs(NodeId u) {
        if (u == depot && remaining == 0 && seq.size() > 1) {
            // Any extension only re-enters the depot at equal or higher cost
            // with a lexicographically larger sequence.
            consider_leaf();
            return;
        }
        if (cost + lower_bound(u) > best_cost + 1e-9 * (1.0 + std::abs(best_cost))) return;

        // Successors in ascending head order keeps the search deterministic.
        std::vector<int> order(net.out_edges(u).begin(), net.out_edges(u).end());
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            return net.edge(a).head < net.edge(b).head;
        });
        for (int e : order) {
            const RoadEdge& ed = net.edge(e);
            NodeId v = ed.head;
            if (visits[static_cast<size_t>(v)] >= n_required) continue;
            if (edge_uses[static_cast<size_t>(e)] >= n_required - 1) continue;
            double w = mode.weigh(ed).first;

            ++visits[static_cast<size_t>(v)];
            ++edge_uses[static_cast<size_t>(e)];
            seq.push_back(v);
            cost += w;
            bool newly_served = false;
            if (is_required[static_cast<size_t>(v)] && v != depot &&
                std::find(first_service.begin(), first_service.end(), v) ==
                    first_service.end()) {
                first_service.push_back(v);
                --remaining;
                newly_served = true;
            }

            dfs(v);

            if (newly_served) {
                first_service.pop_back();
                ++remaining;
            }
            cost -= w;
            seq.pop_back();
            --edge_uses[static_cast<size_t>(e)];
            --visits[static_cast<size_t>(v)];
        }
    }
};

} // namespace

StspResult brute_force_stsp(const RoadNetwork& net, const std::vector<NodeId>& required,
                            NodeId depot, const WeightMode& mode) {
    const int n = net.node_count();
    std::set<NodeId> req_set(required.begin(), required.end());
    req_set.insert(depot);
    for (NodeId r : req_set)
        if (r < 0 || r >= n) throw NetworkError("brute_force_stsp: node id out of range");

    if (req_set.size() == 1) return StspResult{{depot}, 0.0};

    // All-pairs primary-weight shortest distances, for bounds and checks.
    std::vector<std::vector<double>> sp(static_cast<size_t>(n));
    for (NodeId s = 0; s < n; ++s) {
        auto d = dijkstra(net, s, mode, false);
        sp[static_cast<size_t>(s)].resize(static_cast<size_t>(n));
        for (NodeId v = 0; v < n; ++v) sp[static_cast<size_t>(s)][static_cast<size_t>(v)] = d[static_cast<size_t>(v)].first;
    }
    for (NodeId r : req_set) {
        if (sp[static_cast<size_t>(depot)][static_cast<size_t>(r)] == kInf ||
            sp[static_cast<size_t>(r)][static_cast<size_t>(depot)] == kInf)
            throw InfeasibleStsp("required node " + std::to_string(r) +
                                 " not on a closed walk through the depot");
    }

    StspSearch search{net, mode, depot, std::vector<bool>(static_cast<size_t>(n), false),
                      static_cast<int>(req_set.size()), std::move(sp),
                      {}, {}, {}, {}, 0, 0.0, kInf, {}, {}};
    for (NodeId r : req_set) search.is_required[static_cast<size_t>(r)] = true;
    search.remaining = static_cast<int>(req_set.size()) - 1; // depot counts as served
    search.visits.assign(static_cast<size_t>(n), 0);
    search.edge_uses.assign(static_cast<size_t>(net.edge_count()), 0);
    search.seq.push_back(depot);
    search.visits[static_cast<size_t>(depot)] = 1;

    // Greedy nearest-required incumbent to anchor the pruning.
    {
        double inc = 0.0;
        NodeId u = depot;
        std::set<NodeId> left(req_set);
        left.erase(depot);
        bool ok = true;
        while (!left.empty()) {
            NodeId pick = -1;
            double pd = kInf;
            for (NodeId r : left) {
                double d = search.sp[static_cast<size_t>(u)][static_cast<size_t>(r)];
                if (d < pd) {
                    pd = d;
                    pick = r;
                }
            }
            if (pick == -1) {
                ok = false;
                break;
            }
            inc += pd;
            u = pick;
            left.erase(pick);
        }
        if (ok) {
            inc += search.sp[static_cast<size_t>(u)][static_cast<size_t>(depot)];
            search.best_cost = inc + 1e-9 * (1.0 + std::abs(inc));
        }
    }

    search.dfs(depot);
    if (search.best_seq.empty())
        throw InfeasibleStsp("no closed walk covers all required nodes within visit caps");
    return StspResult{search.best_seq, search.best_cost};
}

} // namespace vrpsa
