#include "vrpsa/expand.hpp"

#include <algorithm>
#include <sstream>

namespace vrpsa {

PrunedNetwork prune_network(const RoadNetwork& net, const std::vector<NodeId>& customers,
                            NodeId depot, double eta1, double eta2) {
    std::vector<NodeId> required(customers);
    required.push_back(depot);
    std::sort(required.begin(), required.end());
    required.erase(std::unique(required.begin(), required.end()), required.end());

    const WeightMode modes[3] = {WeightMode::hdv(), WeightMode::av(eta1, eta2),
                                 WeightMode::remote_duration(eta1, eta2)};

    PrunedNetwork pn;
    auto note_path = [&](const PathResult& path, bool remote) {
        auto& pset = remote ? pn.p2 : pn.p1;
        auto& vset = remote ? pn.v2 : pn.v1;
        for (size_t i = 0; i + 1 < path.nodes.size(); ++i)
            pset.insert({path.nodes[i], path.nodes[i + 1]});
        for (NodeId v : path.nodes) vset.insert(v);
    };

    for (int m = 0; m < 3; ++m) {
        // One backward sweep per destination serves every ordered pair.
        for (NodeId dst : required) {
            auto to_dst = pair_distances(net, dst, modes[m], true);
            for (NodeId src : required) {
                if (src == dst) continue;
                auto path = lex_min_path(net, src, dst, modes[m], to_dst);
                if (!path)
                    throw Disconnected("no path from node " + std::to_string(src) + " to node " +
                                       std::to_string(dst));
                note_path(*path, modes[m].kind == WeightKind::RemoteDuration);
            }
        }
    }
    for (NodeId r : required) {
        pn.v1.insert(r);
    }

    // AV-enabled components touching the retained paths come along whole.
    std::set<NodeId> touched(pn.v1);
    touched.insert(pn.v2.begin(), pn.v2.end());
    for (const auto& comp : av_sccs(net)) {
        bool attach = std::any_of(comp.begin(), comp.end(),
                                  [&](NodeId v) { return touched.count(v) > 0; });
        if (!attach) continue;
        std::set<NodeId> members(comp.begin(), comp.end());
        for (NodeId v : comp) {
            for (int e : net.out_edges(v)) {
                const RoadEdge& ed = net.edge(e);
                if (ed.type != RoadType::AvEnabled || !members.count(ed.head)) continue;
                pn.p3.insert({ed.tail, ed.head});
                pn.v3.insert(ed.tail);
                pn.v3.insert(ed.head);
            }
        }
    }

    std::set<NodeId> kept_nodes(pn.v1);
    kept_nodes.insert(pn.v2.begin(), pn.v2.end());
    kept_nodes.insert(pn.v3.begin(), pn.v3.end());
    std::set<std::pair<NodeId, NodeId>> kept_edges(pn.p1);
    kept_edges.insert(pn.p2.begin(), pn.p2.end());
    kept_edges.insert(pn.p3.begin(), pn.p3.end());

    pn.orig_of.assign(kept_nodes.begin(), kept_nodes.end());
    for (size_t i = 0; i < pn.orig_of.size(); ++i)
        pn.compact_of[pn.orig_of[i]] = static_cast<NodeId>(i);

    std::vector<NodePoint> points;
    points.reserve(pn.orig_of.size());
    for (NodeId v : pn.orig_of) points.push_back(net.point(v));
    std::vector<RoadEdge> edges;
    for (const auto& [tail, head] : kept_edges) {
        int e = net.find_edge(tail, head);
        if (e < 0) continue;
        RoadEdge ed = net.edge(e);
        ed.tail = pn.compact_of.at(tail);
        ed.head = pn.compact_of.at(head);
        edges.push_back(ed);
    }
    pn.graph = RoadNetwork(std::move(points), std::move(edges));
    return pn;
}

std::vector<NodeId> ExpandedGraph::column_of(NodeId base_customer) const {
    std::vector<NodeId> col;
    for (int l = 0; l < layers; ++l) col.push_back(node_at(l, base_customer));
    return col;
}

std::vector<NodeId> ExpandedGraph::customer_duplicates() const {
    std::vector<NodeId> dups;
    for (int l = 0; l < layers; ++l)
        for (NodeId c : customers_base) dups.push_back(node_at(l, c));
    return dups;
}

ExpandedGraph expand_graph(const PrunedNetwork& pn, int layers,
                           const std::vector<NodeId>& customers, NodeId depot) {
    if (layers < 1) throw NetworkError("expand_graph: layer count must be positive");
    ExpandedGraph ge;
    ge.layers = layers;
    ge.base_nodes = pn.graph.node_count();
    ge.sink = layers * ge.base_nodes;
    ge.depot_base = pn.to_compact(depot);
    ge.source = ge.depot_base; // layer 0
    ge.base_orig = pn.orig_of;
    for (NodeId c : customers) ge.customers_base.push_back(pn.to_compact(c));
    std::sort(ge.customers_base.begin(), ge.customers_base.end());

    // Per-layer copies of the real segments keep their base attributes.
    for (int l = 0; l < layers; ++l) {
        for (int e = 0; e < pn.graph.edge_count(); ++e) {
            const RoadEdge& ed = pn.graph.edge(e);
            ExpandedGraph::Edge copy;
            copy.tail = ge.node_at(l, ed.tail);
            copy.head = ge.node_at(l, ed.head);
            copy.kind = ed.type == RoadType::AvEnabled ? ExpEdgeKind::Av : ExpEdgeKind::Ord;
            copy.cost = ed.cost;
            copy.time = ed.travel_time;
            copy.gamma_lo = ed.gamma_lo;
            copy.gamma_hi = ed.gamma_hi;
            copy.base_edge = e;
            copy.layer = l;
            ge.edges.push_back(copy);
        }
    }
    // Customer transition dummies point one layer up.
    for (int l = 0; l + 1 < layers; ++l) {
        for (NodeId c : ge.customers_base) {
            ExpandedGraph::Edge dummy;
            dummy.tail = ge.node_at(l, c);
            dummy.head = ge.node_at(l + 1, c);
            dummy.kind = ExpEdgeKind::Dummy;
            dummy.layer = l;
            dummy.dummy_customer = c;
            ge.edges.push_back(dummy);
        }
    }
    // Every depot copy can terminate at the sink, the base layer included so
    // that a route without layer transitions can still close.
    for (int l = 0; l < layers; ++l) {
        ExpandedGraph::Edge dummy;
        dummy.tail = ge.node_at(l, ge.depot_base);
        dummy.head = ge.sink;
        dummy.kind = ExpEdgeKind::Dummy;
        dummy.layer = l;
        ge.edges.push_back(dummy);
    }

    ge.out.assign(static_cast<size_t>(ge.node_count()), {});
    ge.in.assign(static_cast<size_t>(ge.node_count()), {});
    for (int e = 0; e < static_cast<int>(ge.edges.size()); ++e) {
        ge.out[static_cast<size_t>(ge.edges[static_cast<size_t>(e)].tail)].push_back(e);
        ge.in[static_cast<size_t>(ge.edges[static_cast<size_t>(e)].head)].push_back(e);
    }
    return ge;
}

std::string to_dot(const ExpandedGraph& ge) {
    std::ostringstream out;
    out << "digraph expanded {\n  rankdir=LR;\n";
    for (NodeId v = 0; v < ge.node_count(); ++v) {
        if (v == ge.sink) {
            out << "  n" << v << " [label=\"sink\", shape=doublecircle];\n";
            continue;
        }
        int l = ge.layer_of(v);
        NodeId b = ge.base_of(v);
        bool is_customer = std::binary_search(ge.customers_base.begin(), ge.customers_base.end(), b);
        out << "  n" << v << " [label=\"L" << l << ":" << b << "\""
            << (b == ge.depot_base ? ", shape=box" : is_customer ? ", style=filled" : "") << "];\n";
    }
    for (const auto& e : ge.edges) {
        out << "  n" << e.tail << " -> n" << e.head;
        if (e.kind == ExpEdgeKind::Dummy)
            out << " [style=dashed]";
        else if (e.kind == ExpEdgeKind::Ord)
            out << " [color=gray]";
        out << ";\n";
    }
    out << "}\n";
    return out.str();
}

} // namespace vrpsa
