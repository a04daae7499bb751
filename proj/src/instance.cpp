#include "vrpsa/instance.hpp"

#include "vrpsa/pipeline.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace vrpsa {

std::vector<int> CvrpInstance::customer_ids() const {
    std::vector<int> ids;
    for (const auto& [id, d] : demands)
        if (id != depot) ids.push_back(id);
    return ids;
}

namespace {

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

// "KEY : value" or "KEY: value"; returns value or empty.
bool keyword_value(const std::string& line, const std::string& key, std::string& value) {
    std::string t = trim(line);
    if (t.rfind(key, 0) != 0) return false;
    std::string rest = trim(t.substr(key.size()));
    if (!rest.empty() && rest[0] == ':') rest = trim(rest.substr(1));
    value = rest;
    return true;
}

} // namespace

CvrpInstance parse_cvrp(const std::string& text) {
    CvrpInstance inst;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    int dimension = -1;
    bool has_name = false, has_capacity = false;
    bool coords_seen = false, demands_seen = false, depot_seen = false;

    enum class Section { Header, Coords, Demands, Depot };
    Section section = Section::Header;

    while (std::getline(in, line)) {
        ++line_no;
        std::string t = trim(line);
        if (t.empty()) continue;
        if (t == "EOF") break;

        std::string value;
        if (keyword_value(t, "NAME", value)) {
            inst.name = value;
            has_name = true;
            continue;
        }
        if (keyword_value(t, "DIMENSION", value)) {
            try {
                dimension = std::stoi(value);
            } catch (...) {
                throw ParseError("bad DIMENSION value", line_no);
            }
            continue;
        }
        if (keyword_value(t, "CAPACITY", value)) {
            try {
                inst.capacity = std::stod(value);
            } catch (...) {
                throw ParseError("bad CAPACITY value", line_no);
            }
            has_capacity = true;
            continue;
        }
        if (t.rfind("COMMENT", 0) == 0 || t.rfind("TYPE", 0) == 0 ||
            t.rfind("EDGE_WEIGHT_TYPE", 0) == 0)
            continue;
        if (t == "NODE_COORD_SECTION") {
            section = Section::Coords;
            coords_seen = true;
            continue;
        }
        if (t == "DEMAND_SECTION") {
            section = Section::Demands;
            demands_seen = true;
            continue;
        }
        if (t == "DEPOT_SECTION") {
            section = Section::Depot;
            depot_seen = true;
            continue;
        }

        std::istringstream ls(t);
        switch (section) {
        case Section::Header:
            throw ParseError("unexpected content outside any section: " + t, line_no);
        case Section::Coords: {
            int id;
            double x, y;
            if (!(ls >> id >> x >> y)) throw ParseError("bad coordinate line", line_no);
            if (inst.coordinates.count(id)) throw ParseError("duplicate node id", line_no);
            inst.coordinates[id] = {x, y};
            break;
        }
        case Section::Demands: {
            int id;
            double d;
            if (!(ls >> id >> d)) throw ParseError("bad demand line", line_no);
            if (!inst.coordinates.count(id))
                throw ParseError("demand for unknown node " + std::to_string(id), line_no);
            if (d < 0.0) throw ParseError("negative demand", line_no);
            inst.demands[id] = d;
            break;
        }
        case Section::Depot: {
            int id;
            if (!(ls >> id)) throw ParseError("bad depot line", line_no);
            if (id == -1) break;
            if (inst.depot != 0) throw ParseError("multiple depots are not supported", line_no);
            if (!inst.coordinates.count(id))
                throw ParseError("depot id has no coordinates", line_no);
            inst.depot = id;
            break;
        }
        }
    }

    if (!has_name) throw MissingSection("NAME");
    if (dimension < 0) throw MissingSection("DIMENSION");
    if (!has_capacity) throw MissingSection("CAPACITY");
    if (!coords_seen) throw MissingSection("NODE_COORD_SECTION");
    if (!demands_seen) throw MissingSection("DEMAND_SECTION");
    if (!depot_seen || inst.depot == 0) throw MissingSection("DEPOT_SECTION");

    if (static_cast<int>(inst.coordinates.size()) != dimension)
        throw ParseError("DIMENSION is " + std::to_string(dimension) + " but " +
                             std::to_string(inst.coordinates.size()) + " coordinates were given",
                         line_no);
    if (inst.demands.size() != inst.coordinates.size())
        throw ParseError("coordinate and demand counts differ", line_no);
    if (inst.demands.at(inst.depot) != 0.0)
        throw ParseError("depot demand must be zero", line_no);
    for (const auto& [id, d] : inst.demands)
        if (id != inst.depot && !(d > 0.0))
            throw ParseError("customer " + std::to_string(id) + " has non-positive demand",
                             line_no);
    if (!(inst.capacity > 0.0)) throw ParseError("capacity must be positive", line_no);
    return inst;
}

namespace {

struct GridLine {
    double at = 0.0; // the fixed coordinate
    double lo = 0.0; // span in the other axis
    double hi = 0.0;
    bool primary = false;
};

} // namespace

std::pair<RoadNetwork, std::map<int, NodeId>> generate_network(
    const std::map<int, NodePoint>& coords, int depot, int g_x, int g_y) {
    if (coords.size() < 2) throw InfeasibleInstance("need at least two points");
    if (!coords.count(depot)) throw InfeasibleInstance("depot has no coordinates");
    if (g_x < 1 || g_y < 1) throw InfeasibleInstance("grid divisions must be positive");

    for (auto a = coords.begin(); a != coords.end(); ++a)
        for (auto b = std::next(a); b != coords.end(); ++b)
            if (a->second.x == b->second.x && a->second.y == b->second.y)
                throw InfeasibleInstance("coincident coordinates for nodes " +
                                         std::to_string(a->first) + " and " +
                                         std::to_string(b->first));

    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
    double ymin = xmin, ymax = -xmin;
    for (const auto& [id, p] : coords) {
        xmin = std::min(xmin, p.x);
        xmax = std::max(xmax, p.x);
        ymin = std::min(ymin, p.y);
        ymax = std::max(ymax, p.y);
    }
    // Collinear input degenerates the box; widen by a unit margin.
    if (xmin == xmax) {
        xmin -= 0.5;
        xmax += 0.5;
    }
    if (ymin == ymax) {
        ymin -= 0.5;
        ymax += 0.5;
    }

    std::vector<double> xs(static_cast<size_t>(g_x) + 1), ys(static_cast<size_t>(g_y) + 1);
    for (int i = 0; i <= g_x; ++i)
        xs[static_cast<size_t>(i)] = i == g_x ? xmax : xmin + (xmax - xmin) * i / g_x;
    for (int j = 0; j <= g_y; ++j)
        ys[static_cast<size_t>(j)] = j == g_y ? ymax : ymin + (ymax - ymin) * j / g_y;

    std::vector<GridLine> vlines, hlines;
    for (double x : xs) vlines.push_back({x, ymin, ymax, true});
    for (double y : ys) hlines.push_back({y, xmin, xmax, true});

    auto cell_of = [](double v, const std::vector<double>& axis) {
        int c = 0;
        while (c + 2 < static_cast<int>(axis.size()) && v >= axis[static_cast<size_t>(c) + 1]) ++c;
        return c;
    };
    for (const auto& [id, p] : coords) {
        int cx = cell_of(p.x, xs);
        int cy = cell_of(p.y, ys);
        vlines.push_back({p.x, ys[static_cast<size_t>(cy)], ys[static_cast<size_t>(cy) + 1], false});
        hlines.push_back({p.y, xs[static_cast<size_t>(cx)], xs[static_cast<size_t>(cx) + 1], false});
    }

    // Intersect every vertical line with every horizontal line in range.
    std::map<std::pair<double, double>, NodeId> node_of;
    std::vector<NodePoint> points;
    for (const auto& v : vlines)
        for (const auto& h : hlines) {
            if (v.at < h.lo || v.at > h.hi) continue;
            if (h.at < v.lo || h.at > v.hi) continue;
            node_of.try_emplace({v.at, h.at}, 0);
        }
    {
        NodeId next = 0;
        for (auto& [pt, id] : node_of) {
            id = next++;
            points.push_back({pt.first, pt.second});
        }
    }

    // Consecutive nodes along each line become segments; a segment shared by
    // a primary and a local line stays AV-enabled.
    std::map<std::pair<NodeId, NodeId>, bool> seg_primary;
    auto add_line_segments = [&](const GridLine& line, bool vertical) {
        std::vector<std::pair<double, NodeId>> on_line;
        for (const auto& [pt, id] : node_of) {
            if (vertical) {
                if (pt.first == line.at && pt.second >= line.lo && pt.second <= line.hi)
                    on_line.push_back({pt.second, id});
            } else {
                if (pt.second == line.at && pt.first >= line.lo && pt.first <= line.hi)
                    on_line.push_back({pt.first, id});
            }
        }
        std::sort(on_line.begin(), on_line.end());
        for (size_t i = 0; i + 1 < on_line.size(); ++i) {
            NodeId a = on_line[i].second, b = on_line[i + 1].second;
            auto key = std::minmax(a, b);
            auto [it, inserted] = seg_primary.try_emplace({key.first, key.second}, line.primary);
            if (!inserted) it->second = it->second || line.primary;
        }
    };
    for (const auto& l : vlines) add_line_segments(l, true);
    for (const auto& l : hlines) add_line_segments(l, false);

    std::vector<RoadEdge> edges;
    for (const auto& [seg, primary] : seg_primary) {
        const NodePoint& a = points[static_cast<size_t>(seg.first)];
        const NodePoint& b = points[static_cast<size_t>(seg.second)];
        double len = std::hypot(a.x - b.x, a.y - b.y);
        RoadType type = primary ? RoadType::AvEnabled : RoadType::Ordinary;
        edges.push_back({seg.first, seg.second, type, len, len, 0.8, 1.25});
        edges.push_back({seg.second, seg.first, type, len, len, 0.8, 1.25});
    }

    std::map<int, NodeId> placement;
    for (const auto& [id, p] : coords) placement[id] = node_of.at({p.x, p.y});
    return {RoadNetwork(std::move(points), std::move(edges)), std::move(placement)};
}

VrpSaInstance build_instance(const CvrpInstance& cvrp, const GenParams& params) {
    for (const auto& [id, d] : cvrp.demands)
        if (id != cvrp.depot && d > cvrp.capacity)
            throw InfeasibleInstance("demand of customer " + std::to_string(id) +
                                     " exceeds the vehicle capacity");

    auto [net, placement] = generate_network(cvrp.coordinates, cvrp.depot, params.g_x, params.g_y);

    VrpSaInstance inst;
    inst.name = cvrp.name;
    inst.network = std::move(net);
    inst.depot = placement.at(cvrp.depot);
    for (int id : cvrp.customer_ids()) {
        inst.customers.push_back(placement.at(id));
        inst.demands.push_back(cvrp.demands.at(id));
    }
    inst.capacity = cvrp.capacity;
    inst.eta1 = params.eta1;
    inst.eta2 = params.eta2;
    inst.fixed_cost_av = params.fixed_cost;
    inst.fixed_cost_hdv = params.fixed_cost;
    inst.intervals = params.intervals;
    inst.layers = params.layers;

    // Calibrate fleet, horizon and budget on a baseline HDV-only solution.
    inst.av_count = 0;
    inst.hdv_count = static_cast<int>(inst.customers.size());
    inst.horizon = std::numeric_limits<double>::max();
    inst.budget = 0;
    Phase1Result base = phase1_routes(inst, FleetMode::HdvOnly, params.seed);
    double t_bar = 0.0;
    for (const auto& r : base.routes) t_bar = std::max(t_bar, r.return_time());

    inst.av_count = static_cast<int>(base.routes.size());
    inst.hdv_count = inst.av_count;
    inst.horizon = params.t_factor * t_bar;
    inst.budget = std::max(1L, std::lround(inst.av_count * params.b_factor));
    inst.validate_fields();
    return inst;
}

double VrpSaInstance::demand_of(NodeId customer) const {
    for (size_t i = 0; i < customers.size(); ++i)
        if (customers[i] == customer) return demands[i];
    throw SchemaError("unknown customer " + std::to_string(customer));
}

void VrpSaInstance::validate_fields() const {
    if (!(eta1 > 0.0 && eta1 < 1.0)) throw SchemaError("eta1 must lie in (0, 1)");
    if (!(eta2 > 1.0)) throw SchemaError("eta2 must exceed 1");
    if (!(capacity > 0.0)) throw SchemaError("capacity must be positive");
    if (!(horizon > 0.0)) throw SchemaError("horizon must be positive");
    if (budget < 0) throw SchemaError("budget must be nonnegative");
    if (av_count < 0 || hdv_count < 0) throw SchemaError("fleet sizes must be nonnegative");
    if (fixed_cost_av < 0.0 || fixed_cost_hdv < 0.0)
        throw SchemaError("fixed costs must be nonnegative");
    if (intervals < 1) throw SchemaError("interval count must be positive");
    if (layers < 1) throw SchemaError("layer count must be positive");
    if (depot < 0 || depot >= network.node_count()) throw SchemaError("depot out of range");
    if (customers.size() != demands.size())
        throw SchemaError("customer and demand counts differ");
    std::vector<NodeId> sorted = customers;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw SchemaError("duplicate customer");
    for (size_t i = 0; i < customers.size(); ++i) {
        if (customers[i] < 0 || customers[i] >= network.node_count())
            throw SchemaError("customer out of range");
        if (customers[i] == depot) throw SchemaError("depot cannot be a customer");
        if (!(demands[i] > 0.0)) throw SchemaError("demands must be positive");
        if (demands[i] > capacity) throw SchemaError("a demand exceeds the vehicle capacity");
    }
    if (!customers.empty() && layers > compute_k(demands, capacity) + 1)
        throw SchemaError("layer count exceeds the visit bound");
}

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr int kFormatVersion = 1;

} // namespace

std::string save_instance(const VrpSaInstance& inst) {
    ordered_json j;
    j["format_version"] = kFormatVersion;
    j["name"] = inst.name;
    j["eta1"] = inst.eta1;
    j["eta2"] = inst.eta2;
    j["capacity"] = inst.capacity;
    j["horizon"] = inst.horizon;
    j["budget"] = inst.budget;
    j["av_count"] = inst.av_count;
    j["hdv_count"] = inst.hdv_count;
    j["fixed_cost_av"] = inst.fixed_cost_av;
    j["fixed_cost_hdv"] = inst.fixed_cost_hdv;
    j["intervals"] = inst.intervals;
    j["layers"] = inst.layers;
    j["depot"] = inst.depot;
    j["customers"] = inst.customers;
    j["demands"] = inst.demands;
    ordered_json nodes = ordered_json::array();
    for (const auto& p : inst.network.points()) nodes.push_back({p.x, p.y});
    ordered_json edges = ordered_json::array();
    for (const auto& e : inst.network.edges())
        edges.push_back({e.tail, e.head, e.type == RoadType::AvEnabled ? "av" : "ord", e.cost,
                         e.travel_time, e.gamma_lo, e.gamma_hi});
    j["network"] = {{"nodes", std::move(nodes)}, {"edges", std::move(edges)}};
    return j.dump(2) + "\n";
}

VrpSaInstance load_instance(const std::string& text) {
    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const std::exception& e) {
        throw SchemaError(std::string("invalid instance document: ") + e.what());
    }
    try {
        if (!j.contains("format_version") || j["format_version"].get<int>() != kFormatVersion)
            throw SchemaError("unsupported format_version");
        VrpSaInstance inst;
        inst.name = j.at("name").get<std::string>();
        inst.eta1 = j.at("eta1").get<double>();
        inst.eta2 = j.at("eta2").get<double>();
        inst.capacity = j.at("capacity").get<double>();
        inst.horizon = j.at("horizon").get<double>();
        inst.budget = j.at("budget").get<int>();
        inst.av_count = j.at("av_count").get<int>();
        inst.hdv_count = j.at("hdv_count").get<int>();
        inst.fixed_cost_av = j.at("fixed_cost_av").get<double>();
        inst.fixed_cost_hdv = j.at("fixed_cost_hdv").get<double>();
        inst.intervals = j.at("intervals").get<int>();
        inst.layers = j.at("layers").get<int>();
        inst.depot = j.at("depot").get<NodeId>();
        inst.customers = j.at("customers").get<std::vector<NodeId>>();
        inst.demands = j.at("demands").get<std::vector<double>>();
        const auto& jn = j.at("network");
        std::vector<NodePoint> nodes;
        for (const auto& p : jn.at("nodes")) nodes.push_back({p.at(0), p.at(1)});
        std::vector<RoadEdge> edges;
        for (const auto& e : jn.at("edges")) {
            std::string type = e.at(2).get<std::string>();
            if (type != "av" && type != "ord") throw SchemaError("unknown road type " + type);
            edges.push_back({e.at(0).get<NodeId>(), e.at(1).get<NodeId>(),
                             type == "av" ? RoadType::AvEnabled : RoadType::Ordinary,
                             e.at(3).get<double>(), e.at(4).get<double>(), e.at(5).get<double>(),
                             e.at(6).get<double>()});
        }
        try {
            inst.network = RoadNetwork(std::move(nodes), std::move(edges));
        } catch (const NetworkError& e) {
            throw SchemaError(e.what());
        }
        inst.validate_fields();
        return inst;
    } catch (const SchemaError&) {
        throw;
    } catch (const std::exception& e) {
        throw SchemaError(std::string("invalid instance document: ") + e.what());
    }
}

} // namespace vrpsa
