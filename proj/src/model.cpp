#include "vrpsa/model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <sstream>

namespace vrpsa {

int MilpModel::add_variable(std::string name, VarKind kind, double lb, double ub, VarTag tag) {
    for (const auto& v : vars_)
        if (v.name == name) throw std::logic_error("duplicate variable name " + name);
    vars_.push_back({std::move(name), kind, lb, ub, tag});
    return static_cast<int>(vars_.size()) - 1;
}

void MilpModel::add_constraint(std::string name, LinExpr expr, Sense sense, double rhs) {
    cons_.push_back({std::move(name), std::move(expr), sense, rhs});
}

int MilpModel::binary_count() const {
    int n = 0;
    for (const auto& v : vars_)
        if (v.kind == VarKind::Binary) ++n;
    return n;
}

std::vector<std::string> MilpModel::lint() const {
    std::vector<std::string> issues;
    std::vector<bool> referenced(vars_.size(), false);
    auto check_expr = [&](const LinExpr& e, const std::string& where) {
        for (const auto& t : e.terms) {
            if (t.var < 0 || t.var >= static_cast<int>(vars_.size())) {
                issues.push_back(where + ": variable index out of range");
                continue;
            }
            referenced[static_cast<size_t>(t.var)] = true;
        }
    };
    for (size_t i = 0; i < vars_.size(); ++i) {
        const Variable& v = vars_[i];
        if (v.lb > v.ub) issues.push_back(v.name + ": lower bound exceeds upper bound");
        if (v.kind == VarKind::Binary && (v.lb < 0.0 || v.ub > 1.0))
            issues.push_back(v.name + ": binary bounds outside [0, 1]");
        if (v.tag.kind == VarTag::Timestamp && !std::isfinite(v.ub))
            issues.push_back(v.name + ": timestamp without a finite upper bound");
    }
    check_expr(objective_, "objective");
    for (const auto& c : cons_) check_expr(c.expr, c.name);
    for (size_t i = 0; i < vars_.size(); ++i)
        if (vars_[i].kind == VarKind::Binary && !referenced[i])
            issues.push_back(vars_[i].name + ": binary appears in no constraint or objective");
    return issues;
}

namespace {

std::string fmt_num(double v) {
    if (v == std::floor(v) && std::abs(v) < 1e15) {
        char buf[32];
        auto res = std::to_chars(buf, buf + sizeof buf, static_cast<long long>(v));
        return std::string(buf, res.ptr);
    }
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string sanitize(const std::string& name) {
    std::string out;
    for (char c : name)
        out.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' ? c
                                                                                          : '_');
    if (out.empty() || std::isdigit(static_cast<unsigned char>(out[0]))) out.insert(0, "v_");
    return out;
}

void append_expr(std::ostringstream& out, const MilpModel& model, const LinExpr& expr,
                 const std::vector<std::string>& names) {
    bool first = true;
    for (const auto& t : expr.terms) {
        if (t.coef == 0.0) continue;
        double mag = std::abs(t.coef);
        if (first) {
            out << (t.coef < 0 ? "- " : "");
            first = false;
        } else {
            out << (t.coef < 0 ? " - " : " + ");
        }
        if (mag != 1.0) out << fmt_num(mag) << " ";
        out << names[static_cast<size_t>(t.var)];
    }
    (void)model;
    if (first) out << "0";
}

} // namespace

std::string export_lp(const MilpModel& model) {
    std::vector<std::string> names;
    names.reserve(model.variables().size());
    std::set<std::string> seen;
    for (const auto& v : model.variables()) {
        std::string s = sanitize(v.name);
        if (!seen.insert(s).second)
            throw NameCollision("sanitized variable name clashes: " + s);
        names.push_back(std::move(s));
    }

    std::ostringstream out;
    out << "\\ vrpsa model\n";
    out << "Minimize\n obj: ";
    append_expr(out, model, model.objective(), names);
    if (model.objective().constant != 0.0) {
        double c = model.objective().constant;
        out << (c < 0 ? " - " : " + ") << fmt_num(std::abs(c));
    }
    out << "\nSubject To\n";
    std::set<std::string> row_seen;
    for (const auto& c : model.constraints()) {
        std::string rn = sanitize(c.name);
        if (!row_seen.insert(rn).second) throw NameCollision("sanitized row name clashes: " + rn);
        out << " " << rn << ": ";
        append_expr(out, model, c.expr, names);
        const char* sense = c.sense == Sense::Le ? " <= " : c.sense == Sense::Eq ? " = " : " >= ";
        out << sense << fmt_num(c.rhs - c.expr.constant) << "\n";
    }
    out << "Bounds\n";
    for (size_t i = 0; i < model.variables().size(); ++i) {
        const Variable& v = model.variables()[i];
        if (v.kind == VarKind::Binary) {
            if (v.lb == 0.0 && v.ub == 1.0) continue; // default binary bounds
            out << " " << fmt_num(v.lb) << " <= " << names[i] << " <= " << fmt_num(v.ub) << "\n";
            continue;
        }
        out << " " << fmt_num(v.lb) << " <= " << names[i] << " <= " << fmt_num(v.ub) << "\n";
    }
    out << "Binaries\n";
    {
        std::string line = "";
        for (size_t i = 0; i < model.variables().size(); ++i) {
            if (model.variables()[i].kind != VarKind::Binary) continue;
            if (line.size() + names[i].size() + 1 > 200) {
                out << line << "\n";
                line.clear();
            }
            line += (line.empty() ? " " : " ") + names[i];
        }
        if (!line.empty()) out << line << "\n";
    }
    out << "End\n";
    return out.str();
}

std::string model_stats_csv(const MilpModel& model) {
    auto family_of_var = [](const Variable& v) -> std::string {
        switch (v.tag.kind) {
        case VarTag::RouteEdge: return "route_edge";
        case VarTag::Dispatch: return "dispatch";
        case VarTag::Serve: return "serve";
        case VarTag::Timestamp: return "timestamp";
        case VarTag::ControllerUse: return "controller_use";
        case VarTag::AlphaInd: return "alpha";
        case VarTag::BetaInd: return "beta";
        case VarTag::ControllerAssign: return "controller_assign";
        case VarTag::Departure: return "departure";
        case VarTag::SubrouteStart: return "subroute_start";
        case VarTag::SubrouteEnd: return "subroute_end";
        case VarTag::None: break;
        }
        return "untagged";
    };
    std::map<std::string, int> var_fams, row_fams;
    for (const auto& v : model.variables()) ++var_fams[family_of_var(v)];
    for (const auto& c : model.constraints()) {
        std::string fam = c.name.substr(0, c.name.find('_'));
        ++row_fams[fam];
    }
    std::ostringstream out;
    out << "kind,family,count\n";
    for (const auto& [fam, n] : var_fams) out << "variable," << fam << "," << n << "\n";
    for (const auto& [fam, n] : row_fams) out << "constraint," << fam << "," << n << "\n";
    return out.str();
}

TimeGrid::TimeGrid(std::vector<double> boundaries) : bounds_(std::move(boundaries)) {
    if (bounds_.size() < 2) throw std::invalid_argument("time grid needs at least one interval");
    if (bounds_.front() != 0.0) throw std::invalid_argument("time grid must start at 0");
    for (size_t i = 0; i + 1 < bounds_.size(); ++i)
        if (!(bounds_[i] < bounds_[i + 1]))
            throw std::invalid_argument("time grid boundaries must increase strictly");
}

TimeGrid TimeGrid::uniform(double horizon, int intervals) {
    if (!(horizon > 0.0) || intervals < 1)
        throw std::invalid_argument("time grid needs a positive horizon and interval count");
    std::vector<double> bounds(static_cast<size_t>(intervals) + 1);
    for (int q = 0; q <= intervals; ++q)
        bounds[static_cast<size_t>(q)] = q == intervals ? horizon : horizon * q / intervals;
    return TimeGrid(std::move(bounds));
}

} // namespace vrpsa
