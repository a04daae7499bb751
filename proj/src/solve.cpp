#include "vrpsa/solve.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include <unistd.h>

namespace vrpsa {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double row_eps(double rhs) { return 1e-9 * (1.0 + std::abs(rhs)); }

// One difference-constraint edge: t[to] - t[from] <= weight, with the
// virtual origin as the last node index.
struct DiffEdge {
    int from = 0;
    int to = 0;
    double weight = 0.0;
};

struct PreparedRow {
    Sense sense = Sense::Le;
    double rhs = 0.0;
    std::vector<LinTerm> bin_terms;
    std::vector<LinTerm> cont_terms; // coefficients +-1, at most two, opposite signs
    bool pure_binary = false;

    // Search state.
    double fixed_activity = 0.0; // contribution of fixed binaries
    double min_unfixed = 0.0;
    double max_unfixed = 0.0;
    int unfixed = 0;

    bool safe_now(double eps) const {
        if (sense != Sense::Ge && fixed_activity + max_unfixed > rhs + eps) return false;
        if (sense != Sense::Le && fixed_activity + min_unfixed < rhs - eps) return false;
        return true;
    }
};

struct BuiltinSearch {
    const MilpModel& model;
    std::vector<PreparedRow> rows;
    std::vector<std::vector<int>> rows_of_var; // binary var -> row indices
    std::vector<int> binaries;                 // variable indices in order
    std::vector<int> cont_index;               // var -> continuous index or -1
    std::vector<int> cont_vars;                // continuous indices -> var
    std::vector<double> obj_coef;              // per variable
    int origin = 0;                            // difference-graph origin node

    std::vector<double> dist; // shortest distances from the origin
    std::vector<DiffEdge> active;
    std::vector<std::vector<int>> adj; // node -> active edge indices leaving it
    std::vector<double> var_lb, var_ub; // per difference-graph node
    struct DistChange {
        int node;
        double old_value;
    };
    std::vector<DistChange> dist_log;

    // Scratch state for the incremental relaxation, stamped per burst.
    std::vector<int> deq_count, node_stamp;
    std::vector<char> in_queue;
    std::vector<int> queue;
    int burst_id = 0;

    std::vector<int> value;    // -1 unfixed, else 0/1 per binary position
    std::vector<int> pos_of;   // variable index -> binary position
    std::vector<int> trail;    // fixed positions in order, branch + propagated
    std::vector<int> prop_rows; // scratch queue of rows to re-examine
    std::vector<char> row_queued;
    double obj_fixed = 0.0;
    double obj_neg_slack = 0.0; // sum of negative objective coefs of unfixed binaries

    double best_obj = kInf;
    bool have_best = false;
    std::vector<double> best_assignment;

    std::chrono::steady_clock::time_point deadline;
    bool timed_out = false;
    long long nodes = 0;

    explicit BuiltinSearch(const MilpModel& m) : model(m) {}

    // Rows whose window can never tighten the box bounds are redundant:
    // t_to <= t_from + w is implied by t_to <= ub(to), t_from >= lb(from).
    bool binding(const DiffEdge& e) const {
        if (e.to == origin) return true; // lower-bound watchers stay
        return e.weight < var_ub[static_cast<size_t>(e.to)] -
                              var_lb[static_cast<size_t>(e.from)] - 1e-15;
    }

    void push_edge(const DiffEdge& e) {
        adj[static_cast<size_t>(e.from)].push_back(static_cast<int>(active.size()));
        active.push_back(e);
    }

    void pop_edges(size_t down_to) {
        while (active.size() > down_to) {
            adj[static_cast<size_t>(active.back().from)].pop_back();
            active.pop_back();
        }
    }

    // Exact fallback: Bellman-Ford rounds over all active edges; a round
    // past the node count proves a negative cycle.
    bool full_rounds() {
        const int n = static_cast<int>(dist.size());
        for (int round = 0; round <= n; ++round) {
            bool changed = false;
            for (const DiffEdge& e : active) {
                double cand = dist[static_cast<size_t>(e.from)] + e.weight;
                if (cand < dist[static_cast<size_t>(e.to)] - 1e-12) {
                    dist_log.push_back({e.to, dist[static_cast<size_t>(e.to)]});
                    dist[static_cast<size_t>(e.to)] = cand;
                    changed = true;
                }
            }
            if (!changed) return dist[static_cast<size_t>(origin)] >= -1e-9;
            if (dist[static_cast<size_t>(origin)] < -1e-9) return false;
        }
        return false;
    }

    // Returns false on an immediate contradiction. Relaxes only the part of
    // the graph the new edges can influence; dequeue counts beyond the node
    // count hand over to the exact fallback.
    bool relax_from(size_t first_new_edge) {
        ++burst_id;
        queue.clear();
        size_t qhead = 0;
        auto stamp = [&](int v) {
            if (node_stamp[static_cast<size_t>(v)] != burst_id) {
                node_stamp[static_cast<size_t>(v)] = burst_id;
                deq_count[static_cast<size_t>(v)] = 0;
                in_queue[static_cast<size_t>(v)] = 0;
            }
        };
        auto relax = [&](const DiffEdge& e) -> bool {
            double cand = dist[static_cast<size_t>(e.from)] + e.weight;
            if (cand < dist[static_cast<size_t>(e.to)] - 1e-12) {
                dist_log.push_back({e.to, dist[static_cast<size_t>(e.to)]});
                dist[static_cast<size_t>(e.to)] = cand;
                stamp(e.to);
                if (!in_queue[static_cast<size_t>(e.to)]) {
                    in_queue[static_cast<size_t>(e.to)] = 1;
                    queue.push_back(e.to);
                }
                return true;
            }
            return false;
        };
        for (size_t i = first_new_edge; i < active.size(); ++i) relax(active[i]);
        const int cap = static_cast<int>(dist.size()) + 1;
        while (qhead < queue.size()) {
            int u = queue[qhead++];
            in_queue[static_cast<size_t>(u)] = 0;
            if (u == origin && dist[static_cast<size_t>(u)] < -1e-9) return false;
            stamp(u);
            if (++deq_count[static_cast<size_t>(u)] > cap) return full_rounds();
            for (int eid : adj[static_cast<size_t>(u)]) relax(active[static_cast<size_t>(eid)]);
        }
        return dist[static_cast<size_t>(origin)] >= -1e-9;
    }

    void append_row_edges(const PreparedRow& row, std::vector<DiffEdge>& out_edges) const {
        append_edges_for(row, row.rhs - row.fixed_activity, out_edges);
    }

    void append_edges_for(const PreparedRow& row, double v,
                          std::vector<DiffEdge>& out_edges) const {
        const auto& ct = row.cont_terms;
        auto emit_le = [&](double bound) {
            // sum of cont terms <= bound
            if (ct.size() == 2) {
                int a = ct[0].coef > 0 ? cont_index[static_cast<size_t>(ct[0].var)]
                                       : cont_index[static_cast<size_t>(ct[1].var)];
                int b = ct[0].coef > 0 ? cont_index[static_cast<size_t>(ct[1].var)]
                                       : cont_index[static_cast<size_t>(ct[0].var)];
                out_edges.push_back({b, a, bound});
            } else {
                int t = cont_index[static_cast<size_t>(ct[0].var)];
                if (ct[0].coef > 0)
                    out_edges.push_back({origin, t, bound}); // t - Z <= bound
                else
                    out_edges.push_back({t, origin, bound}); // Z - t <= bound
            }
        };
        auto emit_ge = [&](double bound) {
            // sum of cont terms >= bound  <=>  negated sum <= -bound
            if (ct.size() == 2) {
                int a = ct[0].coef > 0 ? cont_index[static_cast<size_t>(ct[0].var)]
                                       : cont_index[static_cast<size_t>(ct[1].var)];
                int b = ct[0].coef > 0 ? cont_index[static_cast<size_t>(ct[1].var)]
                                       : cont_index[static_cast<size_t>(ct[0].var)];
                out_edges.push_back({a, b, -bound});
            } else {
                int t = cont_index[static_cast<size_t>(ct[0].var)];
                if (ct[0].coef > 0)
                    out_edges.push_back({t, origin, -bound});
                else
                    out_edges.push_back({origin, t, -bound});
            }
        };
        if (row.sense == Sense::Le || row.sense == Sense::Eq) emit_le(v);
        if (row.sense == Sense::Ge || row.sense == Sense::Eq) emit_ge(v);
    }

    bool pure_row_ok(const PreparedRow& row) const {
        double eps = row_eps(row.rhs);
        if (row.sense != Sense::Ge && row.fixed_activity + row.min_unfixed > row.rhs + eps)
            return false;
        if (row.sense != Sense::Le && row.fixed_activity + row.max_unfixed < row.rhs - eps)
            return false;
        return true;
    }

    std::vector<DiffEdge> scratch_edges;

    double coef_in_row(const PreparedRow& row, int var) const {
        for (const auto& t : row.bin_terms)
            if (t.var == var) return t.coef;
        return 0.0;
    }

    // Fix one binary: update row activities, activate completed timestamp
    // rows, and record the step on the trail. No propagation here.
    bool fix(int pos, int val, size_t relax_mark) {
        const int var = binaries[static_cast<size_t>(pos)];
        value[static_cast<size_t>(pos)] = val;
        trail.push_back(pos);
        double coef = obj_coef[static_cast<size_t>(var)];
        obj_fixed += coef * val;
        if (coef < 0) obj_neg_slack -= coef;

        bool ok = true;
        for (int r : rows_of_var[static_cast<size_t>(var)]) {
            PreparedRow& row = rows[static_cast<size_t>(r)];
            double c = coef_in_row(row, var);
            row.fixed_activity += c * val;
            if (c > 0)
                row.max_unfixed -= c;
            else
                row.min_unfixed -= c;
            --row.unfixed;
            if (row.pure_binary) {
                if (!pure_row_ok(row)) ok = false;
                if (!row_queued[static_cast<size_t>(r)]) {
                    row_queued[static_cast<size_t>(r)] = 1;
                    prop_rows.push_back(r);
                }
            } else if (row.unfixed == 0) {
                scratch_edges.clear();
                append_row_edges(row, scratch_edges);
                for (const DiffEdge& e : scratch_edges)
                    if (binding(e)) push_edge(e);
            }
        }
        if (ok && active.size() > relax_mark) ok = relax_from(relax_mark);
        return ok;
    }

    // Unit propagation over the queued pure-binary rows: a variable whose
    // two values both break some row closes the branch; a variable with a
    // single surviving value is fixed and its rows re-queued.
    bool propagate() {
        for (size_t qi = 0; qi < prop_rows.size(); ++qi) {
            const int r = prop_rows[qi];
            row_queued[static_cast<size_t>(r)] = 0;
            const PreparedRow& row = rows[static_cast<size_t>(r)];
            if (row.unfixed == 0) continue;
            for (const auto& term : row.bin_terms) {
                int pos = pos_of[static_cast<size_t>(term.var)];
                if (value[static_cast<size_t>(pos)] != -1) continue;
                const double c = term.coef;
                const double eps = row_eps(row.rhs);
                bool ok0 = true, ok1 = true;
                for (int b = 0; b < 2; ++b) {
                    double lo = row.fixed_activity + row.min_unfixed - std::min(0.0, c) + c * b;
                    double hi = row.fixed_activity + row.max_unfixed - std::max(0.0, c) + c * b;
                    bool feasible = true;
                    if (row.sense != Sense::Ge && lo > row.rhs + eps) feasible = false;
                    if (row.sense != Sense::Le && hi < row.rhs - eps) feasible = false;
                    (b == 0 ? ok0 : ok1) = feasible;
                }
                if (!ok0 && !ok1) return false;
                if (ok0 == ok1) continue;
                size_t relax_mark = active.size();
                if (!fix(pos, ok1 ? 1 : 0, relax_mark)) return false;
            }
        }
        prop_rows.clear();
        return true;
    }

    // A variable may be deferred while fixing it either way cannot upset
    // anything yet: all its pure rows hold under any completion, and every
    // big-M switch row it controls stays quiet against the current labels
    // for both values. Deferred variables sink to the end of the search
    // order, so dead-end backtracking never churns through them.
    std::vector<char> indicator_var; // no multi-binary timestamp rows

    bool deferrable(int var) const {
        if (!indicator_var[static_cast<size_t>(var)]) return false;
        for (int r : rows_of_var[static_cast<size_t>(var)]) {
            const PreparedRow& row = rows[static_cast<size_t>(r)];
            if (row.unfixed == 0) continue;
            if (row.pure_binary) {
                if (!row.safe_now(row_eps(row.rhs))) return false;
                continue;
            }
            if (row.bin_terms.size() != 1 || row.unfixed != 1) return false;
            const double c = row.bin_terms[0].coef;
            for (int b = 0; b < 2; ++b) {
                double folded = row.rhs - row.fixed_activity - c * b;
                scratch_probe.clear();
                append_edges_for(row, folded, scratch_probe);
                for (const DiffEdge& e : scratch_probe) {
                    if (!binding(e)) continue;
                    if (dist[static_cast<size_t>(e.from)] + e.weight <
                        dist[static_cast<size_t>(e.to)] - 1e-12)
                        return false;
                }
            }
        }
        return true;
    }

    mutable std::vector<DiffEdge> scratch_probe;

    struct Marks {
        size_t trail, edges, dists;
    };

    bool branch(int pos, int val, Marks& marks) {
        marks = {trail.size(), active.size(), dist_log.size()};
        prop_rows.clear();
        std::fill(row_queued.begin(), row_queued.end(), 0);
        if (!fix(pos, val, marks.edges)) return false;
        return propagate();
    }

    void undo_to(const Marks& marks) {
        while (trail.size() > marks.trail) {
            int pos = trail.back();
            trail.pop_back();
            const int var = binaries[static_cast<size_t>(pos)];
            const int val = value[static_cast<size_t>(pos)];
            for (int r : rows_of_var[static_cast<size_t>(var)]) {
                PreparedRow& row = rows[static_cast<size_t>(r)];
                double c = coef_in_row(row, var);
                row.fixed_activity -= c * val;
                if (c > 0)
                    row.max_unfixed += c;
                else
                    row.min_unfixed += c;
                ++row.unfixed;
            }
            double coef = obj_coef[static_cast<size_t>(var)];
            obj_fixed -= coef * val;
            if (coef < 0) obj_neg_slack += coef;
            value[static_cast<size_t>(pos)] = -1;
        }
        pop_edges(marks.edges);
        while (dist_log.size() > marks.dists) {
            dist[static_cast<size_t>(dist_log.back().node)] = dist_log.back().old_value;
            dist_log.pop_back();
        }
    }

    // Minimum-of-lattice and maximum-of-lattice continuous solutions exist;
    // the midpoint keeps clear of both extremes where slack allows.
    std::vector<double> extract_assignment() {
        const int n = static_cast<int>(dist.size());
        std::vector<double> latest = dist;
        std::vector<double> earliest(static_cast<size_t>(n), kInf);
        earliest[static_cast<size_t>(origin)] = 0.0;
        for (int round = 0; round < n + 1; ++round) {
            bool changed = false;
            for (const DiffEdge& e : active) {
                double cand = earliest[static_cast<size_t>(e.to)] + e.weight;
                if (cand < earliest[static_cast<size_t>(e.from)] - 1e-12) {
                    earliest[static_cast<size_t>(e.from)] = cand;
                    changed = true;
                }
            }
            if (!changed) break;
        }
        std::vector<double> assignment(model.variables().size(), 0.0);
        for (size_t pos = 0; pos < binaries.size(); ++pos)
            assignment[static_cast<size_t>(binaries[pos])] = value[pos];
        for (size_t ci = 0; ci < cont_vars.size(); ++ci) {
            double hi = latest[ci];
            double lo = -earliest[ci];
            assignment[static_cast<size_t>(cont_vars[ci])] = 0.5 * (lo + hi);
        }
        return assignment;
    }

    void dfs(int from_pos) {
        if (timed_out) return;
        if (++nodes % 1024 == 0) {
            if (std::chrono::steady_clock::now() > deadline) {
                timed_out = true;
                return;
            }
            if (nodes % (1 << 22) == 0 && std::getenv("VRPSA_SOLVE_STATS"))
                std::fprintf(stderr, "[builtin] nodes=%lld depth_pos=%d best=%g\n", nodes,
                             from_pos, have_best ? best_obj : -1.0);
        }
        double lb = obj_fixed + obj_neg_slack;
        if (have_best && lb >= best_obj - 1e-9 * (1.0 + std::abs(best_obj))) return;
        int pos = -1, fallback = -1;
        for (int p = from_pos; p < static_cast<int>(binaries.size()); ++p) {
            if (value[static_cast<size_t>(p)] != -1) continue;
            if (fallback == -1) fallback = p;
            if (!deferrable(binaries[static_cast<size_t>(p)])) {
                pos = p;
                break;
            }
        }
        if (pos == -1) pos = fallback;
        if (pos == -1) {
            best_obj = obj_fixed;
            have_best = true;
            best_assignment = extract_assignment();
            return;
        }
        const int child_from = pos == fallback ? pos + 1 : fallback;
        const int var = binaries[static_cast<size_t>(pos)];
        const double coef = obj_coef[static_cast<size_t>(var)];
        const int first = coef < 0 ? 1 : 0;
        for (int k = 0; k < 2; ++k) {
            int val = k == 0 ? first : 1 - first;
            Marks marks{};
            if (branch(pos, val, marks)) dfs(child_from);
            undo_to(marks);
            if (timed_out) return;
        }
    }
};

} // namespace

SolveResult builtin_solve(const MilpModel& model, double time_limit_s) {
    auto t0 = std::chrono::steady_clock::now();
    BuiltinSearch s(model);

    const auto& vars = model.variables();
    s.cont_index.assign(vars.size(), -1);
    s.obj_coef.assign(vars.size(), 0.0);
    for (size_t v = 0; v < vars.size(); ++v) {
        if (vars[v].kind == VarKind::Binary) {
            s.binaries.push_back(static_cast<int>(v));
        } else {
            if (!std::isfinite(vars[v].lb) || !std::isfinite(vars[v].ub))
                throw std::invalid_argument("continuous variable without finite bounds: " +
                                            vars[v].name);
            s.cont_index[v] = static_cast<int>(s.cont_vars.size());
            s.cont_vars.push_back(static_cast<int>(v));
        }
    }
    if (static_cast<int>(s.binaries.size()) > kBuiltinBinaryCap)
        throw ModelTooLarge("model has " + std::to_string(s.binaries.size()) +
                            " binaries, built-in cap is " + std::to_string(kBuiltinBinaryCap));
    for (const auto& t : model.objective().terms) {
        if (vars[static_cast<size_t>(t.var)].kind != VarKind::Binary && t.coef != 0.0)
            throw std::invalid_argument("built-in solver requires a binary-only objective");
        s.obj_coef[static_cast<size_t>(t.var)] += t.coef;
    }
    for (int v : s.binaries)
        if (s.obj_coef[static_cast<size_t>(v)] < 0)
            s.obj_neg_slack += s.obj_coef[static_cast<size_t>(v)];

    s.origin = static_cast<int>(s.cont_vars.size());
    const size_t graph_nodes = s.cont_vars.size() + 1;
    s.dist.assign(graph_nodes, 0.0);
    s.var_lb.assign(graph_nodes, 0.0);
    s.var_ub.assign(graph_nodes, 0.0);
    for (size_t ci = 0; ci < s.cont_vars.size(); ++ci) {
        const Variable& v = vars[static_cast<size_t>(s.cont_vars[ci])];
        s.var_lb[ci] = v.lb;
        s.var_ub[ci] = v.ub;
        s.dist[ci] = v.ub; // latest feasible value, relaxed downward
    }
    s.adj.assign(graph_nodes, {});
    s.deq_count.assign(graph_nodes, 0);
    s.node_stamp.assign(graph_nodes, -1);
    s.in_queue.assign(graph_nodes, 0);

    s.rows_of_var.assign(vars.size(), {});
    for (const auto& c : model.constraints()) {
        PreparedRow row;
        row.sense = c.sense;
        row.rhs = c.rhs - c.expr.constant;
        for (const auto& t : c.expr.terms) {
            if (t.coef == 0.0) continue;
            if (vars[static_cast<size_t>(t.var)].kind == VarKind::Binary) {
                // Coalesce repeated variables so activities and propagation
                // see one net coefficient.
                bool merged = false;
                for (auto& bt : row.bin_terms)
                    if (bt.var == t.var) {
                        bt.coef += t.coef;
                        merged = true;
                    }
                if (!merged) row.bin_terms.push_back(t);
            } else {
                row.cont_terms.push_back(t);
            }
        }
        row.bin_terms.erase(std::remove_if(row.bin_terms.begin(), row.bin_terms.end(),
                                           [](const LinTerm& t) { return t.coef == 0.0; }),
                            row.bin_terms.end());
        if (row.cont_terms.size() > 2)
            throw std::invalid_argument("row " + c.name + " has more than two continuous terms");
        for (const auto& t : row.cont_terms)
            if (std::abs(t.coef) != 1.0)
                throw std::invalid_argument("row " + c.name +
                                            " has a non-unit continuous coefficient");
        if (row.cont_terms.size() == 2 && row.cont_terms[0].coef * row.cont_terms[1].coef > 0)
            throw std::invalid_argument("row " + c.name + " is not a difference constraint");
        row.pure_binary = row.cont_terms.empty();
        row.unfixed = 0;
        for (const auto& t : row.bin_terms) {
            ++row.unfixed;
            if (t.coef > 0)
                row.max_unfixed += t.coef;
            else
                row.min_unfixed += t.coef;
        }
        int r = static_cast<int>(s.rows.size());
        // Deduplicate per-variable row lists for variables appearing twice.
        for (const auto& t : row.bin_terms) {
            auto& lst = s.rows_of_var[static_cast<size_t>(t.var)];
            if (lst.empty() || lst.back() != r) lst.push_back(r);
        }
        s.rows.push_back(std::move(row));
    }

    // Lower-bound watchers plus rows with no binaries activate now; upper
    // bounds live in the initial labels.
    for (size_t ci = 0; ci < s.cont_vars.size(); ++ci)
        s.push_edge({static_cast<int>(ci), s.origin, -s.var_lb[ci]}); // Z - t <= -lb
    for (auto& row : s.rows) {
        if (row.pure_binary || row.unfixed != 0) continue;
        s.scratch_edges.clear();
        s.append_row_edges(row, s.scratch_edges);
        for (const DiffEdge& e : s.scratch_edges)
            if (s.binding(e)) s.push_edge(e);
    }

    SolveResult res;
    // Pure rows with no binary terms are constant; check them up front.
    for (const auto& row : s.rows) {
        if (!row.pure_binary || row.unfixed != 0) continue;
        if (!s.pure_row_ok(row)) {
            res.status = SolveStatus::Infeasible;
            res.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                                .count();
            return res;
        }
    }
    bool root_ok = s.relax_from(0);

    s.value.assign(s.binaries.size(), -1);
    s.pos_of.assign(vars.size(), -1);
    for (size_t p = 0; p < s.binaries.size(); ++p)
        s.pos_of[static_cast<size_t>(s.binaries[p])] = static_cast<int>(p);
    s.row_queued.assign(s.rows.size(), 0);
    s.indicator_var.assign(vars.size(), 1);
    for (const auto& row : s.rows)
        if (!row.pure_binary && row.bin_terms.size() != 1)
            for (const auto& t : row.bin_terms) s.indicator_var[static_cast<size_t>(t.var)] = 0;
    s.deadline = t0 + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                          std::chrono::duration<double>(time_limit_s));
    if (root_ok) s.dfs(0);
    if (std::getenv("VRPSA_SOLVE_STATS"))
        std::fprintf(stderr, "[builtin] nodes=%lld binaries=%zu incumbent=%d\n", s.nodes,
                     s.binaries.size(), s.have_best ? 1 : 0);

    res.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (s.timed_out) {
        res.status = s.have_best ? SolveStatus::Feasible : SolveStatus::TimeLimit;
        if (s.have_best) {
            res.objective = s.best_obj + model.objective().constant;
            res.assignment = std::move(s.best_assignment);
        }
        return res;
    }
    if (!s.have_best) {
        res.status = SolveStatus::Infeasible;
        return res;
    }
    res.status = SolveStatus::Optimal;
    res.objective = s.best_obj + model.objective().constant;
    res.assignment = std::move(s.best_assignment);
    return res;
}

namespace {

std::string substitute(std::string templ, const std::string& key, const std::string& value) {
    size_t at;
    while ((at = templ.find(key)) != std::string::npos) templ.replace(at, key.size(), value);
    return templ;
}

} // namespace

SolveResult solve(const MilpModel& model, const Backend& backend, double time_limit_s) {
    auto issues = model.lint();
    if (!issues.empty()) throw std::invalid_argument("model fails lint: " + issues.front());
    if (backend.kind == Backend::BuiltIn) return builtin_solve(model, time_limit_s);

    if (backend.command.empty())
        throw BackendUnavailable("external backend requested without a command template");

    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path();
    fs::path lp = dir / ("vrpsa_" + std::to_string(::getpid()) + "_" +
                         std::to_string(std::chrono::steady_clock::now().time_since_epoch().count()) +
                         ".lp");
    fs::path sol = lp;
    sol.replace_extension(".sol");
    {
        std::ofstream out(lp);
        out << export_lp(model);
    }
    std::string cmd = substitute(substitute(backend.command, "{lp}", lp.string()), "{sol}",
                                 sol.string());
    auto t0 = std::chrono::steady_clock::now();
    int rc = std::system(cmd.c_str());
    double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (rc != 0) {
        std::error_code ec;
        fs::remove(lp, ec);
        fs::remove(sol, ec);
        throw SolverCrash("external solver exited with code " + std::to_string(rc) +
                          " for command: " + cmd);
    }
    std::ifstream in(sol);
    if (!in) {
        std::error_code ec;
        fs::remove(lp, ec);
        throw SolverCrash("external solver wrote no solution file: " + sol.string());
    }

    SolveResult res;
    res.wall_time = wall;
    res.status = SolveStatus::Optimal;
    std::map<std::string, double> values;
    std::string line;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string head;
        if (!(ls >> head) || head[0] == '#' || head[0] == '\\') continue;
        if (head == "status") {
            std::string st;
            ls >> st;
            if (st == "optimal")
                res.status = SolveStatus::Optimal;
            else if (st == "feasible")
                res.status = SolveStatus::Feasible;
            else if (st == "infeasible")
                res.status = SolveStatus::Infeasible;
            else if (st == "timelimit")
                res.status = SolveStatus::TimeLimit;
            else
                res.status = SolveStatus::Unknown;
            continue;
        }
        if (head == "objective") {
            double ignored;
            ls >> ignored; // recomputed below
            continue;
        }
        double v;
        if (!(ls >> v)) throw SolverCrash("malformed solution line: " + line);
        values[head] = v;
    }
    std::error_code ec;
    fs::remove(lp, ec);
    fs::remove(sol, ec);
    if (res.status == SolveStatus::Infeasible || res.status == SolveStatus::Unknown) return res;

    res.assignment.assign(model.variables().size(), 0.0);
    for (size_t i = 0; i < model.variables().size(); ++i) {
        const Variable& var = model.variables()[i];
        auto it = values.find(var.name);
        double v = it == values.end() ? 0.0 : it->second;
        if (var.kind == VarKind::Binary) {
            if (std::abs(v - std::round(v)) > 1e-6)
                throw SolverCrash("fractional value for binary " + var.name);
            v = std::round(v);
        }
        if (v < var.lb - 1e-6 || v > var.ub + 1e-6)
            throw SolverCrash("value out of bounds for " + var.name);
        res.assignment[i] = v;
    }
    double obj = model.objective().constant;
    for (const auto& t : model.objective().terms)
        obj += t.coef * res.assignment[static_cast<size_t>(t.var)];
    res.objective = obj;
    return res;
}

DecodedSolution decode_solution(const SolveResult& result, const MilpModel& model,
                                const ExpandedGraph& ge, const VrpSaInstance& inst) {
    if (!result.has_solution()) throw DecodeError("no solution to decode");
    DecodedSolution out;

    // Group route-edge and timestamp variables per vehicle.
    std::map<int, std::map<int, int>> x_of;    // vehicle -> edge -> var
    std::map<int, std::map<NodeId, int>> t_of; // vehicle -> node -> var
    std::map<int, std::map<NodeId, int>> y_of; // vehicle -> duplicate -> var
    std::map<int, int> yo_of;
    for (int v = 0; v < model.var_count(); ++v) {
        const VarTag& tag = model.variable(v).tag;
        switch (tag.kind) {
        case VarTag::RouteEdge:
            if (tag.other_edge < 0) x_of[tag.vehicle][tag.edge] = v;
            break;
        case VarTag::Timestamp: t_of[tag.vehicle][tag.node] = v; break;
        case VarTag::Serve: y_of[tag.vehicle][tag.node] = v; break;
        case VarTag::Dispatch: yo_of[tag.vehicle] = v; break;
        default: break;
        }
    }

    for (const auto& [m, edges] : x_of) {
        std::map<NodeId, int> next; // tail node -> chosen edge
        int used = 0;
        for (const auto& [e, var] : edges) {
            if (result.value(var) < 0.5) continue;
            ++used;
            const auto& ed = ge.edges[static_cast<size_t>(e)];
            if (next.count(ed.tail))
                throw DecodeError("vehicle " + std::to_string(m) + " branches at node " +
                                  std::to_string(ed.tail));
            next[ed.tail] = e;
        }
        if (used == 0) continue; // not dispatched

        DecodedRoute route;
        route.vehicle = m;
        route.type = m < inst.av_count ? VehicleType::Av : VehicleType::Hdv;
        const auto& times = t_of[m];

        NodeId at = ge.source;
        route.nodes.push_back(ge.original_of_base(ge.base_of(at)));
        route.times.push_back(result.value(times.at(at)));
        int steps = 0;
        while (at != ge.sink) {
            auto it = next.find(at);
            if (it == next.end())
                throw DecodeError("vehicle " + std::to_string(m) + " route stalls at node " +
                                  std::to_string(at));
            const auto& ed = ge.edges[static_cast<size_t>(it->second)];
            next.erase(it);
            --used;
            at = ed.head;
            if (ed.kind != ExpEdgeKind::Dummy) {
                route.nodes.push_back(ge.original_of_base(ge.base_of(at)));
                route.times.push_back(result.value(times.at(at)));
                route.routing_cost +=
                    route.type == VehicleType::Av
                        ? (ed.kind == ExpEdgeKind::Av ? inst.eta1 : inst.eta2) * ed.cost
                        : ed.cost;
            }
            if (++steps > static_cast<int>(ge.edges.size()))
                throw DecodeError("vehicle " + std::to_string(m) + " route does not terminate");
        }
        if (used != 0)
            throw DecodeError("vehicle " + std::to_string(m) + " has " + std::to_string(used) +
                              " arcs off its source-sink path");
        auto yo = yo_of.find(m);
        if (yo != yo_of.end() && result.value(yo->second) > 0.5)
            route.fixed_cost =
                route.type == VehicleType::Av ? inst.fixed_cost_av : inst.fixed_cost_hdv;
        for (const auto& [dup, var] : y_of[m])
            if (result.value(var) > 0.5)
                route.served.push_back(ge.original_of_base(ge.base_of(dup)));
        std::sort(route.served.begin(), route.served.end());
        out.routing_cost += route.routing_cost;
        out.fixed_cost += route.fixed_cost;
        out.routes.push_back(std::move(route));
    }

    double recomputed = out.routing_cost + out.fixed_cost;
    if (std::abs(recomputed - result.objective) > 1e-6 * (1.0 + std::abs(result.objective)))
        throw DecodeError("recomputed cost " + std::to_string(recomputed) +
                          " disagrees with objective " + std::to_string(result.objective));
    return out;
}

} // namespace vrpsa
