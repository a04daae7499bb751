#include "vrpsa/solve.hpp"

#include "helpers.hpp"

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>

using namespace vrpsa;
using namespace vrpsa::testing;

namespace {

MilpModel knapsack_model(unsigned seed, int n) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> coef(-5.0, 5.0);
    std::uniform_real_distribution<double> weight(1.0, 4.0);
    MilpModel m;
    LinExpr obj, cap;
    for (int i = 0; i < n; ++i) {
        int v = m.add_variable("b" + std::to_string(i), VarKind::Binary, 0, 1);
        obj.terms.push_back({v, coef(rng)});
        cap.terms.push_back({v, weight(rng)});
    }
    m.add_constraint("cap", cap, Sense::Le, 2.0 * n / 3.0);
    m.set_objective(obj);
    return m;
}

double knapsack_brute(const MilpModel& m) {
    int n = m.var_count();
    double best = std::numeric_limits<double>::infinity();
    for (int mask = 0; mask < (1 << n); ++mask) {
        bool ok = true;
        for (const auto& c : m.constraints()) {
            double act = 0.0;
            for (const auto& t : c.expr.terms)
                if (mask & (1 << t.var)) act += t.coef;
            if (c.sense == Sense::Le && act > c.rhs + 1e-9) ok = false;
            if (c.sense == Sense::Ge && act < c.rhs - 1e-9) ok = false;
            if (c.sense == Sense::Eq && std::abs(act - c.rhs) > 1e-9) ok = false;
        }
        if (!ok) continue;
        double obj = 0.0;
        for (const auto& t : m.objective().terms)
            if (mask & (1 << t.var)) obj += t.coef;
        best = std::min(best, obj);
    }
    return best;
}

} // namespace

TEST_CASE("one forced binary") {
    MilpModel m;
    int x = m.add_variable("x", VarKind::Binary, 0, 1);
    LinExpr e;
    e.terms.push_back({x, 1.0});
    m.add_constraint("force", e, Sense::Ge, 1.0);
    LinExpr obj;
    obj.terms.push_back({x, 1.0});
    m.set_objective(obj);
    auto res = solve(m, Backend::builtin());
    CHECK(res.status == SolveStatus::Optimal);
    CHECK(res.objective == doctest::Approx(1.0));
    CHECK(res.value(x) == 1.0);
}

TEST_CASE("contradictory rows are infeasible") {
    MilpModel m;
    int x = m.add_variable("x", VarKind::Binary, 0, 1);
    LinExpr e1, e2;
    e1.terms.push_back({x, 1.0});
    e2.terms.push_back({x, 1.0});
    m.add_constraint("up", e1, Sense::Ge, 1.0);
    m.add_constraint("down", e2, Sense::Le, 0.0);
    auto res = builtin_solve(m);
    CHECK(res.status == SolveStatus::Infeasible);
}

TEST_CASE("contradictory continuous system is infeasible") {
    MilpModel m;
    VarTag tag;
    tag.kind = VarTag::Timestamp;
    int a = m.add_variable("ta", VarKind::Continuous, 0, 10, tag);
    int b = m.add_variable("tb", VarKind::Continuous, 0, 10, tag);
    LinExpr e1, e2;
    e1.terms.push_back({a, 1.0});
    e1.terms.push_back({b, -1.0});
    m.add_constraint("ge", e1, Sense::Ge, 3.0); // a - b >= 3
    e2.terms.push_back({a, 1.0});
    e2.terms.push_back({b, -1.0});
    m.add_constraint("le", e2, Sense::Le, 2.0); // a - b <= 2
    auto res = builtin_solve(m);
    CHECK(res.status == SolveStatus::Infeasible);
}

TEST_CASE("feasible difference system yields in-bounds values") {
    MilpModel m;
    int a = m.add_variable("ta", VarKind::Continuous, 0, 10);
    int b = m.add_variable("tb", VarKind::Continuous, 0, 10);
    LinExpr e1;
    e1.terms.push_back({b, 1.0});
    e1.terms.push_back({a, -1.0});
    m.add_constraint("gap", e1, Sense::Ge, 4.0); // b >= a + 4
    auto res = builtin_solve(m);
    REQUIRE(res.status == SolveStatus::Optimal);
    CHECK(res.value(b) - res.value(a) >= 4.0 - 1e-9);
    CHECK(res.value(a) >= -1e-9);
    CHECK(res.value(b) <= 10.0 + 1e-9);
}

TEST_CASE("random knapsacks match exhaustive enumeration") {
    for (unsigned seed = 0; seed < 25; ++seed) {
        auto m = knapsack_model(seed, 10);
        auto res = builtin_solve(m);
        REQUIRE(res.status == SolveStatus::Optimal);
        CHECK(res.objective == doctest::Approx(knapsack_brute(m)).epsilon(1e-9));
    }
}

TEST_CASE("negative objective coefficient pulls a free binary to one") {
    MilpModel m;
    int x = m.add_variable("x", VarKind::Binary, 0, 1);
    int y = m.add_variable("y", VarKind::Binary, 0, 1);
    LinExpr touch; // reference both so the model lints clean
    touch.terms.push_back({x, 1.0});
    touch.terms.push_back({y, 1.0});
    m.add_constraint("anything", touch, Sense::Le, 2.0);
    LinExpr obj;
    obj.terms.push_back({x, -2.5});
    obj.terms.push_back({y, 1.0});
    m.set_objective(obj);
    auto res = builtin_solve(m);
    CHECK(res.value(x) == 1.0);
    CHECK(res.value(y) == 0.0);
    CHECK(res.objective == doctest::Approx(-2.5));
}

TEST_CASE("binary cap rejects oversized models") {
    MilpModel m;
    LinExpr row;
    for (int i = 0; i <= kBuiltinBinaryCap; ++i)
        row.terms.push_back({m.add_variable("b" + std::to_string(i), VarKind::Binary, 0, 1), 1.0});
    m.add_constraint("all", row, Sense::Le, 1.0);
    CHECK_THROWS_AS(builtin_solve(m), ModelTooLarge);
}

TEST_CASE("identical models give identical assignments") {
    auto m1 = knapsack_model(3, 10);
    auto m2 = knapsack_model(3, 10);
    auto r1 = builtin_solve(m1);
    auto r2 = builtin_solve(m2);
    CHECK(r1.assignment == r2.assignment);
    CHECK(r1.objective == r2.objective);
}

TEST_CASE("time limit reports an incumbent or gives up cleanly") {
    auto m = knapsack_model(1, 24);
    auto res = builtin_solve(m, 1e-7);
    CHECK((res.status == SolveStatus::TimeLimit || res.status == SolveStatus::Feasible ||
           res.status == SolveStatus::Optimal));
}

TEST_CASE("external backend round trip through a stub solver") {
    namespace fs = std::filesystem;
    MilpModel m;
    int x = m.add_variable("x", VarKind::Binary, 0, 1);
    LinExpr e;
    e.terms.push_back({x, 1.0});
    m.add_constraint("force", e, Sense::Ge, 1.0);
    LinExpr obj;
    obj.terms.push_back({x, 3.0});
    m.set_objective(obj);

    fs::path script = fs::temp_directory_path() / "vrpsa_stub_solver.sh";
    {
        std::ofstream out(script);
        out << "#!/bin/sh\n"
            << "# sanity: the LP file must exist\n"
            << "test -f \"$1\" || exit 9\n"
            << "printf 'status optimal\\nobjective 3\\nx 1\\n' > \"$2\"\n";
    }
    fs::permissions(script, fs::perms::owner_all, fs::perm_options::add);

    auto res = solve(m, Backend::external("sh " + script.string() + " {lp} {sol}"));
    CHECK(res.status == SolveStatus::Optimal);
    CHECK(res.objective == doctest::Approx(3.0));
    CHECK(res.value(x) == 1.0);

    SUBCASE("missing command") {
        CHECK_THROWS_AS(solve(m, Backend::external("")), BackendUnavailable);
    }
    SUBCASE("crashing command") {
        CHECK_THROWS_AS(solve(m, Backend::external("false")), SolverCrash);
    }
    SUBCASE("fractional binaries are rejected") {
        fs::path bad = fs::temp_directory_path() / "vrpsa_stub_bad.sh";
        {
            std::ofstream out(bad);
            out << "#!/bin/sh\nprintf 'x 0.4\\n' > \"$2\"\n";
        }
        fs::permissions(bad, fs::perms::owner_all, fs::perm_options::add);
        CHECK_THROWS_AS(solve(m, Backend::external("sh " + bad.string() + " {lp} {sol}")),
                        SolverCrash);
        fs::remove(bad);
    }
    fs::remove(script);
}

TEST_CASE("builtin and external agree on a toy") {
    namespace fs = std::filesystem;
    auto m = knapsack_model(5, 8);
    auto builtin = builtin_solve(m);
    REQUIRE(builtin.status == SolveStatus::Optimal);

    // Stub: replay the built-in answer through the external interface.
    fs::path script = fs::temp_directory_path() / "vrpsa_replay.sh";
    fs::path answers = fs::temp_directory_path() / "vrpsa_replay.txt";
    {
        std::ofstream out(answers);
        out << "status optimal\n";
        for (int v = 0; v < m.var_count(); ++v)
            out << m.variable(v).name << " " << builtin.value(v) << "\n";
    }
    {
        std::ofstream out(script);
        out << "#!/bin/sh\ncp " << answers.string() << " \"$2\"\n";
    }
    fs::permissions(script, fs::perms::owner_all, fs::perm_options::add);
    auto ext = solve(m, Backend::external("sh " + script.string() + " {lp} {sol}"));
    CHECK(ext.objective == doctest::Approx(builtin.objective).epsilon(1e-9));
    fs::remove(script);
    fs::remove(answers);
}
