// Acceptance run: one PASS/FAIL line per criterion, thresholds fixed below.

#include "gctl/evidence.hpp"
#include "gctl/flat_checker.hpp"
#include "gctl/hier_checker.hpp"
#include "gctl/hsm.hpp"
#include "gctl/random.hpp"
#include "support/fixtures.hpp"
#include "support/oracle.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

using namespace gctl;

namespace {

// pinned thresholds
constexpr double kFixtureMillis = 1000.0;
constexpr int kOracleCases = 600;
constexpr std::size_t kOracleMaxStates = 6;
constexpr double kOracleMillis = 60000.0;
constexpr int kEngineCases = 600;
constexpr double kEngineMillis = 300000.0;
constexpr std::size_t kSuccinctLevels = 15;
constexpr std::size_t kSuccinctMinStates = std::size_t{1} << 14;
constexpr double kSuccinctHierMillis = 2000.0;
constexpr std::size_t kGradeStates = 10000;
constexpr int kGradeRepeats = 31;
constexpr double kGradeMaxRatio = 2.0;
constexpr std::size_t kMinValidatedTraces = 2000;

using Clock = std::chrono::steady_clock;

double millis_since(Clock::time_point t0)
{
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

double time_it(const std::function<void()>& f)
{
    const auto t0 = Clock::now();
    f();
    return millis_since(t0);
}

std::string fmt(double v, int digits = 1)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

int failures = 0;

void report(int id, bool ok, const std::string& what)
{
    std::cout << (ok ? "PASS" : "FAIL") << " [" << id << "] " << what << std::endl;
    if (!ok) {
        ++failures;
    }
}

template <typename F>
void guarded(int id, const std::string& name, F body)
{
    try {
        body();
    } catch (const std::exception& e) {
        report(id, false, name + ": exception: " + e.what());
    }
}

void scoped_flattening()
{
    std::size_t states = 0, edges = 0;
    bool labels_ok = true, edges_ok = false;
    const double ms = time_it([&] {
        const auto k = flatten(fixtures::scoped_levels());
        states = k.num_states();
        edges = k.num_transitions();
        std::map<std::string, StateId> id;
        for (StateId s = 0; s < k.num_states(); ++s) {
            id.emplace(k.names[s], s);
        }
        for (const auto& [name, labels] : fixtures::scoped_levels_flat_states()) {
            labels_ok = labels_ok && id.count(name) != 0 && k.labels[id.at(name)] == labels;
        }
        const auto want = fixtures::scoped_levels_flat_edges();
        edges_ok = fixtures::named_edges(k) == want && edges == want.size();
    });
    report(1, states == 14 && labels_ok && edges_ok && ms < kFixtureMillis,
           "scoped-levels flattening: " + std::to_string(states) + " states, labels " +
               (labels_ok ? "match" : "differ") + ", " + std::to_string(edges) + " edges " +
               (edges_ok ? "match" : "differ") + ", " + fmt(ms, 2) + " ms (limit " + fmt(kFixtureMillis, 0) + ")");
}

void retry_counterexample()
{
    bool verdict_flat = true, verdict_hier = true, order_ok = false, success = false, abort_seen = true, valid = false;
    std::string line;
    const double ms = time_it([&] {
        const Shsm m = fixtures::retry();
        const Formula f = parse_formula("A G ((t1 & fail) -> A F abort)");
        const Formula nf = normalize(f);
        verdict_hier = check_hier(m, nf).holds;
        const auto k = flatten(m);
        verdict_flat = check_flat(k, nf).holds(nf, k.initial);
        const auto e = traces_for(k, k.initial, f, 1);
        valid = !e.traces.empty() && trace_problems(k, e).empty();
        if (e.traces.empty()) {
            return;
        }
        const auto& t = e.traces.front();
        line = render_trace(k, t);
        std::vector<std::string> names;
        for (StateId s : t.states) {
            names.push_back(k.names[s]);
        }
        const std::vector<std::string> want{"Start", "Try1.Send", "Try1.Wait", "Try1.Timeout", "Try1.Fail"};
        // in order, as a subsequence
        std::size_t at = 0;
        for (const auto& n : names) {
            if (at < want.size() && n == want[at]) {
                ++at;
            }
        }
        order_ok = at == want.size();
        const auto fail_pos = std::find(names.begin(), names.end(), "Try1.Fail");
        success = std::find(fail_pos, names.end(), "Success") != names.end();
        abort_seen = std::find(names.begin(), names.end(), "Abort") != names.end();
    });
    report(2, !verdict_flat && !verdict_hier && order_ok && success && !abort_seen && valid && ms < kFixtureMillis,
           "retry model: property fails in both engines, counterexample " + line + ", " + fmt(ms, 2) + " ms (limit " +
               fmt(kFixtureMillis, 0) + ")");
}

void oracle_triangle()
{
    Rng rng(20240601);
    const std::vector<std::string> props{"p", "q"};
    int agree = 0, total = 0;
    const double ms = time_it([&] {
        for (int i = 0; i < kOracleCases; ++i) {
            const std::size_t n = detail::pick(rng, 1, kOracleMaxStates);
            const auto k = random_kripke(rng, n, props, 3);
            const Formula f = random_formula(rng, 3, 3, props);
            const Formula nf = normalize(f);
            const auto engine = check_flat(k, nf).sat(nf);
            const auto reference = oracle::eval(k, f);
            ++total;
            if (engine == reference) {
                ++agree;
            }
        }
    });
    report(3, agree == total && total >= 500 && ms < kOracleMillis,
           "flat engine vs bounded-enumeration oracle: " + std::to_string(agree) + "/" + std::to_string(total) +
               " structures agree at every state, " + fmt(ms) + " ms (limit " + fmt(kOracleMillis, 0) + ")");
}

struct Growth {
    std::size_t operators = 0;
    std::size_t violations = 0;
    double worst = 0.0;  // largest observed growth factor over its bound
};

void engine_equivalence(Growth& growth)
{
    Rng rng(77001);
    int agree = 0, total = 0;
    const double ms = time_it([&] {
        for (int i = 0; i < kEngineCases; ++i) {
            RandomShsmParams prm;
            const Shsm m = random_shsm(rng, prm);
            const Formula nf = normalize(random_formula(rng, 3, 3, prm.props));
            const auto r = check_hier(m, nf);
            const bool flat = holds_flat(flatten(m), nf);
            ++total;
            if (r.holds == flat) {
                ++agree;
            }
            for (const auto& g : r.growth) {
                ++growth.operators;
                if (!g.within_bound()) {
                    ++growth.violations;
                }
                growth.worst = std::max(growth.worst, g.worst_ratio() / g.bound);
            }
        }
    });
    report(4, agree == total && total >= 500 && ms < kEngineMillis,
           "hierarchical vs flat verdicts: " + std::to_string(agree) + "/" + std::to_string(total) + " agree, " +
               fmt(ms) + " ms (limit " + fmt(kEngineMillis, 0) + ")");
}

void growth_bound(const Growth& g)
{
    report(5, g.violations == 0 && g.operators > 0,
           "copy growth per graded operator within kbar^d: " + std::to_string(g.operators - g.violations) + "/" +
               std::to_string(g.operators) + " operators, worst growth/bound " + fmt(g.worst, 3));
}

void succinctness()
{
    GenParams prm;
    prm.machines = kSuccinctLevels;
    prm.boxes = 2;
    const Shsm m = generate_layered(prm);
    const Formula nf = normalize(parse_formula("E F p"));
    std::size_t states = 0;
    bool flat_verdict = false, hier_verdict = false;
    double flat_ms = 1e300, hier_ms = 1e300;
    for (int rep = 0; rep < 3; ++rep) {
        flat_ms = std::min(flat_ms, time_it([&] {
            FlattenOptions opt;
            opt.budget = std::size_t{1} << 26;
            const auto k = flatten(m, opt);
            states = k.num_states();
            flat_verdict = check_flat(k, nf).holds(nf, k.initial);
        }));
        hier_ms = std::min(hier_ms, time_it([&] { hier_verdict = check_hier(m, nf).holds; }));
    }
    report(6,
           states >= kSuccinctMinStates && hier_ms < kSuccinctHierMillis && hier_ms < flat_ms &&
               flat_verdict == hier_verdict,
           std::to_string(kSuccinctLevels) + "-level model: " + std::to_string(m.total_vertices()) + " vertices, " +
               std::to_string(states) + " flat states (need " + std::to_string(kSuccinctMinStates) +
               "); E F p hierarchical " + fmt(hier_ms, 2) + " ms vs flatten+flat " + fmt(flat_ms, 2) +
               " ms, verdicts " + (flat_verdict == hier_verdict ? "equal" : "differ"));
}

void grade_independence()
{
    Rng rng(10000);
    const auto k = random_kripke(rng, kGradeStates, {"p", "q"}, 3);
    const std::vector<Grade> grades{1, 10, 1000};
    std::vector<std::vector<double>> samples(grades.size());
    for (int rep = 0; rep < kGradeRepeats; ++rep) {
        for (std::size_t i = 0; i < grades.size(); ++i) {
            const Formula nf = normalize(Formula::eu(grades[i], Formula::atom("p"), Formula::atom("q")));
            samples[i].push_back(time_it([&] { (void)check_flat(k, nf); }));
        }
    }
    std::vector<double> med;
    for (auto& s : samples) {
        std::sort(s.begin(), s.end());
        med.push_back(s[s.size() / 2]);
    }
    const double ratio = *std::max_element(med.begin(), med.end()) / *std::min_element(med.begin(), med.end());
    std::string detail;
    for (std::size_t i = 0; i < grades.size(); ++i) {
        detail += (i ? ", " : "") + std::string("k=") + std::to_string(grades[i]) + " " + fmt(med[i], 3) + " ms";
    }
    report(7, ratio < kGradeMaxRatio,
           "E>k [p U q] on " + std::to_string(kGradeStates) + " states, median of " + std::to_string(kGradeRepeats) +
               ": " + detail + "; max/min " + fmt(ratio, 2) + " (limit " + fmt(kGradeMaxRatio, 1) + ")");
}

void trace_validity()
{
    std::size_t traces = 0, bad = 0, sets = 0;
    auto check = [&](const KripkeStructure& k, const Explanation& e) {
        ++sets;
        traces += e.traces.size();
        if (!trace_problems(k, e).empty()) {
            ++bad;
        }
    };
    const std::vector<std::string> props{"p", "q"};
    Rng rng(8080);
    for (int i = 0; i < 800; ++i) {
        const auto k = random_kripke(rng, detail::pick(rng, 2, 10), props, 3);
        const Formula f = random_formula(rng, 3, 3, props);
        check(k, traces_for(k, k.initial, f, 4));
    }
    for (int i = 0; i < 300; ++i) {
        RandomShsmParams prm;
        const Shsm m = random_shsm(rng, prm);
        const auto k = flatten(m);
        const Formula f = random_formula(rng, 3, 3, prm.props);
        check(k, traces_for(k, k.initial, f, 4));
    }
    // direct extraction at the full available count
    for (int i = 0; i < 800; ++i) {
        const std::size_t n = detail::pick(rng, 1, 9);
        const auto k = random_kripke(rng, n, props, 3);
        PathQuery q;
        q.form = static_cast<PathForm>(detail::pick(rng, 0, 2));
        q.theta1 = detail::atom_set(k, "p");
        q.theta2 = detail::atom_set(k, "q");
        if (q.form != PathForm::Until) {
            for (auto& v : q.theta1) {
                v = v || detail::coin(rng, 0.5);
            }
        }
        const StateId s = detail::pick(rng, 0, n - 1);
        const std::size_t want = detail::pick(rng, 1, 6);
        std::size_t avail = 0;
        switch (q.form) {
            case PathForm::Next: avail = count_next(k, s, q.theta1, want); break;
            case PathForm::Globally: avail = count_globally(k, q.theta1, static_cast<Grade>(want - 1))[s]; break;
            case PathForm::Until: avail = count_until(k, q.theta1, q.theta2, static_cast<Grade>(want - 1))[s]; break;
        }
        check(k, Explanation{s, {q}, extract_evidences(k, s, q, std::min(want, avail))});
    }
    const auto retry = flatten(fixtures::retry());
    for (const char* f : {"A G ((t1 & fail) -> A F abort)", "E>1 F success", "E>0 G !abort", "A<=1 [!abort U success]"}) {
        check(retry, traces_for(retry, retry.initial, parse_formula(f), 5));
    }
    const auto scoped = flatten(fixtures::scoped_levels());
    for (const char* f : {"E F p3", "E>3 F p2", "E>2 G !p3", "A G !p1"}) {
        check(scoped, traces_for(scoped, scoped.initial, parse_formula(f), 5));
    }
    report(8, bad == 0 && traces >= kMinValidatedTraces,
           "trace validator: " + std::to_string(traces) + " traces in " + std::to_string(sets) + " sets, " +
               std::to_string(bad) + " invalid sets (need at least " + std::to_string(kMinValidatedTraces) +
               " traces)");
}

}  // namespace

int main()
{
    Growth growth;
    guarded(1, "scoped-levels flattening", scoped_flattening);
    guarded(2, "retry counterexample", retry_counterexample);
    guarded(3, "oracle triangle", oracle_triangle);
    guarded(4, "engine equivalence", [&] { engine_equivalence(growth); });
    guarded(5, "growth bound", [&] { growth_bound(growth); });
    guarded(6, "succinctness", succinctness);
    guarded(7, "grade independence", grade_independence);
    guarded(8, "trace validity", trace_validity);
    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
    return failures == 0 ? 0 : 1;
}
