#pragma once

// Extraction of pairwise-distinct evidence traces from a flat structure.
//
// Two finite paths are distinct when they differ at some index below the
// shorter length, so a path and its extension are the same evidence. For
// until-evidences we allocate the requested number over a depth-layered
// antichain count (the largest prefix-free set of evidences with at most d
// states) and split it over successors in index order. For globally we pick
// distinct viable prefixes of a common length and close each into a lasso by
// always moving to the smallest viable successor.

#include "gctl/flat_checker.hpp"
#include "gctl/formula.hpp"
#include "gctl/kripke.hpp"

#include <algorithm>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace gctl {

enum class PathForm { Next, Globally, Until };

/// A path formula X θ1, G θ1 or θ1 U θ2 with its argument sets evaluated.
struct PathQuery {
    PathForm form = PathForm::Next;
    StateSet theta1;
    StateSet theta2;  // until only
    std::string text;  // rendered path formula, for reports
};

struct EvidenceTrace {
    std::vector<StateId> states;
    std::optional<std::size_t> loop_start;  // set for lassos
    std::size_t evidence_len = 0;  // leading states that form the evidence; the rest is continuation
    PathForm form = PathForm::Next;
    std::string formula;
    std::size_t family = 0;  // index of the query it witnesses

    bool is_lasso() const { return loop_start.has_value(); }
};

namespace detail {

inline std::vector<std::vector<StateId>> distinct_successors(const KripkeStructure& k)
{
    std::vector<std::vector<StateId>> out(k.succ);
    for (auto& s : out) {
        std::sort(s.begin(), s.end());
        s.erase(std::unique(s.begin(), s.end()), s.end());
    }
    return out;
}

// Layered counts, layer d = paths with at most d+1 states, capped at `cap`.
// Stops once layer[s] reaches `need` or after `max_layers`.
template <typename Step>
std::vector<std::vector<Count>> layers_until(StateId s, Count need, std::size_t max_layers, std::vector<Count> first,
                                             Step step)
{
    std::vector<std::vector<Count>> layers{std::move(first)};
    while (layers.back()[s] < need) {
        if (layers.size() > max_layers) {
            throw std::logic_error("evidence layering did not reach the requested count");
        }
        layers.push_back(step(layers.back()));
    }
    return layers;
}

/// Moves the loop start as early as possible without changing the path,
/// keeping at least `keep` states explicit.
inline void normalize_lasso(EvidenceTrace& t, std::size_t keep = 0)
{
    if (!t.loop_start) {
        return;
    }
    std::size_t ls = *t.loop_start;
    while (ls > 0 && t.states.size() > keep && t.states[ls - 1] == t.states.back()) {
        t.states.pop_back();
        --ls;
    }
    t.loop_start = ls;
}

}  // namespace detail

/// Up to `n` pairwise-distinct evidences of `q` from `s`. Throws when fewer
/// than `n` exist. Deterministic: branches are taken in ascending state order.
inline std::vector<EvidenceTrace> extract_evidences(const KripkeStructure& k, StateId s, const PathQuery& q,
                                                    std::size_t n)
{
    std::vector<EvidenceTrace> out;
    if (n == 0) {
        return out;
    }
    const std::size_t ns = k.num_states();
    const Count need = n;
    const auto succ = detail::distinct_successors(k);
    auto fail = [&] {
        throw std::invalid_argument("fewer than " + std::to_string(n) + " evidences of " + q.text + " at " +
                                    k.names[s]);
    };
    auto make = [&](std::vector<StateId> path) {
        EvidenceTrace t;
        t.evidence_len = path.size();
        t.states = std::move(path);
        t.form = q.form;
        t.formula = q.text;
        return t;
    };

    if (q.form == PathForm::Next) {
        for (StateId t : succ[s]) {
            if (q.theta1[t] && out.size() < n) {
                out.push_back(make({s, t}));
            }
        }
        if (out.size() < n) {
            fail();
        }
        return out;
    }

    // enough evidences at all? the saturated counts decide, so layering terminates
    const Grade grade = static_cast<Grade>(n - 1);
    const auto total = q.form == PathForm::Until ? count_until(k, q.theta1, q.theta2, grade)
                                                 : count_globally(k, q.theta1, grade);
    if (total[s] < need) {
        fail();
    }
    const std::size_t max_layers = (n + 2) * (ns + 1);

    if (q.form == PathForm::Until) {
        std::vector<Count> first(ns, 0);
        for (StateId v = 0; v < ns; ++v) {
            first[v] = q.theta2[v] ? 1 : 0;
        }
        const auto layers = detail::layers_until(s, need, max_layers, first, [&](const std::vector<Count>& prev) {
            std::vector<Count> cur(ns, 0);
            for (StateId v = 0; v < ns; ++v) {
                Count sum = 0;
                if (q.theta1[v]) {
                    for (StateId t : succ[v]) {
                        sum = saturating_add(sum, prev[t], need);
                    }
                }
                cur[v] = std::max<Count>(q.theta2[v] ? 1 : 0, sum);
            }
            return cur;
        });
        // allocate(v, m, d): m prefix-free evidences from v using at most d+1 states
        std::vector<StateId> path;
        auto allocate = [&](auto&& self, StateId v, Count m, std::size_t d) -> void {
            path.push_back(v);
            if (q.theta2[v] && m == 1) {
                out.push_back(make(path));
            } else {
                Count rem = m;
                for (StateId t : succ[v]) {
                    if (rem == 0) {
                        break;
                    }
                    const Count take = std::min(rem, layers[d - 1][t]);
                    if (take > 0) {
                        self(self, t, take, d - 1);
                        rem -= take;
                    }
                }
            }
            path.pop_back();
        };
        allocate(allocate, s, need, layers.size() - 1);
        return out;
    }

    // Globally: distinct viable prefixes of one common length, then lassos.
    const StateSet viable = exists_globally(k, q.theta1);
    std::vector<Count> first(ns, 0);
    for (StateId v = 0; v < ns; ++v) {
        first[v] = viable[v] ? 1 : 0;
    }
    const auto layers = detail::layers_until(s, need, max_layers, first, [&](const std::vector<Count>& prev) {
        std::vector<Count> cur(ns, 0);
        for (StateId v = 0; v < ns; ++v) {
            if (viable[v]) {
                for (StateId t : succ[v]) {
                    cur[v] = saturating_add(cur[v], prev[t], need);
                }
            }
        }
        return cur;
    });
    auto close = [&](std::vector<StateId> prefix) {
        // follow the smallest viable successor until the walk repeats a state
        std::vector<std::size_t> seen_at(ns, static_cast<std::size_t>(-1));
        const std::size_t walk_from = prefix.size() - 1;
        seen_at[prefix.back()] = walk_from;
        StateId v = prefix.back();
        while (true) {
            StateId next = v;
            for (StateId t : succ[v]) {
                if (viable[t]) {
                    next = t;
                    break;
                }
            }
            if (seen_at[next] != static_cast<std::size_t>(-1)) {
                EvidenceTrace t = make(std::move(prefix));
                t.loop_start = seen_at[next];
                t.evidence_len = t.states.size();
                detail::normalize_lasso(t);
                t.evidence_len = t.states.size();
                return t;
            }
            seen_at[next] = prefix.size();
            prefix.push_back(next);
            v = next;
        }
    };
    std::vector<StateId> path;
    auto allocate = [&](auto&& self, StateId v, Count m, std::size_t d) -> void {
        path.push_back(v);
        if (d == 0) {
            out.push_back(close(path));
        } else {
            Count rem = m;
            for (StateId t : succ[v]) {
                if (rem == 0) {
                    break;
                }
                const Count take = std::min(rem, layers[d - 1][t]);
                if (take > 0) {
                    self(self, t, take, d - 1);
                    rem -= take;
                }
            }
        }
        path.pop_back();
    };
    allocate(allocate, s, need, layers.size() - 1);
    return out;
}

namespace detail {

inline StateSet sat_of(const KripkeStructure& k, const Formula& f)
{
    const Formula nf = normalize(f);
    return check_flat(k, nf).sat(nf);
}

inline StateSet negated(StateSet s)
{
    for (auto& v : s) {
        v = !v;
    }
    return s;
}

inline std::size_t available(const KripkeStructure& k, StateId s, const PathQuery& q, std::size_t n)
{
    if (n == 0) {
        return 0;
    }
    const Grade grade = static_cast<Grade>(n - 1);
    switch (q.form) {
        case PathForm::Next: return static_cast<std::size_t>(count_next(k, s, q.theta1, n));
        case PathForm::Globally: return static_cast<std::size_t>(count_globally(k, q.theta1, grade)[s]);
        case PathForm::Until: return static_cast<std::size_t>(count_until(k, q.theta1, q.theta2, grade)[s]);
    }
    return 0;
}

}  // namespace detail

/// The evidence families refuting a universal formula, in the order their
/// traces are reported. A^{<=k}[a U b] has two: G(a & !b), then
/// (a & !b) U (!a & !b).
inline std::vector<PathQuery> refuting_queries(const KripkeStructure& k, const Formula& f)
{
    const std::size_t n = k.num_states();
    const StateSet all(n, 1);
    switch (f.op()) {
        case Op::ForallX: {
            const Formula t = detail::mk_not(f.child());
            return {{PathForm::Next, detail::sat_of(k, t), {}, "X " + render(t)}};
        }
        case Op::ForallG: {
            const Formula t = detail::mk_not(f.child());
            return {{PathForm::Until, all, detail::sat_of(k, t), "F " + render(t)}};
        }
        case Op::ForallF: {
            const Formula t = detail::mk_not(f.child());
            return {{PathForm::Globally, detail::sat_of(k, t), {}, "G " + render(t)}};
        }
        case Op::ForallU: {
            const auto fam = release_families(detail::sat_of(k, f.child(0)), detail::sat_of(k, f.child(1)));
            const Formula stay = Formula::conj(f.child(0), detail::mk_not(f.child(1)));
            const Formula escape = Formula::conj(detail::mk_not(f.child(0)), detail::mk_not(f.child(1)));
            return {{PathForm::Globally, fam.stay, {}, "G " + render(stay)},
                    {PathForm::Until, fam.stay, fam.escape, "[" + render(stay) + " U " + render(escape) + "]"}};
        }
        default: throw std::invalid_argument("not a universal path formula: " + render(f));
    }
}

/// The evidence family of an existential formula.
inline PathQuery evidence_query(const KripkeStructure& k, const Formula& f)
{
    const StateSet all(k.num_states(), 1);
    switch (f.op()) {
        case Op::ExistsX: return {PathForm::Next, detail::sat_of(k, f.child()), {}, "X " + render(f.child())};
        case Op::ExistsG: return {PathForm::Globally, detail::sat_of(k, f.child()), {}, "G " + render(f.child())};
        case Op::ExistsF: return {PathForm::Until, all, detail::sat_of(k, f.child()), "F " + render(f.child())};
        case Op::ExistsU:
            return {PathForm::Until, detail::sat_of(k, f.child(0)), detail::sat_of(k, f.child(1)),
                    "[" + render(f.child(0)) + " U " + render(f.child(1)) + "]"};
        default: throw std::invalid_argument("not an existential path formula: " + render(f));
    }
}

/// Up to `n` distinct paths refuting a universal formula that fails at `s`.
inline std::vector<EvidenceTrace> counterexamples_for(const KripkeStructure& k, StateId s, const Formula& f,
                                                      std::size_t n)
{
    if (detail::sat_of(k, f)[s]) {
        throw std::invalid_argument(render(f) + " holds at " + k.names[s]);
    }
    std::vector<EvidenceTrace> out;
    const auto queries = refuting_queries(k, f);
    for (std::size_t i = 0; i < queries.size(); ++i) {
        const std::size_t take = std::min(n - out.size(), detail::available(k, s, queries[i], n - out.size()));
        for (auto& t : extract_evidences(k, s, queries[i], take)) {
            t.family = i;
            out.push_back(std::move(t));
        }
    }
    return out;
}

/// Traces together with the path queries they witness, so that they can be
/// replayed independently.
struct Explanation {
    StateId state = 0;
    std::vector<PathQuery> families;
    std::vector<EvidenceTrace> traces;
};

namespace detail {

inline bool is_exists(Op op)
{
    return op == Op::ExistsX || op == Op::ExistsG || op == Op::ExistsF || op == Op::ExistsU;
}

inline bool is_forall(Op op)
{
    return op == Op::ForallX || op == Op::ForallG || op == Op::ForallF || op == Op::ForallU;
}

// Witnesses for `f` having truth value `want` at `s`: evidences when an
// existential holds, counterexamples when a universal fails. Boolean
// connectives pick the first child that decides the value.
inline Explanation witness(const KripkeStructure& k, StateId s, const Formula& f, bool want, std::size_t n,
                           std::size_t depth);

// Extends a finite until-evidence by a witness of its end formula.
inline void continue_trace(const KripkeStructure& k, EvidenceTrace& t, const Formula& end, std::size_t depth)
{
    if (t.is_lasso() || depth > 8) {
        return;
    }
    const auto more = witness(k, t.states.back(), end, true, 1, depth + 1);
    if (more.traces.empty() || more.traces.front().states.size() < 2) {
        return;
    }
    const EvidenceTrace& c = more.traces.front();
    const std::size_t offset = t.states.size() - 1;
    t.states.insert(t.states.end(), c.states.begin() + 1, c.states.end());
    if (c.loop_start) {
        t.loop_start = offset + *c.loop_start;
        normalize_lasso(t, t.evidence_len);
    }
}

inline Explanation witness(const KripkeStructure& k, StateId s, const Formula& f, bool want, std::size_t n,
                           std::size_t depth)
{
    Explanation none{s, {}, {}};
    if (n == 0 || sat_of(k, f)[s] != (want ? 1 : 0)) {
        return none;
    }
    const Op op = f.op();
    if (want && is_exists(op)) {
        const PathQuery q = evidence_query(k, f);
        auto traces = extract_evidences(k, s, q, std::min(n, available(k, s, q, n)));
        if (op == Op::ExistsF || op == Op::ExistsU) {
            const Formula& end = op == Op::ExistsF ? f.child() : f.child(1);
            for (auto& t : traces) {
                continue_trace(k, t, end, depth);
            }
        }
        return {s, {q}, std::move(traces)};
    }
    if (!want && is_forall(op)) {
        auto traces = counterexamples_for(k, s, f, n);
        const Formula end = op == Op::ForallG ? mk_not(f.child())
                            : op == Op::ForallU
                                ? Formula::conj(mk_not(f.child(0)), mk_not(f.child(1)))
                                : Formula::top();
        if (op == Op::ForallG || op == Op::ForallU) {
            for (auto& t : traces) {
                if (t.form == PathForm::Until) {
                    continue_trace(k, t, end, depth);
                }
            }
        }
        return {s, refuting_queries(k, f), std::move(traces)};
    }
    switch (op) {
        case Op::Not: return witness(k, s, f.child(), !want, n, depth);
        case Op::And:
        case Op::Or: {
            // And true / Or false: every child shares the value; otherwise only some do
            for (std::size_t i = 0; i < 2; ++i) {
                auto r = witness(k, s, f.child(i), want, n, depth);
                if (!r.traces.empty()) {
                    return r;
                }
            }
            return none;
        }
        case Op::Implies: {
            if (want) {
                auto r = witness(k, s, f.child(1), true, n, depth);
                return r.traces.empty() ? witness(k, s, f.child(0), false, n, depth) : r;
            }
            auto r = witness(k, s, f.child(1), false, n, depth);
            return r.traces.empty() ? witness(k, s, f.child(0), true, n, depth) : r;
        }
        default: return none;
    }
}

}  // namespace detail

/// Traces explaining the value of `f` at `s`: up to `n` evidences of the
/// first existential that makes it true, or counterexamples of the first
/// universal that makes it false. Finite until-evidences are continued by a
/// witness of their end formula, so a counterexample to A G φ shows why φ
/// fails where it stops.
inline Explanation traces_for(const KripkeStructure& k, StateId s, const Formula& f, std::size_t n)
{
    const bool value = detail::sat_of(k, f)[s] != 0;
    return detail::witness(k, s, f, value, n, 0);
}

/// Everything wrong with `traces` as evidences from `s`, each of the query
/// its `family` names: transitions, path form of the evidence part, and
/// pairwise distinctness across the whole set.
inline std::vector<std::string> trace_problems(const KripkeStructure& k, StateId s,
                                               const std::vector<PathQuery>& families,
                                               const std::vector<EvidenceTrace>& traces)
{
    std::vector<std::string> problems;
    auto has_edge = [&](StateId a, StateId b) {
        return std::find(k.succ[a].begin(), k.succ[a].end(), b) != k.succ[a].end();
    };
    for (std::size_t i = 0; i < traces.size(); ++i) {
        const auto& t = traces[i];
        const std::string tag = "trace " + std::to_string(i) + ": ";
        if (t.states.empty() || t.states.front() != s) {
            problems.push_back(tag + "does not start at the queried state");
            continue;
        }
        for (std::size_t j = 0; j + 1 < t.states.size(); ++j) {
            if (!has_edge(t.states[j], t.states[j + 1])) {
                problems.push_back(tag + "missing transition at position " + std::to_string(j));
            }
        }
        if (t.loop_start) {
            if (*t.loop_start >= t.states.size() || !has_edge(t.states.back(), t.states[*t.loop_start])) {
                problems.push_back(tag + "loop does not close");
            }
        }
        const std::size_t len = t.evidence_len;
        if (len == 0 || len > t.states.size() || t.family >= families.size()) {
            problems.push_back(tag + "bad evidence length or family");
            continue;
        }
        const PathQuery& q = families[t.family];
        switch (q.form) {
            case PathForm::Next:
                if (len != 2 || !q.theta1[t.states[1]]) {
                    problems.push_back(tag + "not a next-evidence");
                }
                break;
            case PathForm::Until:
                for (std::size_t j = 0; j + 1 < len; ++j) {
                    if (!q.theta1[t.states[j]]) {
                        problems.push_back(tag + "left operand fails before the end");
                    }
                }
                if (!q.theta2[t.states[len - 1]]) {
                    problems.push_back(tag + "does not end in the right operand");
                }
                break;
            case PathForm::Globally:
                if (!t.loop_start || len != t.states.size()) {
                    problems.push_back(tag + "globally evidence must be a whole lasso");
                }
                for (StateId v : t.states) {
                    if (!q.theta1[v]) {
                        problems.push_back(tag + "leaves the operand");
                        break;
                    }
                }
                break;
        }
    }
    // distinct: differ somewhere below the shorter length; lassos are unrolled
    // far enough that two different ultimately periodic paths must disagree
    auto at = [](const EvidenceTrace& t, std::size_t i) {
        if (i < t.states.size()) {
            return t.states[i];
        }
        const std::size_t ls = *t.loop_start;
        return t.states[ls + (i - ls) % (t.states.size() - ls)];
    };
    auto length = [](const EvidenceTrace& t, const EvidenceTrace& u) -> std::size_t {
        const bool ti = t.form == PathForm::Globally && t.loop_start;
        const bool ui = u.form == PathForm::Globally && u.loop_start;
        if (ti && ui) {
            return std::max(t.states.size(), u.states.size()) + t.states.size() + u.states.size();
        }
        if (ti || ui) {
            return ti ? u.evidence_len : t.evidence_len;
        }
        return std::min(t.evidence_len, u.evidence_len);
    };
    for (std::size_t i = 0; i < traces.size(); ++i) {
        for (std::size_t j = i + 1; j < traces.size(); ++j) {
            const auto& a = traces[i];
            const auto& b = traces[j];
            if (a.states.empty() || b.states.empty()) {
                continue;
            }
            bool differ = false;
            const std::size_t L = length(a, b);
            for (std::size_t x = 0; x < L && !differ; ++x) {
                differ = at(a, x) != at(b, x);
            }
            if (!differ) {
                problems.push_back("traces " + std::to_string(i) + " and " + std::to_string(j) + " are not distinct");
            }
        }
    }
    return problems;
}

inline std::vector<std::string> trace_problems(const KripkeStructure& k, StateId s, const PathQuery& q,
                                               const std::vector<EvidenceTrace>& traces)
{
    return trace_problems(k, s, std::vector<PathQuery>{q}, traces);
}

inline std::vector<std::string> trace_problems(const KripkeStructure& k, const Explanation& e)
{
    return trace_problems(k, e.state, e.families, e.traces);
}

/// One line per trace: `s0,a,t` or `s0,(s1,s2)*`.
inline std::string render_trace(const KripkeStructure& k, const EvidenceTrace& t)
{
    std::string out;
    for (std::size_t i = 0; i < t.states.size(); ++i) {
        if (i > 0) {
            out += ',';
        }
        if (t.loop_start && i == *t.loop_start) {
            out += '(';
        }
        out += k.names[t.states[i]];
    }
    if (t.loop_start) {
        out += ")*";
    }
    return out;
}

}  // namespace gctl
