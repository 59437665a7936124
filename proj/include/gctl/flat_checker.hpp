#pragma once

// Graded-CTL model checking over explicit Kripke structures.
//
// Every E^{>k} operator is evaluated by counting pairwise-distinct evidences
// per state, saturating at k+1. The X case counts successors. The G and U
// cases work on the subgraph where the grade-0 formula holds: a state that
// reaches a cycle with a branching vertex has unboundedly many evidences;
// otherwise every reachable cycle is a sink-cycle (a terminal simple cycle)
// and counts are summed over the acyclic remainder, sink-first. All of this
// is linear in |S| + |R| and the grade only changes the saturation value.

#include "gctl/formula.hpp"
#include "gctl/graph.hpp"
#include "gctl/kripke.hpp"

#include <chrono>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace gctl {

using Count = std::uint64_t;
using StateSet = std::vector<char>;

namespace detail {

/// Capped evidence counting over the subgraph `g` (vertices are states of
/// the member set, renumbered). `target[v]` marks vertices that are evidences
/// on their own (the θ2 states of an until); every other vertex sums.
inline std::vector<Count> count_over_subgraph(const Csr& g, const std::vector<char>& target, Count cap)
{
    const auto scc = strongly_connected_components(g);
    std::vector<Count> count(g.size(), 0);
    for (const auto& comp : scc.members) {
        if (is_cyclic(g, comp)) {
            bool branching = false;
            for (std::size_t v : comp) {
                branching = branching || g.degree(v) >= 2;
            }
            // A branching cycle yields infinitely many distinct paths; a
            // sink-cycle is terminal and all its evidences are prefixes of one.
            const Count value = branching ? cap : std::min<Count>(1, cap);
            for (std::size_t v : comp) {
                count[v] = value;
            }
            continue;
        }
        const std::size_t v = comp.front();
        Count sum = 0;
        for (auto it = g.begin(v); it != g.end(v); ++it) {
            sum = saturating_add(sum, count[*it], cap);
        }
        if (target[v] && sum == 0) {
            sum = std::min<Count>(1, cap);
        }
        count[v] = sum;
    }
    return count;
}

struct Subgraph {
    std::vector<std::size_t> to_local;  // state -> local id or npos
    std::vector<StateId> to_state;
    Csr graph;
};

inline constexpr std::size_t kNone = static_cast<std::size_t>(-1);

/// Induced subgraph on `members`; edges leave only states with `expands`.
inline Subgraph induced(const KripkeStructure& k, const StateSet& members, const StateSet* expands)
{
    Subgraph sub;
    sub.to_local.assign(k.num_states(), kNone);
    for (StateId s = 0; s < k.num_states(); ++s) {
        if (members[s]) {
            sub.to_local[s] = sub.to_state.size();
            sub.to_state.push_back(s);
        }
    }
    for (StateId s : sub.to_state) {
        if (expands == nullptr || (*expands)[s]) {
            StateId last = kNone;
            for (StateId t : successors(k, s)) {
                if (members[t] && t != last) {
                    sub.graph.push(sub.to_local[t]);
                    last = t;
                }
            }
        }
        sub.graph.close_vertex();
    }
    return sub;
}

}  // namespace detail

/// States satisfying E G θ1 (greatest fixpoint).
inline StateSet exists_globally(const KripkeStructure& k, const StateSet& theta1)
{
    const std::size_t n = k.num_states();
    StateSet in(theta1);
    std::vector<std::size_t> live(n, 0);
    std::vector<std::size_t> offsets;
    const auto preds = k.predecessors_flat(offsets);
    std::vector<StateId> dead;
    for (StateId s = 0; s < n; ++s) {
        if (!in[s]) {
            continue;
        }
        for (StateId t : k.succ[s]) {
            live[s] += in[t] ? 1 : 0;
        }
        if (live[s] == 0) {
            dead.push_back(s);
        }
    }
    while (!dead.empty()) {
        const StateId s = dead.back();
        dead.pop_back();
        if (!in[s]) {
            continue;
        }
        in[s] = 0;
        for (std::size_t i = offsets[s]; i < offsets[s + 1]; ++i) {
            const StateId p = preds[i];
            if (in[p] && --live[p] == 0) {
                dead.push_back(p);
            }
        }
    }
    return in;
}

/// States satisfying E [θ1 U θ2] (least fixpoint).
inline StateSet exists_until(const KripkeStructure& k, const StateSet& theta1, const StateSet& theta2)
{
    const std::size_t n = k.num_states();
    StateSet in(n, 0);
    std::vector<std::size_t> offsets;
    const auto preds = k.predecessors_flat(offsets);
    std::vector<StateId> work;
    for (StateId s = 0; s < n; ++s) {
        if (theta2[s]) {
            in[s] = 1;
            work.push_back(s);
        }
    }
    while (!work.empty()) {
        const StateId s = work.back();
        work.pop_back();
        for (std::size_t i = offsets[s]; i < offsets[s + 1]; ++i) {
            const StateId p = preds[i];
            if (!in[p] && theta1[p]) {
                in[p] = 1;
                work.push_back(p);
            }
        }
    }
    return in;
}

/// min(cap, number of distinct successors of `s` satisfying θ1).
inline Count count_next(const KripkeStructure& k, StateId s, const StateSet& theta1, Count cap)
{
    Count c = 0;
    for (StateId t : successors(k, s)) {
        if (theta1[t]) {
            c = saturating_add(c, 1, cap);
        }
    }
    return c;
}

/// Per-state number of distinct evidences of G θ1, saturated at k+1.
inline std::vector<Count> count_globally(const KripkeStructure& k, const StateSet& theta1, Grade grade)
{
    const Count cap = Count(grade) + 1;
    const StateSet s1 = exists_globally(k, theta1);
    auto sub = detail::induced(k, s1, nullptr);
    const std::vector<char> no_targets(sub.to_state.size(), 0);
    const auto local = detail::count_over_subgraph(sub.graph, no_targets, cap);
    std::vector<Count> out(k.num_states(), 0);
    for (std::size_t i = 0; i < local.size(); ++i) {
        out[sub.to_state[i]] = local[i];
    }
    return out;
}

/// Per-state number of distinct evidences of θ1 U θ2, saturated at k+1.
inline std::vector<Count> count_until(const KripkeStructure& k, const StateSet& theta1, const StateSet& theta2,
                                      Grade grade)
{
    const Count cap = Count(grade) + 1;
    const StateSet s2 = exists_until(k, theta1, theta2);
    auto sub = detail::induced(k, s2, &theta1);
    std::vector<char> targets(sub.to_state.size(), 0);
    for (std::size_t i = 0; i < targets.size(); ++i) {
        targets[i] = theta2[sub.to_state[i]];
    }
    const auto local = detail::count_over_subgraph(sub.graph, targets, cap);
    std::vector<Count> out(k.num_states(), 0);
    for (std::size_t i = 0; i < local.size(); ++i) {
        out[sub.to_state[i]] = local[i];
    }
    return out;
}

/// Wall-clock time spent on one subformula.
struct Timing {
    std::string formula;
    double millis = 0.0;
};

/// Satisfaction of every subformula at every state, plus the saturated
/// evidence counts of the temporal ones.
class SatTable {
public:
    const std::vector<Formula>& subformulas() const { return order_; }

    const StateSet& sat(const Formula& f) const { return sat_.at(slot(f)); }
    bool holds(const Formula& f, StateId s) const { return sat(f)[s] != 0; }

    /// Saturated counts; for ForallU these are the summed counts of the
    /// two refuting families, saturated at k+1.
    const std::vector<Count>& counts(const Formula& f) const
    {
        const auto& c = counts_.at(slot(f));
        if (c.empty()) {
            throw std::invalid_argument("no evidence counts for " + render(f));
        }
        return c;
    }

    bool contains(const Formula& f) const { return index_.count(render(f)) != 0; }

    const std::vector<Timing>& timings() const { return timings_; }
    void add_timing(const Formula& f, double ms) { timings_.push_back({render(f), ms}); }

    void add(const Formula& f, StateSet sat, std::vector<Count> counts = {})
    {
        index_.emplace(render(f), order_.size());
        order_.push_back(f);
        sat_.push_back(std::move(sat));
        counts_.push_back(std::move(counts));
    }

private:
    std::size_t slot(const Formula& f) const
    {
        auto it = index_.find(render(f));
        if (it == index_.end()) {
            throw std::invalid_argument("subformula not in table: " + render(f));
        }
        return it->second;
    }

    std::vector<Formula> order_;
    std::map<std::string, std::size_t> index_;
    std::vector<StateSet> sat_;
    std::vector<std::vector<Count>> counts_;
    std::vector<Timing> timings_;
};

namespace detail {

inline StateSet atom_set(const KripkeStructure& k, const std::string& name)
{
    StateSet out(k.num_states(), 0);
    for (StateId s = 0; s < k.num_states(); ++s) {
        out[s] = k.has(s, name) ? 1 : 0;
    }
    return out;
}

inline StateSet threshold(const std::vector<Count>& counts, Count at_least)
{
    StateSet out(counts.size(), 0);
    for (std::size_t i = 0; i < counts.size(); ++i) {
        out[i] = counts[i] >= at_least ? 1 : 0;
    }
    return out;
}

}  // namespace detail

/// The two refuting families of A^{<=k}[a U b]: G(a & !b) and
/// (a & !b) U (!a & !b). Their evidences are mutually distinct.
struct ReleaseFamilies {
    StateSet stay;    // a & !b
    StateSet escape;  // !a & !b
};

inline ReleaseFamilies release_families(const StateSet& a, const StateSet& b)
{
    ReleaseFamilies r{StateSet(a.size(), 0), StateSet(a.size(), 0)};
    for (std::size_t i = 0; i < a.size(); ++i) {
        r.stay[i] = (a[i] && !b[i]) ? 1 : 0;
        r.escape[i] = (!a[i] && !b[i]) ? 1 : 0;
    }
    return r;
}

inline SatTable check_flat(const KripkeStructure& k, const Formula& f)
{
    if (!is_normalized(f)) {
        throw std::invalid_argument("check_flat expects a normalized formula: " + render(f));
    }
    const std::size_t n = k.num_states();
    SatTable table;
    for (const Formula& g : subformulas_bottom_up(f)) {
        const auto t0 = std::chrono::steady_clock::now();
        switch (g.op()) {
            case Op::Atom: table.add(g, detail::atom_set(k, g.name())); break;
            case Op::True: table.add(g, StateSet(n, 1)); break;
            case Op::Not: {
                StateSet s = table.sat(g.child());
                for (auto& v : s) {
                    v = !v;
                }
                table.add(g, std::move(s));
                break;
            }
            case Op::And: {
                StateSet s = table.sat(g.child(0));
                const StateSet& r = table.sat(g.child(1));
                for (std::size_t i = 0; i < n; ++i) {
                    s[i] = s[i] && r[i];
                }
                table.add(g, std::move(s));
                break;
            }
            case Op::ExistsX: {
                const Count cap = Count(g.grade()) + 1;
                const StateSet& t1 = table.sat(g.child());
                std::vector<Count> c(n);
                for (StateId s = 0; s < n; ++s) {
                    c[s] = count_next(k, s, t1, cap);
                }
                auto sat = detail::threshold(c, cap);
                table.add(g, std::move(sat), std::move(c));
                break;
            }
            case Op::ExistsG: {
                auto c = count_globally(k, table.sat(g.child()), g.grade());
                auto sat = detail::threshold(c, Count(g.grade()) + 1);
                table.add(g, std::move(sat), std::move(c));
                break;
            }
            case Op::ExistsU: {
                auto c = count_until(k, table.sat(g.child(0)), table.sat(g.child(1)), g.grade());
                auto sat = detail::threshold(c, Count(g.grade()) + 1);
                table.add(g, std::move(sat), std::move(c));
                break;
            }
            case Op::ForallU: {
                const Count cap = Count(g.grade()) + 1;
                const auto fam = release_families(table.sat(g.child(0)), table.sat(g.child(1)));
                const auto cg = count_globally(k, fam.stay, g.grade());
                const auto cu = count_until(k, fam.stay, fam.escape, g.grade());
                std::vector<Count> c(n);
                StateSet sat(n);
                for (StateId s = 0; s < n; ++s) {
                    c[s] = saturating_add(cg[s], cu[s], cap);
                    sat[s] = c[s] < cap ? 1 : 0;
                }
                table.add(g, std::move(sat), std::move(c));
                break;
            }
            default: throw std::logic_error("unexpected operator in normalized formula");
        }
        table.add_timing(g, std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
    }
    return table;
}

/// Normalizes `f` and reports whether it holds at the initial state.
inline bool holds_flat(const KripkeStructure& k, const Formula& f)
{
    const Formula nf = normalize(f);
    return check_flat(k, nf).holds(nf, k.initial);
}

}  // namespace gctl
