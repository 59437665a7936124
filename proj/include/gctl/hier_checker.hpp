#pragma once

// Graded-CTL checking directly on the hierarchical model.
//
// The working model keeps, per original machine, a skeleton (vertices, edges,
// exits) and a list of copies. A copy fixes where each of its boxes expands
// and stores one value per vertex for every subformula slot processed so
// far, so that every flat state <b1..bm u> gets the value stored at u in the
// copy reached by following the expansions. Each temporal pass may split a
// copy by exit context g: g(z) summarizes what the enclosing machine offers
// after leaving through exit z (a boolean, or a count capped at k+1).
//
// Within one pass the values form a monotone system over the flat states;
// solve(copy, g) computes its least (or greatest) solution restricted to one
// copy for a fixed context, calling itself on children with the contexts
// their boxes see. Memoizing on (copy, g) keeps the number of copies per
// machine within (k+2)^d per pass.

#include "gctl/flat_checker.hpp"
#include "gctl/formula.hpp"
#include "gctl/graph.hpp"
#include "gctl/hsm.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace gctl {

namespace hier {

using Value = std::uint32_t;
inline constexpr std::size_t kNoSlot = static_cast<std::size_t>(-1);

struct Skeleton {
    std::string name;
    std::vector<std::string> vertex_names;
    std::vector<Labels> labels;
    std::vector<int> child;  // skeleton index for boxes, -1 for nodes
    std::size_t init = 0;
    std::vector<std::size_t> outs;
    std::vector<int> exit_index;                                   // vertex -> position in outs, or -1
    std::vector<std::vector<std::size_t>> succ;                    // plain successors of nodes
    std::vector<std::vector<std::vector<std::size_t>>> exit_succ;  // [box][exit] -> targets

    std::size_t size() const { return vertex_names.size(); }
    bool is_box(std::size_t v) const { return child[v] >= 0; }
};

struct Copy {
    std::size_t skeleton = 0;
    std::vector<int> expand;                 // copy index for boxes, -1 for nodes
    std::vector<std::vector<Value>> values;  // [slot][vertex]; empty when the slot is dead
};

struct WorkingModel {
    std::vector<Skeleton> skeletons;
    std::vector<Copy> copies;  // expansions always point to lower indices; the top copy is last
    std::size_t num_slots = 0;

    std::size_t top() const { return copies.size() - 1; }

    Value value_at_entry(std::size_t copy, std::size_t slot) const
    {
        const Copy& c = copies[copy];
        return c.values[slot][skeletons[c.skeleton].init];
    }

    std::vector<std::size_t> copies_per_skeleton() const
    {
        std::vector<std::size_t> out(skeletons.size(), 0);
        for (const Copy& c : copies) {
            ++out[c.skeleton];
        }
        return out;
    }
};

/// One copy per machine, no slots. The model must be an HSM (box labels are
/// not part of the working model).
inline WorkingModel working_model(const Shsm& m)
{
    WorkingModel w;
    for (const Machine& mach : m.machines) {
        Skeleton sk;
        sk.name = mach.name;
        const std::size_t n = mach.vertices.size();
        for (const Vertex& v : mach.vertices) {
            sk.vertex_names.push_back(v.name);
            sk.labels.push_back(v.labels);
            sk.child.push_back(v.expand);
        }
        sk.init = mach.init;
        sk.outs = mach.outs;
        sk.exit_index.assign(n, -1);
        for (std::size_t e = 0; e < mach.outs.size(); ++e) {
            sk.exit_index[mach.outs[e]] = static_cast<int>(e);
        }
        sk.succ.resize(n);
        sk.exit_succ.resize(n);
        for (std::size_t v = 0; v < n; ++v) {
            if (sk.child[v] >= 0) {
                sk.exit_succ[v].resize(m.machines[static_cast<std::size_t>(sk.child[v])].outs.size());
            }
        }
        for (const Edge& e : mach.edges) {
            if (e.exit) {
                const int ei = w.skeletons[static_cast<std::size_t>(sk.child[e.src])].exit_index[*e.exit];
                sk.exit_succ[e.src][static_cast<std::size_t>(ei)].push_back(e.dst);
            } else {
                sk.succ[e.src].push_back(e.dst);
            }
        }
        // ((b, z), b) duplicates the flat transition of an internal edge
        // z -> in of the child; keep only one of them
        for (std::size_t b = 0; b < n; ++b) {
            if (sk.child[b] < 0) {
                continue;
            }
            const Machine& cm = m.machines[static_cast<std::size_t>(sk.child[b])];
            for (std::size_t e = 0; e < cm.outs.size(); ++e) {
                const bool loops_to_entry = std::any_of(cm.edges.begin(), cm.edges.end(), [&](const Edge& ce) {
                    return !ce.exit && ce.src == cm.outs[e] && ce.dst == cm.init;
                });
                if (loops_to_entry) {
                    auto& targets = sk.exit_succ[b][e];
                    targets.erase(std::remove(targets.begin(), targets.end(), b), targets.end());
                }
            }
        }
        auto tidy = [](std::vector<std::size_t>& v) {
            std::sort(v.begin(), v.end());
            v.erase(std::unique(v.begin(), v.end()), v.end());
        };
        for (auto& s : sk.succ) {
            tidy(s);
        }
        for (auto& per_box : sk.exit_succ) {
            for (auto& s : per_box) {
                tidy(s);
            }
        }
        Copy c;
        c.skeleton = w.skeletons.size();
        c.expand = sk.child;
        w.skeletons.push_back(std::move(sk));
        w.copies.push_back(std::move(c));
    }
    return w;
}

// ---------------------------------------------------------------------------
// Non-sink-cycle detection

enum class PathMode { Globally, Until };

/// Per copy: vertices from which a branching cycle inside the satisfying
/// subgraph is reachable (found at this level or below), plus the exit
/// summaries the enclosing level needs.
struct NscInfo {
    std::vector<char> nsc;          // per vertex
    std::vector<char> reach;        // per exit: entry reaches it inside S
    std::vector<char> branch;       // per exit: some such path passes a branching point
    std::vector<std::size_t> zdeg;  // per exit: S-successors inside the copy
    std::vector<std::vector<char>> passes;  // [e][e']: entry reaches exit e' and then exit e
    std::vector<std::vector<char>> cyclic_exit_reach;  // per exit on an S-cycle: vertices reaching it
};

/// `s_slot` holds the grade-0 set (E G θ1 or E θ1 U θ2). In until mode edges
/// leaving vertices where `theta1_slot` fails are ignored.
inline std::vector<NscInfo> compute_nsc(const WorkingModel& w, std::size_t s_slot, PathMode mode,
                                        std::size_t theta1_slot)
{
    std::vector<NscInfo> out(w.copies.size());
    for (std::size_t ci = 0; ci < w.copies.size(); ++ci) {
        const Copy& c = w.copies[ci];
        const Skeleton& sk = w.skeletons[c.skeleton];
        const std::size_t n = sk.size();
        const auto& S = c.values[s_slot];
        auto in_s = [&](std::size_t v) -> bool {
            if (sk.is_box(v)) {
                return w.value_at_entry(static_cast<std::size_t>(c.expand[v]), s_slot) != 0;
            }
            return S[v] != 0;
        };
        auto moves = [&](std::size_t v) -> bool {
            return mode == PathMode::Globally || c.values[theta1_slot][v] != 0;
        };
        // graph vertices: 0..n-1 for vertices, then one per (box, exit)
        std::vector<std::size_t> pair_base(n, 0);
        std::size_t total = n;
        for (std::size_t b = 0; b < n; ++b) {
            if (sk.is_box(b)) {
                pair_base[b] = total;
                total += sk.exit_succ[b].size();
            }
        }
        std::vector<std::vector<std::size_t>> adj(total);
        std::vector<char> present(total, 0), traversal_branch(total, 0);
        std::vector<std::size_t> degree(total, 0);
        for (std::size_t v = 0; v < n; ++v) {
            present[v] = in_s(v) ? 1 : 0;
        }
        for (std::size_t v = 0; v < n; ++v) {
            if (!present[v]) {
                continue;
            }
            if (!sk.is_box(v)) {
                if (moves(v)) {
                    for (std::size_t t : sk.succ[v]) {
                        if (present[t]) {
                            adj[v].push_back(t);
                        }
                    }
                }
                degree[v] = adj[v].size();
                continue;
            }
            const auto child = static_cast<std::size_t>(c.expand[v]);
            const Copy& cc = w.copies[child];
            const Skeleton& csk = w.skeletons[cc.skeleton];
            const NscInfo& ci_info = out[child];
            for (std::size_t e = 0; e < sk.exit_succ[v].size(); ++e) {
                const std::size_t z = csk.outs[e];
                const std::size_t p = pair_base[v] + e;
                if (!cc.values[s_slot][z]) {
                    continue;
                }
                present[p] = 1;
                if (ci_info.reach[e]) {
                    adj[v].push_back(p);
                    if (ci_info.branch[e]) {
                        traversal_branch[p] = 1;  // marks the edge v -> p
                    }
                }
                const bool z_moves = mode == PathMode::Globally || cc.values[theta1_slot][z] != 0;
                if (z_moves) {
                    for (std::size_t t : sk.exit_succ[v][e]) {
                        if (present[t]) {
                            adj[p].push_back(t);
                        }
                    }
                }
                degree[p] = ci_info.zdeg[e] + adj[p].size();
            }
            // passing another exit that also continues out here is a branch too
            for (std::size_t e = 0; e < sk.exit_succ[v].size(); ++e) {
                const std::size_t p = pair_base[v] + e;
                if (!present[p] || !ci_info.reach[e]) {
                    continue;
                }
                for (std::size_t e2 = 0; e2 < ci_info.passes[e].size(); ++e2) {
                    if (e2 != e && ci_info.passes[e][e2] && !adj[pair_base[v] + e2].empty()) {
                        traversal_branch[p] = 1;
                    }
                }
            }
        }
        Csr g;
        for (std::size_t v = 0; v < total; ++v) {
            for (std::size_t t : adj[v]) {
                g.push(t);
            }
            g.close_vertex();
        }
        const auto scc = strongly_connected_components(g);
        std::vector<char> seed(total, 0), on_cycle(total, 0);
        for (const auto& comp : scc.members) {
            if (!is_cyclic(g, comp)) {
                continue;
            }
            bool branching = false;
            const std::size_t id = scc.component[comp.front()];
            for (std::size_t v : comp) {
                on_cycle[v] = 1;
                if (degree[v] >= 2) {
                    branching = true;
                }
                if (v < n && sk.is_box(v)) {
                    for (std::size_t t : adj[v]) {
                        if (traversal_branch[t] && scc.component[t] == id) {
                            branching = true;
                        }
                    }
                }
            }
            if (branching) {
                for (std::size_t v : comp) {
                    seed[v] = 1;
                }
            }
        }
        for (std::size_t b = 0; b < n; ++b) {
            if (present[b] && sk.is_box(b)) {
                const auto child = static_cast<std::size_t>(c.expand[b]);
                if (out[child].nsc[w.skeletons[w.copies[child].skeleton].init]) {
                    seed[b] = 1;
                }
            }
        }
        // backwards closure
        std::vector<std::vector<std::size_t>> radj(total);
        for (std::size_t v = 0; v < total; ++v) {
            for (std::size_t t : adj[v]) {
                radj[t].push_back(v);
            }
        }
        auto backwards = [&](std::vector<char> mark) {
            std::vector<std::size_t> work;
            for (std::size_t v = 0; v < total; ++v) {
                if (mark[v]) {
                    work.push_back(v);
                }
            }
            while (!work.empty()) {
                const std::size_t v = work.back();
                work.pop_back();
                for (std::size_t u : radj[v]) {
                    if (!mark[u]) {
                        mark[u] = 1;
                        work.push_back(u);
                    }
                }
            }
            return mark;
        };
        const auto closure = backwards(seed);
        NscInfo& info = out[ci];
        info.nsc.assign(n, 0);
        for (std::size_t v = 0; v < n; ++v) {
            info.nsc[v] = present[v] && closure[v];
        }
        const std::size_t d = sk.outs.size();
        info.reach.assign(d, 0);
        info.branch.assign(d, 0);
        info.zdeg.assign(d, 0);
        info.cyclic_exit_reach.assign(d, {});
        for (std::size_t e = 0; e < d; ++e) {
            const std::size_t z = sk.outs[e];
            info.zdeg[e] = present[z] ? adj[z].size() : 0;
            if (present[z] && on_cycle[z]) {
                std::vector<char> m(total, 0);
                m[z] = 1;
                auto r = backwards(std::move(m));
                r.resize(n);
                info.cyclic_exit_reach[e] = std::move(r);
            }
        }
        // forward search over (vertex, passed-a-branch) from the entry
        if (present[sk.init]) {
            std::vector<char> seen(2 * total, 0);
            std::vector<std::size_t> work;
            seen[2 * sk.init] = 1;
            work.push_back(2 * sk.init);
            while (!work.empty()) {
                const std::size_t state = work.back();
                work.pop_back();
                const std::size_t v = state / 2;
                const bool flag = state % 2 != 0;
                for (std::size_t t : adj[v]) {
                    const bool nf = flag || degree[v] >= 2 || (v < n && sk.is_box(v) && traversal_branch[t]);
                    const std::size_t ns = 2 * t + (nf ? 1 : 0);
                    if (!seen[ns]) {
                        seen[ns] = 1;
                        work.push_back(ns);
                    }
                }
            }
            for (std::size_t e = 0; e < d; ++e) {
                const std::size_t z = sk.outs[e];
                info.reach[e] = seen[2 * z] || seen[2 * z + 1];
                info.branch[e] = seen[2 * z + 1];
            }
        }
        info.passes.assign(d, std::vector<char>(d, 0));
        for (std::size_t e2 = 0; e2 < d; ++e2) {
            if (!info.reach[e2]) {
                continue;
            }
            // forward closure from the successors of exit e2
            std::vector<char> fwd(total, 0);
            std::vector<std::size_t> work(adj[sk.outs[e2]].begin(), adj[sk.outs[e2]].end());
            for (std::size_t t : work) {
                fwd[t] = 1;
            }
            while (!work.empty()) {
                const std::size_t v = work.back();
                work.pop_back();
                for (std::size_t t : adj[v]) {
                    if (!fwd[t]) {
                        fwd[t] = 1;
                        work.push_back(t);
                    }
                }
            }
            for (std::size_t e = 0; e < d; ++e) {
                info.passes[e][e2] = fwd[sk.outs[e]];
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Passes

enum class PassKind {
    NextCount,  // capped number of successors satisfying θ1
    Globally,   // E G θ1, greatest fixpoint
    Until,      // E θ1 U θ2, least fixpoint
    CountG,     // capped evidence count of G θ1 inside S = E G θ1
    CountU,     // capped evidence count of θ1 U θ2 inside S = E θ1 U θ2
};

struct PassSpec {
    PassKind kind = PassKind::NextCount;
    Value cap = 1;
    std::size_t theta1 = kNoSlot;
    std::size_t theta2 = kNoSlot;
    std::size_t s = kNoSlot;
    std::size_t out = kNoSlot;
    bool use_nsc = true;
};

class CapacityGuard {
public:
    explicit CapacityGuard(std::size_t limit) : limit_(limit) {}
    void check(std::size_t n) const
    {
        if (n > limit_) {
            throw CapacityError("hierarchical check exceeds the limit of " + std::to_string(limit_) + " machine copies");
        }
    }

private:
    std::size_t limit_;
};

namespace detail {

class PassSolver {
public:
    PassSolver(const WorkingModel& w, const PassSpec& spec, const CapacityGuard& guard)
        : w_(w), spec_(spec), guard_(guard)
    {
        if ((spec.kind == PassKind::CountG || spec.kind == PassKind::CountU) && spec.use_nsc) {
            nsc_ = compute_nsc(w, spec.s, spec.kind == PassKind::CountG ? PathMode::Globally : PathMode::Until,
                               spec.theta1);
        }
    }

    struct Solution {
        std::size_t copy;
        std::vector<Value> g;
        std::vector<Value> val;
        std::vector<std::size_t> box_sol;
    };

    std::size_t solve_top()
    {
        const Copy& top = w_.copies[w_.top()];
        return solve(w_.top(), std::vector<Value>(w_.skeletons[top.skeleton].outs.size(), 0));
    }

    const std::vector<Solution>& solutions() const { return sols_; }

private:
    Value slot(const Copy& c, std::size_t s, std::size_t v) const { return c.values[s][v]; }

    bool preset(std::size_t copy, std::size_t v) const { return !nsc_.empty() && nsc_[copy].nsc[v]; }

    bool uses_successors(std::size_t copy, std::size_t v) const
    {
        const Copy& c = w_.copies[copy];
        switch (spec_.kind) {
            case PassKind::NextCount: return true;
            case PassKind::Globally: return slot(c, spec_.theta1, v) != 0;
            case PassKind::Until: return slot(c, spec_.theta2, v) == 0 && slot(c, spec_.theta1, v) != 0;
            case PassKind::CountG: return slot(c, spec_.s, v) != 0 && !preset(copy, v);
            case PassKind::CountU:
                return slot(c, spec_.s, v) != 0 && slot(c, spec_.theta1, v) != 0 && !preset(copy, v);
        }
        return false;
    }

    Value start(std::size_t copy, std::size_t v, bool hot) const
    {
        const Copy& c = w_.copies[copy];
        switch (spec_.kind) {
            case PassKind::NextCount: return 0;
            case PassKind::Globally: return slot(c, spec_.theta1, v) != 0 ? 1 : 0;
            case PassKind::Until: return slot(c, spec_.theta2, v) != 0 ? 1 : 0;
            case PassKind::CountG:
                if (!slot(c, spec_.s, v)) {
                    return 0;
                }
                return hot ? spec_.cap : 1;
            case PassKind::CountU:
                if (!slot(c, spec_.s, v)) {
                    return 0;
                }
                if (!slot(c, spec_.theta1, v)) {
                    return 1;
                }
                return hot ? spec_.cap : 0;
        }
        return 0;
    }

    Value equation(std::size_t copy, std::size_t v, bool hot, std::uint64_t sum) const
    {
        const Copy& c = w_.copies[copy];
        const Value capped = static_cast<Value>(std::min<std::uint64_t>(sum, spec_.cap));
        switch (spec_.kind) {
            case PassKind::NextCount: return capped;
            case PassKind::Globally: return slot(c, spec_.theta1, v) ? capped : 0;
            case PassKind::Until:
                if (slot(c, spec_.theta2, v)) {
                    return 1;
                }
                return slot(c, spec_.theta1, v) ? capped : 0;
            case PassKind::CountG:
                if (!slot(c, spec_.s, v)) {
                    return 0;
                }
                return hot ? spec_.cap : capped;
            case PassKind::CountU:
                if (!slot(c, spec_.s, v)) {
                    return 0;
                }
                if (!slot(c, spec_.theta1, v)) {
                    return 1;
                }
                if (hot) {
                    return spec_.cap;
                }
                return slot(c, spec_.theta2, v) ? std::max<Value>(1, capped) : capped;
        }
        return 0;
    }

    std::size_t solve(std::size_t copy, const std::vector<Value>& g)
    {
        auto key = std::make_pair(copy, g);
        if (auto it = memo_.find(key); it != memo_.end()) {
            return it->second;
        }
        const Copy& c = w_.copies[copy];
        const Skeleton& sk = w_.skeletons[c.skeleton];
        const std::size_t n = sk.size();
        const bool fixpoint = spec_.kind != PassKind::NextCount;

        // vertices pinned at the cap: below a non-sink cycle, or reaching an
        // exit that lies on an S-cycle and also has somewhere to go outside
        std::vector<char> hot(n, 0);
        if (!nsc_.empty()) {
            const NscInfo& info = nsc_[copy];
            for (std::size_t v = 0; v < n; ++v) {
                hot[v] = info.nsc[v];
            }
            for (std::size_t e = 0; e < g.size(); ++e) {
                if (g[e] != 0 && !info.cyclic_exit_reach[e].empty()) {
                    for (std::size_t v = 0; v < n; ++v) {
                        hot[v] = hot[v] || info.cyclic_exit_reach[e][v];
                    }
                }
            }
        }

        std::vector<Value> val(n, 0);
        std::vector<std::size_t> box_sol(n, kNoSlot);
        std::vector<std::vector<Value>> box_g(n);
        for (std::size_t v = 0; v < n; ++v) {
            if (sk.is_box(v)) {
                // a hot box is pinned too, otherwise a branching cycle through
                // its exits climbs one unit per round
                const auto child = static_cast<std::size_t>(c.expand[v]);
                val[v] = hot[v] ? spec_.cap : start(child, w_.skeletons[w_.copies[child].skeleton].init, false);
            } else {
                val[v] = start(copy, v, hot[v] != 0);
            }
        }
        auto contribution = [&](std::size_t t) -> std::uint64_t {
            if (fixpoint) {
                return val[t];
            }
            if (sk.is_box(t)) {
                return w_.value_at_entry(static_cast<std::size_t>(c.expand[t]), spec_.theta1);
            }
            return slot(c, spec_.theta1, t);
        };
        bool changed = true;
        while (changed) {
            changed = false;
            for (std::size_t v = 0; v < n; ++v) {
                if (!sk.is_box(v)) {
                    std::uint64_t sum = 0;
                    if (uses_successors(copy, v) && !hot[v]) {
                        for (std::size_t t : sk.succ[v]) {
                            sum += contribution(t);
                        }
                        if (sk.exit_index[v] >= 0) {
                            sum += g[static_cast<std::size_t>(sk.exit_index[v])];
                        }
                    }
                    const Value nv = equation(copy, v, hot[v] != 0, sum);
                    if (nv != val[v]) {
                        val[v] = nv;
                        changed = true;
                    }
                    continue;
                }
                const auto child = static_cast<std::size_t>(c.expand[v]);
                const Skeleton& csk = w_.skeletons[w_.copies[child].skeleton];
                std::vector<Value> gb(csk.outs.size(), 0);
                for (std::size_t e = 0; e < gb.size(); ++e) {
                    if (!uses_successors(child, csk.outs[e])) {
                        continue;
                    }
                    std::uint64_t sum = 0;
                    for (std::size_t t : sk.exit_succ[v][e]) {
                        sum += contribution(t);
                    }
                    gb[e] = static_cast<Value>(std::min<std::uint64_t>(sum, spec_.cap));
                }
                if (box_sol[v] == kNoSlot || gb != box_g[v]) {
                    const std::size_t s = solve(child, gb);
                    box_sol[v] = s;
                    box_g[v] = std::move(gb);
                    const Value nv = hot[v] ? spec_.cap : sols_[s].val[csk.init];
                    if (nv != val[v]) {
                        val[v] = nv;
                        changed = true;
                    }
                }
            }
        }
        for (std::size_t v = 0; v < n; ++v) {
            if (sk.is_box(v)) {
                val[v] = 0;
            }
        }
        sols_.push_back({copy, g, std::move(val), std::move(box_sol)});
        guard_.check(sols_.size());
        memo_.emplace(std::move(key), sols_.size() - 1);
        return sols_.size() - 1;
    }

    const WorkingModel& w_;
    PassSpec spec_;
    const CapacityGuard& guard_;
    std::vector<NscInfo> nsc_;
    std::vector<Solution> sols_;
    std::map<std::pair<std::size_t, std::vector<Value>>, std::size_t> memo_;
};

/// Rebuilds the copy list from the top copy, dropping dead slots and merging
/// copies with identical content. `make(copy)` yields the content of an old
/// entry given the new indices of its children.
template <typename Children, typename Make>
WorkingModel rebuild(const WorkingModel& w, std::size_t root, std::size_t num_entries, Children children, Make make,
                     const std::vector<char>& live)
{
    WorkingModel out;
    out.skeletons = w.skeletons;
    out.num_slots = live.size();
    std::vector<std::size_t> index(num_entries, kNoSlot);
    std::map<std::pair<std::size_t, std::pair<std::vector<int>, std::vector<std::vector<Value>>>>, std::size_t> seen;
    // iterative post-order
    std::vector<std::pair<std::size_t, bool>> stack{{root, false}};
    while (!stack.empty()) {
        auto [e, expanded] = stack.back();
        stack.pop_back();
        if (index[e] != kNoSlot) {
            continue;
        }
        if (!expanded) {
            stack.push_back({e, true});
            for (std::size_t ch : children(e)) {
                if (ch != kNoSlot && index[ch] == kNoSlot) {
                    stack.push_back({ch, false});
                }
            }
            continue;
        }
        Copy c = make(e, index);
        for (std::size_t s = 0; s < live.size(); ++s) {
            if (!live[s]) {
                c.values[s].clear();
            }
        }
        auto key = std::make_pair(c.skeleton, std::make_pair(c.expand, c.values));
        auto it = seen.find(key);
        if (it != seen.end()) {
            index[e] = it->second;
            continue;
        }
        index[e] = out.copies.size();
        seen.emplace(std::move(key), out.copies.size());
        out.copies.push_back(std::move(c));
    }
    return out;
}

}  // namespace detail

/// Runs one pass and returns the specialized model with `spec.out` filled in.
inline WorkingModel run_pass(const WorkingModel& w, const PassSpec& spec, const std::vector<char>& live,
                             const CapacityGuard& guard)
{
    detail::PassSolver solver(w, spec, guard);
    const std::size_t root = solver.solve_top();
    const auto& sols = solver.solutions();
    auto children = [&](std::size_t s) {
        std::vector<std::size_t> out;
        for (std::size_t b : sols[s].box_sol) {
            if (b != kNoSlot) {
                out.push_back(b);
            }
        }
        return out;
    };
    auto make = [&](std::size_t s, const std::vector<std::size_t>& index) {
        const auto& sol = sols[s];
        Copy c = w.copies[sol.copy];
        c.values.resize(w.num_slots);
        c.values[spec.out] = sol.val;
        for (std::size_t v = 0; v < c.expand.size(); ++v) {
            if (c.expand[v] >= 0) {
                c.expand[v] = static_cast<int>(index[sol.box_sol[v]]);
            }
        }
        return c;
    };
    auto out = detail::rebuild(w, root, sols.size(), children, make, live);
    guard.check(out.copies.size());
    return out;
}

/// Applies a per-vertex function to every copy (no specialization needed).
template <typename F>
WorkingModel local_step(const WorkingModel& w, std::size_t out_slot, F f, const std::vector<char>& live)
{
    auto children = [&](std::size_t ci) {
        std::vector<std::size_t> out;
        for (int e : w.copies[ci].expand) {
            if (e >= 0) {
                out.push_back(static_cast<std::size_t>(e));
            }
        }
        return out;
    };
    auto make = [&](std::size_t ci, const std::vector<std::size_t>& index) {
        Copy c = w.copies[ci];
        const Skeleton& sk = w.skeletons[c.skeleton];
        c.values.resize(w.num_slots);
        auto& out = c.values[out_slot];
        out.assign(sk.size(), 0);
        for (std::size_t v = 0; v < sk.size(); ++v) {
            if (!sk.is_box(v)) {
                out[v] = f(w.copies[ci], sk, v);
            }
        }
        for (auto& e : c.expand) {
            if (e >= 0) {
                e = static_cast<int>(index[static_cast<std::size_t>(e)]);
            }
        }
        return c;
    };
    return detail::rebuild(w, w.top(), w.copies.size(), children, make, live);
}

/// Slot values of every flat state, in the order flatten() enumerates them.
inline std::vector<Value> flat_values(const WorkingModel& w, std::size_t slot)
{
    std::vector<Value> out;
    auto walk = [&](auto&& self, std::size_t ci) -> void {
        const Copy& c = w.copies[ci];
        const Skeleton& sk = w.skeletons[c.skeleton];
        for (std::size_t v = 0; v < sk.size(); ++v) {
            if (sk.is_box(v)) {
                self(self, static_cast<std::size_t>(c.expand[v]));
            } else {
                out.push_back(c.values[slot][v]);
            }
        }
    };
    walk(walk, w.top());
    return out;
}

}  // namespace hier

// ---------------------------------------------------------------------------
// Formula compilation and the driver

struct OperatorGrowth {
    std::string formula;
    std::vector<std::size_t> before;  // copies per machine before the operator
    std::vector<std::size_t> after;
    double bound = 1.0;  // kbar^d

    double worst_ratio() const
    {
        double r = 0.0;
        for (std::size_t i = 0; i < before.size(); ++i) {
            if (before[i] > 0) {
                r = std::max(r, static_cast<double>(after[i]) / static_cast<double>(before[i]));
            }
        }
        return r;
    }
    bool within_bound() const { return worst_ratio() <= bound + 1e-9; }
};

struct HierOptions {
    std::size_t max_copies = std::size_t{1} << 20;
    bool use_nsc = true;
    bool keep_all_slots = false;  // keep every subformula slot (for inspection)
};

struct HierResult {
    bool holds = false;
    hier::WorkingModel model;
    std::map<std::string, std::size_t> slots;  // rendered subformula -> slot
    std::vector<OperatorGrowth> growth;
    std::vector<Timing> timings;  // per subformula, in evaluation order
    std::size_t reduced_machines = 0;
    double millis = 0.0;

    std::size_t copies() const { return model.copies.size(); }
};

namespace detail {

struct Step {
    enum Kind { Atom, True, Not, And, Threshold, LeqSum, Pass } kind;
    std::string atom;
    std::size_t a = hier::kNoSlot, b = hier::kNoSlot, out = hier::kNoSlot;
    std::uint64_t param = 0;
    hier::PassSpec pass;
    std::size_t op = 0;  // index of the subformula this step belongs to
};

struct Plan {
    std::vector<Step> steps;
    std::vector<Formula> ops;
    std::map<std::string, std::size_t> slot_of;
    std::size_t num_slots = 0;
};

inline Plan compile(const Formula& f)
{
    Plan plan;
    auto fresh = [&] { return plan.num_slots++; };
    std::size_t op = 0;
    auto local = [&](Step::Kind k, std::size_t a, std::size_t b, std::size_t o, std::uint64_t param = 0) {
        plan.steps.push_back(Step{k, {}, a, b, o, param, {}, op});
    };
    auto pass = [&](hier::PassKind kind, hier::Value cap, std::size_t t1, std::size_t t2, std::size_t s,
                    std::size_t o) {
        Step st{Step::Pass, {}, hier::kNoSlot, hier::kNoSlot, o, 0, {}, op};
        st.pass = {kind, cap, t1, t2, s, o, true};
        plan.steps.push_back(st);
    };
    // Slot of an auxiliary formula, emitting its steps on first use. The
    // grade-0 sets and the release families get names so that equal
    // subformulas share them.
    auto named = [&](const Formula& h, auto emit) {
        const std::string key = render(h);
        if (auto it = plan.slot_of.find(key); it != plan.slot_of.end()) {
            return it->second;
        }
        const std::size_t out = fresh();
        emit(out);
        plan.slot_of.emplace(key, out);
        return out;
    };
    auto slot = [&](const Formula& h) { return plan.slot_of.at(render(h)); };
    auto negation = [&](const Formula& h) {
        return named(mk_not(h), [&](std::size_t o) { local(Step::Not, slot(h), hier::kNoSlot, o); });
    };
    auto conjunction = [&](const Formula& a, const Formula& b) {
        return named(Formula::conj(a, b), [&](std::size_t o) { local(Step::And, slot(a), slot(b), o); });
    };
    auto globally0 = [&](const Formula& a) {
        return named(Formula::eg(0, a), [&](std::size_t o) {
            pass(hier::PassKind::Globally, 1, slot(a), hier::kNoSlot, hier::kNoSlot, o);
        });
    };
    auto until0 = [&](const Formula& a, const Formula& b) {
        return named(Formula::eu(0, a, b), [&](std::size_t o) {
            pass(hier::PassKind::Until, 1, slot(a), slot(b), hier::kNoSlot, o);
        });
    };
    for (const Formula& g : subformulas_bottom_up(f)) {
        if (plan.slot_of.count(render(g)) != 0) {
            continue;
        }
        op = plan.ops.size();
        plan.ops.push_back(g);
        const hier::Value cap = static_cast<hier::Value>(std::uint64_t(g.grade()) + 1);
        named(g, [&](std::size_t out) {
            switch (g.op()) {
                case Op::Atom: plan.steps.push_back(Step{Step::Atom, g.name(), hier::kNoSlot, hier::kNoSlot, out, 0, {}, op}); break;
                case Op::True: local(Step::True, hier::kNoSlot, hier::kNoSlot, out); break;
                case Op::Not: local(Step::Not, slot(g.child()), hier::kNoSlot, out); break;
                case Op::And: local(Step::And, slot(g.child(0)), slot(g.child(1)), out); break;
                case Op::ExistsX: {
                    if (g.grade() == 0) {
                        pass(hier::PassKind::NextCount, 1, slot(g.child()), hier::kNoSlot, hier::kNoSlot, out);
                        break;
                    }
                    const std::size_t c = fresh();
                    pass(hier::PassKind::NextCount, cap, slot(g.child()), hier::kNoSlot, hier::kNoSlot, c);
                    local(Step::Threshold, c, hier::kNoSlot, out, cap);
                    break;
                }
                case Op::ExistsG: {
                    if (g.grade() == 0) {
                        pass(hier::PassKind::Globally, 1, slot(g.child()), hier::kNoSlot, hier::kNoSlot, out);
                        break;
                    }
                    const std::size_t s1 = globally0(g.child()), c = fresh();
                    pass(hier::PassKind::CountG, cap, slot(g.child()), hier::kNoSlot, s1, c);
                    local(Step::Threshold, c, hier::kNoSlot, out, cap);
                    break;
                }
                case Op::ExistsU: {
                    if (g.grade() == 0) {
                        pass(hier::PassKind::Until, 1, slot(g.child(0)), slot(g.child(1)), hier::kNoSlot, out);
                        break;
                    }
                    const std::size_t s2 = until0(g.child(0), g.child(1)), c = fresh();
                    pass(hier::PassKind::CountU, cap, slot(g.child(0)), slot(g.child(1)), s2, c);
                    local(Step::Threshold, c, hier::kNoSlot, out, cap);
                    break;
                }
                case Op::ForallU: {
                    const Formula nb = mk_not(g.child(1));
                    const Formula na = mk_not(g.child(0));
                    negation(g.child(1));
                    negation(g.child(0));
                    const Formula stay = Formula::conj(g.child(0), nb);
                    const Formula escape = Formula::conj(na, nb);
                    const std::size_t st = conjunction(g.child(0), nb);
                    const std::size_t es = conjunction(na, nb);
                    const std::size_t s1 = globally0(stay), cg = fresh();
                    pass(hier::PassKind::CountG, cap, st, hier::kNoSlot, s1, cg);
                    const std::size_t s2 = until0(stay, escape), cu = fresh();
                    pass(hier::PassKind::CountU, cap, st, es, s2, cu);
                    local(Step::LeqSum, cg, cu, out, g.grade());
                    break;
                }
                default: throw std::logic_error("unexpected operator in normalized formula");
            }
        });
    }
    return plan;
}

/// live_after[i][s]: slot s is read by a step after i (or is a kept output).
inline std::vector<std::vector<char>> liveness(const Plan& plan, const std::vector<char>& keep)
{
    std::vector<std::vector<char>> live(plan.steps.size(), std::vector<char>(plan.num_slots, 0));
    std::vector<char> cur = keep;
    for (std::size_t i = plan.steps.size(); i-- > 0;) {
        live[i] = cur;
        const Step& s = plan.steps[i];
        cur[s.out] = keep[s.out];
        auto use = [&](std::size_t x) {
            if (x != hier::kNoSlot) {
                cur[x] = 1;
            }
        };
        if (s.kind == Step::Pass) {
            use(s.pass.theta1);
            use(s.pass.theta2);
            use(s.pass.s);
        } else {
            use(s.a);
            use(s.b);
        }
    }
    return live;
}

}  // namespace detail

/// Checks a normalized formula at the initial state of the flattening of `m`
/// without building the flattening. Models with labeled boxes are first
/// reduced to an HSM over the atoms of `f`.
inline HierResult check_hier(const Shsm& m, const Formula& f, const HierOptions& opt = {})
{
    if (!is_normalized(f)) {
        throw std::invalid_argument("check_hier expects a normalized formula: " + render(f));
    }
    const auto t0 = std::chrono::steady_clock::now();
    HierResult res;
    Shsm hsm;
    if (is_hsm(m)) {
        hsm = m;
    } else {
        hsm = reduce_to_hsm(m, atoms(f)).model;
    }
    res.reduced_machines = hsm.machines.size();
    const auto plan = detail::compile(f);
    std::vector<char> keep(plan.num_slots, 0);
    if (opt.keep_all_slots) {
        for (const auto& [name, s] : plan.slot_of) {
            keep[s] = 1;
        }
    }
    keep[plan.slot_of.at(render(f))] = 1;
    const auto live = detail::liveness(plan, keep);

    const hier::CapacityGuard guard(opt.max_copies);
    hier::WorkingModel w = hier::working_model(hsm);
    w.num_slots = plan.num_slots;
    for (auto& c : w.copies) {
        c.values.resize(plan.num_slots);
    }
    const double kbar = static_cast<double>(max_grade(f)) + 2.0;
    const double bound = std::pow(kbar, static_cast<double>(hsm.max_exits()));

    std::size_t current_op = static_cast<std::size_t>(-1);
    auto op_start = std::chrono::steady_clock::now();
    for (std::size_t i = 0; i < plan.steps.size(); ++i) {
        const auto& st = plan.steps[i];
        if (st.op != current_op) {
            current_op = st.op;
            op_start = std::chrono::steady_clock::now();
            if (is_temporal(plan.ops[st.op].op())) {
                res.growth.push_back({render(plan.ops[st.op]), w.copies_per_skeleton(), {}, bound});
            }
        }
        using hier::Copy;
        using hier::Skeleton;
        switch (st.kind) {
            case detail::Step::Atom:
                w = hier::local_step(
                    w, st.out,
                    [&](const Copy&, const Skeleton& sk, std::size_t v) -> hier::Value {
                        return sk.labels[v].count(st.atom) ? 1 : 0;
                    },
                    live[i]);
                break;
            case detail::Step::True:
                w = hier::local_step(w, st.out, [](const Copy&, const Skeleton&, std::size_t) -> hier::Value { return 1; },
                                     live[i]);
                break;
            case detail::Step::Not:
                w = hier::local_step(
                    w, st.out,
                    [&](const Copy& c, const Skeleton&, std::size_t v) -> hier::Value { return c.values[st.a][v] ? 0 : 1; },
                    live[i]);
                break;
            case detail::Step::And:
                w = hier::local_step(
                    w, st.out,
                    [&](const Copy& c, const Skeleton&, std::size_t v) -> hier::Value {
                        return (c.values[st.a][v] && c.values[st.b][v]) ? 1 : 0;
                    },
                    live[i]);
                break;
            case detail::Step::Threshold:
                w = hier::local_step(
                    w, st.out,
                    [&](const Copy& c, const Skeleton&, std::size_t v) -> hier::Value {
                        return c.values[st.a][v] >= st.param ? 1 : 0;
                    },
                    live[i]);
                break;
            case detail::Step::LeqSum:
                w = hier::local_step(
                    w, st.out,
                    [&](const Copy& c, const Skeleton&, std::size_t v) -> hier::Value {
                        return std::uint64_t(c.values[st.a][v]) + c.values[st.b][v] <= st.param ? 1 : 0;
                    },
                    live[i]);
                break;
            case detail::Step::Pass: {
                auto spec = st.pass;
                spec.use_nsc = opt.use_nsc;
                w = hier::run_pass(w, spec, live[i], guard);
                break;
            }
        }
        const bool last_of_op = i + 1 == plan.steps.size() || plan.steps[i + 1].op != st.op;
        if (last_of_op && is_temporal(plan.ops[st.op].op())) {
            res.growth.back().after = w.copies_per_skeleton();
        }
        if (last_of_op) {
            res.timings.push_back(
                {render(plan.ops[st.op]),
                 std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - op_start).count()});
        }
    }
    const std::size_t out = plan.slot_of.at(render(f));
    res.holds = w.value_at_entry(w.top(), out) != 0;
    res.slots = plan.slot_of;
    res.model = std::move(w);
    res.millis = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

inline bool holds_hier(const Shsm& m, const Formula& f) { return check_hier(m, normalize(f)).holds; }

}  // namespace gctl
