#pragma once

// Hierarchical state machines with scope-dependent labels (SHSM).
//
// A model is an ordered tuple of machines; machine i may only contain boxes
// that expand into machines with a smaller index, and the last machine is
// the top level. A state of the flat semantics is a complete well-formed
// sequence of vertices <b1 ... bm u>, labeled with the union of the labels
// along the sequence.

#include "gctl/kripke.hpp"

#include <algorithm>
#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace gctl {

inline constexpr int kNoExpansion = -1;

struct Vertex {
    std::string name;
    Labels labels;
    int expand = kNoExpansion;  // machine index for boxes

    bool is_box() const { return expand != kNoExpansion; }
};

/// `(src, dst)` when `exit` is empty; `((src, exit), dst)` otherwise, where
/// `exit` indexes a vertex of the machine `src` expands to.
struct Edge {
    std::size_t src = 0;
    std::optional<std::size_t> exit;
    std::size_t dst = 0;

    friend bool operator==(const Edge&, const Edge&) = default;
};

struct Machine {
    std::string name;
    std::vector<Vertex> vertices;
    std::size_t init = 0;
    std::vector<std::size_t> outs;
    std::vector<Edge> edges;

    std::optional<std::size_t> find(const std::string& vertex) const
    {
        for (std::size_t i = 0; i < vertices.size(); ++i) {
            if (vertices[i].name == vertex) {
                return i;
            }
        }
        return std::nullopt;
    }

    bool is_out(std::size_t v) const { return std::find(outs.begin(), outs.end(), v) != outs.end(); }

    std::size_t add_vertex(std::string vname, Labels props = {}, int expand = kNoExpansion)
    {
        vertices.push_back({std::move(vname), std::move(props), expand});
        return vertices.size() - 1;
    }
};

struct Shsm {
    std::vector<Machine> machines;

    const Machine& top() const { return machines.back(); }
    std::size_t top_index() const { return machines.size() - 1; }

    std::optional<std::size_t> find_machine(const std::string& name) const
    {
        for (std::size_t i = 0; i < machines.size(); ++i) {
            if (machines[i].name == name) {
                return i;
            }
        }
        return std::nullopt;
    }

    /// Maximum number of exits over all machines.
    std::size_t max_exits() const
    {
        std::size_t d = 0;
        for (const auto& m : machines) {
            d = std::max(d, m.outs.size());
        }
        return d;
    }

    std::size_t total_vertices() const
    {
        std::size_t n = 0;
        for (const auto& m : machines) {
            n += m.vertices.size();
        }
        return n;
    }
};

inline bool is_hsm(const Shsm& m)
{
    for (const auto& mach : m.machines) {
        for (const auto& v : mach.vertices) {
            if (v.is_box() && !v.labels.empty()) {
                return false;
            }
        }
    }
    return true;
}

// ---------------------------------------------------------------------------
// Validation

/// A vertex whose flat states (in some reachable context) have no successor.
struct FlatSink {
    std::size_t machine;
    std::size_t vertex;
    std::optional<std::size_t> via_box_machine;  // set when an exit lacks successors in a parent box
    std::optional<std::size_t> via_box;
};

namespace detail {

inline std::string where(const Shsm& m, std::size_t mi, std::size_t v)
{
    const auto& mach = m.machines[mi];
    return "machine '" + mach.name + "' vertex '" + (v < mach.vertices.size() ? mach.vertices[v].name : "?") + "'";
}

/// Structural problems; totality is handled separately.
inline std::vector<std::string> structural_problems(const Shsm& m)
{
    std::vector<std::string> out;
    if (m.machines.empty()) {
        out.push_back("model has no machines");
        return out;
    }
    std::map<std::string, std::size_t> owner;
    for (std::size_t i = 0; i < m.machines.size(); ++i) {
        const Machine& mach = m.machines[i];
        const std::string mname = "machine '" + mach.name + "'";
        if (mach.vertices.empty()) {
            out.push_back(mname + " has no vertices");
            continue;
        }
        for (std::size_t v = 0; v < mach.vertices.size(); ++v) {
            const Vertex& vx = mach.vertices[v];
            auto [it, fresh] = owner.emplace(vx.name, i);
            if (!fresh) {
                out.push_back(where(m, i, v) + " reuses a vertex name already declared in machine '" +
                              m.machines[it->second].name + "'");
            }
            if (vx.is_box() && (vx.expand < 0 || static_cast<std::size_t>(vx.expand) >= i)) {
                out.push_back(where(m, i, v) + " expands to machine index " + std::to_string(vx.expand) +
                              ", violating expand_i(u) < i");
            }
        }
        if (mach.init >= mach.vertices.size()) {
            out.push_back(mname + " has no valid initial vertex");
        } else if (mach.vertices[mach.init].is_box()) {
            out.push_back(where(m, i, mach.init) + " is initial but is a box");
        }
        for (std::size_t z : mach.outs) {
            if (z >= mach.vertices.size()) {
                out.push_back(mname + " lists a missing output vertex");
            } else if (mach.vertices[z].is_box()) {
                out.push_back(where(m, i, z) + " is an output but is a box");
            }
        }
        for (const Edge& e : mach.edges) {
            if (e.src >= mach.vertices.size() || e.dst >= mach.vertices.size()) {
                out.push_back(mname + " has an edge with a dangling endpoint");
                continue;
            }
            const Vertex& src = mach.vertices[e.src];
            if (!e.exit) {
                if (src.is_box()) {
                    out.push_back(where(m, i, e.src) + " is a box with an edge that names no exit");
                }
                continue;
            }
            if (!src.is_box()) {
                out.push_back(where(m, i, e.src) + " is a node but has an exit edge");
                continue;
            }
            if (src.expand < 0 || static_cast<std::size_t>(src.expand) >= i) {
                continue;
            }
            const Machine& child = m.machines[static_cast<std::size_t>(src.expand)];
            if (*e.exit >= child.vertices.size() || !child.is_out(*e.exit)) {
                out.push_back(where(m, i, e.src) + " has an edge through a vertex that is not an output of '" +
                              child.name + "'");
            }
        }
    }
    return out;
}

}  // namespace detail

/// Vertices reachable from each machine's initial vertex, traversing boxes
/// through the exits their machine can reach.
struct HsmReachability {
    std::vector<std::vector<char>> reached;  // per machine, per vertex
    std::vector<char> used;                  // machine occurs in some reachable context

    bool exit_reachable(std::size_t mi, std::size_t z) const { return reached[mi][z] != 0; }
};

inline HsmReachability reachability(const Shsm& m)
{
    HsmReachability r;
    r.reached.resize(m.machines.size());
    for (std::size_t i = 0; i < m.machines.size(); ++i) {
        const Machine& mach = m.machines[i];
        std::vector<std::vector<const Edge*>> out(mach.vertices.size());
        for (const Edge& e : mach.edges) {
            out[e.src].push_back(&e);
        }
        auto& seen = r.reached[i];
        seen.assign(mach.vertices.size(), 0);
        std::vector<std::size_t> work{mach.init};
        seen[mach.init] = 1;
        while (!work.empty()) {
            const std::size_t v = work.back();
            work.pop_back();
            const Vertex& vx = mach.vertices[v];
            for (const Edge* e : out[v]) {
                if (e->exit) {
                    if (!vx.is_box() || !r.exit_reachable(static_cast<std::size_t>(vx.expand), *e->exit)) {
                        continue;
                    }
                } else if (vx.is_box()) {
                    continue;
                }
                if (!seen[e->dst]) {
                    seen[e->dst] = 1;
                    work.push_back(e->dst);
                }
            }
        }
    }
    r.used.assign(m.machines.size(), 0);
    r.used[m.top_index()] = 1;
    for (std::size_t i = m.machines.size(); i-- > 0;) {
        if (!r.used[i]) {
            continue;
        }
        for (std::size_t v = 0; v < m.machines[i].vertices.size(); ++v) {
            const Vertex& vx = m.machines[i].vertices[v];
            if (vx.is_box() && r.reached[i][v]) {
                r.used[static_cast<std::size_t>(vx.expand)] = 1;
            }
        }
    }
    return r;
}

/// Every vertex that yields a reachable flat state without successors.
/// Requires a structurally valid model.
inline std::vector<FlatSink> flat_sinks(const Shsm& m)
{
    const auto r = reachability(m);
    std::vector<FlatSink> sinks;
    for (std::size_t i = 0; i < m.machines.size(); ++i) {
        if (!r.used[i]) {
            continue;
        }
        const Machine& mach = m.machines[i];
        std::vector<char> has_plain(mach.vertices.size(), 0);
        for (const Edge& e : mach.edges) {
            if (!e.exit) {
                has_plain[e.src] = 1;
            }
        }
        for (std::size_t v = 0; v < mach.vertices.size(); ++v) {
            if (mach.vertices[v].is_box() || !r.reached[i][v] || has_plain[v]) {
                continue;
            }
            if (i == m.top_index() || !mach.is_out(v)) {
                sinks.push_back({i, v, std::nullopt, std::nullopt});
                continue;
            }
            for (std::size_t p = i + 1; p < m.machines.size(); ++p) {
                if (!r.used[p]) {
                    continue;
                }
                const Machine& parent = m.machines[p];
                for (std::size_t b = 0; b < parent.vertices.size(); ++b) {
                    if (parent.vertices[b].expand != static_cast<int>(i) || !r.reached[p][b]) {
                        continue;
                    }
                    const bool continues = std::any_of(parent.edges.begin(), parent.edges.end(), [&](const Edge& e) {
                        return e.src == b && e.exit && *e.exit == v;
                    });
                    if (!continues) {
                        sinks.push_back({i, v, p, b});
                    }
                }
            }
        }
    }
    return sinks;
}

/// Descendant label union per machine (labels of every vertex of the machine
/// and of everything it expands to).
inline std::vector<Labels> descendant_labels(const Shsm& m)
{
    std::vector<Labels> out(m.machines.size());
    for (std::size_t i = 0; i < m.machines.size(); ++i) {
        for (const Vertex& v : m.machines[i].vertices) {
            out[i].insert(v.labels.begin(), v.labels.end());
            if (v.is_box() && static_cast<std::size_t>(v.expand) < i) {
                const auto& sub = out[static_cast<std::size_t>(v.expand)];
                out[i].insert(sub.begin(), sub.end());
            }
        }
    }
    return out;
}

/// All violations: machine structure, restricted-SHSM label
/// disjointness (when requested), and flat totality.
inline std::vector<std::string> shsm_problems(const Shsm& m, bool restricted)
{
    auto out = detail::structural_problems(m);
    if (!out.empty()) {
        return out;
    }
    if (restricted) {
        const auto below = descendant_labels(m);
        for (std::size_t i = 0; i < m.machines.size(); ++i) {
            for (std::size_t v = 0; v < m.machines[i].vertices.size(); ++v) {
                const Vertex& vx = m.machines[i].vertices[v];
                if (!vx.is_box()) {
                    continue;
                }
                for (const auto& p : vx.labels) {
                    if (below[static_cast<std::size_t>(vx.expand)].count(p) != 0) {
                        out.push_back(detail::where(m, i, v) + " shares proposition '" + p +
                                      "' with a descendant (restricted SHSM)");
                    }
                }
            }
        }
    }
    for (const FlatSink& s : flat_sinks(m)) {
        std::string msg = detail::where(m, s.machine, s.vertex) + " has reachable flat states without successors";
        if (s.via_box_machine) {
            msg += " (no successor through box '" + m.machines[*s.via_box_machine].vertices[*s.via_box].name +
                   "' of machine '" + m.machines[*s.via_box_machine].name + "')";
        }
        out.push_back(std::move(msg));
    }
    return out;
}

inline void validate_shsm(const Shsm& m, bool restricted = false)
{
    auto problems = shsm_problems(m, restricted);
    if (!problems.empty()) {
        throw ValidationError(std::move(problems));
    }
}

/// Adds a self-loop on every node that is a flat sink in all of its
/// contexts. Exits that only lack a successor in some parent box are left
/// alone: a loop on them would change every other context too.
/// Returns the number of loops added.
inline std::size_t repair_self_loops(Shsm& m)
{
    std::size_t added = 0;
    for (const FlatSink& s : flat_sinks(m)) {
        if (s.via_box_machine) {
            continue;
        }
        m.machines[s.machine].edges.push_back({s.vertex, std::nullopt, s.vertex});
        ++added;
    }
    return added;
}

// ---------------------------------------------------------------------------
// Flattening

struct FlattenOptions {
    std::size_t budget = std::size_t{1} << 22;
    bool allow_sinks = false;
};

/// Number of flat states contributed by each machine, saturated at cap+1.
inline std::vector<std::size_t> block_sizes(const Shsm& m, std::size_t cap)
{
    std::vector<std::size_t> size(m.machines.size(), 0);
    for (std::size_t i = 0; i < m.machines.size(); ++i) {
        std::size_t s = 0;
        for (const Vertex& v : m.machines[i].vertices) {
            s += v.is_box() ? size[static_cast<std::size_t>(v.expand)] : 1;
            s = std::min(s, cap + 1);
        }
        size[i] = s;
    }
    return size;
}

inline std::size_t flat_state_count(const Shsm& m, std::size_t cap = std::numeric_limits<std::size_t>::max() - 1)
{
    return block_sizes(m, cap).back();
}

inline KripkeStructure flatten(const Shsm& m, const FlattenOptions& opt = {})
{
    auto problems = detail::structural_problems(m);
    if (!problems.empty()) {
        throw ValidationError(std::move(problems));
    }
    const auto size = block_sizes(m, opt.budget);
    if (size.back() > opt.budget) {
        throw CapacityError("flattening exceeds the budget of " + std::to_string(opt.budget) + " states");
    }
    // offset of each vertex inside its machine's block
    std::vector<std::vector<std::size_t>> offset(m.machines.size());
    for (std::size_t i = 0; i < m.machines.size(); ++i) {
        std::size_t o = 0;
        for (const Vertex& v : m.machines[i].vertices) {
            offset[i].push_back(o);
            o += v.is_box() ? size[static_cast<std::size_t>(v.expand)] : 1;
        }
    }
    auto entry = [&](std::size_t mi) { return offset[mi][m.machines[mi].init]; };

    KripkeStructure k;
    const std::size_t n = size.back();
    k.names.resize(n);
    k.labels.resize(n);
    k.succ.resize(n);

    std::function<void(std::size_t, std::size_t, const std::string&, const Labels&)> emit =
        [&](std::size_t mi, std::size_t base, const std::string& prefix, const Labels& inherited) {
            const Machine& mach = m.machines[mi];
            for (std::size_t v = 0; v < mach.vertices.size(); ++v) {
                const Vertex& vx = mach.vertices[v];
                Labels here = inherited;
                here.insert(vx.labels.begin(), vx.labels.end());
                if (vx.is_box()) {
                    emit(static_cast<std::size_t>(vx.expand), base + offset[mi][v], prefix + vx.name + ".", here);
                } else {
                    k.names[base + offset[mi][v]] = prefix + vx.name;
                    k.labels[base + offset[mi][v]] = std::move(here);
                }
            }
            auto target = [&](std::size_t v) {
                const Vertex& vx = mach.vertices[v];
                return base + offset[mi][v] + (vx.is_box() ? entry(static_cast<std::size_t>(vx.expand)) : 0);
            };
            for (const Edge& e : mach.edges) {
                std::size_t from = base + offset[mi][e.src];
                if (e.exit) {
                    from += offset[static_cast<std::size_t>(mach.vertices[e.src].expand)][*e.exit];
                }
                k.succ[from].push_back(target(e.dst));
            }
        };
    emit(m.top_index(), 0, "", {});
    k.initial = entry(m.top_index());
    k.canonicalize();
    if (!opt.allow_sinks) {
        // Only sinks reachable from the initial state are violations.
        std::vector<char> seen(n, 0);
        std::vector<StateId> work{k.initial};
        seen[k.initial] = 1;
        std::vector<std::string> sinks;
        while (!work.empty()) {
            const StateId s = work.back();
            work.pop_back();
            if (k.succ[s].empty()) {
                sinks.push_back("flat state '" + k.names[s] + "' has no outgoing transition");
            }
            for (StateId t : k.succ[s]) {
                if (!seen[t]) {
                    seen[t] = 1;
                    work.push_back(t);
                }
            }
        }
        if (!sinks.empty()) {
            std::sort(sinks.begin(), sinks.end());
            throw ValidationError(std::move(sinks));
        }
    }
    return k;
}

// ---------------------------------------------------------------------------
// SHSM -> HSM

inline Shsm restrict_ap(const Shsm& m, const std::set<std::string>& ap)
{
    Shsm out = m;
    for (auto& mach : out.machines) {
        for (auto& v : mach.vertices) {
            Labels kept;
            for (const auto& p : v.labels) {
                if (ap.count(p) != 0) {
                    kept.insert(p);
                }
            }
            v.labels = std::move(kept);
        }
    }
    return out;
}

inline std::string scope_suffix(const Labels& scope)
{
    std::string s = "@";
    bool first = true;
    for (const auto& p : scope) {
        if (!first) {
            s += "+";
        }
        s += p;
        first = false;
    }
    return s;
}

struct Reduction {
    Shsm model;
    /// For each machine of `model`: the source machine index and the scope P.
    std::vector<std::pair<std::size_t, Labels>> origin;
};

/// Builds an HSM whose flattening coincides with the SHSM's up to renaming.
/// Machine copies M_i^P carry the inherited scope P in their node labels;
/// only copies reachable from the top level with P = {} are materialized.
inline Reduction reduce_to_hsm(const Shsm& m, const std::set<std::string>& ap)
{
    using Key = std::pair<std::size_t, Labels>;
    auto scoped = [&](const Labels& l) {
        Labels out;
        for (const auto& p : l) {
            if (ap.count(p) != 0) {
                out.insert(p);
            }
        }
        return out;
    };
    std::set<Key> found;
    std::vector<Key> work{{m.top_index(), {}}};
    found.insert(work.front());
    while (!work.empty()) {
        const Key key = work.back();
        work.pop_back();
        for (const Vertex& v : m.machines[key.first].vertices) {
            if (!v.is_box()) {
                continue;
            }
            Labels scope = key.second;
            const Labels own = scoped(v.labels);
            scope.insert(own.begin(), own.end());
            Key child{static_cast<std::size_t>(v.expand), std::move(scope)};
            if (found.insert(child).second) {
                work.push_back(child);
            }
        }
    }
    // std::set orders by machine index first, so expansions point downwards.
    Reduction red;
    std::map<Key, std::size_t> index;
    for (const Key& key : found) {
        index.emplace(key, red.origin.size());
        red.origin.push_back(key);
    }
    for (const Key& key : red.origin) {
        const Machine& src = m.machines[key.first];
        const std::string suffix = scope_suffix(key.second);
        Machine copy;
        copy.name = src.name + suffix;
        copy.init = src.init;
        copy.outs = src.outs;
        copy.edges = src.edges;
        for (const Vertex& v : src.vertices) {
            Vertex nv;
            nv.name = v.name + suffix;
            if (v.is_box()) {
                Labels scope = key.second;
                const Labels own = scoped(v.labels);
                scope.insert(own.begin(), own.end());
                nv.expand = static_cast<int>(index.at({static_cast<std::size_t>(v.expand), scope}));
            } else {
                nv.labels = scoped(v.labels);
                nv.labels.insert(key.second.begin(), key.second.end());
            }
            copy.vertices.push_back(std::move(nv));
        }
        red.model.machines.push_back(std::move(copy));
    }
    return red;
}

}  // namespace gctl
