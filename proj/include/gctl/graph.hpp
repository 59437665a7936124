#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

namespace gctl {

/// Compressed adjacency: successors of v are targets[offsets[v] .. offsets[v+1]).
struct Csr {
    std::vector<std::size_t> offsets{0};
    std::vector<std::size_t> targets;

    std::size_t size() const { return offsets.size() - 1; }
    std::size_t degree(std::size_t v) const { return offsets[v + 1] - offsets[v]; }
    const std::size_t* begin(std::size_t v) const { return targets.data() + offsets[v]; }
    const std::size_t* end(std::size_t v) const { return targets.data() + offsets[v + 1]; }

    void push(std::size_t t) { targets.push_back(t); }
    void close_vertex() { offsets.push_back(targets.size()); }
};

struct SccResult {
    std::vector<std::size_t> component;           // per vertex
    std::vector<std::vector<std::size_t>> members;  // sinks first (reverse topological order)
};

/// Iterative Tarjan. Components come out sink-first, so any edge leaving a
/// component points into one that was emitted earlier.
inline SccResult strongly_connected_components(const Csr& g)
{
    constexpr std::size_t kUnset = std::numeric_limits<std::size_t>::max();
    const std::size_t n = g.size();
    SccResult out;
    out.component.assign(n, kUnset);
    std::vector<std::size_t> index(n, kUnset), low(n, 0), stack;
    std::vector<char> on_stack(n, 0);
    struct Frame {
        std::size_t v;
        std::size_t next;
    };
    std::vector<Frame> call;
    std::size_t counter = 0;

    for (std::size_t root = 0; root < n; ++root) {
        if (index[root] != kUnset) {
            continue;
        }
        call.push_back({root, g.offsets[root]});
        index[root] = low[root] = counter++;
        stack.push_back(root);
        on_stack[root] = 1;
        while (!call.empty()) {
            Frame& f = call.back();
            const std::size_t v = f.v;
            if (f.next < g.offsets[v + 1]) {
                const std::size_t w = g.targets[f.next++];
                if (index[w] == kUnset) {
                    index[w] = low[w] = counter++;
                    stack.push_back(w);
                    on_stack[w] = 1;
                    call.push_back({w, g.offsets[w]});
                } else if (on_stack[w]) {
                    low[v] = std::min(low[v], index[w]);
                }
                continue;
            }
            if (low[v] == index[v]) {
                std::vector<std::size_t> comp;
                std::size_t w;
                do {
                    w = stack.back();
                    stack.pop_back();
                    on_stack[w] = 0;
                    out.component[w] = out.members.size();
                    comp.push_back(w);
                } while (w != v);
                out.members.push_back(std::move(comp));
            }
            call.pop_back();
            if (!call.empty()) {
                const std::size_t parent = call.back().v;
                low[parent] = std::min(low[parent], low[v]);
            }
        }
    }
    return out;
}

/// A component is a cycle iff it has more than one vertex or a self-loop.
inline bool is_cyclic(const Csr& g, const std::vector<std::size_t>& comp)
{
    if (comp.size() > 1) {
        return true;
    }
    const std::size_t v = comp.front();
    for (auto it = g.begin(v); it != g.end(v); ++it) {
        if (*it == v) {
            return true;
        }
    }
    return false;
}

inline std::uint64_t saturating_add(std::uint64_t a, std::uint64_t b, std::uint64_t cap)
{
    const std::uint64_t s = a + b;
    return s > cap ? cap : s;
}

}  // namespace gctl
