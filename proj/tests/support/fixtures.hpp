#pragma once

#include "gctl/kripke.hpp"
#include "gctl/model_io.hpp"

#include <set>
#include <string>
#include <utility>
#include <vector>

namespace gctl::fixtures {

inline std::string model_path(const std::string& name) { return std::string(GCTL_MODELS_DIR) + "/" + name + ".gctl"; }

inline Shsm scoped_levels() { return load_model(model_path("scoped_levels")); }
inline Shsm retry() { return load_model(model_path("retry")); }

// The flattening of scoped_levels, written out by hand: every state in enumeration
// order with its labels. Each state has a self-loop and an edge to the next.
inline const std::vector<std::pair<std::string, Labels>>& scoped_levels_flat_states()
{
    static const std::vector<std::pair<std::string, Labels>> states = {
        {"in3", {}},
        {"b3_0.in2", {}},
        {"b3_0.b2_0.in1", {}},
        {"b3_0.b2_0.z1", {"p1"}},
        {"b3_0.b2_1.in1", {"p2"}},
        {"b3_0.b2_1.z1", {"p1", "p2"}},
        {"b3_0.z2", {"p1", "p2"}},
        {"b3_1.in2", {"p3"}},
        {"b3_1.b2_0.in1", {"p3"}},
        {"b3_1.b2_0.z1", {"p1", "p3"}},
        {"b3_1.b2_1.in1", {"p2", "p3"}},
        {"b3_1.b2_1.z1", {"p1", "p2", "p3"}},
        {"b3_1.z2", {"p1", "p2", "p3"}},
        {"z3", {"p1", "p2", "p3"}},
    };
    return states;
}

inline std::set<std::pair<std::string, std::string>> scoped_levels_flat_edges()
{
    std::set<std::pair<std::string, std::string>> edges;
    const auto& st = scoped_levels_flat_states();
    for (std::size_t i = 0; i < st.size(); ++i) {
        edges.emplace(st[i].first, st[i].first);
        if (i + 1 < st.size()) {
            edges.emplace(st[i].first, st[i + 1].first);
        }
    }
    return edges;
}

inline std::set<std::pair<std::string, std::string>> named_edges(const KripkeStructure& k)
{
    std::set<std::pair<std::string, std::string>> out;
    for (StateId s = 0; s < k.num_states(); ++s) {
        for (StateId t : k.succ[s]) {
            out.emplace(k.names[s], k.names[t]);
        }
    }
    return out;
}

}  // namespace gctl::fixtures
