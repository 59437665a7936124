#pragma once

// Seeded generators for Kripke structures, formulas and hierarchical models.
// Used by the test suites and by `gctl gen`.

#include "gctl/formula.hpp"
#include "gctl/hsm.hpp"
#include "gctl/kripke.hpp"

#include <algorithm>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace gctl {

using Rng = std::mt19937_64;

namespace detail {

inline std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi)
{
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

inline bool coin(Rng& rng, double p) { return std::bernoulli_distribution(p)(rng); }

inline std::vector<std::string> prop_names(std::size_t count)
{
    static const char* base[] = {"p", "q", "r", "s"};
    std::vector<std::string> out;
    for (std::size_t i = 0; i < count; ++i) {
        out.push_back(i < 4 ? std::string(base[i]) : "p" + std::to_string(i));
    }
    return out;
}

inline Labels random_labels(Rng& rng, const std::vector<std::string>& props, double p)
{
    Labels out;
    for (const auto& a : props) {
        if (coin(rng, p)) {
            out.insert(a);
        }
    }
    return out;
}

}  // namespace detail

inline KripkeStructure random_kripke(Rng& rng, std::size_t states, const std::vector<std::string>& props,
                                     std::size_t max_out = 3)
{
    KripkeStructure k;
    for (std::size_t s = 0; s < states; ++s) {
        k.add_state("s" + std::to_string(s), detail::random_labels(rng, props, 0.45));
    }
    for (std::size_t s = 0; s < states; ++s) {
        const std::size_t deg = detail::pick(rng, 1, max_out);
        for (std::size_t e = 0; e < deg; ++e) {
            k.add_transition(s, detail::pick(rng, 0, states - 1));
        }
    }
    k.canonicalize();
    return k;
}

/// Random formula over the full syntax. `depth` bounds nesting of temporal
/// operators; boolean structure is kept shallow.
inline Formula random_formula(Rng& rng, std::size_t depth, Grade max_grade, const std::vector<std::string>& props)
{
    auto leaf = [&] {
        const std::size_t r = detail::pick(rng, 0, props.size() + 1);
        if (r < props.size()) {
            return Formula::atom(props[r]);
        }
        return r == props.size() ? Formula::top() : Formula::negate(Formula::atom(props.front()));
    };
    if (depth == 0) {
        return leaf();
    }
    auto sub = [&] { return random_formula(rng, depth - 1, max_grade, props); };
    const Grade k = static_cast<Grade>(detail::pick(rng, 0, max_grade));
    switch (detail::pick(rng, 0, 13)) {
        case 0: return Formula::negate(sub());
        case 1: return Formula::conj(sub(), sub());
        case 2: return Formula::disj(sub(), leaf());
        case 3: return Formula::implies(leaf(), sub());
        case 4: return Formula::ex(k, sub());
        case 5: return Formula::eg(k, sub());
        case 6:
        case 7: return Formula::eu(k, sub(), sub());
        case 8: return Formula::ef(k, sub());
        case 9: return Formula::ax(k, sub());
        case 10: return Formula::ag(k, sub());
        case 11: return Formula::af(k, sub());
        default: return Formula::au(k, sub(), sub());
    }
}

struct RandomShsmParams {
    std::size_t max_machines = 4;
    std::size_t max_vertices = 7;
    std::size_t max_exits = 2;
    std::vector<std::string> props{"p", "q"};
    double box_label_chance = 0.3;
};

/// Small random SHSM that is valid and total by construction: every
/// non-exit node has a plain successor, every node of the top machine does,
/// and every box has a successor for each exit that lacks one.
inline Shsm random_shsm(Rng& rng, const RandomShsmParams& prm = {})
{
    Shsm m;
    const std::size_t h = detail::pick(rng, 1, prm.max_machines);
    for (std::size_t i = 0; i < h; ++i) {
        const bool top = i + 1 == h;
        Machine mach;
        mach.name = "M" + std::to_string(i);
        const std::size_t n = detail::pick(rng, 2, std::max<std::size_t>(2, prm.max_vertices));
        for (std::size_t v = 0; v < n; ++v) {
            const std::string vname = "m" + std::to_string(i) + "v" + std::to_string(v);
            if (v > 0 && i > 0 && detail::coin(rng, 0.4)) {
                const int target = static_cast<int>(detail::pick(rng, 0, i - 1));
                Labels lab;
                if (detail::coin(rng, prm.box_label_chance)) {
                    lab = detail::random_labels(rng, prm.props, 0.5);
                }
                mach.add_vertex(vname, std::move(lab), target);
            } else {
                mach.add_vertex(vname, detail::random_labels(rng, prm.props, 0.45));
            }
        }
        mach.init = 0;
        std::vector<std::size_t> nodes;
        for (std::size_t v = 0; v < n; ++v) {
            if (!mach.vertices[v].is_box()) {
                nodes.push_back(v);
            }
        }
        if (!top) {
            std::vector<std::size_t> cand = nodes;
            std::shuffle(cand.begin(), cand.end(), rng);
            const std::size_t d = std::min(cand.size(), detail::pick(rng, 1, std::max<std::size_t>(1, prm.max_exits)));
            mach.outs.assign(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(d));
            std::sort(mach.outs.begin(), mach.outs.end());
        }
        for (std::size_t v : nodes) {
            const bool exit = mach.is_out(v);
            std::size_t deg = detail::pick(rng, exit ? 0 : 1, 2);
            for (std::size_t e = 0; e < deg; ++e) {
                mach.edges.push_back({v, std::nullopt, detail::pick(rng, 0, n - 1)});
            }
        }
        m.machines.push_back(std::move(mach));
    }
    // Box edges once all exit sets are fixed.
    for (std::size_t i = 0; i < h; ++i) {
        Machine& mach = m.machines[i];
        const std::size_t n = mach.vertices.size();
        for (std::size_t b = 0; b < n; ++b) {
            if (!mach.vertices[b].is_box()) {
                continue;
            }
            const Machine& child = m.machines[static_cast<std::size_t>(mach.vertices[b].expand)];
            for (std::size_t z : child.outs) {
                const bool needed = std::none_of(child.edges.begin(), child.edges.end(),
                                                 [&](const Edge& e) { return e.src == z && !e.exit; });
                std::size_t deg = detail::pick(rng, needed ? 1 : 0, 2);
                for (std::size_t e = 0; e < deg; ++e) {
                    mach.edges.push_back({b, z, detail::pick(rng, 0, n - 1)});
                }
            }
        }
    }
    return m;
}

struct GenParams {
    std::size_t machines = 3;
    std::size_t nodes = 4;
    std::size_t exits = 1;
    std::size_t boxes = 2;
    std::size_t props = 2;
    std::uint64_t seed = 1;
};

/// Layered model: machine i holds `nodes` nodes and `boxes` boxes expanding
/// machine i-1. A chain in -> box_0 -> ... -> box_last -> remaining nodes
/// makes every exit reachable; every box continues through every exit of
/// its child, so the flattening is total.
inline Shsm generate_layered(const GenParams& prm)
{
    Rng rng(prm.seed);
    const auto props = detail::prop_names(prm.props);
    const std::size_t d = std::max<std::size_t>(1, prm.exits);
    const std::size_t n = std::max(prm.nodes, d + 1);
    Shsm m;
    for (std::size_t i = 0; i < std::max<std::size_t>(1, prm.machines); ++i) {
        const bool top = i + 1 == std::max<std::size_t>(1, prm.machines);
        Machine mach;
        mach.name = "L" + std::to_string(i);
        for (std::size_t v = 0; v < n; ++v) {
            mach.add_vertex("l" + std::to_string(i) + "n" + std::to_string(v), detail::random_labels(rng, props, 0.25));
        }
        const std::size_t nb = i == 0 ? 0 : prm.boxes;
        for (std::size_t b = 0; b < nb; ++b) {
            Labels lab;
            if (detail::coin(rng, 0.15)) {
                lab = detail::random_labels(rng, props, 0.5);
            }
            mach.add_vertex("l" + std::to_string(i) + "b" + std::to_string(b), std::move(lab), static_cast<int>(i - 1));
        }
        mach.init = 0;
        if (!top) {
            for (std::size_t z = n - d; z < n; ++z) {
                mach.outs.push_back(z);
            }
        }
        // chain
        std::vector<std::size_t> chain{0};
        for (std::size_t b = 0; b < nb; ++b) {
            chain.push_back(n + b);
        }
        for (std::size_t v = 1; v < n; ++v) {
            chain.push_back(v);
        }
        const Machine* child = i == 0 ? nullptr : &m.machines[i - 1];
        for (std::size_t c = 0; c + 1 < chain.size(); ++c) {
            const std::size_t u = chain[c];
            if (mach.vertices[u].is_box()) {
                mach.edges.push_back({u, child->outs.front(), chain[c + 1]});
            } else {
                mach.edges.push_back({u, std::nullopt, chain[c + 1]});
            }
        }
        const std::size_t total = mach.vertices.size();
        for (std::size_t b = 0; b < nb; ++b) {
            for (std::size_t e = 1; e < child->outs.size(); ++e) {
                mach.edges.push_back({n + b, child->outs[e], detail::pick(rng, 0, total - 1)});
            }
        }
        // the last chain node needs a successor in the top machine
        if (top) {
            mach.edges.push_back({n - 1, std::nullopt, n - 1});
        }
        for (std::size_t v = 0; v < n; ++v) {
            if (detail::coin(rng, 0.3)) {
                mach.edges.push_back({v, std::nullopt, detail::pick(rng, 0, total - 1)});
            }
        }
        // exits of non-top machines: every box already continues through all of them
        m.machines.push_back(std::move(mach));
    }
    return m;
}

}  // namespace gctl
