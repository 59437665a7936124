#pragma once

#include <algorithm>
#include <cstddef>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace gctl {

using StateId = std::size_t;
using Labels = std::set<std::string>;

class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(std::vector<std::string> problems)
        : std::runtime_error(join(problems)), problems_(std::move(problems))
    {
    }

    const std::vector<std::string>& problems() const noexcept { return problems_; }

private:
    static std::string join(const std::vector<std::string>& items)
    {
        std::string out;
        for (const auto& p : items) {
            if (!out.empty()) {
                out += "; ";
            }
            out += p;
        }
        return out;
    }

    std::vector<std::string> problems_;
};

class CapacityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Finite transition system with propositional labeling. States are dense
/// indices; names are kept for reporting only.
struct KripkeStructure {
    std::vector<std::string> names;
    StateId initial = 0;
    std::vector<std::vector<StateId>> succ;
    std::vector<Labels> labels;

    std::size_t num_states() const { return succ.size(); }

    std::size_t num_transitions() const
    {
        std::size_t n = 0;
        for (const auto& s : succ) {
            n += s.size();
        }
        return n;
    }

    StateId add_state(std::string name, Labels props = {})
    {
        names.push_back(std::move(name));
        labels.push_back(std::move(props));
        succ.emplace_back();
        return succ.size() - 1;
    }

    void add_transition(StateId from, StateId to) { succ.at(from).push_back(to); }

    bool has(StateId s, const std::string& prop) const { return labels[s].count(prop) != 0; }

    /// Sorts and deduplicates every successor list.
    void canonicalize()
    {
        for (auto& s : succ) {
            std::sort(s.begin(), s.end());
            s.erase(std::unique(s.begin(), s.end()), s.end());
        }
    }

    std::vector<StateId> predecessors_flat(std::vector<std::size_t>& offsets) const;
};

/// Reports every totality violation and dangling reference.
inline std::vector<std::string> kripke_problems(const KripkeStructure& k)
{
    std::vector<std::string> problems;
    const std::size_t n = k.num_states();
    if (n == 0) {
        problems.push_back("structure has no states");
        return problems;
    }
    if (k.initial >= n) {
        problems.push_back("initial state " + std::to_string(k.initial) + " does not exist");
    }
    if (k.labels.size() != n || k.names.size() != n) {
        problems.push_back("label/name tables do not match the state count");
    }
    for (StateId s = 0; s < n; ++s) {
        const std::string who = s < k.names.size() ? k.names[s] : std::to_string(s);
        if (k.succ[s].empty()) {
            problems.push_back("sink state '" + who + "' has no outgoing transition");
        }
        for (StateId t : k.succ[s]) {
            if (t >= n) {
                problems.push_back("transition from '" + who + "' to missing state " + std::to_string(t));
            }
        }
    }
    return problems;
}

inline void validate_kripke(const KripkeStructure& k)
{
    auto problems = kripke_problems(k);
    if (!problems.empty()) {
        throw ValidationError(std::move(problems));
    }
}

inline std::vector<StateId> successors(const KripkeStructure& k, StateId s)
{
    if (s >= k.num_states()) {
        throw std::out_of_range("state index " + std::to_string(s) + " out of range");
    }
    std::vector<StateId> out = k.succ[s];
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

/// Reverse adjacency in CSR form: predecessors of s are
/// result[offsets[s] .. offsets[s+1]).
inline std::vector<StateId> KripkeStructure::predecessors_flat(std::vector<std::size_t>& offsets) const
{
    const std::size_t n = num_states();
    offsets.assign(n + 1, 0);
    for (const auto& out : succ) {
        for (StateId t : out) {
            ++offsets[t + 1];
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        offsets[i + 1] += offsets[i];
    }
    std::vector<StateId> preds(offsets[n]);
    std::vector<std::size_t> fill(offsets.begin(), offsets.end() - 1);
    for (StateId s = 0; s < n; ++s) {
        for (StateId t : succ[s]) {
            preds[fill[t]++] = s;
        }
    }
    return preds;
}

}  // namespace gctl
