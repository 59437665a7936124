#pragma once

// The `gctl` command line: check, flatten, validate, gen and bench.
// run() takes the streams explicitly so tests can drive it in-process.

#include "gctl/evidence.hpp"
#include "gctl/flat_checker.hpp"
#include "gctl/formula.hpp"
#include "gctl/hier_checker.hpp"
#include "gctl/hsm.hpp"
#include "gctl/model_io.hpp"
#include "gctl/random.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace gctl::cli {

enum Exit : int {
    kHolds = 0,
    kFails = 1,
    kUsage = 2,
    kInvalid = 3,
    kCapacity = 4,
    kDivergence = 5,  // engines disagree, or an emitted trace does not replay
};

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline constexpr std::size_t kDefaultBudget = std::size_t{1} << 22;

/// Flag beats GCTL_BUDGET beats the default.
inline std::size_t resolve_budget(const std::optional<std::size_t>& flag)
{
    if (flag) {
        return *flag;
    }
    if (const char* env = std::getenv("GCTL_BUDGET"); env != nullptr && *env != '\0') {
        try {
            std::size_t used = 0;
            const unsigned long long v = std::stoull(env, &used);
            if (used == std::string(env).size()) {
                return static_cast<std::size_t>(v);
            }
        } catch (const std::exception&) {
        }
        throw UsageError(std::string("GCTL_BUDGET is not a number: ") + env);
    }
    return kDefaultBudget;
}

inline std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw UsageError("cannot read '" + path + "'");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline Shsm load_checked(const std::string& path, bool repair, std::ostream* note)
{
    Shsm m = parse_model(read_file(path));
    if (repair) {
        const std::size_t added = repair_self_loops(m);
        if (note != nullptr && added > 0) {
            *note << "added " << added << " self-loop" << (added == 1 ? "" : "s") << "\n";
        }
    }
    return m;
}

inline Formula formula_from(const std::string& text, const std::string& file)
{
    if (!text.empty() && !file.empty()) {
        throw UsageError("give either --formula or --formula-file, not both");
    }
    const std::string src = file.empty() ? text : read_file(file);
    return parse_formula(src);
}

// Writes to --output when given, otherwise to `out`.
class Sink {
public:
    Sink(const std::string& path, std::ostream& fallback) : fallback_(fallback)
    {
        if (!path.empty()) {
            file_.open(path, std::ios::binary);
            if (!file_) {
                throw UsageError("cannot write '" + path + "'");
            }
        }
    }
    std::ostream& stream() { return file_.is_open() ? file_ : fallback_; }

private:
    std::ofstream file_;
    std::ostream& fallback_;
};

inline double millis_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

inline std::string fixed(double v, int digits = 3)
{
    std::ostringstream ss;
    ss << std::fixed << std::setprecision(digits) << v;
    return ss.str();
}

struct CheckReport {
    std::string formula;
    std::string engine;
    bool result = false;
    std::optional<std::size_t> flat_states;
    std::optional<std::size_t> copies;
    double millis = 0.0;
    std::vector<Timing> timings;
    std::vector<std::vector<std::string>> traces;
    std::vector<std::optional<std::size_t>> loop_starts;
    std::vector<std::string> trace_lines;
    std::vector<std::string> trace_families;
};

inline nlohmann::ordered_json to_json(const CheckReport& r)
{
    nlohmann::ordered_json j;
    j["formula"] = r.formula;
    j["engine"] = r.engine;
    j["result"] = r.result;
    j["traces"] = r.traces;
    auto loops = nlohmann::ordered_json::array();
    for (const auto& l : r.loop_starts) {
        loops.push_back(l ? nlohmann::ordered_json(*l) : nlohmann::ordered_json(nullptr));
    }
    j["loop_starts"] = loops;
    nlohmann::ordered_json stats;
    stats["flat_states"] = r.flat_states ? nlohmann::ordered_json(*r.flat_states) : nlohmann::ordered_json(nullptr);
    stats["copies"] = r.copies ? nlohmann::ordered_json(*r.copies) : nlohmann::ordered_json(nullptr);
    stats["millis"] = r.millis;
    auto times = nlohmann::ordered_json::array();
    for (const auto& t : r.timings) {
        times.push_back({{"formula", t.formula}, {"millis", t.millis}});
    }
    stats["subformulas"] = times;
    j["stats"] = stats;
    return j;
}

inline void print_text(std::ostream& os, const CheckReport& r)
{
    os << "formula: " << r.formula << "\n";
    os << "engine: " << r.engine << "\n";
    os << "result: " << (r.result ? "true" : "false") << "\n";
    if (r.flat_states) {
        os << "flat states: " << *r.flat_states << "\n";
    }
    if (r.copies) {
        os << "machine copies: " << *r.copies << "\n";
    }
    os << "time: " << fixed(r.millis) << " ms\n";
    for (const auto& t : r.timings) {
        os << "  " << fixed(t.millis) << " ms  " << t.formula << "\n";
    }
    for (std::size_t i = 0; i < r.trace_lines.size(); ++i) {
        os << "trace " << i + 1 << " (" << r.trace_families[i] << "): " << r.trace_lines[i] << "\n";
    }
}

struct CheckArgs {
    std::string model;
    std::string formula;
    std::string formula_file;
    std::string engine = "auto";
    std::size_t witnesses = 1;
    std::string format = "text";
    std::string output;
    bool restricted = false;
    bool repair = false;
    std::optional<std::size_t> budget;
};

inline int cmd_check(const CheckArgs& a, std::ostream& out, std::ostream& err)
{
    const std::size_t budget = resolve_budget(a.budget);
    const Formula f = formula_from(a.formula, a.formula_file);
    Shsm m = load_checked(a.model, a.repair, &err);
    validate_shsm(m, a.restricted);
    const Formula nf = normalize(f);

    CheckReport r;
    r.formula = render(f);
    r.engine = a.engine == "auto" ? (m.machines.size() > 1 ? "hier" : "flat") : a.engine;
    const auto t0 = std::chrono::steady_clock::now();
    std::optional<KripkeStructure> flat;
    std::optional<bool> flat_verdict, hier_verdict;
    if (r.engine == "flat" || r.engine == "both") {
        FlattenOptions fo;
        fo.budget = budget;
        flat = flatten(m, fo);
        const auto table = check_flat(*flat, nf);
        flat_verdict = table.holds(nf, flat->initial);
        r.flat_states = flat->num_states();
        r.timings = table.timings();
    }
    if (r.engine == "hier" || r.engine == "both") {
        const auto res = check_hier(m, nf);
        hier_verdict = res.holds;
        r.copies = res.copies();
        if (r.engine == "hier") {
            r.timings = res.timings;
        }
    }
    r.millis = millis_since(t0);
    if (flat_verdict && hier_verdict && *flat_verdict != *hier_verdict) {
        err << "engines disagree: flat says " << (*flat_verdict ? "true" : "false") << ", hierarchical says "
            << (*hier_verdict ? "true" : "false") << "\n";
        return kDivergence;
    }
    r.result = flat_verdict ? *flat_verdict : *hier_verdict;

    if (a.witnesses > 0) {
        // traces are read off the flattening, which may not fit the budget
        if (!flat) {
            try {
                FlattenOptions fo;
                fo.budget = budget;
                flat = flatten(m, fo);
            } catch (const CapacityError& e) {
                err << "traces skipped: " << e.what() << "\n";
            }
        }
        if (flat) {
            const auto e = traces_for(*flat, flat->initial, f, a.witnesses);
            const auto problems = trace_problems(*flat, e);
            if (!problems.empty()) {
                for (const auto& p : problems) {
                    err << "invalid trace: " << p << "\n";
                }
                return kDivergence;
            }
            for (const auto& t : e.traces) {
                std::vector<std::string> names;
                for (StateId s : t.states) {
                    names.push_back(flat->names[s]);
                }
                r.traces.push_back(std::move(names));
                r.loop_starts.push_back(t.loop_start);
                r.trace_lines.push_back(render_trace(*flat, t));
                r.trace_families.push_back(t.formula);
            }
        }
    }

    Sink sink(a.output, out);
    if (a.format == "json") {
        sink.stream() << to_json(r).dump(2) << "\n";
    } else {
        print_text(sink.stream(), r);
    }
    return r.result ? kHolds : kFails;
}

struct FlattenArgs {
    std::string model;
    std::string output;
    bool repair = false;
    std::optional<std::size_t> budget;
};

inline int cmd_flatten(const FlattenArgs& a, std::ostream& out, std::ostream& err)
{
    FlattenOptions fo;
    fo.budget = resolve_budget(a.budget);
    const Shsm m = load_checked(a.model, a.repair, &err);
    const KripkeStructure k = flatten(m, fo);
    const std::string text = write_model(kripke_to_model(k));
    if (a.output.empty()) {
        out << text;
    } else {
        Sink sink(a.output, out);
        sink.stream() << text;
        out << k.num_states() << " states, " << k.num_transitions() << " transitions\n";
    }
    return kHolds;
}

struct ValidateArgs {
    std::string model;
    bool restricted = false;
    bool repair = false;
};

inline int cmd_validate(const ValidateArgs& a, std::ostream& out, std::ostream& err)
{
    const Shsm m = load_checked(a.model, a.repair, &out);
    const auto problems = shsm_problems(m, a.restricted);
    if (!problems.empty()) {
        for (const auto& p : problems) {
            err << p << "\n";
        }
        return kInvalid;
    }
    out << "valid: " << m.machines.size() << " machines, " << m.total_vertices() << " vertices, "
        << (is_hsm(m) ? "scope-independent" : "scope-dependent") << "\n";
    return kHolds;
}

struct GenArgs {
    GenParams params;
    std::string output;
};

inline int cmd_gen(const GenArgs& a, std::ostream& out, std::ostream&)
{
    if (a.params.machines == 0 || a.params.nodes == 0 || a.params.exits == 0) {
        throw UsageError("--machines, --nodes and --exits must be positive");
    }
    Sink sink(a.output, out);
    sink.stream() << write_model(generate_layered(a.params));
    return kHolds;
}

struct BenchArgs {
    std::string model;
    std::string formula;
    std::string formula_file;
    std::string engine = "both";
    std::size_t repeat = 3;
    std::string format = "text";
    std::string output;
    std::optional<std::size_t> budget;
};

struct BenchRow {
    std::string engine;
    std::size_t run = 0;
    double millis = 0.0;
    bool result = false;
    std::size_t size = 0;  // flat states or machine copies
};

inline int cmd_bench(const BenchArgs& a, std::ostream& out, std::ostream& err)
{
    if (a.repeat == 0) {
        throw UsageError("--repeat must be at least 1");
    }
    if (a.engine != "flat" && a.engine != "hier" && a.engine != "both") {
        throw UsageError("bench engine must be flat, hier or both");
    }
    const std::size_t budget = resolve_budget(a.budget);
    const Formula nf = normalize(formula_from(a.formula, a.formula_file));
    const Shsm m = load_checked(a.model, false, nullptr);
    validate_shsm(m);
    std::vector<BenchRow> rows;
    for (std::size_t run = 1; run <= a.repeat; ++run) {
        if (a.engine != "hier") {
            const auto t0 = std::chrono::steady_clock::now();
            FlattenOptions fo;
            fo.budget = budget;
            const auto k = flatten(m, fo);
            const bool v = check_flat(k, nf).holds(nf, k.initial);
            rows.push_back({"flat", run, millis_since(t0), v, k.num_states()});
        }
        if (a.engine != "flat") {
            const auto t0 = std::chrono::steady_clock::now();
            const auto res = check_hier(m, nf);
            rows.push_back({"hier", run, millis_since(t0), res.holds, res.copies()});
        }
    }
    for (const auto& row : rows) {
        if (row.result != rows.front().result) {
            err << "engines disagree on " << render(nf) << "\n";
            return kDivergence;
        }
    }
    Sink sink(a.output, out);
    auto& os = sink.stream();
    if (a.format == "csv") {
        os << "engine,run,millis,result,size\n";
        for (const auto& r : rows) {
            os << r.engine << ',' << r.run << ',' << fixed(r.millis) << ',' << (r.result ? "true" : "false") << ','
               << r.size << "\n";
        }
    } else {
        os << std::left << std::setw(8) << "engine" << std::setw(6) << "run" << std::setw(14) << "millis"
           << std::setw(8) << "result"
           << "size\n";
        for (const auto& r : rows) {
            os << std::left << std::setw(8) << r.engine << std::setw(6) << r.run << std::setw(14) << fixed(r.millis)
               << std::setw(8) << (r.result ? "true" : "false") << r.size << "\n";
        }
    }
    return rows.front().result ? kHolds : kFails;
}

/// Parses the command line and dispatches. Every failure maps to an exit code.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Graded-CTL model checker for flat and hierarchical state machines", "gctl"};
    app.require_subcommand(1);

    std::optional<std::size_t> budget;
    auto add_budget = [&](CLI::App* sub) {
        sub->add_option("--budget", budget, "maximum number of flat states (default: GCTL_BUDGET or 4194304)");
    };

    CheckArgs ca;
    auto* check = app.add_subcommand("check", "check a formula at the initial state");
    check->add_option("--model", ca.model, "model file")->required();
    check->add_option("--formula", ca.formula, "formula text");
    check->add_option("--formula-file", ca.formula_file, "file holding the formula");
    check->add_option("--engine", ca.engine, "flat, hier, both or auto")
        ->check(CLI::IsMember({"flat", "hier", "both", "auto"}));
    check->add_option("--witnesses", ca.witnesses, "number of evidence or counterexample traces");
    check->add_option("--format", ca.format, "text or json")->check(CLI::IsMember({"text", "json"}));
    check->add_option("--output", ca.output, "write the report here");
    check->add_flag("--restricted", ca.restricted, "reject box labels shared with the machines below the box");
    check->add_flag("--repair-self-loops", ca.repair, "add self-loops to nodes without successors");
    add_budget(check);

    FlattenArgs fa;
    auto* flat = app.add_subcommand("flatten", "write the flat structure as a one-machine model");
    flat->add_option("--model", fa.model, "model file")->required();
    flat->add_option("--output", fa.output, "output file");
    flat->add_flag("--repair-self-loops", fa.repair, "add self-loops to nodes without successors");
    add_budget(flat);

    ValidateArgs va;
    auto* val = app.add_subcommand("validate", "check well-formedness and totality");
    val->add_option("--model", va.model, "model file")->required();
    val->add_flag("--restricted", va.restricted, "reject box labels shared with the machines below the box");
    val->add_flag("--repair-self-loops", va.repair, "add self-loops to nodes without successors");

    GenArgs ga;
    auto* gen = app.add_subcommand("gen", "generate a layered hierarchical model");
    gen->add_option("--machines", ga.params.machines, "number of machines");
    gen->add_option("--nodes", ga.params.nodes, "nodes per machine");
    gen->add_option("--exits", ga.params.exits, "exits per machine");
    gen->add_option("--boxes", ga.params.boxes, "boxes per machine");
    gen->add_option("--props", ga.params.props, "number of atomic propositions");
    gen->add_option("--seed", ga.params.seed, "random seed");
    gen->add_option("--output", ga.output, "output file");

    BenchArgs ba;
    auto* bench = app.add_subcommand("bench", "time the engines");
    bench->add_option("--model", ba.model, "model file")->required();
    bench->add_option("--formula", ba.formula, "formula text");
    bench->add_option("--formula-file", ba.formula_file, "file holding the formula");
    bench->add_option("--engine", ba.engine, "flat, hier or both");
    bench->add_option("--repeat", ba.repeat, "repetitions per engine");
    bench->add_option("--format", ba.format, "text or csv")->check(CLI::IsMember({"text", "csv"}));
    bench->add_option("--output", ba.output, "output file");
    add_budget(bench);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kHolds;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kHolds;
    } catch (const CLI::ParseError& e) {
        err << e.what() << "\n";
        return kUsage;
    }

    try {
        if (check->parsed()) {
            ca.budget = budget;
            if (ca.formula_file.empty() && check->count("--formula") == 0) {
                throw UsageError("--formula or --formula-file is required");
            }
            return cmd_check(ca, out, err);
        }
        if (flat->parsed()) {
            fa.budget = budget;
            return cmd_flatten(fa, out, err);
        }
        if (val->parsed()) {
            return cmd_validate(va, out, err);
        }
        if (gen->parsed()) {
            return cmd_gen(ga, out, err);
        }
        ba.budget = budget;
        if (ba.formula_file.empty() && bench->count("--formula") == 0) {
            throw UsageError("--formula or --formula-file is required");
        }
        return cmd_bench(ba, out, err);
    } catch (const FormulaError& e) {
        err << "formula error: " << e.what() << "\n";
        return kUsage;
    } catch (const ModelParseError& e) {
        err << "model error: " << e.what() << "\n";
        return kUsage;
    } catch (const UsageError& e) {
        err << e.what() << "\n";
        return kUsage;
    } catch (const ValidationError& e) {
        for (const auto& p : e.problems()) {
            err << "invalid model: " << p << "\n";
        }
        return kInvalid;
    } catch (const CapacityError& e) {
        err << "capacity: " << e.what() << "\n";
        return kCapacity;
    }
}

}  // namespace gctl::cli
