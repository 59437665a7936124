#pragma once

// Text format for hierarchical models.
//
//   machine <id>
//     init <vertex>;
//     out <vertex>, <vertex>;
//     node <vertex> [<prop>, <prop>];
//     box <vertex> expands <machine-id> [<prop>];
//     edge <src> -> <dst>;
//     edge <box>.<exit> -> <dst>;
//   end
//
// Blocks are listed bottom-up; the last one is the top level. Identifiers may
// be double-quoted to carry arbitrary characters (flattened state names
// contain dots). `//` starts a comment.

#include "gctl/hsm.hpp"
#include "gctl/kripke.hpp"

#include <cctype>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace gctl {

class ModelParseError : public std::runtime_error {
public:
    ModelParseError(std::size_t line, const std::string& msg)
        : std::runtime_error("line " + std::to_string(line) + ": " + msg), line_(line)
    {
    }
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

namespace detail {

struct Token {
    enum Kind { Ident, Punct, End } kind;
    std::string text;
    std::size_t line;
    bool quoted = false;
};

inline bool model_ident_char(char c)
{
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '@' || c == '+' || c == '\'' || c == '^';
}

inline std::vector<Token> tokenize_model(const std::string& text)
{
    std::vector<Token> out;
    std::size_t i = 0, line = 1;
    while (i < text.size()) {
        const char c = text[i];
        if (c == '\n') {
            ++line;
            ++i;
        } else if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
        } else if (c == '/' && i + 1 < text.size() && text[i + 1] == '/') {
            while (i < text.size() && text[i] != '\n') {
                ++i;
            }
        } else if (c == '-' && i + 1 < text.size() && text[i + 1] == '>') {
            out.push_back({Token::Punct, "->", line});
            i += 2;
        } else if (c == ';' || c == ',' || c == '[' || c == ']' || c == '.') {
            out.push_back({Token::Punct, std::string(1, c), line});
            ++i;
        } else if (c == '"') {
            std::string s;
            ++i;
            while (true) {
                if (i >= text.size() || text[i] == '\n') {
                    throw ModelParseError(line, "unterminated quoted identifier");
                }
                if (text[i] == '"') {
                    ++i;
                    break;
                }
                if (text[i] == '\\' && i + 1 < text.size()) {
                    ++i;
                }
                s += text[i++];
            }
            if (s.empty()) {
                throw ModelParseError(line, "empty quoted identifier");
            }
            out.push_back({Token::Ident, s, line, true});
        } else if (model_ident_char(c)) {
            std::string s;
            while (i < text.size() && model_ident_char(text[i])) {
                s += text[i++];
            }
            out.push_back({Token::Ident, s, line});
        } else {
            throw ModelParseError(line, std::string("unexpected character '") + c + "'");
        }
    }
    out.push_back({Token::End, "", line});
    return out;
}

struct RawEdge {
    std::string src, exit, dst;
    std::size_t line;
};

struct RawMachine {
    std::string name;
    std::size_t line = 0;
    std::string init;
    std::size_t init_line = 0;
    std::vector<std::pair<std::string, std::size_t>> outs;
    std::vector<std::string> expands;  // per vertex, empty for nodes
    std::vector<std::size_t> decl_line;
    Machine m;
    std::vector<RawEdge> edges;
};

class ModelParser {
public:
    explicit ModelParser(const std::string& text) : toks_(tokenize_model(text)) {}

    Shsm parse()
    {
        std::vector<RawMachine> raw;
        while (peek().kind != Token::End) {
            raw.push_back(parse_machine());
        }
        if (raw.empty()) {
            throw ModelParseError(peek().line, "no machine declared");
        }
        std::map<std::string, std::size_t> index;
        for (std::size_t i = 0; i < raw.size(); ++i) {
            if (!index.emplace(raw[i].name, i).second) {
                throw ModelParseError(raw[i].line, "duplicate machine '" + raw[i].name + "'");
            }
        }
        Shsm out;
        for (auto& r : raw) {
            Machine& m = r.m;
            m.name = r.name;
            for (std::size_t v = 0; v < m.vertices.size(); ++v) {
                if (r.expands[v].empty()) {
                    continue;
                }
                auto it = index.find(r.expands[v]);
                if (it == index.end()) {
                    throw ModelParseError(r.decl_line[v], "unknown machine '" + r.expands[v] + "'");
                }
                m.vertices[v].expand = static_cast<int>(it->second);
            }
            auto lookup = [&](const std::string& name, std::size_t line) {
                auto v = m.find(name);
                if (!v) {
                    throw ModelParseError(line, "unknown vertex '" + name + "' in machine '" + r.name + "'");
                }
                return *v;
            };
            if (r.init.empty()) {
                throw ModelParseError(r.line, "machine '" + r.name + "' has no init");
            }
            m.init = lookup(r.init, r.init_line);
            for (const auto& [z, line] : r.outs) {
                m.outs.push_back(lookup(z, line));
            }
            for (const RawEdge& e : r.edges) {
                Edge edge{lookup(e.src, e.line), std::nullopt, lookup(e.dst, e.line)};
                if (!e.exit.empty()) {
                    const Vertex& b = m.vertices[edge.src];
                    if (!b.is_box()) {
                        throw ModelParseError(e.line, "'" + e.src + "' is not a box");
                    }
                    const auto child = static_cast<std::size_t>(b.expand);
                    // forward references are a validation matter; resolve when possible
                    auto z = raw[child].m.find(e.exit);
                    if (!z) {
                        throw ModelParseError(e.line, "machine '" + raw[child].name + "' has no vertex '" + e.exit + "'");
                    }
                    edge.exit = *z;
                }
                m.edges.push_back(edge);
            }
            out.machines.push_back(m);
        }
        return out;
    }

private:
    const Token& peek() const { return toks_[pos_]; }

    const Token& next() { return toks_[pos_ == toks_.size() - 1 ? pos_ : pos_++]; }

    bool is_punct(const std::string& p) const { return peek().kind == Token::Punct && peek().text == p; }

    bool is_word(const std::string& w) const { return peek().kind == Token::Ident && !peek().quoted && peek().text == w; }

    void expect_punct(const std::string& p)
    {
        if (!is_punct(p)) {
            throw ModelParseError(peek().line, "expected '" + p + "'" + found());
        }
        next();
    }

    void expect_word(const std::string& w)
    {
        if (!is_word(w)) {
            throw ModelParseError(peek().line, "expected '" + w + "'" + found());
        }
        next();
    }

    std::string found() const
    {
        return peek().kind == Token::End ? " at end of input" : " but found '" + peek().text + "'";
    }

    std::string ident()
    {
        if (peek().kind != Token::Ident) {
            throw ModelParseError(peek().line, "expected an identifier" + found());
        }
        return next().text;
    }

    Labels label_list()
    {
        Labels out;
        if (!is_punct("[")) {
            return out;
        }
        next();
        if (is_punct("]")) {
            next();
            return out;
        }
        while (true) {
            out.insert(ident());
            if (is_punct(",")) {
                next();
                continue;
            }
            expect_punct("]");
            return out;
        }
    }

    void declare(RawMachine& r, const std::string& name, std::size_t line)
    {
        if (r.m.find(name)) {
            throw ModelParseError(line, "vertex '" + name + "' declared twice in machine '" + r.name + "'");
        }
        r.decl_line.push_back(line);
    }

    RawMachine parse_machine()
    {
        RawMachine r;
        r.line = peek().line;
        expect_word("machine");
        r.name = ident();
        while (!is_word("end")) {
            const std::size_t line = peek().line;
            if (peek().kind == Token::End) {
                throw ModelParseError(line, "missing 'end' for machine '" + r.name + "'");
            }
            if (is_word("init")) {
                next();
                if (!r.init.empty()) {
                    throw ModelParseError(line, "second init in machine '" + r.name + "'");
                }
                r.init = ident();
                r.init_line = line;
            } else if (is_word("out")) {
                next();
                r.outs.emplace_back(ident(), line);
                while (is_punct(",")) {
                    next();
                    r.outs.emplace_back(ident(), line);
                }
            } else if (is_word("node")) {
                next();
                std::string name = ident();
                declare(r, name, line);
                r.m.add_vertex(std::move(name), label_list());
                r.expands.emplace_back();
            } else if (is_word("box")) {
                next();
                std::string name = ident();
                declare(r, name, line);
                expect_word("expands");
                std::string target = ident();
                r.m.add_vertex(std::move(name), label_list(), 0);
                r.expands.push_back(std::move(target));
            } else if (is_word("edge")) {
                next();
                RawEdge e;
                e.line = line;
                e.src = ident();
                if (is_punct(".")) {
                    next();
                    e.exit = ident();
                }
                expect_punct("->");
                e.dst = ident();
                r.edges.push_back(std::move(e));
            } else {
                throw ModelParseError(line, "expected a statement" + found());
            }
            expect_punct(";");
        }
        next();
        return r;
    }

    std::vector<Token> toks_;
    std::size_t pos_ = 0;
};

inline bool needs_quotes(const std::string& s)
{
    static const char* keywords[] = {"machine", "end", "init", "out", "node", "box", "expands", "edge"};
    for (const char* k : keywords) {
        if (s == k) {
            return true;
        }
    }
    if (s.empty()) {
        return true;
    }
    for (char c : s) {
        if (!model_ident_char(c)) {
            return true;
        }
    }
    return false;
}

inline std::string quote_ident(const std::string& s)
{
    if (!needs_quotes(s)) {
        return s;
    }
    std::string out = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\') {
            out += '\\';
        }
        out += c;
    }
    return out + "\"";
}

inline std::string label_text(const Labels& l)
{
    std::string out = " [";
    bool first = true;
    for (const auto& p : l) {
        out += (first ? "" : ", ") + quote_ident(p);
        first = false;
    }
    return out + "]";
}

}  // namespace detail

inline Shsm parse_model(const std::string& text) { return detail::ModelParser(text).parse(); }

inline Shsm load_model(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot read model file '" + path + "'");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_model(ss.str());
}

inline std::string write_model(const Shsm& m)
{
    using detail::quote_ident;
    std::ostringstream out;
    for (std::size_t i = 0; i < m.machines.size(); ++i) {
        const Machine& mach = m.machines[i];
        out << "machine " << quote_ident(mach.name) << "\n";
        out << "  init " << quote_ident(mach.vertices.at(mach.init).name) << ";\n";
        if (!mach.outs.empty()) {
            out << "  out ";
            for (std::size_t j = 0; j < mach.outs.size(); ++j) {
                out << (j ? ", " : "") << quote_ident(mach.vertices[mach.outs[j]].name);
            }
            out << ";\n";
        }
        for (const Vertex& v : mach.vertices) {
            if (v.is_box()) {
                out << "  box " << quote_ident(v.name) << " expands "
                    << quote_ident(m.machines.at(static_cast<std::size_t>(v.expand)).name) << detail::label_text(v.labels)
                    << ";\n";
            } else {
                out << "  node " << quote_ident(v.name) << detail::label_text(v.labels) << ";\n";
            }
        }
        for (const Edge& e : mach.edges) {
            const Vertex& src = mach.vertices[e.src];
            out << "  edge " << quote_ident(src.name);
            if (e.exit) {
                out << "." << quote_ident(m.machines[static_cast<std::size_t>(src.expand)].vertices[*e.exit].name);
            }
            out << " -> " << quote_ident(mach.vertices[e.dst].name) << ";\n";
        }
        out << "end\n";
        if (i + 1 < m.machines.size()) {
            out << "\n";
        }
    }
    return out.str();
}

/// A flat structure as a one-machine model.
inline Shsm kripke_to_model(const KripkeStructure& k, const std::string& name = "flat")
{
    Machine mach;
    mach.name = name;
    for (StateId s = 0; s < k.num_states(); ++s) {
        mach.add_vertex(k.names[s], k.labels[s]);
    }
    mach.init = k.initial;
    for (StateId s = 0; s < k.num_states(); ++s) {
        for (StateId t : k.succ[s]) {
            mach.edges.push_back({s, std::nullopt, t});
        }
    }
    Shsm m;
    m.machines.push_back(std::move(mach));
    return m;
}

}  // namespace gctl
