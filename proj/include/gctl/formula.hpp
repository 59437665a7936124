#pragma once

// Graded-CTL formulas: abstract syntax, concrete-syntax parser, printer and
// normalization into the existential fragment used by both checking engines.

#include <cctype>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace gctl {

using Grade = std::uint32_t;

inline constexpr Grade kMaxGrade = static_cast<Grade>(std::numeric_limits<std::int32_t>::max());

enum class Op {
    Atom,
    True,
    False,
    Not,
    And,
    Or,
    Implies,
    ExistsX,
    ExistsG,
    ExistsU,
    ExistsF,
    ForallX,
    ForallG,
    ForallU,
    ForallF,
};

class FormulaError : public std::runtime_error {
public:
    FormulaError(const std::string& what, std::size_t pos)
        : std::runtime_error(what + " at offset " + std::to_string(pos)), pos_(pos)
    {
    }

    std::size_t position() const noexcept { return pos_; }

private:
    std::size_t pos_;
};

/// Immutable, structurally compared formula handle.
class Formula {
    struct Node {
        Op op;
        Grade grade = 0;
        std::string name;
        std::vector<Formula> kids;
    };

public:
    Formula() : Formula(Op::True, 0, {}, {}) {}

    static Formula atom(std::string name) { return Formula(Op::Atom, 0, std::move(name), {}); }
    static Formula top() { return Formula(Op::True, 0, {}, {}); }
    static Formula bottom() { return Formula(Op::False, 0, {}, {}); }
    static Formula negate(Formula f) { return Formula(Op::Not, 0, {}, {std::move(f)}); }
    static Formula conj(Formula a, Formula b) { return Formula(Op::And, 0, {}, {std::move(a), std::move(b)}); }
    static Formula disj(Formula a, Formula b) { return Formula(Op::Or, 0, {}, {std::move(a), std::move(b)}); }
    static Formula implies(Formula a, Formula b) { return Formula(Op::Implies, 0, {}, {std::move(a), std::move(b)}); }

    static Formula unary_path(Op op, Grade k, Formula f) { return Formula(op, k, {}, {std::move(f)}); }
    static Formula until(Op op, Grade k, Formula a, Formula b) { return Formula(op, k, {}, {std::move(a), std::move(b)}); }

    static Formula ex(Grade k, Formula f) { return unary_path(Op::ExistsX, k, std::move(f)); }
    static Formula eg(Grade k, Formula f) { return unary_path(Op::ExistsG, k, std::move(f)); }
    static Formula ef(Grade k, Formula f) { return unary_path(Op::ExistsF, k, std::move(f)); }
    static Formula eu(Grade k, Formula a, Formula b) { return until(Op::ExistsU, k, std::move(a), std::move(b)); }
    static Formula ax(Grade k, Formula f) { return unary_path(Op::ForallX, k, std::move(f)); }
    static Formula ag(Grade k, Formula f) { return unary_path(Op::ForallG, k, std::move(f)); }
    static Formula af(Grade k, Formula f) { return unary_path(Op::ForallF, k, std::move(f)); }
    static Formula au(Grade k, Formula a, Formula b) { return until(Op::ForallU, k, std::move(a), std::move(b)); }

    Op op() const { return node_->op; }
    Grade grade() const { return node_->grade; }
    const std::string& name() const { return node_->name; }
    const std::vector<Formula>& children() const { return node_->kids; }
    const Formula& child(std::size_t i = 0) const { return node_->kids.at(i); }

    friend bool operator==(const Formula& a, const Formula& b)
    {
        if (a.node_ == b.node_) {
            return true;
        }
        return a.op() == b.op() && a.grade() == b.grade() && a.name() == b.name() &&
               a.children() == b.children();
    }

private:
    Formula(Op op, Grade k, std::string name, std::vector<Formula> kids)
        : node_(std::make_shared<const Node>(Node{op, k, std::move(name), std::move(kids)}))
    {
    }

    std::shared_ptr<const Node> node_;
};

inline bool is_existential(Op op)
{
    return op == Op::ExistsX || op == Op::ExistsG || op == Op::ExistsU || op == Op::ExistsF;
}

inline bool is_universal(Op op)
{
    return op == Op::ForallX || op == Op::ForallG || op == Op::ForallU || op == Op::ForallF;
}

inline bool is_temporal(Op op) { return is_existential(op) || is_universal(op); }

/// Number of boolean and temporal operators.
inline std::size_t size(const Formula& f)
{
    std::size_t n = (f.op() == Op::Atom || f.op() == Op::True || f.op() == Op::False) ? 0 : 1;
    for (const auto& c : f.children()) {
        n += size(c);
    }
    return n;
}

inline std::size_t depth(const Formula& f)
{
    std::size_t d = 0;
    for (const auto& c : f.children()) {
        d = std::max(d, depth(c));
    }
    return is_temporal(f.op()) ? d + 1 : d;
}

inline void collect_atoms(const Formula& f, std::set<std::string>& out)
{
    if (f.op() == Op::Atom) {
        out.insert(f.name());
    }
    for (const auto& c : f.children()) {
        collect_atoms(c, out);
    }
}

inline std::set<std::string> atoms(const Formula& f)
{
    std::set<std::string> out;
    collect_atoms(f, out);
    return out;
}

inline Grade max_grade(const Formula& f)
{
    Grade g = is_temporal(f.op()) ? f.grade() : 0;
    for (const auto& c : f.children()) {
        g = std::max(g, max_grade(c));
    }
    return g;
}

// ---------------------------------------------------------------------------
// Printing. Binary connectives are always parenthesized so that the printed
// text parses back to the identical tree.

inline std::string render(const Formula& f)
{
    auto quant = [&](bool existential) {
        std::string q = existential ? "E" : "A";
        if (f.grade() != 0) {
            q += existential ? ">" : "<=";
            q += std::to_string(f.grade());
        }
        return q;
    };
    switch (f.op()) {
        case Op::Atom: return f.name();
        case Op::True: return "true";
        case Op::False: return "false";
        case Op::Not: return "!" + render(f.child());
        case Op::And: return "(" + render(f.child(0)) + " & " + render(f.child(1)) + ")";
        case Op::Or: return "(" + render(f.child(0)) + " | " + render(f.child(1)) + ")";
        case Op::Implies: return "(" + render(f.child(0)) + " -> " + render(f.child(1)) + ")";
        case Op::ExistsX: return quant(true) + " X " + render(f.child());
        case Op::ExistsG: return quant(true) + " G " + render(f.child());
        case Op::ExistsF: return quant(true) + " F " + render(f.child());
        case Op::ExistsU: return quant(true) + " [" + render(f.child(0)) + " U " + render(f.child(1)) + "]";
        case Op::ForallX: return quant(false) + " X " + render(f.child());
        case Op::ForallG: return quant(false) + " G " + render(f.child());
        case Op::ForallF: return quant(false) + " F " + render(f.child());
        case Op::ForallU: return quant(false) + " [" + render(f.child(0)) + " U " + render(f.child(1)) + "]";
    }
    return {};
}

// ---------------------------------------------------------------------------
// Parsing.
//
//   phi  := "true" | "false" | ident | "!" phi | phi "&" phi | phi "|" phi
//         | phi "->" phi | "(" phi ")" | Q path
//   Q    := "E" [">" nat] | "A" ["<=" nat]
//   path := "X" phi | "F" phi | "G" phi | "[" phi "U" phi "]"
//
// Precedence: ! and quantifiers > & > | > ->; -> is right-associative.

namespace detail {

class FormulaParser {
public:
    explicit FormulaParser(std::string_view text) : text_(text) {}

    Formula parse()
    {
        skip_ws();
        if (pos_ >= text_.size()) {
            throw FormulaError("empty formula", pos_);
        }
        Formula f = parse_implies();
        skip_ws();
        if (pos_ != text_.size()) {
            throw FormulaError("unexpected trailing input '" + std::string(text_.substr(pos_, 8)) + "'", pos_);
        }
        return f;
    }

private:
    static bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
    static bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

    static bool reserved(std::string_view w)
    {
        return w == "E" || w == "A" || w == "X" || w == "F" || w == "G" || w == "U" || w == "true" ||
               w == "false";
    }

    void skip_ws()
    {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) {
            ++pos_;
        }
    }

    bool accept(std::string_view tok)
    {
        skip_ws();
        if (text_.substr(pos_, tok.size()) == tok) {
            pos_ += tok.size();
            return true;
        }
        return false;
    }

    void expect(std::string_view tok)
    {
        if (!accept(tok)) {
            throw FormulaError("expected '" + std::string(tok) + "'", pos_);
        }
    }

    std::string_view peek_word()
    {
        skip_ws();
        std::size_t end = pos_;
        if (end < text_.size() && ident_start(text_[end])) {
            while (end < text_.size() && ident_char(text_[end])) {
                ++end;
            }
        }
        return text_.substr(pos_, end - pos_);
    }

    bool accept_word(std::string_view w)
    {
        if (peek_word() == w) {
            pos_ += w.size();
            return true;
        }
        return false;
    }

    Formula parse_implies()
    {
        Formula lhs = parse_or();
        if (accept("->")) {
            return Formula::implies(std::move(lhs), parse_implies());
        }
        return lhs;
    }

    Formula parse_or()
    {
        Formula lhs = parse_and();
        while (true) {
            skip_ws();
            if (pos_ < text_.size() && text_[pos_] == '|') {
                ++pos_;
                lhs = Formula::disj(std::move(lhs), parse_and());
            } else {
                return lhs;
            }
        }
    }

    Formula parse_and()
    {
        Formula lhs = parse_unary();
        while (accept("&")) {
            lhs = Formula::conj(std::move(lhs), parse_unary());
        }
        return lhs;
    }

    Grade parse_nat()
    {
        skip_ws();
        const std::size_t start = pos_;
        if (pos_ < text_.size() && text_[pos_] == '-') {
            throw FormulaError("negative grade", pos_);
        }
        std::uint64_t v = 0;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
            v = v * 10 + static_cast<std::uint64_t>(text_[pos_] - '0');
            if (v > kMaxGrade) {
                throw FormulaError("grade exceeds 2^31-1", start);
            }
            ++pos_;
        }
        if (pos_ == start) {
            throw FormulaError("expected a non-negative integer grade", pos_);
        }
        if (pos_ < text_.size() && (text_[pos_] == '.' || ident_char(text_[pos_]))) {
            throw FormulaError("grade must be a non-negative integer", start);
        }
        return static_cast<Grade>(v);
    }

    Formula parse_unary()
    {
        skip_ws();
        if (pos_ >= text_.size()) {
            throw FormulaError("unexpected end of formula", pos_);
        }
        const char c = text_[pos_];
        if (c == '!') {
            ++pos_;
            return Formula::negate(parse_unary());
        }
        if (c == '(') {
            ++pos_;
            Formula inner = parse_implies();
            expect(")");
            return inner;
        }
        const std::size_t word_pos = pos_;
        const std::string_view w = peek_word();
        if (w.empty()) {
            throw FormulaError(std::string("unexpected character '") + c + "'", pos_);
        }
        if (w == "E" || w == "A") {
            pos_ += 1;
            const bool existential = (w == "E");
            Grade k = 0;
            skip_ws();
            if (text_.substr(pos_, 2) == "<=") {
                if (existential) {
                    throw FormulaError("'E' takes a '>' grade, not '<='", pos_);
                }
                pos_ += 2;
                k = parse_nat();
            } else if (text_.substr(pos_, 1) == ">") {
                if (!existential) {
                    throw FormulaError("'A' takes a '<=' grade, not '>'", pos_);
                }
                pos_ += 1;
                k = parse_nat();
            }
            return parse_path(existential, k);
        }
        if (w == "true") {
            pos_ += w.size();
            return Formula::top();
        }
        if (w == "false") {
            pos_ += w.size();
            return Formula::bottom();
        }
        if (reserved(w)) {
            throw FormulaError("unexpected keyword '" + std::string(w) + "'", word_pos);
        }
        pos_ += w.size();
        return Formula::atom(std::string(w));
    }

    Formula parse_path(bool existential, Grade k)
    {
        if (accept("[")) {
            Formula lhs = parse_implies();
            if (!accept_word("U")) {
                throw FormulaError("expected 'U'", pos_);
            }
            Formula rhs = parse_implies();
            expect("]");
            return Formula::until(existential ? Op::ExistsU : Op::ForallU, k, std::move(lhs), std::move(rhs));
        }
        if (accept_word("X")) {
            return Formula::unary_path(existential ? Op::ExistsX : Op::ForallX, k, parse_unary());
        }
        if (accept_word("F")) {
            return Formula::unary_path(existential ? Op::ExistsF : Op::ForallF, k, parse_unary());
        }
        if (accept_word("G")) {
            return Formula::unary_path(existential ? Op::ExistsG : Op::ForallG, k, parse_unary());
        }
        throw FormulaError("expected a path formula (X, F, G or [.. U ..])", pos_);
    }

    std::string_view text_;
    std::size_t pos_ = 0;
};

}  // namespace detail

inline Formula parse_formula(std::string_view text) { return detail::FormulaParser(text).parse(); }

// ---------------------------------------------------------------------------
// Normalization into Atom/True/Not/And/ExistsX/ExistsG/ExistsU, plus ForallU
// with a positive grade, which both engines evaluate natively by summing the
// evidence counts of G(a & !b) and (a & !b) U (!a & !b).

namespace detail {

inline Formula mk_not(Formula f)
{
    if (f.op() == Op::Not) {
        return f.child();
    }
    return Formula::negate(std::move(f));
}

inline Formula mk_or(Formula a, Formula b) { return mk_not(Formula::conj(mk_not(std::move(a)), mk_not(std::move(b)))); }

}  // namespace detail

inline Formula normalize(const Formula& f)
{
    using detail::mk_not;
    switch (f.op()) {
        case Op::Atom:
        case Op::True: return f;
        case Op::False: return Formula::negate(Formula::top());
        case Op::Not: return mk_not(normalize(f.child()));
        case Op::And: return Formula::conj(normalize(f.child(0)), normalize(f.child(1)));
        case Op::Or: return detail::mk_or(normalize(f.child(0)), normalize(f.child(1)));
        case Op::Implies: return mk_not(Formula::conj(normalize(f.child(0)), mk_not(normalize(f.child(1)))));
        case Op::ExistsX: return Formula::ex(f.grade(), normalize(f.child()));
        case Op::ExistsG: return Formula::eg(f.grade(), normalize(f.child()));
        case Op::ExistsU: return Formula::eu(f.grade(), normalize(f.child(0)), normalize(f.child(1)));
        case Op::ExistsF: return Formula::eu(f.grade(), Formula::top(), normalize(f.child()));
        case Op::ForallX: return mk_not(Formula::ex(f.grade(), mk_not(normalize(f.child()))));
        case Op::ForallG: return mk_not(Formula::eu(f.grade(), Formula::top(), mk_not(normalize(f.child()))));
        case Op::ForallF: return mk_not(Formula::eg(f.grade(), mk_not(normalize(f.child()))));
        case Op::ForallU: {
            Formula a = normalize(f.child(0));
            Formula b = normalize(f.child(1));
            if (f.grade() > 0) {
                return Formula::au(f.grade(), std::move(a), std::move(b));
            }
            // A[a U b] == !(E G !b | E [!b U (!a & !b)])
            Formula nb = mk_not(b);
            Formula stuck = Formula::eg(0, nb);
            Formula escape = Formula::eu(0, nb, Formula::conj(mk_not(a), nb));
            return mk_not(detail::mk_or(std::move(stuck), std::move(escape)));
        }
    }
    return f;
}

/// True iff `f` only uses the operators produced by normalize().
inline bool is_normalized(const Formula& f)
{
    switch (f.op()) {
        case Op::Atom:
        case Op::True:
        case Op::Not:
        case Op::And:
        case Op::ExistsX:
        case Op::ExistsG:
        case Op::ExistsU: break;
        case Op::ForallU:
            if (f.grade() == 0) {
                return false;
            }
            break;
        default: return false;
    }
    for (const auto& c : f.children()) {
        if (!is_normalized(c)) {
            return false;
        }
    }
    return true;
}

/// Children-before-parents order without duplicates (structural equality).
inline std::vector<Formula> subformulas_bottom_up(const Formula& f)
{
    std::vector<Formula> out;
    std::set<std::string> seen;
    auto visit = [&](auto&& self, const Formula& g) -> void {
        const std::string key = render(g);
        if (seen.count(key) != 0) {
            return;
        }
        for (const auto& c : g.children()) {
            self(self, c);
        }
        if (seen.insert(key).second) {
            out.push_back(g);
        }
    };
    visit(visit, f);
    return out;
}

}  // namespace gctl
