#include "plos/lang.hpp"

#include "plos/error.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

namespace plos {

bool VarDecl::contains(Value v) const {
    return std::find(domain.begin(), domain.end(), v) != domain.end();
}

Expr Expr::constant(Value v) {
    Expr e;
    e.op = Op::Const;
    e.value = v;
    return e;
}

Expr Expr::variable(std::size_t index) {
    Expr e;
    e.op = Op::Var;
    e.var = index;
    return e;
}

Expr Expr::unary(Op op, Expr a) {
    Expr e;
    e.op = op;
    e.args.push_back(std::move(a));
    return e;
}

Expr Expr::binary(Op op, Expr a, Expr b) {
    Expr e;
    e.op = op;
    e.args.push_back(std::move(a));
    e.args.push_back(std::move(b));
    return e;
}

Value Expr::eval(std::span<const Value> state) const {
    switch (op) {
    case Op::Const: return value;
    case Op::Var: return state[var];
    case Op::Neg: return -args[0].eval(state);
    case Op::Not: return args[0].eval(state) == 0 ? 1 : 0;
    case Op::And: return (args[0].eval(state) != 0 && args[1].eval(state) != 0) ? 1 : 0;
    case Op::Or: return (args[0].eval(state) != 0 || args[1].eval(state) != 0) ? 1 : 0;
    default: break;
    }
    const Value a = args[0].eval(state);
    const Value b = args[1].eval(state);
    switch (op) {
    case Op::Add: return a + b;
    case Op::Sub: return a - b;
    case Op::Mul: return a * b;
    case Op::Div:
        if (b == 0) throw InputError("division by zero");
        return a / b;
    case Op::Mod: {
        if (b == 0) throw InputError("modulus by zero");
        Value r = a % b;
        if (r < 0) r += (b < 0 ? -b : b);
        return r;
    }
    case Op::Eq: return a == b;
    case Op::Ne: return a != b;
    case Op::Lt: return a < b;
    case Op::Le: return a <= b;
    case Op::Gt: return a > b;
    case Op::Ge: return a >= b;
    default: break;
    }
    throw InputError("malformed expression");
}

void Expr::collect_vars(std::set<std::size_t>& out) const {
    if (op == Op::Var) out.insert(var);
    for (const auto& a : args) a.collect_vars(out);
}

std::optional<std::string> ProbExpr::bare_parameter() const {
    if (constant == 0.0 && terms.size() == 1 && terms[0].second == 1.0) return terms[0].first;
    return std::nullopt;
}

double ProbExpr::eval(const Bindings& bindings) const {
    double v = constant;
    for (const auto& [name, coef] : terms) {
        auto it = bindings.find(name);
        if (it == bindings.end()) throw InputError("unbound parameter #" + name);
        v += coef * it->second;
    }
    return v;
}

Distribution Distribution::uniform(std::span<const Value> values) {
    Distribution d;
    const double p = 1.0 / static_cast<double>(values.size());
    for (Value v : values) d.support.emplace_back(v, p);
    return d;
}

std::string format_number(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

namespace {

// ---------------------------------------------------------------- lexer

enum class Tok {
    End, Ident, Number, Param, Label,
    Semi, Colon, Comma, LBrace, RBrace, LParen, RParen,
    Assign, RandAssign,
    Plus, Minus, Star, Slash, Percent,
    EqEq, NotEq, Less, LessEq, Greater, GreaterEq, AndAnd, OrOr, Bang,
    KwVar, KwSkip, KwChoose, KwOr, KwRo, KwIf, KwThen, KwElse, KwFi, KwWhile, KwDo, KwOd,
    KwTrue, KwFalse,
};

struct Token {
    Tok kind = Tok::End;
    std::string text;
    int line = 1;
    int column = 1;
};

const std::map<std::string, Tok, std::less<>>& keywords() {
    static const std::map<std::string, Tok, std::less<>> kw = {
        {"var", Tok::KwVar},     {"skip", Tok::KwSkip}, {"choose", Tok::KwChoose},
        {"or", Tok::KwOr},       {"ro", Tok::KwRo},     {"if", Tok::KwIf},
        {"then", Tok::KwThen},   {"else", Tok::KwElse}, {"fi", Tok::KwFi},
        {"while", Tok::KwWhile}, {"do", Tok::KwDo},     {"od", Tok::KwOd},
        {"true", Tok::KwTrue},   {"false", Tok::KwFalse},
    };
    return kw;
}

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

std::vector<Token> lex(std::string_view src) {
    std::vector<Token> out;
    std::size_t i = 0;
    int line = 1;
    int col = 1;
    auto advance = [&](std::size_t n) {
        for (std::size_t k = 0; k < n; ++k) {
            if (src[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
            ++i;
        }
    };
    auto skip_line = [&] {
        while (i < src.size() && src[i] != '\n') advance(1);
    };

    while (i < src.size()) {
        const char c = src[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            advance(1);
            continue;
        }
        if (c == '/' && i + 1 < src.size() && src[i + 1] == '/') {
            skip_line();
            continue;
        }
        Token t;
        t.line = line;
        t.column = col;
        if (c == '#') {
            if (i + 1 < src.size() && ident_start(src[i + 1])) {
                std::size_t j = i + 1;
                while (j < src.size() && ident_char(src[j])) ++j;
                t.kind = Tok::Param;
                t.text = std::string(src.substr(i + 1, j - i - 1));
                advance(j - i);
                out.push_back(std::move(t));
            } else {
                skip_line();
            }
            continue;
        }
        if (c == '@') {
            std::size_t j = i + 1;
            while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
            if (j == i + 1) throw ParseError("expected label number after '@'", line, col);
            t.kind = Tok::Label;
            t.text = std::string(src.substr(i + 1, j - i - 1));
            advance(j - i);
            out.push_back(std::move(t));
            continue;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) ||
            (c == '.' && i + 1 < src.size() && std::isdigit(static_cast<unsigned char>(src[i + 1])))) {
            std::size_t j = i;
            while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
            if (j < src.size() && src[j] == '.') {
                ++j;
                while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
            }
            if (j < src.size() && (src[j] == 'e' || src[j] == 'E')) {
                std::size_t k = j + 1;
                if (k < src.size() && (src[k] == '+' || src[k] == '-')) ++k;
                if (k < src.size() && std::isdigit(static_cast<unsigned char>(src[k]))) {
                    j = k;
                    while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
                }
            }
            t.kind = Tok::Number;
            t.text = std::string(src.substr(i, j - i));
            advance(j - i);
            out.push_back(std::move(t));
            continue;
        }
        if (ident_start(c)) {
            std::size_t j = i;
            while (j < src.size() && ident_char(src[j])) ++j;
            t.text = std::string(src.substr(i, j - i));
            auto kw = keywords().find(t.text);
            t.kind = kw != keywords().end() ? kw->second : Tok::Ident;
            advance(j - i);
            out.push_back(std::move(t));
            continue;
        }

        auto two = [&](char a, char b) { return c == a && i + 1 < src.size() && src[i + 1] == b; };
        std::size_t len = 2;
        if (two(':', '=')) t.kind = Tok::Assign;
        else if (two('?', '=')) t.kind = Tok::RandAssign;
        else if (two('=', '=')) t.kind = Tok::EqEq;
        else if (two('!', '=')) t.kind = Tok::NotEq;
        else if (two('<', '=')) t.kind = Tok::LessEq;
        else if (two('>', '=')) t.kind = Tok::GreaterEq;
        else if (two('&', '&')) t.kind = Tok::AndAnd;
        else if (two('|', '|')) t.kind = Tok::OrOr;
        else {
            len = 1;
            switch (c) {
            case ';': t.kind = Tok::Semi; break;
            case ':': t.kind = Tok::Colon; break;
            case ',': t.kind = Tok::Comma; break;
            case '{': t.kind = Tok::LBrace; break;
            case '}': t.kind = Tok::RBrace; break;
            case '(': t.kind = Tok::LParen; break;
            case ')': t.kind = Tok::RParen; break;
            case '+': t.kind = Tok::Plus; break;
            case '-': t.kind = Tok::Minus; break;
            case '*': t.kind = Tok::Star; break;
            case '/': t.kind = Tok::Slash; break;
            case '%': t.kind = Tok::Percent; break;
            case '<': t.kind = Tok::Less; break;
            case '>': t.kind = Tok::Greater; break;
            case '!': t.kind = Tok::Bang; break;
            default:
                throw ParseError(std::string("unexpected character '") + c + "'", line, col);
            }
        }
        t.text = std::string(src.substr(i, len));
        advance(len);
        out.push_back(std::move(t));
    }
    Token end;
    end.kind = Tok::End;
    end.line = line;
    end.column = col;
    out.push_back(end);
    return out;
}

// ---------------------------------------------------------------- parser

constexpr double kProbTolerance = 1e-9;

class Parser {
public:
    Parser(std::vector<Token> toks, std::vector<VarDecl> decls)
        : toks_(std::move(toks)), decls_(std::move(decls)) {}

    Program program() {
        while (peek().kind == Tok::KwVar) declaration();
        if (decls_.empty()) fail("program declares no variables");
        Program p;
        p.body = sequence();
        expect(Tok::End, "end of input");
        p.decls = decls_;
        finish_labels(p.body);
        p.init_label = init(p.body);
        return finalize(std::move(p));
    }

    Expr expression_only() {
        Expr e = expr();
        expect(Tok::End, "end of expression");
        return e;
    }

    Stmt statement_only() {
        Stmt s = sequence();
        expect(Tok::End, "end of statement");
        finish_labels(s);
        return s;
    }

private:
    std::vector<Token> toks_;
    std::size_t pos_ = 0;
    std::vector<VarDecl> decls_;
    std::map<Label, std::pair<int, int>> explicit_labels_;

    const Token& peek(std::size_t k = 0) const {
        return toks_[std::min(pos_ + k, toks_.size() - 1)];
    }
    const Token& next() {
        const Token& t = toks_[pos_];
        if (pos_ + 1 < toks_.size()) ++pos_;
        return t;
    }
    bool accept(Tok k) {
        if (peek().kind != k) return false;
        next();
        return true;
    }
    [[noreturn]] void fail(const std::string& msg) const { fail_at(msg, peek()); }
    [[noreturn]] static void fail_at(const std::string& msg, const Token& t) {
        throw ParseError(msg, t.line, t.column);
    }
    const Token& expect(Tok k, const char* what) {
        if (peek().kind != k) {
            const Token& t = peek();
            fail(std::string("expected ") + what + ", found " +
                 (t.kind == Tok::End ? std::string("end of input") : "'" + t.text + "'"));
        }
        return next();
    }

    Value integer() {
        bool neg = accept(Tok::Minus);
        const Token& t = expect(Tok::Number, "integer");
        Value v = 0;
        auto res = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
        if (res.ec != std::errc() || res.ptr != t.text.data() + t.text.size())
            fail_at("expected integer, found '" + t.text + "'", t);
        return neg ? -v : v;
    }

    double number() {
        const Token& t = expect(Tok::Number, "number");
        double v = 0;
        auto res = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
        if (res.ec != std::errc()) fail_at("malformed number '" + t.text + "'", t);
        return v;
    }

    void declaration() {
        expect(Tok::KwVar, "'var'");
        const Token& name = expect(Tok::Ident, "variable name");
        for (const auto& d : decls_)
            if (d.name == name.text) fail_at("duplicate declaration of '" + name.text + "'", name);
        expect(Tok::Colon, "':'");
        expect(Tok::LBrace, "'{'");
        VarDecl d{name.text, {}};
        do {
            const Token& at = peek();
            Value v = integer();
            if (d.contains(v)) fail_at("duplicate value in domain of '" + d.name + "'", at);
            d.domain.push_back(v);
        } while (accept(Tok::Comma));
        expect(Tok::RBrace, "'}'");
        expect(Tok::Semi, "';'");
        decls_.push_back(std::move(d));
    }

    std::size_t variable(const Token& t) const {
        for (std::size_t i = 0; i < decls_.size(); ++i)
            if (decls_[i].name == t.text) return i;
        fail_at("undeclared variable '" + t.text + "'", t);
    }

    Label optional_label(Stmt& s) {
        if (peek().kind != Tok::Label) return 0;
        const Token& t = next();
        Label l = std::stoul(t.text);
        if (l == 0) fail_at("labels start at 1", t);
        if (explicit_labels_.count(l)) fail_at("duplicate label @" + t.text, t);
        explicit_labels_[l] = {t.line, t.column};
        s.label = l;
        return l;
    }

    static bool ends_sequence(Tok k) {
        return k == Tok::End || k == Tok::KwOd || k == Tok::KwFi || k == Tok::KwElse ||
               k == Tok::KwOr || k == Tok::KwRo || k == Tok::RParen;
    }

    Stmt sequence() {
        std::vector<Stmt> parts;
        parts.push_back(statement());
        while (accept(Tok::Semi)) {
            if (ends_sequence(peek().kind)) break;
            parts.push_back(statement());
        }
        if (parts.size() == 1) return std::move(parts.front());
        Stmt seq;
        seq.kind = StmtKind::Seq;
        for (auto& p : parts) {
            // flatten nested sequences from parenthesised groups
            if (p.kind == StmtKind::Seq) {
                for (auto& q : p.body) seq.body.push_back(std::move(q));
            } else {
                seq.body.push_back(std::move(p));
            }
        }
        return seq;
    }

    Stmt statement() {
        const Token& t = peek();
        Stmt s;
        switch (t.kind) {
        case Tok::KwSkip:
            next();
            s.kind = StmtKind::Skip;
            optional_label(s);
            return s;
        case Tok::Ident: {
            const Token& name = next();
            s.var = variable(name);
            if (accept(Tok::Assign)) {
                s.kind = StmtKind::Assign;
                s.expr = expr();
                if (s.expr.op == Expr::Op::Const && !decls_[s.var].contains(s.expr.value))
                    fail_at("value " + std::to_string(s.expr.value) + " outside domain of '" +
                                decls_[s.var].name + "'",
                            name);
            } else if (accept(Tok::RandAssign)) {
                s.kind = StmtKind::RandomAssign;
                s.dist = distribution(decls_[s.var]);
            } else {
                fail("expected ':=' or '?='");
            }
            optional_label(s);
            return s;
        }
        case Tok::KwChoose: return choose();
        case Tok::KwIf: {
            next();
            s.kind = StmtKind::If;
            s.expr = expr();
            optional_label(s);
            expect(Tok::KwThen, "'then'");
            s.body.push_back(sequence());
            expect(Tok::KwElse, "'else'");
            s.body.push_back(sequence());
            expect(Tok::KwFi, "'fi'");
            return s;
        }
        case Tok::KwWhile: {
            next();
            s.kind = StmtKind::While;
            s.expr = expr();
            optional_label(s);
            expect(Tok::KwDo, "'do'");
            s.body.push_back(sequence());
            expect(Tok::KwOd, "'od'");
            return s;
        }
        case Tok::LParen: {
            next();
            Stmt inner = sequence();
            expect(Tok::RParen, "')'");
            return inner;
        }
        default:
            fail(t.kind == Tok::End ? "expected statement, found end of input"
                                    : "expected statement, found '" + t.text + "'");
        }
    }

    Stmt choose() {
        const Token& kw = expect(Tok::KwChoose, "'choose'");
        Stmt s;
        s.kind = StmtKind::Choose;
        optional_label(s);
        do {
            const Token& at = peek();
            ProbExpr p = prob_sum();
            if (p.is_literal() && (p.constant < -kProbTolerance || p.constant > 1.0 + kProbTolerance))
                fail_at("probability " + format_number(p.constant) + " outside [0,1]", at);
            expect(Tok::Colon, "':'");
            s.probs.push_back(std::move(p));
            s.body.push_back(sequence());
        } while (accept(Tok::KwOr));
        expect(Tok::KwRo, "'ro'");
        if (s.body.size() < 2) fail_at("choose needs at least two branches", kw);
        const bool literal = std::all_of(s.probs.begin(), s.probs.end(),
                                         [](const ProbExpr& p) { return p.is_literal(); });
        if (literal) {
            double sum = 0;
            for (const auto& p : s.probs) sum += p.constant;
            if (std::abs(sum - 1.0) > kProbTolerance)
                fail_at("choose probabilities sum to " + format_number(sum) + ", expected 1", kw);
        }
        return s;
    }

    // Affine probability expressions over #parameters.
    ProbExpr prob_sum() {
        ProbExpr acc = prob_term();
        while (peek().kind == Tok::Plus || peek().kind == Tok::Minus) {
            const double sign = next().kind == Tok::Plus ? 1.0 : -1.0;
            ProbExpr rhs = prob_term();
            acc.constant += sign * rhs.constant;
            for (auto& [n, c] : rhs.terms) add_term(acc, n, sign * c);
        }
        return acc;
    }

    static void add_term(ProbExpr& p, const std::string& name, double coef) {
        for (auto& [n, c] : p.terms) {
            if (n == name) {
                c += coef;
                return;
            }
        }
        p.terms.emplace_back(name, coef);
    }

    ProbExpr prob_term() {
        ProbExpr acc = prob_factor();
        while (peek().kind == Tok::Star || peek().kind == Tok::Slash) {
            const Token& op = next();
            ProbExpr rhs = prob_factor();
            if (op.kind == Tok::Slash) {
                if (!rhs.is_literal() || rhs.constant == 0.0) fail_at("divisor must be a nonzero literal", op);
                scale(acc, 1.0 / rhs.constant);
            } else if (rhs.is_literal()) {
                scale(acc, rhs.constant);
            } else if (acc.is_literal()) {
                scale(rhs, acc.constant);
                acc = std::move(rhs);
            } else {
                fail_at("probability expressions must be affine in parameters", op);
            }
        }
        return acc;
    }

    static void scale(ProbExpr& p, double k) {
        p.constant *= k;
        for (auto& [n, c] : p.terms) c *= k;
    }

    ProbExpr prob_factor() {
        const Token& t = peek();
        if (t.kind == Tok::Minus) {
            next();
            ProbExpr p = prob_factor();
            scale(p, -1.0);
            return p;
        }
        if (t.kind == Tok::Number) return ProbExpr::literal(number());
        if (t.kind == Tok::Param) return ProbExpr::parameter(next().text);
        if (accept(Tok::LParen)) {
            ProbExpr p = prob_sum();
            expect(Tok::RParen, "')'");
            return p;
        }
        fail("expected probability");
    }

    double prob_literal() {
        const Token& at = peek();
        ProbExpr p = prob_term();
        if (!p.is_literal()) fail_at("distribution probabilities must be literals", at);
        return p.constant;
    }

    Distribution distribution(const VarDecl& decl) {
        const Token& open = expect(Tok::LBrace, "'{'");
        Distribution d;
        if (peek().kind == Tok::LParen) {
            do {
                expect(Tok::LParen, "'('");
                const Token& at = peek();
                Value v = integer();
                if (!decl.contains(v))
                    fail_at("value " + std::to_string(v) + " outside domain of '" + decl.name + "'", at);
                expect(Tok::Comma, "','");
                const Token& pt = peek();
                double p = prob_literal();
                if (p < 0.0 || p > 1.0 + kProbTolerance)
                    fail_at("probability " + format_number(p) + " outside [0,1]", pt);
                expect(Tok::RParen, "')'");
                d.support.emplace_back(v, p);
            } while (accept(Tok::Comma));
        } else {
            std::vector<Value> vals;
            do {
                const Token& at = peek();
                Value v = integer();
                if (!decl.contains(v))
                    fail_at("value " + std::to_string(v) + " outside domain of '" + decl.name + "'", at);
                vals.push_back(v);
            } while (accept(Tok::Comma));
            d = Distribution::uniform(vals);
        }
        expect(Tok::RBrace, "'}'");
        double sum = 0;
        for (const auto& [v, p] : d.support) sum += p;
        if (std::abs(sum - 1.0) > kProbTolerance)
            fail_at("distribution probabilities sum to " + format_number(sum) + ", expected 1", open);
        return d;
    }

    // Precedence climbing: || < && < equality < relational < additive < multiplicative < unary.
    Expr expr() { return or_expr(); }

    Expr or_expr() {
        Expr e = and_expr();
        while (accept(Tok::OrOr)) e = Expr::binary(Expr::Op::Or, std::move(e), and_expr());
        return e;
    }
    Expr and_expr() {
        Expr e = eq_expr();
        while (accept(Tok::AndAnd)) e = Expr::binary(Expr::Op::And, std::move(e), eq_expr());
        return e;
    }
    Expr eq_expr() {
        Expr e = rel_expr();
        for (;;) {
            if (accept(Tok::EqEq)) e = Expr::binary(Expr::Op::Eq, std::move(e), rel_expr());
            else if (accept(Tok::NotEq)) e = Expr::binary(Expr::Op::Ne, std::move(e), rel_expr());
            else return e;
        }
    }
    Expr rel_expr() {
        Expr e = add_expr();
        for (;;) {
            if (accept(Tok::Less)) e = Expr::binary(Expr::Op::Lt, std::move(e), add_expr());
            else if (accept(Tok::LessEq)) e = Expr::binary(Expr::Op::Le, std::move(e), add_expr());
            else if (accept(Tok::Greater)) e = Expr::binary(Expr::Op::Gt, std::move(e), add_expr());
            else if (accept(Tok::GreaterEq)) e = Expr::binary(Expr::Op::Ge, std::move(e), add_expr());
            else return e;
        }
    }
    Expr add_expr() {
        Expr e = mul_expr();
        for (;;) {
            if (accept(Tok::Plus)) e = Expr::binary(Expr::Op::Add, std::move(e), mul_expr());
            else if (accept(Tok::Minus)) e = Expr::binary(Expr::Op::Sub, std::move(e), mul_expr());
            else return e;
        }
    }
    Expr mul_expr() {
        Expr e = unary_expr();
        for (;;) {
            if (accept(Tok::Star)) e = Expr::binary(Expr::Op::Mul, std::move(e), unary_expr());
            else if (accept(Tok::Slash)) e = Expr::binary(Expr::Op::Div, std::move(e), unary_expr());
            else if (accept(Tok::Percent)) e = Expr::binary(Expr::Op::Mod, std::move(e), unary_expr());
            else return e;
        }
    }
    Expr unary_expr() {
        if (accept(Tok::Minus)) {
            // fold negative literals so printing round-trips
            if (peek().kind == Tok::Number) return Expr::constant(-integer());
            return Expr::unary(Expr::Op::Neg, unary_expr());
        }
        if (accept(Tok::Bang)) return Expr::unary(Expr::Op::Not, unary_expr());
        return primary();
    }
    Expr primary() {
        const Token& t = peek();
        switch (t.kind) {
        case Tok::Number: return Expr::constant(integer());
        case Tok::KwTrue: next(); return Expr::constant(1);
        case Tok::KwFalse: next(); return Expr::constant(0);
        case Tok::Ident: next(); return Expr::variable(variable(t));
        case Tok::LParen: {
            next();
            Expr e = expr();
            expect(Tok::RParen, "')'");
            return e;
        }
        default:
            fail(t.kind == Tok::End ? "expected expression, found end of input"
                                    : "expected expression, found '" + t.text + "'");
        }
    }

    // Preorder walk assigning the smallest unused label to unlabelled nodes.
    void finish_labels(Stmt& root) {
        Label nextLabel = 1;
        std::function<void(Stmt&)> walk = [&](Stmt& s) {
            if (s.kind != StmtKind::Seq && s.label == 0) {
                while (explicit_labels_.count(nextLabel)) ++nextLabel;
                s.label = nextLabel++;
            }
            for (auto& c : s.body) walk(c);
        };
        walk(root);

        std::vector<Label> used;
        std::function<void(const Stmt&)> collect = [&](const Stmt& s) {
            if (s.kind != StmtKind::Seq) used.push_back(s.label);
            for (const auto& c : s.body) collect(c);
        };
        collect(root);
        std::sort(used.begin(), used.end());
        for (std::size_t i = 0; i < used.size(); ++i) {
            if (used[i] != i + 1) {
                const auto it = explicit_labels_.upper_bound(used.size());
                const auto [line, col] = it != explicit_labels_.end() ? it->second : std::pair{1, 1};
                throw ParseError("labels must be exactly 1.." + std::to_string(used.size()) +
                                     " (found @" + std::to_string(used.back()) + ")",
                                 line, col);
            }
        }
    }

    static Program finalize(Program p) {
        Label maxLabel = 0;
        std::function<void(const Stmt&)> walk = [&](const Stmt& s) {
            maxLabel = std::max(maxLabel, s.label);
            for (const auto& c : s.body) walk(c);
        };
        walk(p.body);
        p.stop_label = maxLabel + 1;
        return p;
    }
};

} // namespace

Program parse(std::string_view source) {
    Parser parser(lex(source), {});
    return parser.program();
}

Expr parse_expr(std::string_view text, std::span<const VarDecl> decls) {
    Parser parser(lex(text), std::vector<VarDecl>(decls.begin(), decls.end()));
    return parser.expression_only();
}

Stmt parse_stmt(std::string_view text, std::span<const VarDecl> decls) {
    Parser parser(lex(text), std::vector<VarDecl>(decls.begin(), decls.end()));
    return parser.statement_only();
}

std::size_t Program::var_index(std::string_view name) const {
    for (std::size_t i = 0; i < decls.size(); ++i)
        if (decls[i].name == name) return i;
    throw InputError("unknown variable '" + std::string(name) + "'");
}

std::vector<std::string> Program::parameters() const {
    std::vector<std::string> out;
    std::function<void(const Stmt&)> walk = [&](const Stmt& s) {
        for (const auto& p : s.probs)
            for (const auto& [name, c] : p.terms)
                if (std::find(out.begin(), out.end(), name) == out.end()) out.push_back(name);
        for (const auto& c : s.body) walk(c);
    };
    walk(body);
    return out;
}

const Stmt* Program::block(Label l) const {
    const Stmt* found = nullptr;
    std::function<void(const Stmt&)> walk = [&](const Stmt& s) {
        if (found) return;
        if (s.kind != StmtKind::Seq && s.label == l) {
            found = &s;
            return;
        }
        for (const auto& c : s.body) walk(c);
    };
    walk(body);
    return found;
}

// ---------------------------------------------------------------- flow

Label init(const Stmt& s) {
    return s.kind == StmtKind::Seq ? init(s.body.front()) : s.label;
}

std::vector<Label> final(const Stmt& s) {
    switch (s.kind) {
    case StmtKind::Seq: return final(s.body.back());
    case StmtKind::Choose:
    case StmtKind::If: {
        std::vector<Label> out;
        for (const auto& b : s.body) {
            auto f = final(b);
            out.insert(out.end(), f.begin(), f.end());
        }
        return out;
    }
    default: return {s.label};
    }
}

namespace {

void flow_into(const Stmt& s, std::vector<FlowEdge>& out) {
    switch (s.kind) {
    case StmtKind::Seq:
        for (std::size_t i = 0; i < s.body.size(); ++i) {
            flow_into(s.body[i], out);
            if (i + 1 < s.body.size()) {
                const Label next = init(s.body[i + 1]);
                for (Label f : final(s.body[i])) out.push_back({f, next, Polarity::Plain, std::nullopt});
            }
        }
        break;
    case StmtKind::Choose:
        for (std::size_t i = 0; i < s.body.size(); ++i) {
            out.push_back({s.label, init(s.body[i]), Polarity::Plain, s.probs[i]});
            flow_into(s.body[i], out);
        }
        break;
    case StmtKind::If:
        out.push_back({s.label, init(s.body[0]), Polarity::Underlined, std::nullopt});
        out.push_back({s.label, init(s.body[1]), Polarity::Plain, std::nullopt});
        flow_into(s.body[0], out);
        flow_into(s.body[1], out);
        break;
    case StmtKind::While:
        out.push_back({s.label, init(s.body[0]), Polarity::Underlined, std::nullopt});
        flow_into(s.body[0], out);
        for (Label f : final(s.body[0])) out.push_back({f, s.label, Polarity::Plain, std::nullopt});
        break;
    default:
        break;
    }
}

} // namespace

std::vector<FlowEdge> flow(const Program& p) {
    std::vector<FlowEdge> out;
    flow_into(p.body, out);
    for (Label f : final(p.body)) out.push_back({f, p.stop_label, Polarity::Plain, std::nullopt});
    out.push_back({p.stop_label, p.stop_label, Polarity::Plain, std::nullopt});
    return out;
}

// ---------------------------------------------------------------- printing

namespace {

int precedence(Expr::Op op) {
    using Op = Expr::Op;
    switch (op) {
    case Op::Or: return 1;
    case Op::And: return 2;
    case Op::Eq: case Op::Ne: return 3;
    case Op::Lt: case Op::Le: case Op::Gt: case Op::Ge: return 4;
    case Op::Add: case Op::Sub: return 5;
    case Op::Mul: case Op::Div: case Op::Mod: return 6;
    case Op::Neg: case Op::Not: return 7;
    default: return 8;
    }
}

const char* op_text(Expr::Op op) {
    using Op = Expr::Op;
    switch (op) {
    case Op::Add: return "+";
    case Op::Sub: return "-";
    case Op::Mul: return "*";
    case Op::Div: return "/";
    case Op::Mod: return "%";
    case Op::Eq: return "==";
    case Op::Ne: return "!=";
    case Op::Lt: return "<";
    case Op::Le: return "<=";
    case Op::Gt: return ">";
    case Op::Ge: return ">=";
    case Op::And: return "&&";
    case Op::Or: return "||";
    case Op::Neg: return "-";
    case Op::Not: return "!";
    default: return "?";
    }
}

void print_expr(const Expr& e, std::span<const VarDecl> decls, std::ostream& os) {
    using Op = Expr::Op;
    const int prec = precedence(e.op);
    auto child = [&](const Expr& c, bool right) {
        const int cp = precedence(c.op);
        // comparisons under && / || are bracketed for readability
        bool paren = cp < prec || (right && cp == prec && cp < 7) ||
                     (prec <= 2 && (cp == 3 || cp == 4)) || (c.op == Op::Const && c.value < 0 && prec < 8);
        if (paren) os << '(';
        print_expr(c, decls, os);
        if (paren) os << ')';
    };
    switch (e.op) {
    case Op::Const: os << e.value; return;
    case Op::Var: os << decls[e.var].name; return;
    case Op::Neg:
    case Op::Not:
        os << op_text(e.op);
        child(e.args[0], true);
        return;
    default:
        child(e.args[0], false);
        os << op_text(e.op);
        child(e.args[1], true);
        return;
    }
}

void print_prob(const ProbExpr& p, std::ostream& os) {
    bool first = true;
    if (p.constant != 0.0 || p.terms.empty()) {
        os << format_number(p.constant);
        first = false;
    }
    for (const auto& [name, coef] : p.terms) {
        double c = coef;
        if (!first) {
            os << (c < 0 ? "-" : "+");
            c = std::abs(c);
        } else if (c < 0) {
            os << "-";
            c = -c;
        }
        if (c != 1.0) os << format_number(c) << "*";
        os << "#" << name;
        first = false;
    }
}

bool is_uniform(const Distribution& d) {
    const double p = 1.0 / static_cast<double>(d.support.size());
    return std::all_of(d.support.begin(), d.support.end(), [&](const auto& vp) { return vp.second == p; });
}

class Printer {
public:
    Printer(std::span<const VarDecl> decls, PrintOptions opts, std::ostream& os)
        : decls_(decls), opts_(opts), os_(os) {}

    void stmt(const Stmt& s, int depth) {
        switch (s.kind) {
        case StmtKind::Seq:
            for (std::size_t i = 0; i < s.body.size(); ++i) {
                if (i > 0) {
                    os_ << ";";
                    newline(depth);
                }
                stmt(s.body[i], depth);
            }
            return;
        case StmtKind::Skip:
            os_ << "skip";
            label(s);
            return;
        case StmtKind::Assign:
            os_ << decls_[s.var].name << (opts_.multiline ? " := " : ":=");
            print_expr(s.expr, decls_, os_);
            label(s);
            return;
        case StmtKind::RandomAssign:
            os_ << decls_[s.var].name << (opts_.multiline ? " ?= {" : "?={");
            for (std::size_t i = 0; i < s.dist.support.size(); ++i) {
                if (i > 0) os_ << ",";
                const auto& [v, p] = s.dist.support[i];
                if (is_uniform(s.dist)) os_ << v;
                else os_ << "(" << v << "," << format_number(p) << ")";
            }
            os_ << "}";
            label(s);
            return;
        case StmtKind::Choose:
            os_ << "choose";
            label(s);
            for (std::size_t i = 0; i < s.body.size(); ++i) {
                if (i > 0) {
                    newline(depth);
                    os_ << "or";
                }
                os_ << " ";
                print_prob(s.probs[i], os_);
                os_ << ":";
                newline(depth + 1);
                stmt(s.body[i], depth + 1);
            }
            newline(depth);
            os_ << "ro";
            return;
        case StmtKind::If:
            os_ << "if ";
            print_expr(s.expr, decls_, os_);
            label(s);
            os_ << " then";
            newline(depth + 1);
            stmt(s.body[0], depth + 1);
            newline(depth);
            os_ << "else";
            newline(depth + 1);
            stmt(s.body[1], depth + 1);
            newline(depth);
            os_ << "fi";
            return;
        case StmtKind::While:
            os_ << "while ";
            print_expr(s.expr, decls_, os_);
            label(s);
            os_ << " do";
            newline(depth + 1);
            stmt(s.body[0], depth + 1);
            newline(depth);
            os_ << "od";
            return;
        }
    }

private:
    std::span<const VarDecl> decls_;
    PrintOptions opts_;
    std::ostream& os_;

    void label(const Stmt& s) {
        if (opts_.labels) os_ << " @" << s.label;
    }
    void newline(int depth) {
        if (opts_.multiline) {
            os_ << "\n" << std::string(static_cast<std::size_t>(depth) * 2, ' ');
        } else {
            os_ << " ";
        }
    }
};

} // namespace

std::string to_source(const Expr& e, std::span<const VarDecl> decls) {
    std::ostringstream os;
    print_expr(e, decls, os);
    return os.str();
}

std::string to_source(const Stmt& s, std::span<const VarDecl> decls, PrintOptions opts) {
    std::ostringstream os;
    Printer(decls, opts, os).stmt(s, 0);
    return os.str();
}

std::string to_source(const Program& p, PrintOptions opts) {
    std::ostringstream os;
    for (const auto& d : p.decls) {
        os << "var " << d.name << ":{";
        for (std::size_t i = 0; i < d.domain.size(); ++i) os << (i ? "," : "") << d.domain[i];
        os << "};" << (opts.multiline ? "\n" : " ");
    }
    Printer(p.decls, opts, os).stmt(p.body, 0);
    if (opts.multiline) os << "\n";
    return os.str();
}

} // namespace plos
