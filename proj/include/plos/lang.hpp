#pragma once

// Labelled probabilistic while-language: AST, parser, flow relation and
// pretty-printer.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace plos {

using Value = std::int64_t;
using Label = std::size_t;
using Valuation = std::vector<Value>;
using Bindings = std::map<std::string, double>;

struct VarDecl {
    std::string name;
    std::vector<Value> domain;

    bool contains(Value v) const;
};

// Integer/boolean expression. Booleans are 0/1; `%` is the non-negative
// modulus for positive divisors.
struct Expr {
    enum class Op {
        Const, Var,
        Add, Sub, Mul, Div, Mod, Neg,
        Eq, Ne, Lt, Le, Gt, Ge,
        And, Or, Not,
    };

    Op op = Op::Const;
    Value value = 0;       // Const
    std::size_t var = 0;   // Var: index into the declaration list
    std::vector<Expr> args;

    static Expr constant(Value v);
    static Expr variable(std::size_t index);
    static Expr unary(Op op, Expr a);
    static Expr binary(Op op, Expr a, Expr b);

    Value eval(std::span<const Value> state) const;
    bool holds(std::span<const Value> state) const { return eval(state) != 0; }

    // Variable indices read by the expression.
    void collect_vars(std::set<std::size_t>& out) const;
};

// Branch weight of a choose: constant + sum(coefficient * #param).
struct ProbExpr {
    double constant = 0.0;
    std::vector<std::pair<std::string, double>> terms;

    static ProbExpr literal(double p) { return ProbExpr{p, {}}; }
    static ProbExpr parameter(std::string name) { return ProbExpr{0.0, {{std::move(name), 1.0}}}; }

    bool is_literal() const { return terms.empty(); }
    // A bare `#name` with no offset or scaling.
    std::optional<std::string> bare_parameter() const;
    double eval(const Bindings& bindings) const;
};

struct Distribution {
    std::vector<std::pair<Value, double>> support;

    static Distribution uniform(std::span<const Value> values);
};

enum class StmtKind { Skip, Assign, RandomAssign, Seq, Choose, If, While };

struct Stmt {
    StmtKind kind = StmtKind::Skip;
    Label label = 0;               // every node except Seq
    std::size_t var = 0;           // Assign, RandomAssign
    Expr expr;                     // Assign right-hand side; If/While condition
    Distribution dist;             // RandomAssign
    std::vector<ProbExpr> probs;   // Choose, one per branch
    // Seq: parts; Choose: branches; If: {then, else}; While: {body}.
    std::vector<Stmt> body;

    bool is_atomic() const {
        return kind == StmtKind::Skip || kind == StmtKind::Assign || kind == StmtKind::RandomAssign;
    }
    bool is_test() const { return kind == StmtKind::If || kind == StmtKind::While; }
};

struct Program {
    std::vector<VarDecl> decls;
    Stmt body;
    Label init_label = 1;
    Label stop_label = 0;   // virtual final label, max body label + 1

    // Labels 1..stop_label.
    std::size_t label_count() const { return stop_label; }
    std::size_t var_index(std::string_view name) const;
    // Named choose parameters in order of first appearance.
    std::vector<std::string> parameters() const;
    // Labelled node for a label; nullptr for the stop label.
    const Stmt* block(Label l) const;
};

enum class Polarity { Plain, Underlined };

struct FlowEdge {
    Label from = 0;
    Label to = 0;
    Polarity polarity = Polarity::Plain;
    std::optional<ProbExpr> weight;   // choose edges only

    bool operator==(const FlowEdge& o) const {
        return from == o.from && to == o.to && polarity == o.polarity;
    }
};

Program parse(std::string_view source);
// Parses an expression over the given declarations (used by abstraction specs).
Expr parse_expr(std::string_view text, std::span<const VarDecl> decls);
// Parses one statement over the given declarations; labels are auto-assigned from 1.
Stmt parse_stmt(std::string_view text, std::span<const VarDecl> decls);

Label init(const Stmt& s);
std::vector<Label> final(const Stmt& s);
inline Label init(const Program& p) { return init(p.body); }
inline std::vector<Label> final(const Program& p) { return final(p.body); }

// Forward flow of the body, the edges from its final labels into the stop
// label, and the stop self-loop.
std::vector<FlowEdge> flow(const Program& p);

struct PrintOptions {
    bool labels = true;
    bool multiline = true;
};

std::string to_source(const Expr& e, std::span<const VarDecl> decls);
std::string to_source(const Stmt& s, std::span<const VarDecl> decls, PrintOptions opts = {});
std::string to_source(const Program& p, PrintOptions opts = {});

std::string format_number(double v);

} // namespace plos
