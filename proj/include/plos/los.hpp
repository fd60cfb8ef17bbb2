#pragma once

// Compilation of programs into their linear operator semantics: the
// generator matrix T(P) of a discrete time Markov chain over
// (state, label) configurations.

#include "plos/lang.hpp"
#include "plos/linalg.hpp"

#include <span>
#include <string>
#include <vector>

namespace plos {

// Joint valuations enumerated lexicographically in declaration order, each
// variable following its declared domain order. Indices are 0-based here and
// printed 1-based.
class StateSpace {
public:
    StateSpace() = default;
    explicit StateSpace(std::vector<VarDecl> vars);

    const std::vector<VarDecl>& vars() const { return vars_; }
    std::size_t var_count() const { return vars_.size(); }
    std::size_t size() const { return size_; }
    std::size_t domain_size(std::size_t var) const { return vars_[var].domain.size(); }

    std::size_t index(std::span<const Value> valuation) const;
    Valuation valuation(std::size_t index) const;
    // Position of v within the domain of var.
    std::size_t value_index(std::size_t var, Value v) const;
    // "d=1,g=0,o=2"
    std::string describe(std::size_t index) const;
    // Parses "d=1,g=0,o=2"; every variable must be given.
    Valuation parse_valuation(const std::string& text) const;

private:
    std::vector<VarDecl> vars_;
    std::vector<std::size_t> strides_;
    std::size_t size_ = 0;
};

StateSpace enumerate(std::span<const VarDecl> decls);

// U(x_k <- c) as I ⊗ .. ⊗ U(c) ⊗ .. ⊗ I.
SparseMatrix update_const(std::size_t var, Value c, const StateSpace& space);
// Diagonal projection P(b).
SparseMatrix test(const Expr& cond, const StateSpace& space);
// U(x_k <- e) = sum_c P(e = c) U(x_k <- c).
SparseMatrix update_expr(std::size_t var, const Expr& e, const StateSpace& space);

struct BlockSemantics {
    SparseMatrix positive;   // [[B]]; P(b = false) for tests
    SparseMatrix negative;   // underlined [[B]]; P(b = true) for tests, I otherwise
};

// Atomic blocks and tests only. Choose sites carry identity semantics.
BlockSemantics block_semantics(const Stmt& block, const StateSpace& space);

struct LosOperator {
    SparseMatrix T;          // (N*L) x (N*L); the label is the last tensor factor
    StateSpace space;
    std::size_t labels = 0;  // L, including the stop label

    std::size_t dim() const { return T.rows(); }
    // 0-based configuration index of (state, label), label 1-based.
    std::size_t config(std::size_t state, Label label) const { return state * labels + (label - 1); }
    // "d=1,g=0,o=2 @6"
    std::string describe(std::size_t config_index) const;
};

struct AssembleOptions {
    Bindings bindings;                       // values for #parameters
    std::size_t max_entries = kDefaultMaxEntries;
    double prob_tolerance = 1e-9;
};

LosOperator assemble(const Program& program, const AssembleOptions& opts = {});

// Largest |row sum - 1|.
double stochasticity_defect(const SparseMatrix& t);

} // namespace plos
