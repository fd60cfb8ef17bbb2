#pragma once

// Fixed-point iteration of LOS operators and probabilistic abstract
// interpretation: abstractions A = A_1 ⊗ .. ⊗ A_k with concretisation A†.

#include "plos/linalg.hpp"
#include "plos/los.hpp"

#include <string>
#include <vector>

namespace plos {

// n x 1 column of ones; its pseudo-inverse is the uniform row 1/n.
SparseMatrix forgetful(std::size_t n);
// 0/1 classification: row i has its 1 in the column of the class containing i.
SparseMatrix classification(std::size_t n, const std::vector<std::size_t>& class_of, std::size_t classes);

class Abstraction {
public:
    Abstraction() = default;
    explicit Abstraction(std::vector<SparseMatrix> factors);

    const std::vector<SparseMatrix>& factors() const { return factors_; }
    const SparseMatrix& matrix() const { return a_; }
    // Computed factor-wise: (A_1 ⊗ .. ⊗ A_k)† = A_1† ⊗ .. ⊗ A_k†.
    const SparseMatrix& pseudo_inverse() const { return adag_; }
    std::size_t concrete_dim() const { return a_.rows(); }
    std::size_t abstract_dim() const { return a_.cols(); }

private:
    std::vector<SparseMatrix> factors_;
    SparseMatrix a_;
    SparseMatrix adag_;
};

// Builds an abstraction from a textual spec, e.g.
//   "d,g:cases[d==g, d!=g]; o:forget; @:forget"
// Items are `vars:kind` with kind one of
//   id | forget | classes[{0,2},{1}] | cases[expr, expr, ...]
// Variable groups must follow declaration order; unmentioned variables are
// kept (id). `@` names the label factor, forgotten by default; pass
// labels == 0 for an abstraction over states only.
Abstraction parse_abstraction(const std::string& spec, const StateSpace& space, std::size_t labels);

struct AnalysisResult {
    StateVector terminal;
    std::size_t steps = 0;
    double residual = 0.0;
};

struct IterateOptions {
    double eps = 1e-12;
    std::size_t max_steps = 1'000'000;
};

// Power iteration x <- x T until |x T - x|_1 < eps.
AnalysisResult iterate(const SparseMatrix& t, const StateVector& x0, const IterateOptions& opts = {});

// s0 ⊗ e_init over N*L configurations.
StateVector initial_config(const LosOperator& los, const StateVector& s0, Label init_label);
// Point distribution at a valuation.
StateVector point_state(const StateSpace& space, std::span<const Value> valuation);

// Sub-distribution of mass sitting at label l (1-based), not renormalised.
StateVector extract_label(const StateVector& x, Label l, std::size_t labels);
StateVector normalized(const StateVector& x);

StateVector abstract_state(const StateVector& x, const Abstraction& a);
// A† T A
SparseMatrix abstract_operator(const SparseMatrix& t, const Abstraction& a);

} // namespace plos
