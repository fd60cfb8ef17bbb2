#pragma once

// Program synthesis from parametric sketches: objectives over the LOS of a
// sketch instance and their minimisation over choice probabilities.

#include "plos/analysis.hpp"
#include "plos/lang.hpp"
#include "plos/linalg.hpp"
#include "plos/los.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace plos {

// Row-major steps x blocks matrix of choice probabilities.
class ParamMatrix {
public:
    ParamMatrix() = default;
    ParamMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    ParamMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);
    static ParamMatrix from_rows(const std::vector<std::vector<double>>& rows);
    // One-hot rows; block numbers are 1-based.
    static ParamMatrix vertex(std::span<const std::size_t> blocks, std::size_t cols);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }
    std::vector<double>& flat() { return data_; }
    const std::vector<double>& flat() const { return data_; }

    // Every row on the probability simplex within tol.
    bool feasible(double tol = 1e-9) const;
    // 1-based index of the largest entry of each row.
    std::vector<std::size_t> argmax_rows() const;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// Euclidean projection onto {x : x >= 0, sum x = 1}.
std::vector<double> project_simplex(std::span<const double> v);

// A sketch without control flow: `steps` choice sites, each a mixture
// T_i = sum_j lambda_ij F_j over a shared block library, run in sequence.
struct FlowFreeSketch {
    StateSpace space;
    std::vector<Stmt> blocks;
    std::vector<SparseMatrix> ops;   // F_j = [[block j]]
    std::size_t steps = 0;

    static FlowFreeSketch build(std::vector<VarDecl> vars, const std::vector<std::string>& block_sources,
                                std::size_t steps);
    std::size_t library_size() const { return blocks.size(); }
};

// T(lambda) = T_1 T_2 ... T_k.
SparseMatrix instantiate(const FlowFreeSketch& sketch, const ParamMatrix& lambda);

// Per-block indicators of reading / writing a variable (diagonals of P_r, P_w).
struct AccessDiagonals {
    std::vector<double> reads;
    std::vector<double> writes;
};
AccessDiagonals access_diagonals(const FlowFreeSketch& sketch, const std::string& var);

enum class NormKind { Frobenius, Spectral };

double matrix_norm(const SparseMatrix& m, NormKind kind);

struct OperatorObjective {
    SparseMatrix target;       // S, on the abstract space
    Abstraction abstraction;   // A
    double rho = 0.0;
    double omega = 0.0;
    std::vector<double> read_diag;    // P_r
    std::vector<double> write_diag;   // P_w
    NormKind norm = NormKind::Frobenius;
};

// |A† T A - S|
double phi_distance(const SparseMatrix& t, const OperatorObjective& obj);
// rho * sum_ij lambda_ij (P_r)_jj + omega * sum_ij lambda_ij (P_w)_jj
double penalty(const ParamMatrix& lambda, std::span<const double> read_diag, std::span<const double> write_diag,
               double rho, double omega);
double phi(const FlowFreeSketch& sketch, const OperatorObjective& obj, const ParamMatrix& lambda);

// Feasible region: a product of simplices and [0,1] boxes over a flat vector.
struct ParameterLayout {
    struct Group {
        bool simplex = true;
        std::vector<std::size_t> indices;
    };
    std::size_t size = 0;
    std::vector<Group> groups;

    static ParameterLayout rows(std::size_t rows, std::size_t cols);
    void project(std::vector<double>& x) const;
    bool feasible(std::span<const double> x, double tol = 1e-9) const;
    std::vector<double> random_point(std::uint64_t seed) const;
};

using ObjectiveFn = std::function<double(std::span<const double>)>;

std::vector<double> gradient_forward(const ObjectiveFn& f, std::span<const double> x, double h = 1e-7);
std::vector<double> gradient_central(const ObjectiveFn& f, std::span<const double> x, double h = 1e-5);

struct OptConfig {
    std::size_t max_iter = 500;        // per start
    double tol = 1e-6;                 // success threshold on the minimised value
    std::size_t restarts = 20;         // extra seeded random starts
    std::uint64_t seed = 0;
    bool stop_at_tol = true;           // false: no target value, run every start
    double initial_step = 1.0;         // first trial step; also the entry step from an infeasible start
    double step_growth = 4.0;          // next trial step = growth * last accepted step
};

struct TraceEntry {
    std::size_t start = 0;
    std::size_t iteration = 0;
    double value = 0.0;
};

struct OptResult {
    std::vector<double> x;
    double value = 0.0;
    std::size_t iterations = 0;     // over all starts
    std::size_t restarts_used = 0;
    bool converged = false;
    std::vector<TraceEntry> trace;  // accepted iterates, every start
};

// Projected gradient descent with forward-difference gradients, Armijo
// backtracking along the projection arc and seeded multi-start.
OptResult minimize(const ObjectiveFn& f, const ParameterLayout& layout, std::vector<double> x0,
                   const OptConfig& cfg);

struct SketchResult {
    ParamMatrix lambda;
    OptResult opt;
};

SketchResult optimize(const FlowFreeSketch& sketch, const OperatorObjective& obj, const ParamMatrix& lambda0,
                      const OptConfig& cfg);

// Rows with a dominant block become that block, others stay a choose over
// the blocks weighted at least min_weight (renormalised).
Program extract_program(const FlowFreeSketch& sketch, const ParamMatrix& lambda, double threshold = 0.99,
                        double min_weight = 0.01);

// ---- sketches embedded in programs via #parameters

struct ParametricProgram {
    Program program;
    std::vector<std::string> names;   // parameter order in the flat vector
    ParameterLayout layout;

    // Choose sites whose branches are distinct bare parameters form simplex
    // groups; every other parameter ranges over [0,1].
    static ParametricProgram from(Program p);
    Bindings bind(std::span<const double> x) const;
};

// Phi = s0 · lim T^n · A · e_coordinate, read off an abstract terminal vector.
struct TerminalObjective {
    StateVector s0;               // over states
    Abstraction abstraction;      // over states ⊗ labels
    std::size_t coordinate = 0;   // 0-based abstract coordinate
    bool maximize = true;
    IterateOptions iterate;
};

double terminal_value(const ParametricProgram& sketch, const TerminalObjective& obj, std::span<const double> x);

OptResult optimize(const ParametricProgram& sketch, const TerminalObjective& obj, std::vector<double> x0,
                   const OptConfig& cfg);

struct SweepPoint {
    double p;
    double value;
};

std::vector<SweepPoint> sweep(const ParametricProgram& sketch, const TerminalObjective& obj,
                              std::span<const double> grid);

// "a:step:b" or "v1,v2,..."
std::vector<double> parse_grid(const std::string& text);

} // namespace plos
