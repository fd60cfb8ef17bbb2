#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <tuple>
#include <vector>

namespace plos {

// Entries with magnitude at or below this are not stored.
inline constexpr double kPruneTolerance = 1e-15;
// Default cap on rows*cols of a Kronecker product.
inline constexpr std::size_t kDefaultMaxEntries = 10'000'000;

struct Triplet {
    std::size_t row;
    std::size_t col;
    double value;
};

// Dense row vector. Distributions over configurations are small enough
// (a few hundred entries) that dense storage is the cheaper choice here.
class StateVector {
public:
    StateVector() = default;
    explicit StateVector(std::size_t dim) : data_(dim, 0.0) {}
    explicit StateVector(std::vector<double> data) : data_(std::move(data)) {}

    static StateVector unit(std::size_t dim, std::size_t index);

    std::size_t dim() const { return data_.size(); }
    double operator[](std::size_t i) const { return data_[i]; }
    double& operator[](std::size_t i) { return data_[i]; }
    std::span<const double> values() const { return data_; }

    double sum() const;
    double l1() const;
    std::size_t nonzeros(double tol = kPruneTolerance) const;
    // Nonnegative entries summing to 1.
    bool is_distribution(double tol = 1e-9) const;

    StateVector operator-(const StateVector& o) const;

private:
    std::vector<double> data_;
};

StateVector kron(const StateVector& a, const StateVector& b);

// Immutable compressed-row sparse matrix.
class SparseMatrix {
public:
    SparseMatrix() = default;
    SparseMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), row_ptr_(rows + 1, 0) {}

    // Duplicate coordinates are summed; tiny results are pruned.
    static SparseMatrix from_triplets(std::size_t rows, std::size_t cols, std::vector<Triplet> entries);
    static SparseMatrix from_dense(const std::vector<std::vector<double>>& rows);
    static SparseMatrix identity(std::size_t n);
    static SparseMatrix diagonal(std::span<const double> d);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t nnz() const { return values_.size(); }
    double density() const;

    double at(std::size_t r, std::size_t c) const;
    std::vector<Triplet> triplets() const;
    std::vector<std::vector<double>> to_dense() const;
    std::vector<double> row_sums() const;

    // Row r as (column, value) pairs.
    template <class F>
    void for_each_in_row(std::size_t r, F&& f) const {
        for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) f(col_idx_[k], values_[k]);
    }

    SparseMatrix transpose() const;
    SparseMatrix scaled(double k) const;

    SparseMatrix operator+(const SparseMatrix& o) const;
    SparseMatrix operator-(const SparseMatrix& o) const;
    SparseMatrix operator*(const SparseMatrix& o) const;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<std::size_t> row_ptr_{0};
    std::vector<std::size_t> col_idx_;
    std::vector<double> values_;
};

inline SparseMatrix operator*(double k, const SparseMatrix& m) { return m.scaled(k); }

// Entry ((i-1)k+r, (j-1)l+s) = A_ij * B_rs in 1-based terms.
SparseMatrix kron(const SparseMatrix& a, const SparseMatrix& b, std::size_t max_entries = kDefaultMaxEntries);
SparseMatrix kron_all(std::span<const SparseMatrix> factors, std::size_t max_entries = kDefaultMaxEntries);

// n x n matrix with a single 1 at (i, j); 1-based indices.
SparseMatrix matrix_unit(std::size_t i, std::size_t j, std::size_t n);

// Moore-Penrose pseudo-inverse of a full-column-rank matrix, (A^t A)^-1 A^t.
SparseMatrix pseudo_inverse(const SparseMatrix& a);

double frobenius(const SparseMatrix& a);
double l1(const SparseMatrix& a);
inline double l1(const StateVector& v) { return v.l1(); }
// Largest |a_ij - b_ij|.
double max_abs_diff(const SparseMatrix& a, const SparseMatrix& b);

StateVector vec_mat_mul(const StateVector& x, const SparseMatrix& a);

} // namespace plos
