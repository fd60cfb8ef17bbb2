#include "plos/linalg.hpp"

#include "plos/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace plos {

StateVector StateVector::unit(std::size_t dim, std::size_t index) {
    if (index >= dim) throw InputError("unit vector index out of range");
    StateVector v(dim);
    v[index] = 1.0;
    return v;
}

double StateVector::sum() const {
    return std::accumulate(data_.begin(), data_.end(), 0.0);
}

double StateVector::l1() const {
    double s = 0.0;
    for (double x : data_) s += std::abs(x);
    return s;
}

std::size_t StateVector::nonzeros(double tol) const {
    return static_cast<std::size_t>(
        std::count_if(data_.begin(), data_.end(), [tol](double x) { return std::abs(x) > tol; }));
}

bool StateVector::is_distribution(double tol) const {
    for (double x : data_)
        if (x < -tol) return false;
    return std::abs(sum() - 1.0) <= tol;
}

StateVector StateVector::operator-(const StateVector& o) const {
    if (dim() != o.dim()) throw InputError("vector dimension mismatch");
    StateVector r(dim());
    for (std::size_t i = 0; i < dim(); ++i) r[i] = data_[i] - o.data_[i];
    return r;
}

StateVector kron(const StateVector& a, const StateVector& b) {
    StateVector r(a.dim() * b.dim());
    for (std::size_t i = 0; i < a.dim(); ++i)
        for (std::size_t j = 0; j < b.dim(); ++j) r[i * b.dim() + j] = a[i] * b[j];
    return r;
}

SparseMatrix SparseMatrix::from_triplets(std::size_t rows, std::size_t cols, std::vector<Triplet> entries) {
    for (const auto& t : entries)
        if (t.row >= rows || t.col >= cols) throw InputError("matrix entry index out of bounds");
    std::sort(entries.begin(), entries.end(), [](const Triplet& a, const Triplet& b) {
        return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    SparseMatrix m(rows, cols);
    std::size_t k = 0;
    while (k < entries.size()) {
        const std::size_t r = entries[k].row;
        const std::size_t c = entries[k].col;
        double v = 0.0;
        while (k < entries.size() && entries[k].row == r && entries[k].col == c) v += entries[k++].value;
        if (std::abs(v) > kPruneTolerance) {
            m.col_idx_.push_back(c);
            m.values_.push_back(v);
            ++m.row_ptr_[r + 1];
        }
    }
    std::partial_sum(m.row_ptr_.begin(), m.row_ptr_.end(), m.row_ptr_.begin());
    return m;
}

SparseMatrix SparseMatrix::from_dense(const std::vector<std::vector<double>>& rows) {
    const std::size_t n = rows.size();
    const std::size_t m = n ? rows.front().size() : 0;
    std::vector<Triplet> t;
    for (std::size_t i = 0; i < n; ++i) {
        if (rows[i].size() != m) throw InputError("ragged dense matrix");
        for (std::size_t j = 0; j < m; ++j)
            if (rows[i][j] != 0.0) t.push_back({i, j, rows[i][j]});
    }
    return from_triplets(n, m, std::move(t));
}

SparseMatrix SparseMatrix::identity(std::size_t n) {
    std::vector<Triplet> t;
    t.reserve(n);
    for (std::size_t i = 0; i < n; ++i) t.push_back({i, i, 1.0});
    return from_triplets(n, n, std::move(t));
}

SparseMatrix SparseMatrix::diagonal(std::span<const double> d) {
    std::vector<Triplet> t;
    for (std::size_t i = 0; i < d.size(); ++i) t.push_back({i, i, d[i]});
    return from_triplets(d.size(), d.size(), std::move(t));
}

double SparseMatrix::density() const {
    if (rows_ == 0 || cols_ == 0) return 0.0;
    return static_cast<double>(nnz()) / (static_cast<double>(rows_) * static_cast<double>(cols_));
}

double SparseMatrix::at(std::size_t r, std::size_t c) const {
    if (r >= rows_ || c >= cols_) throw InputError("matrix index out of bounds");
    auto first = col_idx_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[r]);
    auto last = col_idx_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[r + 1]);
    auto it = std::lower_bound(first, last, c);
    if (it == last || *it != c) return 0.0;
    return values_[static_cast<std::size_t>(it - col_idx_.begin())];
}

std::vector<Triplet> SparseMatrix::triplets() const {
    std::vector<Triplet> out;
    out.reserve(nnz());
    for (std::size_t r = 0; r < rows_; ++r)
        for_each_in_row(r, [&](std::size_t c, double v) { out.push_back({r, c, v}); });
    return out;
}

std::vector<std::vector<double>> SparseMatrix::to_dense() const {
    std::vector<std::vector<double>> d(rows_, std::vector<double>(cols_, 0.0));
    for (std::size_t r = 0; r < rows_; ++r)
        for_each_in_row(r, [&](std::size_t c, double v) { d[r][c] = v; });
    return d;
}

std::vector<double> SparseMatrix::row_sums() const {
    std::vector<double> s(rows_, 0.0);
    for (std::size_t r = 0; r < rows_; ++r)
        for_each_in_row(r, [&](std::size_t, double v) { s[r] += v; });
    return s;
}

SparseMatrix SparseMatrix::transpose() const {
    std::vector<Triplet> t;
    t.reserve(nnz());
    for (const auto& e : triplets()) t.push_back({e.col, e.row, e.value});
    return from_triplets(cols_, rows_, std::move(t));
}

SparseMatrix SparseMatrix::scaled(double k) const {
    std::vector<Triplet> t = triplets();
    for (auto& e : t) e.value *= k;
    return from_triplets(rows_, cols_, std::move(t));
}

SparseMatrix SparseMatrix::operator+(const SparseMatrix& o) const {
    if (rows_ != o.rows_ || cols_ != o.cols_) throw InputError("matrix dimension mismatch in addition");
    std::vector<Triplet> t = triplets();
    const auto rhs = o.triplets();
    t.insert(t.end(), rhs.begin(), rhs.end());
    return from_triplets(rows_, cols_, std::move(t));
}

SparseMatrix SparseMatrix::operator-(const SparseMatrix& o) const {
    return *this + o.scaled(-1.0);
}

SparseMatrix SparseMatrix::operator*(const SparseMatrix& o) const {
    if (cols_ != o.rows_) throw InputError("matrix dimension mismatch in product");
    std::vector<Triplet> t;
    std::vector<double> acc(o.cols_, 0.0);
    std::vector<char> touched(o.cols_, 0);
    std::vector<std::size_t> cols;
    for (std::size_t r = 0; r < rows_; ++r) {
        cols.clear();
        for_each_in_row(r, [&](std::size_t k, double a) {
            o.for_each_in_row(k, [&](std::size_t c, double b) {
                if (!touched[c]) {
                    touched[c] = 1;
                    cols.push_back(c);
                }
                acc[c] += a * b;
            });
        });
        for (std::size_t c : cols) {
            t.push_back({r, c, acc[c]});
            acc[c] = 0.0;
            touched[c] = 0;
        }
    }
    return from_triplets(rows_, o.cols_, std::move(t));
}

SparseMatrix kron(const SparseMatrix& a, const SparseMatrix& b, std::size_t max_entries) {
    const std::size_t rows = a.rows() * b.rows();
    const std::size_t cols = a.cols() * b.cols();
    if (rows != 0 && cols > max_entries / rows)
        throw InputError("state-space blow-up: kron result " + std::to_string(rows) + "x" +
                         std::to_string(cols) + " exceeds " + std::to_string(max_entries) + " entries");
    std::vector<Triplet> t;
    t.reserve(a.nnz() * b.nnz());
    const auto bt = b.triplets();
    for (const auto& ea : a.triplets())
        for (const auto& eb : bt)
            t.push_back({ea.row * b.rows() + eb.row, ea.col * b.cols() + eb.col, ea.value * eb.value});
    return SparseMatrix::from_triplets(rows, cols, std::move(t));
}

SparseMatrix kron_all(std::span<const SparseMatrix> factors, std::size_t max_entries) {
    if (factors.empty()) return SparseMatrix::identity(1);
    SparseMatrix acc = factors.front();
    for (std::size_t i = 1; i < factors.size(); ++i) acc = kron(acc, factors[i], max_entries);
    return acc;
}

SparseMatrix matrix_unit(std::size_t i, std::size_t j, std::size_t n) {
    if (i < 1 || j < 1 || i > n || j > n)
        throw InputError("matrix unit (" + std::to_string(i) + "," + std::to_string(j) + ") out of range for n=" +
                         std::to_string(n));
    return SparseMatrix::from_triplets(n, n, {{i - 1, j - 1, 1.0}});
}

SparseMatrix pseudo_inverse(const SparseMatrix& a) {
    const auto n = static_cast<Eigen::Index>(a.cols());
    // Gram matrix A^t A is only cols x cols, small for every abstraction in use.
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(n, n);
    const SparseMatrix at = a.transpose();
    for (std::size_t c = 0; c < a.cols(); ++c) {
        at.for_each_in_row(c, [&](std::size_t r, double v) {
            a.for_each_in_row(r, [&](std::size_t c2, double w) {
                gram(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(c2)) += v * w;
            });
        });
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(gram);
    lu.setThreshold(1e-12);
    if (n == 0 || lu.rank() < n) throw InputError("abstraction not full column rank");
    const Eigen::MatrixXd inv = lu.inverse();

    std::vector<Triplet> t;
    for (std::size_t c = 0; c < a.cols(); ++c) {
        for (Eigen::Index k = 0; k < n; ++k) {
            const double g = inv(static_cast<Eigen::Index>(c), k);
            if (g == 0.0) continue;
            at.for_each_in_row(static_cast<std::size_t>(k),
                               [&](std::size_t r, double v) { t.push_back({c, r, g * v}); });
        }
    }
    return SparseMatrix::from_triplets(a.cols(), a.rows(), std::move(t));
}

double frobenius(const SparseMatrix& a) {
    double s = 0.0;
    for (const auto& e : a.triplets()) s += e.value * e.value;
    return std::sqrt(s);
}

double l1(const SparseMatrix& a) {
    double s = 0.0;
    for (const auto& e : a.triplets()) s += std::abs(e.value);
    return s;
}

double max_abs_diff(const SparseMatrix& a, const SparseMatrix& b) {
    double m = 0.0;
    for (const auto& e : (a - b).triplets()) m = std::max(m, std::abs(e.value));
    return m;
}

StateVector vec_mat_mul(const StateVector& x, const SparseMatrix& a) {
    if (x.dim() != a.rows())
        throw InputError("dimension mismatch: vector " + std::to_string(x.dim()) + " times matrix " +
                         std::to_string(a.rows()) + "x" + std::to_string(a.cols()));
    StateVector y(a.cols());
    for (std::size_t r = 0; r < a.rows(); ++r) {
        const double xr = x[r];
        if (xr == 0.0) continue;
        a.for_each_in_row(r, [&](std::size_t c, double v) { y[c] += xr * v; });
    }
    return y;
}

} // namespace plos
