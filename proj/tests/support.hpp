#pragma once

// Shared test helpers. The dense routines here are deliberately written
// from scratch (or on Eigen's SVD) so they can serve as oracles for the
// sparse library code.

#include "plos/lang.hpp"
#include "plos/linalg.hpp"

#include <Eigen/Dense>

#include <fstream>
#include <random>
#include <sstream>
#include <string>

namespace testing {

inline std::string program_path(const std::string& name) { return std::string(PLOS_PROGRAMS_DIR) + "/" + name; }

inline std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

inline plos::Program load(const std::string& name) { return plos::parse(slurp(program_path(name))); }

inline const std::vector<std::string>& corpus() {
    static const std::vector<std::string> names = {"monty_ht.pw", "monty_hw.pw", "monty_hp.pw", "coin_flip.pw",
                                                   "dice_sum.pw", "geometric.pw", "random_walk.pw", "xor_swap.pw"};
    return names;
}

inline Eigen::MatrixXd dense(const plos::SparseMatrix& m) {
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols()));
    for (const auto& t : m.triplets()) d(static_cast<Eigen::Index>(t.row), static_cast<Eigen::Index>(t.col)) = t.value;
    return d;
}

inline plos::SparseMatrix sparse(const Eigen::MatrixXd& d) {
    std::vector<plos::Triplet> t;
    for (Eigen::Index i = 0; i < d.rows(); ++i)
        for (Eigen::Index j = 0; j < d.cols(); ++j)
            if (d(i, j) != 0.0) t.push_back({static_cast<std::size_t>(i), static_cast<std::size_t>(j), d(i, j)});
    return plos::SparseMatrix::from_triplets(static_cast<std::size_t>(d.rows()), static_cast<std::size_t>(d.cols()),
                                             std::move(t));
}

// Kronecker product by its index definition.
inline Eigen::MatrixXd dense_kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    Eigen::MatrixXd k(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            for (Eigen::Index r = 0; r < b.rows(); ++r)
                for (Eigen::Index s = 0; s < b.cols(); ++s) k(i * b.rows() + r, j * b.cols() + s) = a(i, j) * b(r, s);
    return k;
}

// Pseudo-inverse through the SVD, independent of the normal equations.
inline Eigen::MatrixXd svd_pinv(const Eigen::MatrixXd& a) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto& s = svd.singularValues();
    Eigen::MatrixXd sinv = Eigen::MatrixXd::Zero(a.cols(), a.rows());
    for (Eigen::Index i = 0; i < s.size(); ++i)
        if (s(i) > 1e-12 * s(0)) sinv(i, i) = 1.0 / s(i);
    return svd.matrixV() * sinv * svd.matrixU().transpose();
}

// Random 0/1 classification with every class used.
inline Eigen::MatrixXd random_classification(std::mt19937_64& rng, int n, int k) {
    std::vector<int> cls(static_cast<std::size_t>(n));
    for (int i = 0; i < k; ++i) cls[static_cast<std::size_t>(i)] = i;
    for (int i = k; i < n; ++i) cls[static_cast<std::size_t>(i)] = static_cast<int>(rng() % static_cast<unsigned>(k));
    std::shuffle(cls.begin(), cls.end(), rng);
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, k);
    for (int i = 0; i < n; ++i) a(i, cls[static_cast<std::size_t>(i)]) = 1.0;
    return a;
}

inline Eigen::MatrixXd random_dense(std::mt19937_64& rng, int r, int c, double zero_fraction = 0.5) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    Eigen::MatrixXd m(r, c);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) m(i, j) = coin(rng) < zero_fraction ? 0.0 : u(rng);
    return m;
}

} // namespace testing
