#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "plos/error.hpp"
#include "plos/linalg.hpp"
#include "plos/matrix_io.hpp"
#include "support.hpp"

#include <random>
#include <sstream>

using namespace plos;
using testing::dense;
using testing::sparse;

TEST_CASE("from_triplets sums duplicates and prunes zeros") {
    const auto m = SparseMatrix::from_triplets(2, 2, {{0, 0, 1.0}, {0, 0, 2.0}, {1, 1, 1.0}, {1, 1, -1.0}});
    CHECK(m.at(0, 0) == 3.0);
    CHECK(m.at(1, 1) == 0.0);
    CHECK(m.nnz() == 1);
    CHECK(m.density() == doctest::Approx(0.25));
}

TEST_CASE("dense round trip, transpose and products") {
    std::mt19937_64 rng(1);
    for (int k = 0; k < 20; ++k) {
        const auto a = testing::random_dense(rng, 4, 5);
        const auto b = testing::random_dense(rng, 5, 3);
        const auto c = testing::random_dense(rng, 4, 5);
        CHECK((dense(sparse(a)) - a).cwiseAbs().maxCoeff() == 0.0);
        CHECK((dense(sparse(a).transpose()) - a.transpose()).cwiseAbs().maxCoeff() == 0.0);
        CHECK((dense(sparse(a) * sparse(b)) - a * b).cwiseAbs().maxCoeff() < 1e-14);
        CHECK((dense(sparse(a) + sparse(c)) - (a + c)).cwiseAbs().maxCoeff() < 1e-15);
        CHECK((dense(sparse(a) - sparse(c)) - (a - c)).cwiseAbs().maxCoeff() < 1e-15);
        CHECK((dense(2.5 * sparse(a)) - 2.5 * a).cwiseAbs().maxCoeff() < 1e-15);
    }
}

TEST_CASE("kron by index definition") {
    const auto a = SparseMatrix::from_dense({{1, 2}, {3, 4}});
    const auto b = SparseMatrix::from_dense({{0, 5}, {6, 7}});
    const auto k = kron(a, b);
    CHECK(k.rows() == 4);
    CHECK(k.cols() == 4);
    // 1-based ((i-1)k+r, (j-1)l+s) = a_ij b_rs
    CHECK(k.at(0, 1) == 5.0);
    CHECK(k.at(1, 0) == 6.0);
    CHECK(k.at(2, 3) == 4.0 * 5.0);
    CHECK(k.at(3, 2) == 4.0 * 6.0);
    CHECK(k.at(1, 3) == 2.0 * 7.0);
    CHECK((dense(k) - testing::dense_kron(dense(a), dense(b))).cwiseAbs().maxCoeff() == 0.0);

    const auto i2 = SparseMatrix::identity(2);
    CHECK(max_abs_diff(kron(i2, SparseMatrix::identity(3)), SparseMatrix::identity(6)) == 0.0);
}

TEST_CASE("kron is associative and satisfies the mixed product rule") {
    std::mt19937_64 rng(2);
    for (int k = 0; k < 30; ++k) {
        const auto a = testing::random_dense(rng, 2, 3);
        const auto b = testing::random_dense(rng, 3, 2);
        const auto c = testing::random_dense(rng, 2, 2);
        const auto d = testing::random_dense(rng, 3, 3);
        const auto sa = sparse(a), sb = sparse(b), sc = sparse(c), sd = sparse(d);
        CHECK(max_abs_diff(kron(kron(sa, sb), sc), kron(sa, kron(sb, sc))) < 1e-12);
        // (A⊗B)(C⊗D) = AC ⊗ BD with A:2x3, C:3x2 ...
        const auto c2 = sparse(testing::random_dense(rng, 3, 2));
        const auto d2 = sparse(testing::random_dense(rng, 2, 3));
        CHECK(max_abs_diff(kron(sa, sb) * kron(c2, d2), kron(sa * c2, sb * d2)) < 1e-12);
        // bilinearity
        CHECK(max_abs_diff(kron(sc + sc, sd), kron(sc, sd) + kron(sc, sd)) < 1e-12);
        const std::vector<SparseMatrix> fs = {sa, sb, sc};
        CHECK(max_abs_diff(kron_all(fs), kron(kron(sa, sb), sc)) == 0.0);
    }
}

TEST_CASE("kron refuses state-space blow-up") {
    const auto big = SparseMatrix::identity(1000);
    CHECK_THROWS_AS(kron(big, big, 1000), InputError);
    try {
        kron(big, big, 1000);
    } catch (const InputError& e) {
        CHECK(std::string(e.what()).find("state-space blow-up") != std::string::npos);
    }
}

TEST_CASE("matrix_unit") {
    const auto e = matrix_unit(2, 3, 3);
    CHECK(e.nnz() == 1);
    CHECK(e.at(1, 2) == 1.0);
    CHECK_THROWS_AS(matrix_unit(0, 1, 3), InputError);
    CHECK_THROWS_AS(matrix_unit(1, 4, 3), InputError);
}

TEST_CASE("pseudo-inverse of small matrices") {
    const auto ones = SparseMatrix::from_dense({{1}, {1}, {1}});
    const auto p = pseudo_inverse(ones);
    CHECK(p.rows() == 1);
    CHECK(p.cols() == 3);
    for (std::size_t j = 0; j < 3; ++j) CHECK(p.at(0, j) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

    CHECK(max_abs_diff(pseudo_inverse(SparseMatrix::identity(4)), SparseMatrix::identity(4)) < 1e-15);
    CHECK(max_abs_diff(pseudo_inverse(SparseMatrix::from_dense({{2.0}})), SparseMatrix::from_dense({{0.5}})) < 1e-15);

    CHECK_THROWS_WITH_AS(pseudo_inverse(SparseMatrix::from_dense({{1, 1}, {1, 1}})),
                         "abstraction not full column rank", InputError);
}

TEST_CASE("pseudo-inverse: Penrose conditions and SVD oracle") {
    std::mt19937_64 rng(3);
    int tried = 0;
    while (tried < 100) {
        const int r = 1 + static_cast<int>(rng() % 8);
        const int c = 1 + static_cast<int>(rng() % static_cast<unsigned>(r));
        const auto a = testing::random_dense(rng, r, c, 0.3);
        Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
        if (lu.rank() < c) continue;
        // skip badly conditioned draws; the oracle itself loses digits there
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
        if (svd.singularValues()(c - 1) < 1e-2) continue;
        ++tried;
        const Eigen::MatrixXd ad = dense(pseudo_inverse(sparse(a)));
        CHECK((a * ad * a - a).cwiseAbs().maxCoeff() < 1e-10);
        CHECK((ad * a * ad - ad).cwiseAbs().maxCoeff() < 1e-10);
        CHECK(((a * ad).transpose() - a * ad).cwiseAbs().maxCoeff() < 1e-10);
        CHECK(((ad * a).transpose() - ad * a).cwiseAbs().maxCoeff() < 1e-10);
        CHECK((ad - testing::svd_pinv(a)).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("classification pseudo-inverse is the row-normalised transpose") {
    std::mt19937_64 rng(4);
    for (int k = 0; k < 50; ++k) {
        const int n = 1 + static_cast<int>(rng() % 12);
        const int c = 1 + static_cast<int>(rng() % static_cast<unsigned>(n));
        const auto a = testing::random_classification(rng, n, c);
        Eigen::MatrixXd expect = a.transpose();
        for (int i = 0; i < c; ++i) expect.row(i) /= expect.row(i).sum();
        CHECK((dense(pseudo_inverse(sparse(a))) - expect).cwiseAbs().maxCoeff() < 1e-14);
    }
}

TEST_CASE("norms and vector products") {
    const auto m = SparseMatrix::from_dense({{3, 0}, {0, -4}});
    CHECK(frobenius(m) == doctest::Approx(5.0));
    CHECK(l1(m) == doctest::Approx(7.0));
    const StateVector x(std::vector<double>{0.25, 0.75});
    const auto y = vec_mat_mul(x, m);
    CHECK(y[0] == doctest::Approx(0.75));
    CHECK(y[1] == doctest::Approx(-3.0));
    CHECK(x.is_distribution());
    CHECK_FALSE(y.is_distribution());
    CHECK(x.sum() == 1.0);
    CHECK((x - x).l1() == 0.0);
    const auto k = kron(x, StateVector::unit(3, 1));
    CHECK(k.dim() == 6);
    CHECK(k[1] == 0.25);
    CHECK(k[4] == 0.75);
    CHECK(k.nonzeros() == 2);
}

TEST_CASE("row sums") {
    const auto m = SparseMatrix::from_dense({{0.5, 0.5}, {0, 1}});
    CHECK(m.row_sums() == std::vector<double>{1.0, 1.0});
}

TEST_CASE("Matrix Market and JSON round trips") {
    std::mt19937_64 rng(5);
    const auto m = sparse(testing::random_dense(rng, 5, 7));
    std::stringstream ss;
    write_matrix_market(ss, m);
    CHECK(ss.str().rfind("%%MatrixMarket matrix coordinate real general", 0) == 0);
    const auto back = read_matrix_market(ss);
    CHECK(back.rows() == 5);
    CHECK(back.cols() == 7);
    CHECK(max_abs_diff(back, m) == 0.0);

    const auto j = matrix_from_json(to_json(m));
    CHECK(max_abs_diff(j, m) == 0.0);

    std::stringstream bad("%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n");
    CHECK_THROWS_AS(read_matrix_market(bad), InputError);
    CHECK_THROWS_AS(matrix_from_json("{\"rows\": 2}"), InputError);
}

TEST_CASE("swap target loads from the corpus") {
    const auto s = load_matrix(testing::program_path("swap_target.mtx"));
    CHECK(s.rows() == 4);
    CHECK(s.at(1, 2) == 1.0);
    CHECK(s.at(2, 1) == 1.0);
    CHECK(s.at(0, 0) == 1.0);
    CHECK(s.at(3, 3) == 1.0);
    CHECK(s.nnz() == 4);
}
