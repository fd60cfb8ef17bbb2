#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "plos/analysis.hpp"
#include "plos/error.hpp"
#include "monty_reference.hpp"
#include "support.hpp"

#include <random>

using namespace plos;
using testing::dense;
using testing::sparse;

namespace {

StateVector terminal_of(const std::string& name) {
    const Program p = testing::load(name);
    const auto los = assemble(p);
    return iterate(los.T, initial_config(los, point_state(los.space, Valuation(los.space.var_count(), 0)), p.init_label))
        .terminal;
}

} // namespace

TEST_CASE("forgetful abstraction") {
    const auto a = forgetful(3);
    CHECK(a.rows() == 3);
    CHECK(a.cols() == 1);
    const Abstraction abs({a});
    for (std::size_t j = 0; j < 3; ++j) CHECK(abs.pseudo_inverse().at(0, j) == doctest::Approx(1.0 / 3.0));
    CHECK(max_abs_diff(Abstraction({forgetful(1)}).pseudo_inverse(), SparseMatrix::identity(1)) == 0.0);
    CHECK(max_abs_diff(kron(forgetful(2), forgetful(3)), forgetful(6)) == 0.0);
    CHECK_THROWS_AS(forgetful(0), InputError);
}

TEST_CASE("the d==g abstraction is the 9x2 classification") {
    const StateSpace s({{"d", {0, 1, 2}}, {"g", {0, 1, 2}}, {"o", {0, 1, 2}}});
    const Abstraction a = parse_abstraction("d,g:cases[d==g, d!=g]; o:forget", s, 0);
    REQUIRE(a.factors().size() == 2);
    const auto aw = a.factors()[0];
    CHECK(aw.rows() == 9);
    CHECK(aw.cols() == 2);
    for (std::size_t i = 0; i < 9; ++i) {
        const bool same = i / 3 == i % 3;
        CHECK(aw.at(i, same ? 0 : 1) == 1.0);
        CHECK(aw.at(i, same ? 1 : 0) == 0.0);
    }
    // A_w† has rows 1/3 on the diagonal pairs, 1/6 elsewhere
    const auto awd = Abstraction({aw}).pseudo_inverse();
    CHECK(awd.at(0, 0) == doctest::Approx(1.0 / 3.0));
    CHECK(awd.at(1, 1) == doctest::Approx(1.0 / 6.0));
}

TEST_CASE("abstraction spec parsing") {
    const StateSpace s({{"x", {0, 1, 2}}, {"y", {0, 1}}});
    CHECK(parse_abstraction("", s, 0).abstract_dim() == 6);
    CHECK(parse_abstraction("x:forget", s, 0).abstract_dim() == 2);
    CHECK(parse_abstraction("x:classes[{0,2},{1}]", s, 0).abstract_dim() == 4);
    CHECK(parse_abstraction("x:classes:[{0,2},{1}]", s, 0).abstract_dim() == 4);
    CHECK(parse_abstraction("x:forget; y:forget", s, 4).abstract_dim() == 1);
    CHECK(parse_abstraction("@:id", s, 4).abstract_dim() == 24);
    CHECK(parse_abstraction("x,y:cases[x==y, x!=y]", s, 4).abstract_dim() == 2);

    CHECK_THROWS_AS(parse_abstraction("q:forget", s, 0), InputError);
    CHECK_THROWS_AS(parse_abstraction("x:blur", s, 0), InputError);
    CHECK_THROWS_AS(parse_abstraction("x:classes[{0},{1}]", s, 0), InputError);
    CHECK_THROWS_AS(parse_abstraction("x:classes[{0,1},{1,2}]", s, 0), InputError);
    CHECK_THROWS_AS(parse_abstraction("x,y:cases[x==0]", s, 0), InputError);
    CHECK_THROWS_AS(parse_abstraction("y,x:forget", s, 0), InputError);
    CHECK_THROWS_AS(parse_abstraction("@:forget", s, 0), InputError);
    CHECK_THROWS_AS(parse_abstraction("x:forget; x:id", s, 0), InputError);
}

TEST_CASE("Penrose conditions and tensor factorisation on random classifications") {
    std::mt19937_64 rng(21);
    for (int k = 0; k < 200; ++k) {
        const int n1 = 1 + static_cast<int>(rng() % 4), c1 = 1 + static_cast<int>(rng() % static_cast<unsigned>(n1));
        const int n2 = 1 + static_cast<int>(rng() % 3), c2 = 1 + static_cast<int>(rng() % static_cast<unsigned>(n2));
        const auto a1 = testing::random_classification(rng, n1, c1);
        const auto a2 = testing::random_classification(rng, n2, c2);
        const Abstraction abs({sparse(a1), sparse(a2)});
        const Eigen::MatrixXd a = dense(abs.matrix());
        const Eigen::MatrixXd ad = dense(abs.pseudo_inverse());
        CHECK((a - testing::dense_kron(a1, a2)).cwiseAbs().maxCoeff() == 0.0);
        CHECK((a * ad * a - a).cwiseAbs().maxCoeff() < 1e-10);
        CHECK((ad * a * ad - ad).cwiseAbs().maxCoeff() < 1e-10);
        CHECK(((a * ad).transpose() - a * ad).cwiseAbs().maxCoeff() < 1e-10);
        CHECK(((ad * a).transpose() - ad * a).cwiseAbs().maxCoeff() < 1e-10);
        // factor-wise inverse agrees with inverting the whole product
        CHECK((ad - testing::svd_pinv(a)).cwiseAbs().maxCoeff() < 1e-10);
        CHECK((ad - dense(pseudo_inverse(abs.matrix()))).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("abstract_operator is linear") {
    std::mt19937_64 rng(22);
    const StateSpace s({{"x", {0, 1, 2}}, {"y", {0, 1}}});
    const Abstraction a = parse_abstraction("x:classes[{0},{1,2}]", s, 0);
    for (int k = 0; k < 20; ++k) {
        const auto t1 = sparse(testing::random_dense(rng, 6, 6));
        const auto t2 = sparse(testing::random_dense(rng, 6, 6));
        CHECK(max_abs_diff(abstract_operator(t1 + t2, a), abstract_operator(t1, a) + abstract_operator(t2, a)) < 1e-12);
        CHECK(max_abs_diff(abstract_operator(2.0 * t1, a), 2.0 * abstract_operator(t1, a)) < 1e-12);
    }
    CHECK_THROWS_AS(abstract_operator(SparseMatrix::identity(5), a), InputError);
}

TEST_CASE("abstract_state preserves mass under classifications") {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int k = 0; k < 50; ++k) {
        const int n = 2 + static_cast<int>(rng() % 10);
        const int c = 1 + static_cast<int>(rng() % static_cast<unsigned>(n));
        const Abstraction a({sparse(testing::random_classification(rng, n, c))});
        std::vector<double> v(static_cast<std::size_t>(n));
        for (auto& x : v) x = u(rng);
        const StateVector x = normalized(StateVector(v));
        CHECK(abstract_state(x, a).sum() == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("iteration: mass at the stop label is non-decreasing and reaches 1") {
    for (const auto& name : {"monty_ht.pw", "monty_hw.pw", "geometric.pw", "random_walk.pw", "coin_flip.pw"}) {
        CAPTURE(name);
        const Program p = testing::load(name);
        const auto los = assemble(p);
        StateVector x = initial_config(los, point_state(los.space, Valuation(los.space.var_count(), los.space.vars()[0].domain[0])), p.init_label);
        double last = 0.0;
        for (int step = 0; step < 2000; ++step) {
            const double at_stop = extract_label(x, p.stop_label, los.labels).sum();
            CHECK(at_stop >= last - 1e-15);
            last = at_stop;
            x = vec_mat_mul(x, los.T);
        }
        CHECK(last == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("iteration reports divergence") {
    const Program p = parse("var x:{0,1}; while true do x := (x+1)%2 od");
    const auto los = assemble(p);
    const auto x0 = initial_config(los, point_state(los.space, Valuation{0}), p.init_label);
    CHECK_THROWS_AS(iterate(los.T, x0, {1e-12, 1000}), ConvergenceError);
    CHECK_THROWS_AS(iterate(los.T, StateVector(3)), InputError);
}

TEST_CASE("fixed point of a straight-line program") {
    const Program p = parse("var x:{0,1,2}; x := 2");
    const auto los = assemble(p);
    const auto res = iterate(los.T, initial_config(los, point_state(los.space, Valuation{0}), 1));
    CHECK(res.residual < 1e-12);
    CHECK(res.terminal[los.config(2, p.stop_label)] == 1.0);
    const auto at = extract_label(res.terminal, p.stop_label, los.labels);
    CHECK(at.dim() == 3);
    CHECK(at[2] == 1.0);
    CHECK_THROWS_AS(extract_label(res.terminal, 7, los.labels), InputError);
    CHECK_THROWS_AS(normalized(StateVector(2)), InputError);
}

TEST_CASE("Monty Hall abstracted winning probabilities") {
    const Program ht = testing::load("monty_ht.pw");
    const auto los = assemble(ht);
    const Abstraction win = parse_abstraction("d,g:cases[d==g, d!=g]; o:forget", los.space, los.labels);

    auto t = abstract_state(terminal_of("monty_ht.pw"), win);
    CHECK(std::abs(t[0] - 0.33333) < 1e-5);
    CHECK(std::abs(t[1] - 0.66667) < 1e-5);
    auto w = abstract_state(terminal_of("monty_hw.pw"), parse_abstraction("d,g:cases[d==g, d!=g]; o:forget", los.space, 9));
    CHECK(std::abs(w[0] - 0.66667) < 1e-5);
    CHECK(std::abs(w[1] - 0.33333) < 1e-5);

    const auto mt = abstract_state(terminal_of("monty_ht.pw"), parse_abstraction("o:forget", los.space, 6));
    const auto mw = abstract_state(terminal_of("monty_hw.pw"), parse_abstraction("o:forget", los.space, 9));
    REQUIRE(mt.dim() == 9);
    REQUIRE(mw.dim() == 9);
    for (std::size_t i = 0; i < 9; ++i) {
        CHECK(std::abs(mt[i] - testing::kStickMarginals[i]) < 5e-3);
        CHECK(std::abs(mw[i] - testing::kSwitchMarginals[i]) < 5e-3);
    }
}

TEST_CASE("abstract Monty Hall operator is stochastic") {
    const Program p = testing::load("monty_hw.pw");
    const auto los = assemble(p);
    const auto abs = abstract_operator(los.T, parse_abstraction("o:forget; @:id", los.space, los.labels));
    CHECK(abs.rows() == 81);
    CHECK(stochasticity_defect(abs) < 1e-12);
}
