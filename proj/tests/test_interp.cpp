#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "plos/analysis.hpp"
#include "plos/error.hpp"
#include "plos/interp.hpp"
#include "support.hpp"

#include <cmath>

using namespace plos;

namespace {

double win_frequency(const Estimate& e, const StateSpace& s) {
    double won = 0.0;
    for (std::size_t i = 0; i < e.counts.size(); ++i) {
        const Valuation v = s.valuation(i);
        if (v[0] == v[1]) won += static_cast<double>(e.counts[i]);
    }
    return won / static_cast<double>(e.runs);
}

} // namespace

TEST_CASE("splitmix64 reference values") {
    // First outputs for seed 0 of the published splitmix64 generator.
    SplitMix64 g(0);
    CHECK(g.next() == 0xe220a8397b1dcdafULL);
    CHECK(g.next() == 0x6e789e6aa1b965f4ULL);
    CHECK(g.next() == 0x06c45d188009454fULL);
    SplitMix64 h(0);
    for (int i = 0; i < 1000; ++i) {
        const double u = h.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
}

TEST_CASE("substreams differ and are reproducible") {
    CHECK(substream(1, 0).next() == substream(1, 0).next());
    CHECK(substream(1, 0).next() != substream(1, 1).next());
    CHECK(substream(1, 0).next() != substream(2, 0).next());
}

TEST_CASE("single runs") {
    const Program p = parse("var x:{0,1}; x := 1");
    const auto r = run_once(p, Valuation{0}, 3);
    REQUIRE(r.terminal);
    CHECK(*r.terminal == Valuation{1});
    CHECK(r.steps == 1);

    const Program loop = parse("var x:{0,1}; while true do skip od");
    RunConfig cfg;
    cfg.max_steps = 500;
    CHECK_FALSE(run_once(loop, Valuation{0}, 1, cfg).terminal);
}

TEST_CASE("H_t runs end with the opened door distinct from guess and prize") {
    const Program p = testing::load("monty_ht.pw");
    for (std::uint64_t seed = 0; seed < 500; ++seed) {
        const auto r = run_once(p, Valuation{0, 0, 0}, seed);
        REQUIRE(r.terminal);
        const auto& v = *r.terminal;
        CHECK(v[2] != v[1]);
        CHECK(v[2] != v[0]);
    }
}

TEST_CASE("estimates are reproducible per seed") {
    const Program p = testing::load("monty_hw.pw");
    RunConfig cfg;
    cfg.seed = 99;
    cfg.samples = 2000;
    const auto a = estimate(p, Valuation{0, 0, 0}, cfg);
    const auto b = estimate(p, Valuation{0, 0, 0}, cfg);
    CHECK(a.counts == b.counts);
    cfg.seed = 100;
    CHECK(estimate(p, Valuation{0, 0, 0}, cfg).counts != a.counts);
}

TEST_CASE("switching wins two thirds of the time") {
    const Program p = testing::load("monty_hw.pw");
    const StateSpace s(p.decls);
    RunConfig cfg;
    cfg.seed = 5;
    cfg.samples = 100'000;
    const auto e = estimate(p, Valuation{0, 0, 0}, cfg);
    CHECK(e.censored == 0);
    const double sigma = std::sqrt(2.0 / 3.0 / 3.0 / 1e5);
    CHECK(std::abs(win_frequency(e, s) - 2.0 / 3.0) <= 3 * sigma);
}

TEST_CASE("switching with probability one half wins half of the time") {
    const Program p = testing::load("monty_hp.pw");
    const StateSpace s(p.decls);
    RunConfig cfg;
    cfg.seed = 6;
    cfg.samples = 100'000;
    cfg.bindings = {{"p", 0.5}};
    const auto e = estimate(p, Valuation{0, 0, 0}, cfg);
    const double sigma = std::sqrt(0.25 / 1e5);
    CHECK(std::abs(win_frequency(e, s) - 0.5) <= 3 * sigma);

    cfg.bindings = {};
    CHECK_THROWS_AS(estimate(p, Valuation{0, 0, 0}, cfg), InputError);
}

TEST_CASE("deterministic programs give point distributions") {
    const Program p = testing::load("xor_swap.pw");
    const Program det = parse("var x:{0,1}; var y:{0,1}; x := 1; y := (y+x)%2; x := (x+y)%2; y := (y+x)%2");
    RunConfig cfg;
    cfg.samples = 1000;
    const auto e = estimate(det, Valuation{0, 0}, cfg);
    CHECK(e.support() == 1);
    CHECK(e.frequencies()[StateSpace(det.decls).index(Valuation{0, 1})] == 1.0);
    CHECK(p.decls.size() == 2);
}

TEST_CASE("censored runs are counted") {
    const Program p = parse("var x:{0,1}; x ?= {0,1}; while x == 0 do skip od");
    RunConfig cfg;
    cfg.samples = 4000;
    cfg.max_steps = 100;
    const auto e = estimate(p, Valuation{0}, cfg);
    CHECK(e.runs == 4000);
    CHECK(e.censored > 1800);
    CHECK(e.censored < 2200);
    CHECK(e.frequencies().sum() == doctest::Approx(static_cast<double>(e.runs - e.censored) / e.runs));
}

TEST_CASE("total variation") {
    const StateVector a(std::vector<double>{0.5, 0.5, 0.0});
    const StateVector b(std::vector<double>{0.25, 0.5, 0.25});
    CHECK(total_variation(a, b) == doctest::Approx(0.25));
    CHECK(total_variation(a, a) == 0.0);
    CHECK_THROWS_AS(total_variation(a, StateVector(2)), InputError);
}

TEST_CASE("interpreter agrees with the operator semantics on small programs") {
    for (const auto& name : {"coin_flip.pw", "dice_sum.pw", "geometric.pw", "random_walk.pw", "xor_swap.pw"}) {
        CAPTURE(name);
        const Program p = testing::load(name);
        const auto los = assemble(p);
        const Valuation s0(los.space.var_count(), 0);
        const auto terminal = iterate(los.T, initial_config(los, point_state(los.space, s0), p.init_label)).terminal;
        const StateVector exact = extract_label(terminal, p.stop_label, los.labels);
        RunConfig cfg;
        cfg.seed = 17;
        cfg.samples = 20'000;
        const auto e = estimate(p, s0, cfg);
        const double bound = 3.0 * std::sqrt(static_cast<double>(e.support()) / 20'000.0);
        CHECK(total_variation(exact, e.frequencies()) <= bound);
    }
}
