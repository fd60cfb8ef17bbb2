#include "plos/interp.hpp"

#include "plos/error.hpp"

#include <cmath>

namespace plos {

SplitMix64 substream(std::uint64_t seed, std::uint64_t index) {
    SplitMix64 mixer(seed ^ (index * 0xD1B54A32D192ED03ULL));
    return SplitMix64(mixer.next());
}

namespace {

struct Timeout {};

class Machine {
public:
    Machine(const Program& p, SplitMix64& rng, const RunConfig& cfg) : prog_(p), rng_(rng), cfg_(cfg) {}

    std::size_t steps = 0;

    void exec(const Stmt& s, Valuation& state) {
        switch (s.kind) {
        case StmtKind::Seq:
            for (const auto& part : s.body) exec(part, state);
            return;
        case StmtKind::Skip:
            tick();
            return;
        case StmtKind::Assign: {
            tick();
            const Value v = s.expr.eval(state);
            if (!prog_.decls[s.var].contains(v))
                throw InputError("assignment to '" + prog_.decls[s.var].name + "' yields " + std::to_string(v) +
                                 ", outside its domain");
            state[s.var] = v;
            return;
        }
        case StmtKind::RandomAssign: {
            tick();
            state[s.var] = sample(s.dist);
            return;
        }
        case StmtKind::Choose: {
            tick();
            const double u = rng_.uniform();
            double acc = 0.0;
            std::size_t pick = s.body.size() - 1;
            for (std::size_t i = 0; i < s.body.size(); ++i) {
                acc += s.probs[i].eval(cfg_.bindings);
                if (u < acc) {
                    pick = i;
                    break;
                }
            }
            exec(s.body[pick], state);
            return;
        }
        case StmtKind::If:
            tick();
            exec(s.body[s.expr.holds(state) ? 0 : 1], state);
            return;
        case StmtKind::While:
            for (;;) {
                tick();
                if (!s.expr.holds(state)) return;
                exec(s.body[0], state);
            }
        }
    }

private:
    const Program& prog_;
    SplitMix64& rng_;
    const RunConfig& cfg_;

    void tick() {
        if (++steps > cfg_.max_steps) throw Timeout{};
    }

    Value sample(const Distribution& d) {
        const double u = rng_.uniform();
        double acc = 0.0;
        for (const auto& [v, p] : d.support) {
            acc += p;
            if (u < acc) return v;
        }
        return d.support.back().first;
    }
};

void check_bound(const Program& program, const Bindings& bindings) {
    for (const auto& name : program.parameters())
        if (!bindings.count(name)) throw InputError("cannot interpret: parameter #" + name + " is unbound");
}

} // namespace

RunOutcome run_once(const Program& program, const Valuation& s0, SplitMix64& rng, const RunConfig& cfg) {
    if (s0.size() != program.decls.size()) throw InputError("initial valuation arity mismatch");
    for (std::size_t k = 0; k < s0.size(); ++k)
        if (!program.decls[k].contains(s0[k]))
            throw InputError("initial value of '" + program.decls[k].name + "' outside its domain");
    check_bound(program, cfg.bindings);

    Machine m(program, rng, cfg);
    Valuation state = s0;
    RunOutcome out;
    try {
        m.exec(program.body, state);
        out.terminal = std::move(state);
    } catch (const Timeout&) {
    }
    out.steps = m.steps;
    return out;
}

RunOutcome run_once(const Program& program, const Valuation& s0, std::uint64_t seed, const RunConfig& cfg) {
    SplitMix64 rng(seed);
    return run_once(program, s0, rng, cfg);
}

StateVector Estimate::frequencies() const {
    StateVector f(counts.size());
    if (runs == 0) return f;
    for (std::size_t i = 0; i < counts.size(); ++i)
        f[i] = static_cast<double>(counts[i]) / static_cast<double>(runs);
    return f;
}

std::size_t Estimate::support() const {
    std::size_t k = 0;
    for (auto c : counts)
        if (c) ++k;
    return k;
}

Estimate estimate(const Program& program, const Valuation& s0, const RunConfig& cfg) {
    if (cfg.samples < 1) throw InputError("sample count must be at least 1");
    const StateSpace space = enumerate(program.decls);
    Estimate est;
    est.counts.assign(space.size(), 0);
    est.runs = cfg.samples;
    for (std::size_t run = 0; run < cfg.samples; ++run) {
        SplitMix64 rng = substream(cfg.seed, run);
        const RunOutcome o = run_once(program, s0, rng, cfg);
        if (o.terminal) ++est.counts[space.index(*o.terminal)];
        else ++est.censored;
    }
    return est;
}

double total_variation(const StateVector& p, const StateVector& q) {
    return 0.5 * (p - q).l1();
}

} // namespace plos
