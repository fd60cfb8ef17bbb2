#pragma once

// Sampling interpreter for the probabilistic while-language. It executes the
// AST directly and serves as the independent oracle for the LOS.

#include "plos/lang.hpp"
#include "plos/los.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace plos {

// splitmix64 (Steele, Lea, Flood 2014). Fixed so streams are identical on
// every platform.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }
    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

private:
    std::uint64_t state_;
};

// Independent substream for run `index` of a batch seeded with `seed`.
SplitMix64 substream(std::uint64_t seed, std::uint64_t index);

struct RunConfig {
    std::uint64_t seed = 0;
    std::size_t max_steps = 100'000;   // per run; one step per executed block
    std::size_t samples = 1;
    Bindings bindings;
};

struct RunOutcome {
    std::optional<Valuation> terminal;   // empty on timeout
    std::size_t steps = 0;
};

RunOutcome run_once(const Program& program, const Valuation& s0, SplitMix64& rng, const RunConfig& cfg);
RunOutcome run_once(const Program& program, const Valuation& s0, std::uint64_t seed, const RunConfig& cfg = {});

struct Estimate {
    std::vector<std::size_t> counts;   // per state index
    std::size_t censored = 0;          // runs that timed out
    std::size_t runs = 0;

    StateVector frequencies() const;
    std::size_t support() const;
};

Estimate estimate(const Program& program, const Valuation& s0, const RunConfig& cfg);

double total_variation(const StateVector& p, const StateVector& q);

} // namespace plos
