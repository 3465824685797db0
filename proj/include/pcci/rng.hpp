#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace pcci {

// SplitMix64 finalizer; used to turn (master seed, counter) pairs into
// well-separated engine seeds so parallel work items can draw independently
// of scheduling order.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t counter) {
    return mix64(master ^ mix64(counter + 1));
}

// Deterministic sampler. All transforms are written out explicitly instead of
// using std::*_distribution so that a stored seed reproduces streams
// bit-identically across standard-library implementations.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // Uniform on the open interval (0, 1); never returns an endpoint.
    double uniform() { return (static_cast<double>(gen_() >> 11) + 0.5) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller; one fresh pair per call, the spare is discarded to keep the
    // stream position independent of call parity.
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    double exponential() { return -std::log(uniform()); }

    // Gumbel(location 0, scale 1).
    double gumbel() { return -std::log(-std::log(uniform())); }

    // Asymmetric Laplace, location 0, scale 1, asymmetry kappa:
    // X = E1/kappa - kappa*E2 with E1, E2 standard exponentials.
    double asymmetric_laplace(double kappa) {
        double e1 = exponential();
        double e2 = exponential();
        return e1 / kappa - kappa * e2;
    }

    // -1 or +1 with equal probability.
    double sign() { return (gen_() & 1ULL) ? 1.0 : -1.0; }

  private:
    std::mt19937_64 gen_;
};

}  // namespace pcci
