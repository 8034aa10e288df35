#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>

namespace pantcr {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Unparseable or truncated file contents.
struct FormatError : Error { using Error::Error; };
// Well-formed input that violates an invariant (dim mismatch, bad band count).
struct ValidationError : Error { using Error::Error; };
// Out-of-domain argument (negative factor, unknown enum value).
struct ArgumentError : Error { using Error::Error; };
// Non-finite values where finite math is required (NaN loss, NaN input).
struct NumericError : Error { using Error::Error; };
// Request exceeds available resources (not enough source area to tile).
struct CapacityError : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };

// splitmix64 finalizer; used for seed derivation and lattice hashing.
uint64_t mix64(uint64_t x);
uint64_t derive_seed(uint64_t master, uint64_t tag);
uint64_t derive_seed(uint64_t master, const std::string& tag);

// Deterministic RNG. Doubles come from the raw 64-bit stream, not from
// std::*_distribution, so sequences are identical across standard libraries.
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(mix64(seed ^ 0x9e3779b97f4a7c15ull)) {}

    uint64_t raw() { return gen_(); }
    double uniform() { return double(raw() >> 11) * 0x1.0p-53; }  // [0,1)
    double range(double a, double b) { return a + (b - a) * uniform(); }
    double normal();                  // Box-Muller, cached pair
    int integer(int n);               // uniform in [0, n)

private:
    std::mt19937_64 gen_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// Worker cap from PANTCR_THREADS (>=1). Results never depend on the value.
int thread_budget();
void parallel_for(int n, const std::function<void(int)>& fn);

}  // namespace pantcr
