#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace sqg {

// Thrown for malformed configs / bad arguments.  Mapped to exit code 2.
struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Thrown when a numerical routine cannot meet its contract
// (non-convergence, NaN, blow-up).  Mapped to exit code 3.
struct numerical_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Deterministic stream RNG (splitmix64 core).  Seeds fan out to
// sub-generators through fixed string labels so results do not depend
// on call order between components.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}
    Rng(std::uint64_t seed, const std::string& label)
        : state_(seed ^ fnv1a(label)) {}

    Rng derive(const std::string& label) const {
        return Rng(state_ ^ 0x9e3779b97f4a7c15ULL, label);
    }

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // uniform in [0,1)
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double a, double b) { return a + (b - a) * uniform(); }

    int uniform_int(int lo, int hi) {  // inclusive
        return lo + static_cast<int>(next_u64() % static_cast<std::uint64_t>(hi - lo + 1));
    }

private:
    static std::uint64_t fnv1a(const std::string& s) {
        std::uint64_t h = 1469598103934665603ULL;
        for (unsigned char c : s) {
            h ^= c;
            h *= 1099511628211ULL;
        }
        return h;
    }
    std::uint64_t state_;
};

}  // namespace sqg
