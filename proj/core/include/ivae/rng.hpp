#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>

#include "ivae/image.hpp"
#include "ivae/matrix.hpp"

namespace ivae {

// Deterministic seeded stream. State is a splitmix64 counter derived from
// (master_seed, label), so adding a new labelled stream never perturbs the
// sequences of existing ones. Same (seed, label) gives the same sequence
// on every run.
class RngStream {
  public:
    RngStream(std::uint64_t master_seed, std::string_view label) {
        std::uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a over the label bytes
        for (char ch : label) {
            h ^= static_cast<unsigned char>(ch);
            h *= 0x100000001b3ull;
        }
        state_ = mix_(master_seed ^ h);
    }

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ull;
        return mix_(state_);
    }

    // Uniform in [0,1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform strictly inside (0,1); safe under log().
    double uniform_open() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

    std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

    // Box–Muller, second value cached.
    double gauss() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        const double u1 = uniform_open();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * 3.14159265358979323846 * u2;
        cached_ = r * std::sin(a);
        have_cached_ = true;
        return r * std::cos(a);
    }

    // Inverse-CDF Laplace with per-coordinate scale `alpha` (variance 2·alpha²).
    double laplace(double alpha) {
        const double u = uniform_open() - 0.5;
        const double s = u < 0.0 ? -1.0 : 1.0;
        return -alpha * s * std::log(1.0 - 2.0 * std::abs(u));
    }

    template <typename T>
    void fill_gauss(Matrix<T>& m, double scale = 1.0) {
        for (auto& x : m.v) x = static_cast<T>(scale * gauss());
    }

    template <typename T>
    void fill_uniform(Matrix<T>& m) {
        for (auto& x : m.v) x = static_cast<T>(uniform());
    }

  private:
    static std::uint64_t mix_(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    std::uint64_t state_ = 0;
    double cached_ = 0.0;
    bool have_cached_ = false;
};

// The three corruption processes used in the training-free robustness tests.
enum class CorruptKind { gaussian, laplace, salt_pepper };

struct CorruptorSpec {
    CorruptKind kind = CorruptKind::gaussian;
    double param = 0.0;  // sigma >= 0 | alpha > 0 | p in [0,1]

    static CorruptorSpec gaussian(double sigma);
    static CorruptorSpec laplace(double alpha);
    static CorruptorSpec salt_pepper(double p);
};

inline CorruptorSpec CorruptorSpec::gaussian(double sigma) {
    if (sigma < 0.0) throw NonPositiveValue("gaussian corruptor: sigma must be >= 0");
    return {CorruptKind::gaussian, sigma};
}

inline CorruptorSpec CorruptorSpec::laplace(double alpha) {
    if (alpha <= 0.0) throw NonPositiveValue("laplace corruptor: alpha must be > 0");
    return {CorruptKind::laplace, alpha};
}

inline CorruptorSpec CorruptorSpec::salt_pepper(double p) {
    if (p < 0.0 || p > 1.0) throw NonPositiveValue("salt_pepper corruptor: p must be in [0,1]");
    return {CorruptKind::salt_pepper, p};
}

// y = x + noise for the additive kernels (never clamped: Y lives in R^d);
// salt-and-pepper replaces each pixel with probability p, half 0 half 1.
// The input batch is untouched.
inline ImageBatch corrupt(const ImageBatch& batch, const CorruptorSpec& spec, RngStream& stream) {
    ImageBatch out = batch;
    switch (spec.kind) {
        case CorruptKind::gaussian:
            for (auto& x : out.data.v) x += static_cast<float>(spec.param * stream.gauss());
            break;
        case CorruptKind::laplace:
            for (auto& x : out.data.v) x += static_cast<float>(stream.laplace(spec.param));
            break;
        case CorruptKind::salt_pepper:
            for (auto& x : out.data.v) {
                const double u = stream.uniform();
                if (u < 0.5 * spec.param) {
                    x = 0.0f;
                } else if (u < spec.param) {
                    x = 1.0f;
                }
            }
            break;
    }
    return out;
}

}  // namespace ivae
