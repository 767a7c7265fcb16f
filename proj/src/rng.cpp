#include "hidim/rng.hpp"

#include <cmath>

namespace hidim {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream_id) {
    const std::uint64_t a = splitmix64(seed);
    const std::uint64_t b = splitmix64(stream_id ^ 0xD1B54A32D192ED03ULL);
    std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                      static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
    return std::mt19937_64(seq);
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id), engine_(make_engine(seed, stream_id)) {}

RngStream RngStream::derive(std::uint64_t sub_index) const {
    return RngStream(seed_, splitmix64(stream_id_ * 0x2545F4914F6CDD1DULL + splitmix64(sub_index)));
}

double RngStream::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double RngStream::uniform_open() {
    for (;;) {
        double u = uniform();
        if (u > 0.0) return u;
    }
}

double RngStream::normal() { return normal_(engine_); }

double RngStream::gamma(double shape) { return std::gamma_distribution<double>(shape, 1.0)(engine_); }

double RngStream::chi(double df) { return std::sqrt(2.0 * gamma(0.5 * df)); }

std::uint64_t RngStream::poisson(double mean) {
    if (mean <= 0.0) return 0;
    return static_cast<std::uint64_t>(std::poisson_distribution<long long>(mean)(engine_));
}

std::uint64_t RngStream::below(std::uint64_t bound) {
    return std::uniform_int_distribution<std::uint64_t>(0, bound - 1)(engine_);
}

}  // namespace hidim
