#pragma once

#include <cstdint>
#include <random>

namespace hidim {

// A reproducible random stream keyed by (seed, stream_id). Distinct stream ids give
// unrelated engine states, so replicate r of a simulation can own stream r regardless
// of which worker thread runs it.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t stream_id);

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream_id() const { return stream_id_; }

    // A new stream derived from this one's key and a sub-index; does not consume draws.
    RngStream derive(std::uint64_t sub_index) const;

    double uniform();                      // [0, 1)
    double uniform_open();                 // (0, 1)
    double normal();
    double gamma(double shape);            // scale 1
    double chi(double df);
    std::uint64_t poisson(double mean);
    std::uint64_t below(std::uint64_t bound);  // uniform on {0, ..., bound-1}

    std::mt19937_64& engine() { return engine_; }

private:
    std::uint64_t seed_;
    std::uint64_t stream_id_;
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace hidim
