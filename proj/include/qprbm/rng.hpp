#pragma once

#include <cstdint>

namespace qprbm {

// Counter-based generator (Philox4x32-10). A stream is identified by
// (seed, stream, substream); distinct identifiers index disjoint counter
// blocks, so concurrent replications never share state. Advancing the
// generator only increments a 64-bit block counter.
class Rng {
  public:
    Rng(std::uint64_t seed, std::uint32_t stream = 0, std::uint32_t substream = 0)
        : key0_(static_cast<std::uint32_t>(seed)),
          key1_(static_cast<std::uint32_t>(seed >> 32)),
          ctr2_(stream),
          ctr3_(substream) {}

    std::uint64_t next_u64();

    // Uniform on the open interval (0,1); never returns an exact endpoint.
    double uniform();

    // Exponential with the given rate (mean 1/rate).
    double exponential(double rate);

    // Standard normal (Box-Muller; draws come in cached pairs).
    double normal();

    // Raw 4x32 block for the known-answer tests.
    static void philox4x32(const std::uint32_t ctr[4], const std::uint32_t key[2],
                           std::uint32_t out[4]);

  private:
    void refill();

    std::uint32_t key0_, key1_;
    std::uint32_t ctr2_, ctr3_;
    std::uint64_t block_ = 0;
    std::uint32_t buf_[4] = {};
    int buf_pos_ = 2;  // consumed in u64 halves; 2 == empty
    double cached_normal_ = 0.0;
    bool has_cached_normal_ = false;
};

// Stream mixing for derived seeds (e.g. hashing a config into a run seed).
std::uint64_t mix64(std::uint64_t x);

}  // namespace qprbm
