#ifndef LFBGW_RNG_HPP
#define LFBGW_RNG_HPP

#include <cstdint>

namespace lfbgw {

// Counter-based splitmix64 stream. Small, fast, and reproducible across
// platforms; substreams are derived by mixing (state, key) so independent
// entities (replicates, tree nodes) can draw without sharing state.
class RngStream {
  public:
    explicit RngStream(std::uint64_t seed) : state_(mix(seed)) {}

    // Derived stream for a keyed entity, e.g. substream(replicate) or
    // substream(node_id). Does not advance this stream.
    RngStream substream(std::uint64_t key) const {
        RngStream s(0);
        s.state_ = mix(state_ + 0x9e3779b97f4a7c15ull * (key + 1));
        return s;
    }

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ull;
        return mix(state_);
    }

    // Uniform on the open interval (0,1); never returns 0 or 1, so it is
    // safe inside log().
    double next_unit() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

  private:
    static std::uint64_t mix(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xbf58476d1ce4e5b9ull;
        z ^= z >> 27;
        z *= 0x94d049bb133111ebull;
        z ^= z >> 31;
        return z;
    }

    std::uint64_t state_;
};

}  // namespace lfbgw

#endif
