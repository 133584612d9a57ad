#pragma once

#include <array>
#include <cstdint>

namespace ticmkv {

/// Philox4x32-10 block function (Salmon et al., Random123).
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

/// Mixes a master seed with a stream label (splitmix64 finalizer).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t label);

/// Stateless generator: every draw is a pure function of
/// (seed, stream, step, tag), so results never depend on evaluation order
/// or on how work is split across threads.
class CounterRng {
 public:
  enum Tag : std::uint32_t { kInitial = 1, kNoise = 2, kDirection = 3, kUniform = 4 };

  explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

  [[nodiscard]] std::uint64_t seed() const { return seed_; }

  /// Two independent uniforms in (0, 1].
  [[nodiscard]] std::array<double, 2> uniforms(std::uint32_t stream, std::uint32_t step,
                                               std::uint32_t tag) const;
  /// Two independent standard normals (Box-Muller on `uniforms`).
  [[nodiscard]] std::array<double, 2> normals(std::uint32_t stream, std::uint32_t step,
                                              std::uint32_t tag) const;
  [[nodiscard]] double normal(std::uint32_t stream, std::uint32_t step, std::uint32_t tag) const {
    return normals(stream, step, tag)[0];
  }

 private:
  std::uint64_t seed_;
};

}  // namespace ticmkv
