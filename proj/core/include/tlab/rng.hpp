// tlab/rng.hpp
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef TLAB_RNG_HPP_
#define TLAB_RNG_HPP_

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace tlab {

// splitmix64 step. Used both as the core generator and for seed mixing so
// that derived streams (per utterance, per epoch, per segment) are stable
// across platforms and independent of evaluation order.
inline std::uint64_t SplitMix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t MixSeed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t s = a;
  std::uint64_t h = SplitMix64(s);
  s = h ^ b;
  return SplitMix64(s);
}

inline std::uint64_t MixSeed(std::uint64_t a, std::uint64_t b,
                             std::uint64_t c) {
  return MixSeed(MixSeed(a, b), c);
}

inline std::uint64_t MixSeed(std::uint64_t a, std::uint64_t b, std::uint64_t c,
                             std::uint64_t d) {
  return MixSeed(MixSeed(a, b, c), d);
}

// FNV-1a. Used to derive seed components from split/condition names and to
// fingerprint datasets in checkpoint metadata.
inline std::uint64_t HashBytes(const void* data, std::size_t n,
                               std::uint64_t h = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t HashString(std::string_view s) {
  return HashBytes(s.data(), s.size());
}

// Deterministic generator with explicitly specified output mappings. All
// randomness in the project flows through this class.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t NextU64() { return SplitMix64(state_); }

  // Uniform on [0, 1) with 53 bits of mantissa.
  double Uniform() {
    return static_cast<double>(NextU64() >> 11) * 0x1.0p-53;
  }

  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }

  // Uniform integer on [lo, hi], inclusive. Rejection-free modulo is fine
  // here: ranges are tiny compared to 2^64 so the bias is far below any
  // observable effect, and determinism is what matters.
  int UniformInt(int lo, int hi) {
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(NextU64() % span);
  }

  // Standard normal via Box-Muller. Draws two uniforms per call; no cached
  // second value, so the stream position is a simple function of call count.
  double Gaussian() {
    double u1 = Uniform();
    double u2 = Uniform();
    while (u1 <= 0.0) u1 = Uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::uint64_t state_;
};

}  // namespace tlab

#endif  // TLAB_RNG_HPP_
