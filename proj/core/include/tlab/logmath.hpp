// tlab/logmath.hpp
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

#ifndef TLAB_LOGMATH_HPP_
#define TLAB_LOGMATH_HPP_

#include <cmath>
#include <limits>
#include <span>

namespace tlab {

constexpr double kLogZero = -std::numeric_limits<double>::infinity();

// log(exp(a) + exp(b)) in max-shift form.
inline double LogSumExp(double a, double b) {
  if (a == kLogZero) return b;
  if (b == kLogZero) return a;
  if (a < b) std::swap(a, b);
  return a + std::log1p(std::exp(b - a));
}

// log sum over a span, max-shift form.
inline double LogSumExp(std::span<const double> xs) {
  double m = kLogZero;
  for (double x : xs) m = std::max(m, x);
  if (m == kLogZero) return kLogZero;
  double acc = 0.0;
  for (double x : xs) acc += std::exp(x - m);
  return m + std::log(acc);
}

// Turns raw scores into log probabilities in place.
inline void LogSoftmaxInPlace(std::span<double> xs) {
  double total = LogSumExp(std::span<const double>(xs.data(), xs.size()));
  for (double& x : xs) x -= total;
}

}  // namespace tlab

#endif  // TLAB_LOGMATH_HPP_
