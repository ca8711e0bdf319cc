// Analytic test functions and the name registry used by the CLI.
#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ddd/errors.hpp"
#include "ddd/random.hpp"

namespace ddd::testbed {

/// sum x_i^2 / 4000 - prod cos(x_i / sqrt(i)) + 1, i = 1..d.
inline double griewank(std::span<const double> x) {
  double sum = 0, prod = 1;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sum += x[i] * x[i] / 4000.0;
    prod *= std::cos(x[i] / std::sqrt(static_cast<double>(i + 1)));
  }
  return sum - prod + 1.0;
}

inline std::vector<double> griewank_gradient(std::span<const double> x) {
  const std::size_t d = x.size();
  std::vector<double> g(d);
  for (std::size_t i = 0; i < d; ++i) {
    const double si = std::sqrt(static_cast<double>(i + 1));
    double others = 1;
    for (std::size_t j = 0; j < d; ++j)
      if (j != i) others *= std::cos(x[j] / std::sqrt(static_cast<double>(j + 1)));
    g[i] = x[i] / 2000.0 + std::sin(x[i] / si) / si * others;
  }
  return g;
}

/// Two-dimensional Ackley function, minimum 0 at the origin.
inline double ackley2(double x, double y) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  return -20.0 * std::exp(-0.2 * std::sqrt(0.5 * (x * x + y * y))) -
         std::exp(0.5 * (std::cos(two_pi * x) + std::cos(two_pi * y))) + 20.0 + std::numbers::e;
}

inline double quadratic_bowl(std::span<const double> x) {
  double s = 0;
  for (double v : x) s += v * v;
  return s / 4000.0;
}

inline std::vector<double> quadratic_bowl_gradient(std::span<const double> x) {
  std::vector<double> g(x.begin(), x.end());
  for (double& v : g) v /= 2000.0;
  return g;
}

/// Uniform value in [-1, 1] keyed to (seed, coordinates): the bit pattern of
/// each coordinate is folded into a SplitMix64 chain started from the seed,
/// and the top 53 bits of the result map to [-1, 1). Re-evaluating a point
/// always returns the same value.
inline double uniform_noise(std::uint64_t seed, std::span<const double> x) {
  std::uint64_t h = mix64(seed ^ 0x6a09e667f3bcc909ULL);
  for (double v : x) {
    const double canon = v == 0.0 ? 0.0 : v;  // fold -0.0 onto 0.0
    h = mix64(h ^ std::bit_cast<std::uint64_t>(canon));
  }
  return -1.0 + 2.0 * (static_cast<double>(h >> 11) * 0x1.0p-53);
}

using Evaluator = std::function<double(std::span<const double>)>;
using GradientFn = std::function<std::vector<double>(std::span<const double>)>;

struct TestFunction {
  std::string name;
  std::size_t dim = 0;  // 0: any dimension
  Evaluator eval;
  GradientFn gradient;  // empty when no analytic gradient is provided
  bool noisy = false;

  double operator()(std::span<const double> x) const { return eval(x); }
};

inline const std::vector<std::string>& function_names() {
  static const std::vector<std::string> names{"griewank", "ackley", "noise", "quadratic"};
  return names;
}

/// Looks up a function by name. `seed` only affects "noise".
inline TestFunction make_function(const std::string& name, std::size_t dim, std::uint64_t seed = 0) {
  if (name == "griewank")
    return {name, 0, [](std::span<const double> x) { return griewank(x); },
            [](std::span<const double> x) { return griewank_gradient(x); }, false};
  if (name == "ackley") {
    if (dim != 2) throw InvalidArgument("ackley is defined for d = 2 only");
    return {name, 2, [](std::span<const double> x) { return ackley2(x[0], x[1]); }, {}, false};
  }
  if (name == "noise")
    return {name, 0, [seed](std::span<const double> x) { return uniform_noise(seed, x); }, {}, true};
  if (name == "quadratic")
    return {name, 0, [](std::span<const double> x) { return quadratic_bowl(x); },
            [](std::span<const double> x) { return quadratic_bowl_gradient(x); }, false};
  throw InvalidArgument("unknown function '" + name + "'");
}

}  // namespace ddd::testbed
