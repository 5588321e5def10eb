#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace tiltbench {

// Numerically stable sigmoid; never returns exactly 0 or 1.
inline double sigmoid(double z) {
  if (z >= 0.0) {
    double e = std::exp(-z);
    return 1.0 / (1.0 + e);
  }
  double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow.
inline double log1pexp(double z) {
  if (z > 0.0) return z + std::log1p(std::exp(-z));
  return std::log1p(std::exp(z));
}

// log(exp(a) + exp(b)) without overflow.
inline double logsumexp2(double a, double b) {
  double m = std::max(a, b);
  if (!std::isfinite(m)) return m;  // both -inf or a nan propagates
  return m + std::log1p(std::exp(std::min(a, b) - m));
}

inline double clamp_prob(double p) {
  return std::min(1.0 - 1e-12, std::max(1e-12, p));
}

// Shortest exact decimal is not required for CSV; the interfaces pin 17
// significant digits instead.
inline std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

// Linear-interpolation quantile on a copy (same convention as numpy default).
inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw std::invalid_argument("quantile of empty vector");
  std::sort(v.begin(), v.end());
  if (q <= 0.0) return v.front();
  if (q >= 1.0) return v.back();
  double pos = q * static_cast<double>(v.size() - 1);
  std::size_t lo = static_cast<std::size_t>(pos);
  double frac = pos - static_cast<double>(lo);
  if (lo + 1 >= v.size()) return v.back();
  return v[lo] * (1.0 - frac) + v[lo + 1] * frac;
}

inline double median(std::vector<double> v) { return quantile(std::move(v), 0.5); }

// Worker count for embarrassingly parallel loops: TILTBENCH_THREADS caps the
// hardware count; an explicit request wins over both.
inline int resolve_threads(int requested = 0) {
  int hw = static_cast<int>(std::thread::hardware_concurrency());
  if (hw <= 0) hw = 1;
  int cap = hw;
  if (const char* env = std::getenv("TILTBENCH_THREADS")) {
    char* end = nullptr;
    long parsed = std::strtol(env, &end, 10);
    if (end != env && parsed > 0) cap = std::min<long>(parsed, 1024);
  }
  if (requested > 0) return requested;
  return std::max(1, std::min(hw, cap));
}

}  // namespace tiltbench
