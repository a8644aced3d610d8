#pragma once

#include <cstdint>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace struchis {

// Error taxonomy. `contract` covers precondition violations (bad shapes,
// out-of-range labels, malformed groups); `runtime` covers aborts that can
// occur on valid inputs (non-finite loss, diverged optimizer).
enum class ErrorKind { io, schema, config, contract, runtime };

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, std::string msg)
      : std::runtime_error(std::move(msg)), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& msg) {
  throw Error(kind, msg);
}

inline uint64_t fnv1a64(const std::string& s) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// mt19937_64 wrapper with fully specified output transforms, so draws do not
// depend on the standard library's distribution implementations.
class Rng {
public:
  explicit Rng(uint64_t seed) : gen_(splitmix64(seed)) {}

  uint64_t u64() { return gen_(); }

  // Uniform on [0, n). Rejection sampling keeps the draw exactly uniform.
  uint64_t index(uint64_t n) {
    if (n == 0) fail(ErrorKind::contract, "Rng::index: n must be positive");
    uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x;
    do {
      x = gen_();
    } while (x >= limit);
    return x % n;
  }

  // Uniform on [0, 1) with 53-bit resolution.
  double real() { return double(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * real(); }

  // Box-Muller; the spare value is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1, u2;
    do {
      u1 = real();
    } while (u1 <= 0.0);
    u2 = real();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = size_t(index(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // First k entries of a seeded permutation of [0, n).
  std::vector<int> perm_prefix(int n, int k) {
    std::vector<int> p(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) p[size_t(i)] = i;
    if (k > n) k = n;
    for (int i = 0; i < k; ++i) {
      int j = i + int(index(uint64_t(n - i)));
      std::swap(p[size_t(i)], p[size_t(j)]);
    }
    p.resize(size_t(k));
    return p;
  }

private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace struchis
