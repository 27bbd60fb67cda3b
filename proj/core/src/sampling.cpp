#include "sizer/sampling.hpp"

#include <cmath>
#include <numeric>

#include "sizer/error.hpp"

namespace sizer {

namespace {

std::vector<unsigned> first_primes(std::size_t count) {
  std::vector<unsigned> primes;
  for (unsigned c = 2; primes.size() < count; ++c) {
    bool prime = true;
    for (unsigned p : primes) {
      if (p * p > c) break;
      if (c % p == 0) {
        prime = false;
        break;
      }
    }
    if (prime) primes.push_back(c);
  }
  return primes;
}

}  // namespace

std::vector<UnitPoint> latin_hypercube(std::size_t n, const std::vector<double>& lower,
                                       const std::vector<double>& upper, Rng& rng) {
  if (lower.size() != upper.size()) throw ConfigError("latin_hypercube bounds differ in dimension");
  const std::size_t dim = lower.size();
  std::vector<UnitPoint> pts(n, UnitPoint(dim));
  std::vector<std::size_t> strata(n);
  for (std::size_t d = 0; d < dim; ++d) {
    std::iota(strata.begin(), strata.end(), std::size_t{0});
    rng.shuffle(strata);
    const double width = upper[d] - lower[d];
    for (std::size_t i = 0; i < n; ++i)
      pts[i][d] = lower[d] + width * (static_cast<double>(strata[i]) + rng.uniform()) / static_cast<double>(n);
  }
  return pts;
}

std::vector<UnitPoint> latin_hypercube(std::size_t n, std::size_t dim, Rng& rng) {
  return latin_hypercube(n, std::vector<double>(dim, 0.0), std::vector<double>(dim, 1.0), rng);
}

std::vector<UnitPoint> scrambled_halton(std::size_t n, std::size_t dim, Rng& rng) {
  const auto primes = first_primes(dim);
  std::vector<std::vector<unsigned>> perms(dim);
  for (std::size_t d = 0; d < dim; ++d) {
    perms[d].resize(primes[d]);
    std::iota(perms[d].begin(), perms[d].end(), 0u);
    rng.shuffle(perms[d]);
  }
  const std::size_t offset = 1 + rng.index(1024);
  std::vector<UnitPoint> pts(n, UnitPoint(dim));
  for (std::size_t d = 0; d < dim; ++d) {
    const unsigned b = primes[d];
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t k = i + offset;
      double f = 1.0, x = 0.0;
      // Fixed digit count so permuted zero digits beyond the index still scramble.
      while (f > 1e-16) {
        f /= b;
        x += f * perms[d][k % b];
        k /= b;
      }
      pts[i][d] = x < 1.0 ? x : std::nextafter(1.0, 0.0);
    }
  }
  return pts;
}

}  // namespace sizer
