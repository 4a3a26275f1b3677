#pragma once

// Independent reference implementations used as test oracles. Nothing here
// calls into the library's enumeration or energy code.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "gnisi/ising.hpp"

namespace oracle {

// E(x) = sum_i h_i x_i + sum_{i<j} u_ij x_i x_j, from the accessors only.
inline double energy(const gnisi::IsingModel& m, std::uint64_t mask) {
  double e = 0.0;
  for (std::size_t i = 0; i < m.n(); ++i) {
    if (!((mask >> i) & 1U)) continue;
    e += m.field(i);
    for (std::size_t j = i + 1; j < m.n(); ++j)
      if ((mask >> j) & 1U) e += m.coupling(i, j);
  }
  return e;
}

// Plain double loop over all states; shifted by the max exponent to stay finite.
inline double log_z(const gnisi::IsingModel& m) {
  const std::uint64_t states = std::uint64_t{1} << m.n();
  std::vector<double> a(states);
  double top = -INFINITY;
  for (std::uint64_t s = 0; s < states; ++s) {
    a[s] = -m.beta() * energy(m, s);
    top = std::max(top, a[s]);
  }
  long double sum = 0.0L;
  for (double v : a) sum += std::exp(static_cast<long double>(v - top));
  return top + static_cast<double>(std::log(sum));
}

inline std::vector<double> probabilities(const gnisi::IsingModel& m) {
  const double lz = log_z(m);
  std::vector<double> p(std::uint64_t{1} << m.n());
  for (std::uint64_t s = 0; s < p.size(); ++s) p[s] = std::exp(-m.beta() * energy(m, s) - lz);
  return p;
}

// Exact <x_i> and <x_i x_j> by enumeration.
struct Moments {
  std::vector<double> mean;
  std::vector<std::vector<double>> second;
};

inline Moments moments(const gnisi::IsingModel& m) {
  const auto p = probabilities(m);
  const std::size_t n = m.n();
  Moments out{std::vector<double>(n, 0.0), std::vector<std::vector<double>>(n, std::vector<double>(n, 0.0))};
  for (std::uint64_t s = 0; s < p.size(); ++s) {
    for (std::size_t i = 0; i < n; ++i) {
      if (!((s >> i) & 1U)) continue;
      out.mean[i] += p[s];
      for (std::size_t j = 0; j < n; ++j)
        if ((s >> j) & 1U) out.second[i][j] += p[s];
    }
  }
  return out;
}

inline std::uint64_t mask_of(const gnisi::SpinString& x) {
  std::uint64_t m = 0;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (x[i]) m |= std::uint64_t{1} << i;
  return m;
}

inline double total_variation(const std::vector<double>& p, const std::vector<double>& q) {
  double s = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) s += std::abs(p[k] - q[k]);
  return 0.5 * s;
}

}  // namespace oracle

namespace testutil {

inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("gnisi_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spit(const std::filesystem::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
}

inline gnisi::IsingModel example_model() {
  return gnisi::IsingModel::from_upper({1.0, -1.0}, {2.0}, 1.0);
}

}  // namespace testutil
