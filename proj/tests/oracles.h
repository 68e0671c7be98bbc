// Copyright 2026 The CRAFT Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Test-only reference computations. Nothing here calls into the library's
// solvers, so agreement with them is evidence rather than tautology.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <vector>

namespace craft::testing {

using Dense = std::vector<std::vector<double>>;  // row-major
using WideDense = std::vector<std::vector<long double>>;

// Moore-Penrose pseudoinverse (d x m) of an m x d matrix via one-sided Jacobi
// SVD of its transpose, in extended precision so the oracle stays well ahead
// of the double-precision code it checks. Singular values below
// rel_tol * sigma_max are dropped.
inline WideDense JacobiPseudoInverse(const Dense& a, long double rel_tol = 1e-12L) {
  using std::abs;
  using std::sqrt;
  const std::size_t m = a.size();
  const std::size_t d = a.front().size();
  // b = a^T, stored as m columns of length d.
  WideDense col(m, std::vector<long double>(d));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t k = 0; k < d; ++k) col[i][k] = a[i][k];
  WideDense v(m, std::vector<long double>(m, 0.0L));
  for (std::size_t i = 0; i < m; ++i) v[i][i] = 1.0;

  for (int sweep = 0; sweep < 100; ++sweep) {
    long double off = 0.0L;
    for (std::size_t p = 0; p < m; ++p) {
      for (std::size_t q = p + 1; q < m; ++q) {
        long double alpha = 0, beta = 0, gamma = 0;
        for (std::size_t k = 0; k < d; ++k) {
          alpha += col[p][k] * col[p][k];
          beta += col[q][k] * col[q][k];
          gamma += col[p][k] * col[q][k];
        }
        if (abs(gamma) <= 1e-300L) continue;
        off = std::max(off, abs(gamma) / sqrt(alpha * beta));
        const long double zeta = (beta - alpha) / (2.0L * gamma);
        const long double t = (zeta >= 0 ? 1.0L : -1.0L) / (abs(zeta) + sqrt(1.0L + zeta * zeta));
        const long double c = 1.0L / sqrt(1.0L + t * t);
        const long double s = c * t;
        for (std::size_t k = 0; k < d; ++k) {
          const long double x = col[p][k], y = col[q][k];
          col[p][k] = c * x - s * y;
          col[q][k] = s * x + c * y;
        }
        for (std::size_t k = 0; k < m; ++k) {
          const long double x = v[k][p], y = v[k][q];
          v[k][p] = c * x - s * y;
          v[k][q] = s * x + c * y;
        }
      }
    }
    if (off < 1e-18L) break;
  }

  std::vector<long double> sigma(m);
  long double sigma_max = 0.0L;
  for (std::size_t j = 0; j < m; ++j) {
    long double n = 0;
    for (long double x : col[j]) n += x * x;
    sigma[j] = sqrt(n);
    sigma_max = std::max(sigma_max, sigma[j]);
  }
  // a^T V = W Sigma  =>  a = V Sigma W^T  =>  a^+ = W Sigma^-1 V^T.
  WideDense pinv(d, std::vector<long double>(m, 0.0L));
  for (std::size_t j = 0; j < m; ++j) {
    if (sigma[j] <= rel_tol * sigma_max) continue;
    for (std::size_t r = 0; r < d; ++r) {
      const long double w = col[j][r] / sigma[j];
      for (std::size_t c = 0; c < m; ++c) {
        pinv[r][c] += w * v[c][j] / sigma[j];
      }
    }
  }
  return pinv;
}

// g = ref + a^+ (rho - a ref), all in plain loops.
inline std::vector<double> OracleProjection(const Dense& a, const std::vector<double>& rho,
                                            const std::vector<double>& ref) {
  const std::size_t m = a.size(), d = ref.size();
  std::vector<long double> gap(m);
  for (std::size_t i = 0; i < m; ++i) {
    long double dot = 0;
    for (std::size_t k = 0; k < d; ++k) dot += static_cast<long double>(a[i][k]) * ref[k];
    gap[i] = rho[i] - dot;
  }
  const WideDense pinv = JacobiPseudoInverse(a);
  std::vector<double> g(d);
  for (std::size_t r = 0; r < d; ++r) {
    long double acc = ref[r];
    for (std::size_t c = 0; c < m; ++c) acc += pinv[r][c] * gap[c];
    g[r] = static_cast<double>(acc);
  }
  return g;
}

// Central finite-difference derivative of f along coordinate `k` of x.
template <typename F, typename Vec>
double CentralDifference(F&& f, Vec x, std::ptrdiff_t k, double h) {
  const double x0 = x[k];
  x[k] = x0 + h;
  const double up = f(x);
  x[k] = x0 - h;
  const double down = f(x);
  return (up - down) / (2.0 * h);
}

}  // namespace craft::testing
