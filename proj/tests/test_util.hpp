#pragma once

#include <vector>

#include "aq/geometry.hpp"
#include "aq/rules.hpp"
#include "aq/sampling.hpp"

namespace aqtest {

using aq::Box;
using aq::MatrixXd;
using aq::SplitMix64;
using aq::VectorXd;

/// Random box in [-2,2]^d with side lengths in (0.3, 2.3).
inline Box random_box(int dim, SplitMix64& rng) {
  VectorXd lo(dim), w(dim);
  for (int i = 0; i < dim; ++i) {
    lo[i] = -2.0 + 2.0 * rng.uniform();
    w[i] = 0.3 + 2.0 * rng.uniform();
  }
  return Box(lo, w);
}

/// Polynomial with independent per-axis degrees: sum_alpha c_alpha prod x_i^alpha_i.
/// Coefficients in [-1,1]; exact integrals via monomial antiderivatives.
struct PerAxisPoly {
  int dim;
  int degree;  // max exponent per axis
  std::vector<double> coeff;  // (degree+1)^dim entries, axis 0 fastest

  static PerAxisPoly random(int dim, int degree, SplitMix64& rng) {
    PerAxisPoly p;
    p.dim = dim;
    p.degree = degree;
    long n = 1;
    for (int i = 0; i < dim; ++i) n *= degree + 1;
    p.coeff.resize(n);
    for (long i = 0; i < n; ++i) p.coeff[i] = 2.0 * rng.uniform() - 1.0;
    return p;
  }

  double operator()(const VectorXd& x) const {
    const int k = degree + 1;
    double sum = 0.0;
    for (std::size_t q = 0; q < coeff.size(); ++q) {
      double term = coeff[q];
      std::size_t rem = q;
      for (int a = 0; a < dim; ++a) {
        const int e = static_cast<int>(rem % k);
        rem /= k;
        term *= std::pow(x[a], e);
      }
      sum += term;
    }
    return sum;
  }

  aq::Integrand integrand() const {
    return aq::pointwise([*this](const VectorXd& x) { return (*this)(x); });
  }

  /// Exact integral over a box from per-axis monomial antiderivatives.
  double exact_integral(const Box& box) const {
    const int k = degree + 1;
    double total = 0.0;
    for (std::size_t q = 0; q < coeff.size(); ++q) {
      double term = coeff[q];
      std::size_t rem = q;
      for (int a = 0; a < dim; ++a) {
        const int e = static_cast<int>(rem % k);
        rem /= k;
        const double lo = box.lower[a], hi = box.lower[a] + box.widths[a];
        term *= (std::pow(hi, e + 1) - std::pow(lo, e + 1)) / (e + 1);
      }
      total += term;
    }
    return total;
  }
};

inline double rel_err(double approx, double exact) {
  return std::abs(approx - exact) / std::max(1.0, std::abs(exact));
}

}  // namespace aqtest
