#pragma once

#include <functional>
#include <span>
#include <vector>

namespace mlsg {

/// A scalar field on the plane written as a finite sum of separable products
///   f(x1, x2) = sum_k c_k * g_k(x1) * h_k(x2).
///
/// Every coefficient and load used here has this form, which lets assembly
/// evaluate fields on tensor quadrature grids from 1-D samples.
class ScalarField {
 public:
  using Fn1 = std::function<double(double)>;

  struct Term {
    double scale = 0.0;
    Fn1 fx;  // empty means identically 1
    Fn1 fy;
  };

  ScalarField() = default;  // the zero field

  static ScalarField constant(double value);
  static ScalarField separable(double scale, Fn1 fx, Fn1 fy);

  ScalarField& operator+=(const ScalarField& other);
  friend ScalarField operator+(ScalarField a, const ScalarField& b) { return a += b; }

  double operator()(double x1, double x2) const;

  std::span<const Term> terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }

  /// Per-term samples along the two axes; value(i, j) = f(xs[i], ys[j]).
  class AxisSamples {
   public:
    double value(std::size_t i, std::size_t j) const {
      double s = 0.0;
      for (std::size_t k = 0; k < x_.size(); ++k) s += x_[k][i] * y_[k][j];
      return s;
    }

   private:
    friend class ScalarField;
    std::vector<std::vector<double>> x_;
    std::vector<std::vector<double>> y_;  // includes the term scale
  };

  AxisSamples sample_axes(std::span<const double> xs, std::span<const double> ys) const;

 private:
  std::vector<Term> terms_;
};

}  // namespace mlsg
