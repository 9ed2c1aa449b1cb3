#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "mlsgfem/fem.hpp"
#include "mlsgfem/field.hpp"

namespace mlsg {

/// One eigenpair of the 1-D exponential covariance operator
///   (C v)(x) = \int_{-w}^{w} exp(-|x - x'| / l) v(x') dx'.
struct KLEigenpair1D {
  double eigenvalue = 0.0;
  double frequency = 0.0;   // omega in cos(omega x) or sin(omega x)
  bool even = true;
  double scale = 1.0;       // L2 normalization, sign fixed: positive at x = -w
  double sup_norm = 0.0;    // max |v(x)| over [-w, w]

  double operator()(double x) const;
};

/// First `count` eigenpairs in descending eigenvalue order, found by
/// bracketed root finding on the even/odd characteristic equations.
std::vector<KLEigenpair1D> kl_eigenpairs_1d(double correlation_length, double half_width, int count);

/// a(x, y) = a0(x) + sum_{m >= 1} a_m(x) y_m with lazily realized terms.
///
/// Terms are produced in order by a generator; realized terms never change,
/// so references returned by term() stay valid for the object's lifetime.
class AffineCoefficient {
 public:
  struct Term {
    ScalarField field;
    double sup_norm = 0.0;
  };
  /// Returns the first n terms (n >= 1). Must be prefix-stable.
  using Generator = std::function<std::vector<Term>(std::uint32_t n)>;

  AffineCoefficient(ScalarField a0, double a0_min, double a0_max, Generator generator);

  const ScalarField& a0() const { return a0_; }
  double a0_min() const { return a0_min_; }
  double a0_max() const { return a0_max_; }

  /// Term m >= 1; realizes terms up to m on first access.
  const ScalarField& term(std::uint32_t m) const;
  /// Coefficient field for index m, with m = 0 meaning a0.
  const ScalarField& field(std::uint32_t m) const { return m == 0 ? a0_ : term(m); }
  double sup_norm(std::uint32_t m) const;
  std::uint32_t realized_terms() const;
  void realize(std::uint32_t count) const;

 private:
  ScalarField a0_;
  double a0_min_;
  double a0_max_;
  Generator generator_;
  mutable std::mutex mutex_;
  mutable std::deque<Term> terms_;
};

enum class TestProblem { TP1, TP2, TP3, TP4 };

std::optional<TestProblem> parse_test_problem(const std::string& id);
std::string to_string(TestProblem p);

/// A parametric diffusion problem: domain, coefficient and load.
struct ProblemData {
  std::string name;
  Square domain;
  std::shared_ptr<const AffineCoefficient> coefficient;
  ScalarField load;
};

/// Coefficient of a benchmark problem with terms 1..max_terms realized.
std::shared_ptr<AffineCoefficient> make_tp_coefficient(TestProblem problem, std::uint32_t max_terms);

ProblemData make_problem(TestProblem problem);

/// One cosine term amplitude * cos(k1 pi x1) * cos(k2 pi x2) on the unit square.
struct CosineTerm {
  double amplitude = 0.0;
  double k1 = 0.0;
  double k2 = 0.0;
};

/// Unit-square problem with constant a0 and load; terms are sorted by
/// descending |amplitude|.
ProblemData make_custom_problem(double a0, std::vector<CosineTerm> terms, double load);

struct CoefficientBounds {
  double a_min;
  double a_max;
  double a0_min;
  double a0_max;
  double lambda;      // a0_min / a_max
  double big_lambda;  // a0_max / a_min
};

/// Bounds from a0 and the first `terms_used` sup-norms; throws
/// std::domain_error when the implied lower bound is not positive.
CoefficientBounds coefficient_bounds(const AffineCoefficient& c, std::uint32_t terms_used);

}  // namespace mlsg
