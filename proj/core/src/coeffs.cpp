#include "mlsgfem/coeffs.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <tuple>

#include <boost/math/tools/roots.hpp>

namespace mlsg {

namespace {

constexpr double kPi = std::numbers::pi;

double solve_bracketed(auto f, double lo, double hi) {
  boost::math::tools::eps_tolerance<double> tol(50);
  std::uintmax_t iters = 200;
  auto [a, b] = boost::math::tools::toms748_solve(f, lo, hi, tol, iters);
  return 0.5 * (a + b);
}

// Extends a prefix-stable term list: the generator may be asked for more
// than requested so the cost of re-sorting is amortized.
std::uint32_t grow(std::uint32_t have, std::uint32_t want) {
  return std::max<std::uint32_t>(want, std::max<std::uint32_t>(16, 2 * have));
}

}  // namespace

double KLEigenpair1D::operator()(double x) const {
  return scale * (even ? std::cos(frequency * x) : std::sin(frequency * x));
}

std::vector<KLEigenpair1D> kl_eigenpairs_1d(double correlation_length, double half_width, int count) {
  if (correlation_length <= 0.0 || half_width <= 0.0)
    throw std::invalid_argument("correlation length and half width must be positive");
  const double c = 1.0 / correlation_length;
  const double a = half_width;
  std::vector<KLEigenpair1D> out;
  out.reserve(static_cast<std::size_t>(std::max(count, 0)));
  // Roots interlace: the k-th even root has omega*a in (k pi, k pi + pi/2),
  // the k-th odd root in (k pi + pi/2, (k+1) pi). Both characteristic
  // functions change sign across these brackets.
  for (int k = 0; static_cast<int>(out.size()) < count; ++k) {
    for (int parity = 0; parity < 2 && static_cast<int>(out.size()) < count; ++parity) {
      KLEigenpair1D e;
      e.even = parity == 0;
      const double lo = (k * kPi + (e.even ? 0.0 : 0.5 * kPi)) / a;
      const double hi = (k * kPi + (e.even ? 0.5 * kPi : kPi)) / a;
      if (e.even) {
        auto f = [&](double w) { return c * std::cos(w * a) - w * std::sin(w * a); };
        e.frequency = solve_bracketed(f, lo, hi);
      } else {
        auto f = [&](double w) { return w * std::cos(w * a) + c * std::sin(w * a); };
        e.frequency = solve_bracketed(f, lo, hi);
      }
      const double w = e.frequency;
      e.eigenvalue = 2.0 * c / (w * w + c * c);
      const double s2 = std::sin(2.0 * w * a) / (2.0 * w);
      e.scale = 1.0 / std::sqrt(e.even ? a + s2 : a - s2);
      const double at_left = e.even ? std::cos(w * a) : -std::sin(w * a);
      if (at_left < 0.0) e.scale = -e.scale;
      const double peak = e.even ? 1.0 : (w * a >= 0.5 * kPi ? 1.0 : std::sin(w * a));
      e.sup_norm = std::abs(e.scale) * peak;
      out.push_back(e);
    }
  }
  return out;
}

AffineCoefficient::AffineCoefficient(ScalarField a0, double a0_min, double a0_max, Generator generator)
    : a0_(std::move(a0)), a0_min_(a0_min), a0_max_(a0_max), generator_(std::move(generator)) {}

void AffineCoefficient::realize(std::uint32_t count) const {
  std::lock_guard lock(mutex_);
  if (count <= terms_.size()) return;
  const auto have = static_cast<std::uint32_t>(terms_.size());
  auto fresh = generator_(grow(have, count));
  if (fresh.size() < count) throw std::logic_error("coefficient generator returned too few terms");
  for (std::size_t i = have; i < fresh.size(); ++i) terms_.push_back(std::move(fresh[i]));
}

const ScalarField& AffineCoefficient::term(std::uint32_t m) const {
  if (m == 0) throw std::out_of_range("coefficient terms are 1-based");
  realize(m);
  std::lock_guard lock(mutex_);
  return terms_[m - 1].field;
}

double AffineCoefficient::sup_norm(std::uint32_t m) const {
  if (m == 0) throw std::out_of_range("coefficient terms are 1-based");
  realize(m);
  std::lock_guard lock(mutex_);
  return terms_[m - 1].sup_norm;
}

std::uint32_t AffineCoefficient::realized_terms() const {
  std::lock_guard lock(mutex_);
  return static_cast<std::uint32_t>(terms_.size());
}

std::optional<TestProblem> parse_test_problem(const std::string& id) {
  std::string s;
  for (char ch : id)
    if (ch != '.' && ch != '_' && ch != '-') s.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(ch))));
  if (s == "TP1") return TestProblem::TP1;
  if (s == "TP2") return TestProblem::TP2;
  if (s == "TP3") return TestProblem::TP3;
  if (s == "TP4") return TestProblem::TP4;
  return std::nullopt;
}

std::string to_string(TestProblem p) {
  switch (p) {
    case TestProblem::TP1: return "TP1";
    case TestProblem::TP2: return "TP2";
    case TestProblem::TP3: return "TP3";
    case TestProblem::TP4: return "TP4";
  }
  return "?";
}

namespace {

// Separable exponential covariance on [-1, 1]^2, l = 2, sigma = 0.15.
AffineCoefficient::Generator tp1_generator() {
  constexpr double l = 2.0;
  constexpr double sigma = 0.15;
  return [](std::uint32_t n) {
    // Grow the 1-D family until every product outside the candidate grid is
    // strictly below the n-th largest product inside it.
    int n1 = 8;
    for (;;) {
      auto pairs = kl_eigenpairs_1d(l, 1.0, n1 + 1);
      using Cand = std::tuple<double, int, int>;
      std::vector<Cand> cand;
      cand.reserve(static_cast<std::size_t>(n1) * n1);
      for (int i = 0; i < n1; ++i)
        for (int j = 0; j < n1; ++j) cand.emplace_back(pairs[i].eigenvalue * pairs[j].eigenvalue, i, j);
      if (cand.size() >= n) {
        std::sort(cand.begin(), cand.end(), [](const Cand& x, const Cand& y) {
          if (std::get<0>(x) != std::get<0>(y)) return std::get<0>(x) > std::get<0>(y);
          const int sx = std::get<1>(x) + std::get<2>(x);
          const int sy = std::get<1>(y) + std::get<2>(y);
          if (sx != sy) return sx < sy;
          return std::get<1>(x) < std::get<1>(y);
        });
        const double outside = pairs[0].eigenvalue * pairs[n1].eigenvalue;
        if (outside < std::get<0>(cand[n - 1])) {
          std::vector<AffineCoefficient::Term> terms;
          terms.reserve(n);
          for (std::uint32_t k = 0; k < n; ++k) {
            const auto [lam, i, j] = cand[k];
            const KLEigenpair1D ei = pairs[i];
            const KLEigenpair1D ej = pairs[j];
            const double amp = sigma * std::sqrt(3.0) * std::sqrt(lam);
            terms.push_back({ScalarField::separable(amp, [ei](double x) { return ei(x); },
                                                    [ej](double y) { return ej(y); }),
                             amp * ei.sup_norm * ej.sup_norm});
          }
          return terms;
        }
      }
      n1 *= 2;
    }
  };
}

// Cosine modes enumerated along anti-diagonals with algebraic decay.
AffineCoefficient::Generator cosine_decay_generator(double alpha_bar, double decay) {
  return [alpha_bar, decay](std::uint32_t n) {
    std::vector<AffineCoefficient::Term> terms;
    terms.reserve(n);
    for (std::uint32_t m = 1; m <= n; ++m) {
      auto k = static_cast<std::uint64_t>(std::floor(-0.5 + std::sqrt(0.25 + 2.0 * m)));
      while (k * (k + 1) / 2 > m) --k;
      while ((k + 1) * (k + 2) / 2 <= m) ++k;
      const double b1 = static_cast<double>(m - k * (k + 1) / 2);
      const double b2 = static_cast<double>(k) - b1;
      const double amp = alpha_bar * std::pow(static_cast<double>(m), -decay);
      terms.push_back({ScalarField::separable(amp, [b1](double x) { return std::cos(2.0 * kPi * b1 * x); },
                                              [b2](double y) { return std::cos(2.0 * kPi * b2 * y); }),
                       amp});
    }
    return terms;
  };
}

// Truncated KL-like expansion with Gaussian spectral decay, l = 0.65.
AffineCoefficient::Generator tp4_generator() {
  constexpr double l = 0.65;
  return [](std::uint32_t n) {
    // All (i, j) with i^2 + j^2 <= r^2; the n smallest radii are inside once
    // the disk holds at least n lattice points.
    long r = 1;
    auto count_in = [](long rr) {
      long c = 0;
      for (long i = 0; i <= rr; ++i)
        for (long j = 0; j <= rr; ++j)
          if (i * i + j * j <= rr * rr) ++c;
      return c;
    };
    while (count_in(r) < static_cast<long>(n)) r *= 2;
    using Cand = std::tuple<long, long, long>;  // (i^2 + j^2, i, j)
    std::vector<Cand> cand;
    for (long i = 0; i <= r; ++i)
      for (long j = 0; j <= r; ++j)
        if (i * i + j * j <= r * r) cand.emplace_back(i * i + j * j, i, j);
    std::sort(cand.begin(), cand.end(), [](const Cand& x, const Cand& y) {
      if (std::get<0>(x) != std::get<0>(y)) return std::get<0>(x) < std::get<0>(y);
      const long sx = std::get<1>(x) + std::get<2>(x);
      const long sy = std::get<1>(y) + std::get<2>(y);
      if (sx != sy) return sx < sy;
      return std::get<1>(x) < std::get<1>(y);
    });
    std::vector<AffineCoefficient::Term> terms;
    terms.reserve(n);
    for (std::uint32_t k = 0; k < n; ++k) {
      const auto [rad2, i, j] = cand[k];
      const double nu = 0.25 * std::exp(-kPi * static_cast<double>(rad2) / (l * l));
      const double amp = std::sqrt(3.0) * std::sqrt(nu);
      if (i == 0 && j == 0) {
        terms.push_back({ScalarField::constant(amp), amp});
        continue;
      }
      const double fi = static_cast<double>(i);
      const double fj = static_cast<double>(j);
      terms.push_back({ScalarField::separable(2.0 * amp, [fi](double x) { return std::cos(fi * kPi * x); },
                                              [fj](double y) { return std::cos(fj * kPi * y); }),
                       2.0 * amp});
    }
    return terms;
  };
}

}  // namespace

std::shared_ptr<AffineCoefficient> make_tp_coefficient(TestProblem problem, std::uint32_t max_terms) {
  std::shared_ptr<AffineCoefficient> c;
  switch (problem) {
    case TestProblem::TP1:
      c = std::make_shared<AffineCoefficient>(ScalarField::constant(1.0), 1.0, 1.0, tp1_generator());
      break;
    case TestProblem::TP2:
      c = std::make_shared<AffineCoefficient>(ScalarField::constant(1.0), 1.0, 1.0,
                                              cosine_decay_generator(0.547, 2.0));
      break;
    case TestProblem::TP3:
      c = std::make_shared<AffineCoefficient>(ScalarField::constant(1.0), 1.0, 1.0,
                                              cosine_decay_generator(0.832, 4.0));
      break;
    case TestProblem::TP4:
      c = std::make_shared<AffineCoefficient>(ScalarField::constant(2.0), 2.0, 2.0, tp4_generator());
      break;
  }
  if (max_terms > 0) c->realize(max_terms);
  return c;
}

ProblemData make_problem(TestProblem problem) {
  ProblemData p;
  p.name = to_string(problem);
  p.coefficient = make_tp_coefficient(problem, 0);
  if (problem == TestProblem::TP1) {
    p.domain = Square{-1.0, -1.0, 2.0};
    p.load = ScalarField::constant(0.25) +
             ScalarField::separable(-0.125, [](double x) { return x * x; }, {}) +
             ScalarField::separable(-0.125, {}, [](double y) { return y * y; });
  } else {
    p.domain = Square{0.0, 0.0, 1.0};
    p.load = ScalarField::constant(1.0);
  }
  return p;
}

ProblemData make_custom_problem(double a0, std::vector<CosineTerm> terms, double load) {
  if (!(a0 > 0.0)) throw std::invalid_argument("a0 must be positive");
  std::stable_sort(terms.begin(), terms.end(), [](const CosineTerm& x, const CosineTerm& y) {
    return std::abs(x.amplitude) > std::abs(y.amplitude);
  });
  auto gen = [terms](std::uint32_t n) {
    std::vector<AffineCoefficient::Term> out;
    out.reserve(n);
    for (std::uint32_t m = 0; m < n; ++m) {
      if (m >= terms.size()) {
        // Beyond the supplied expansion the parameters do not enter.
        out.push_back({ScalarField(), 0.0});
        continue;
      }
      const CosineTerm t = terms[m];
      out.push_back({ScalarField::separable(t.amplitude, [k = t.k1](double x) { return std::cos(k * kPi * x); },
                                            [k = t.k2](double y) { return std::cos(k * kPi * y); }),
                     std::abs(t.amplitude)});
    }
    return out;
  };
  ProblemData p;
  p.name = "custom";
  p.domain = Square{0.0, 0.0, 1.0};
  p.coefficient = std::make_shared<AffineCoefficient>(ScalarField::constant(a0), a0, a0, gen);
  p.load = ScalarField::constant(load);
  return p;
}

CoefficientBounds coefficient_bounds(const AffineCoefficient& c, std::uint32_t terms_used) {
  double s = 0.0;
  for (std::uint32_t m = 1; m <= terms_used; ++m) s += c.sup_norm(m);
  CoefficientBounds b{};
  b.a0_min = c.a0_min();
  b.a0_max = c.a0_max();
  b.a_min = c.a0_min() - s;
  b.a_max = c.a0_max() + s;
  if (!(b.a_min > 0.0)) throw std::domain_error("coefficient is not uniformly positive");
  b.lambda = b.a0_min / b.a_max;
  b.big_lambda = b.a0_max / b.a_min;
  return b;
}

}  // namespace mlsg
