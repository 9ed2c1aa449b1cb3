#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <stdexcept>

namespace oracle {

Rule newton_gauss(int n) {
  Rule r;
  r.x.resize(n);
  r.w.resize(n);
  for (int i = 0; i < n; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    // recompute the derivative at the converged node
    double p0 = 1.0, p1 = x;
    for (int k = 2; k <= n; ++k) {
      const double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    dp = n * (x * p1 - p0) / (x * x - 1.0);
    r.x[n - 1 - i] = x;
    r.w[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  return r;
}

double legendre(int n, double y) {
  if (n == 0) return 1.0;
  double p0 = 1.0, p1 = y;
  for (int k = 2; k <= n; ++k) {
    const double p2 = ((2 * k - 1) * y * p1 - (k - 1) * p0) / k;
    p0 = p1;
    p1 = p2;
  }
  return p1;
}

double psi(int n, double y) { return std::sqrt(2.0 * n + 1.0) * legendre(n, y); }

double coupling(std::uint32_t m, const mlsg::MultiIndex& mu, const mlsg::MultiIndex& nu) {
  static const Rule rule = newton_gauss(64);
  const std::uint32_t len = std::max({m, mu.max_position(), nu.max_position(), 1u});
  double g = 1.0;
  for (std::uint32_t p = 1; p <= len; ++p) {
    double s = 0.0;
    for (std::size_t k = 0; k < rule.x.size(); ++k) {
      const double y = rule.x[k];
      s += 0.5 * rule.w[k] * (p == m ? y : 1.0) * psi(static_cast<int>(mu[p]), y) * psi(static_cast<int>(nu[p]), y);
    }
    g *= s;
  }
  return g;
}

namespace {

// One-dimensional nodal basis on a uniform mesh of width h starting at x0.
// Q1: nodes at x0 + p h. Q2: nodes at x0 + p h/2.
struct Basis1D {
  double value;
  double slope;
};

Basis1D q1_1d(int p, double h, double x0, double x) {
  const double s = (x - (x0 + p * h)) / h;
  if (s <= -1.0 || s >= 1.0) return {0.0, 0.0};
  return s < 0 ? Basis1D{1.0 + s, 1.0 / h} : Basis1D{1.0 - s, -1.0 / h};
}

Basis1D q2_1d(int p, double h, double x0, double x) {
  const double xi = (x - x0) / h;
  const int cell = static_cast<int>(std::floor(xi));
  const double t = xi - cell;
  if (p % 2 == 1) {
    if (cell != (p - 1) / 2) return {0.0, 0.0};
    return {4.0 * t * (1.0 - t), (4.0 - 8.0 * t) / h};
  }
  const int v = p / 2;
  if (cell == v) return {(1.0 - t) * (1.0 - 2.0 * t), (4.0 * t - 3.0) / h};
  if (cell == v - 1) return {t * (2.0 * t - 1.0), (4.0 * t - 1.0) / h};
  return {0.0, 0.0};
}

struct Eval {
  double value;
  double dx;
  double dy;
};

// Unknowns of `s` whose support meets the cell of its own level that
// contains (x, y), with values and gradients at (x, y).
void eval_space(const mlsg::FeSpace& s, double x, double y, std::vector<std::pair<int, Eval>>& out) {
  out.clear();
  const auto& d = s.mesh().domain();
  const double h = s.mesh().element_width();
  const int cx = std::clamp(static_cast<int>(std::floor((x - d.x0) / h)), 0, s.mesh().cells_per_side() - 1);
  const int cy = std::clamp(static_cast<int>(std::floor((y - d.y0) / h)), 0, s.mesh().cells_per_side() - 1);
  const bool q2 = s.kind() == mlsg::SpaceKind::BrokenQ2;
  const int per = q2 ? 3 : 2;
  const int base_x = q2 ? 2 * cx : cx;
  const int base_y = q2 ? 2 * cy : cy;
  for (int j = 0; j < per; ++j) {
    for (int i = 0; i < per; ++i) {
      const int p = base_x + i, qq = base_y + j;
      const int dof = s.dof_at(p, qq);
      if (dof < 0) continue;
      const Basis1D bx = q2 ? q2_1d(p, h, d.x0, x) : q1_1d(p, h, d.x0, x);
      const Basis1D by = q2 ? q2_1d(qq, h, d.y0, y) : q1_1d(qq, h, d.y0, y);
      out.push_back({dof, {bx.value * by.value, bx.slope * by.value, bx.value * by.slope}});
    }
  }
}

template <class F>
void integrate_cells(int level, const mlsg::Square& d, int q, F&& f) {
  const Rule r = newton_gauss(q);
  const int n = 1 << level;
  const double h = d.side / n;
  for (int cy = 0; cy < n; ++cy)
    for (int cx = 0; cx < n; ++cx)
      for (int b = 0; b < q; ++b)
        for (int a = 0; a < q; ++a) {
          const double x = d.x0 + (cx + 0.5 * (r.x[a] + 1.0)) * h;
          const double y = d.y0 + (cy + 0.5 * (r.x[b] + 1.0)) * h;
          f(x, y, 0.25 * r.w[a] * r.w[b] * h * h);
        }
}

}  // namespace

Dense stiffness(const mlsg::FeSpace& test, const mlsg::FeSpace& trial, const mlsg::ScalarField& coeff, int q) {
  if (!(test.mesh().domain() == trial.mesh().domain())) throw std::invalid_argument("domains differ");
  Dense k = Dense::Zero(test.dof_count(), trial.dof_count());
  std::vector<std::pair<int, Eval>> et, es;
  integrate_cells(std::max(test.level(), trial.level()), test.mesh().domain(), q, [&](double x, double y, double w) {
    eval_space(test, x, y, et);
    eval_space(trial, x, y, es);
    const double a = coeff(x, y) * w;
    for (const auto& [j, vj] : et)
      for (const auto& [i, vi] : es) k(j, i) += a * (vj.dx * vi.dx + vj.dy * vi.dy);
  });
  return k;
}

Eigen::VectorXd load(const mlsg::FeSpace& space, const mlsg::ScalarField& f, int q) {
  Eigen::VectorXd b = Eigen::VectorXd::Zero(space.dof_count());
  std::vector<std::pair<int, Eval>> e;
  integrate_cells(space.level(), space.mesh().domain(), q, [&](double x, double y, double w) {
    eval_space(space, x, y, e);
    const double fw = f(x, y) * w;
    for (const auto& [j, v] : e) b(j) += fw * v.value;
  });
  return b;
}

Dense block_operator(const mlsg::MultilevelSpace& space, const mlsg::AffineCoefficient& coeff,
                     const mlsg::Square& domain, int q) {
  const auto& jp = space.indices();
  const std::uint32_t big_m = space.active_dimension();
  std::map<int, mlsg::FeSpace> spaces;
  for (int l : space.levels()) spaces.try_emplace(l, mlsg::make_space(l, mlsg::SpaceKind::Q1, domain));
  std::map<std::tuple<std::uint32_t, int, int>, Dense> ks;
  Dense a = Dense::Zero(space.dof_count(), space.dof_count());
  for (std::size_t r = 0; r < jp.size(); ++r)
    for (std::size_t c = 0; c < jp.size(); ++c)
      for (std::uint32_t m = 0; m <= big_m; ++m) {
        const double g = coupling(m, jp[r], jp[c]);
        if (std::abs(g) < 1e-14) continue;
        const int lr = space.level(r), lc = space.level(c);
        auto it = ks.find({m, lr, lc});
        if (it == ks.end())
          it = ks.emplace(std::tuple{m, lr, lc}, stiffness(spaces.at(lr), spaces.at(lc), coeff.field(m), q)).first;
        a.block(space.block_offset(r), space.block_offset(c), space.block_size(r), space.block_size(c)) +=
            g * it->second;
      }
  return a;
}

EstimatorResult monolithic_estimator(const Eigen::VectorXd& u, const mlsg::MultilevelSpace& space,
                                     const mlsg::ProblemData& problem, std::uint32_t delta_m, int q) {
  using mlsg::MultiIndex;
  const auto& jp = space.indices();
  const auto& coeff = *problem.coefficient;
  const std::uint32_t big_m = space.active_dimension();

  EstimatorResult res;
  std::vector<int> lv = space.levels();
  std::sort(lv.begin(), lv.end());
  const std::size_t need = (lv.size() + 1) / 2;
  res.h_level = lv[need - 1];

  // J_Q by enumeration, then graded order to line up with the library.
  for (const auto& mu : jp)
    for (std::uint32_t m = 1; m <= big_m + delta_m; ++m)
      for (int s : {+1, -1}) {
        if (s < 0 && mu[m] == 0) continue;
        const MultiIndex nu = mu.shifted(m, s);
        if (jp.contains(nu)) continue;
        if (std::find(res.jq.begin(), res.jq.end(), nu) == res.jq.end()) res.jq.push_back(nu);
      }
  std::sort(res.jq.begin(), res.jq.end(), mlsg::graded_less);
  const std::uint32_t m_hi = std::max(big_m, [&] {
    std::uint32_t x = 0;
    for (const auto& nu : res.jq) x = std::max(x, nu.max_position());
    return x;
  }());

  // detail components: (multi-index, space)
  struct Part {
    MultiIndex index;
    mlsg::FeSpace space;
  };
  std::vector<Part> parts;
  for (std::size_t i = 0; i < jp.size(); ++i)
    parts.push_back({jp[i], mlsg::make_space(space.level(i), mlsg::SpaceKind::BrokenQ2, problem.domain)});
  for (const auto& nu : res.jq)
    parts.push_back({nu, mlsg::make_space(res.h_level, mlsg::SpaceKind::Q1, problem.domain)});
  std::vector<int> off{0};
  for (const auto& p : parts) off.push_back(off.back() + p.space.dof_count());

  std::map<int, mlsg::FeSpace> primal;
  for (int l : space.levels()) primal.try_emplace(l, mlsg::make_space(l, mlsg::SpaceKind::Q1, problem.domain));

  const int n = off.back();
  Dense b0 = Dense::Zero(n, n);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  for (std::size_t i = 0; i < parts.size(); ++i) {
    for (std::size_t j = 0; j < parts.size(); ++j) {
      const double g0 = coupling(0, parts[i].index, parts[j].index);
      if (std::abs(g0) < 1e-14) continue;
      b0.block(off[i], off[j], off[i + 1] - off[i], off[j + 1] - off[j]) =
          g0 * stiffness(parts[i].space, parts[j].space, coeff.a0(), q);
    }
    auto r = rhs.segment(off[i], off[i + 1] - off[i]);
    const double g_load = coupling(0, parts[i].index, MultiIndex{});
    if (std::abs(g_load) > 1e-14) r += g_load * load(parts[i].space, problem.load, q);
    for (std::size_t c = 0; c < jp.size(); ++c)
      for (std::uint32_t m = 0; m <= m_hi; ++m) {
        const double g = coupling(m, parts[i].index, jp[c]);
        if (std::abs(g) < 1e-14) continue;
        r -= g * stiffness(parts[i].space, primal.at(space.level(c)), coeff.field(m), q) *
             u.segment(space.block_offset(c), space.block_size(c));
      }
  }
  const Eigen::VectorXd e = b0.ldlt().solve(rhs);
  res.eta = std::sqrt(e.dot(rhs));
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const double v = std::sqrt(std::max(0.0, e.segment(off[i], off[i + 1] - off[i]).dot(
                                                 rhs.segment(off[i], off[i + 1] - off[i]))));
    (i < jp.size() ? res.spatial : res.parametric).push_back(v);
  }
  return res;
}

double cbs_constant(int level, const mlsg::Square& domain, const mlsg::ScalarField& a0, int q) {
  const auto v = mlsg::make_space(level, mlsg::SpaceKind::Q1, domain);
  const auto w = mlsg::make_space(level, mlsg::SpaceKind::BrokenQ2, domain);
  const Dense a11 = stiffness(v, v, a0, q);
  const Dense a22 = stiffness(w, w, a0, q);
  const Dense a21 = stiffness(w, v, a0, q);
  const Eigen::LLT<Dense> l11(a11), l22(a22);
  // gamma = || L22^{-1} A21 L11^{-T} ||_2
  Dense m = l22.matrixL().solve(a21);
  m = l11.matrixL().solve(m.transpose()).transpose();
  return Eigen::JacobiSVD<Dense>(m).singularValues()(0);
}

double nystrom_residual(const std::function<double(double)>& phi, double lambda, double l, double w, int n) {
  // the kernel has a kink at x' = x, so integrate each side separately
  const Rule r = newton_gauss(64);
  auto side = [&](double a, double b, double x) {
    double s = 0.0;
    for (std::size_t j = 0; j < r.x.size(); ++j) {
      const double t = 0.5 * (a + b) + 0.5 * (b - a) * r.x[j];
      s += 0.5 * (b - a) * r.w[j] * std::exp(-std::abs(x - t) / l) * phi(t);
    }
    return s;
  };
  double worst = 0.0, scale = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double x = -w + 2.0 * w * i / n;
    const double kx = side(-w, x, x) + side(x, w, x);
    worst = std::max(worst, std::abs(kx - lambda * phi(x)));
    scale = std::max(scale, std::abs(lambda * phi(x)));
  }
  return worst / scale;
}

std::vector<double> nystrom_eigenvalues_plain(double l, double w, int n) {
  const Rule r = newton_gauss(n);
  Dense k(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      k(i, j) = std::sqrt(w * r.w[i]) * std::exp(-std::abs(w * (r.x[i] - r.x[j])) / l) * std::sqrt(w * r.w[j]);
  Eigen::SelfAdjointEigenSolver<Dense> es(k, Eigen::EigenvaluesOnly);
  std::vector<double> ev(es.eigenvalues().data(), es.eigenvalues().data() + n);
  std::sort(ev.rbegin(), ev.rend());
  return ev;
}

std::vector<double> nystrom_eigenvalues(double l, double w, int n, int count) {
  // the kink limits plain Gauss to second order; two Richardson sweeps over n, 2n, 4n
  const auto a = nystrom_eigenvalues_plain(l, w, n), b = nystrom_eigenvalues_plain(l, w, 2 * n),
             c = nystrom_eigenvalues_plain(l, w, 4 * n);
  std::vector<double> ev(count);
  for (int i = 0; i < count; ++i) {
    const double r1 = (4.0 * b[i] - a[i]) / 3.0, r2 = (4.0 * c[i] - b[i]) / 3.0;
    ev[i] = (16.0 * r2 - r1) / 15.0;
  }
  return ev;
}

}  // namespace oracle
