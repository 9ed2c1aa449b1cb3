#include "mlsgfem/quadrature.hpp"

#include <map>
#include <mutex>
#include <stdexcept>

#include <boost/math/special_functions/legendre.hpp>

namespace mlsg {
namespace {

GaussRule make_rule(int q) {
  // legendre_p_zeros returns the non-negative zeros of P_q in ascending order.
  const auto half = boost::math::legendre_p_zeros<double>(q);
  std::vector<double> xs;
  for (auto it = half.rbegin(); it != half.rend(); ++it)
    if (*it != 0.0) xs.push_back(-*it);
  for (double z : half) xs.push_back(z);
  GaussRule rule;
  for (double x : xs) {
    const double dp = boost::math::legendre_p_prime(q, x);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes.push_back(0.5 * (x + 1.0));
    rule.weights.push_back(0.5 * w);
  }
  return rule;
}

}  // namespace

const GaussRule& gauss_legendre(int q) {
  if (q < 1) throw std::invalid_argument("quadrature order must be >= 1");
  static std::mutex mutex;
  static std::map<int, GaussRule> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find(q);
  if (it == cache.end()) it = cache.emplace(q, make_rule(q)).first;
  return it->second;
}

}  // namespace mlsg
