#pragma once

#include <vector>

namespace mlsg {

/// Gauss-Legendre rule mapped to [0, 1]; weights sum to 1.
struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
  int size() const { return static_cast<int>(nodes.size()); }
};

/// Cached q-point rule, q >= 1. Nodes ascending.
const GaussRule& gauss_legendre(int q);

}  // namespace mlsg
