#include "mlsgfem/field.hpp"

#include <algorithm>

namespace mlsg {

ScalarField ScalarField::constant(double value) {
  ScalarField f;
  if (value != 0.0) f.terms_.push_back({value, {}, {}});
  return f;
}

ScalarField ScalarField::separable(double scale, Fn1 fx, Fn1 fy) {
  ScalarField f;
  f.terms_.push_back({scale, std::move(fx), std::move(fy)});
  return f;
}

ScalarField& ScalarField::operator+=(const ScalarField& other) {
  terms_.insert(terms_.end(), other.terms_.begin(), other.terms_.end());
  return *this;
}

double ScalarField::operator()(double x1, double x2) const {
  double s = 0.0;
  for (const auto& t : terms_) {
    double v = t.scale;
    if (t.fx) v *= t.fx(x1);
    if (t.fy) v *= t.fy(x2);
    s += v;
  }
  return s;
}

ScalarField::AxisSamples ScalarField::sample_axes(std::span<const double> xs,
                                                  std::span<const double> ys) const {
  AxisSamples out;
  for (const auto& t : terms_) {
    std::vector<double> gx(xs.size());
    std::vector<double> gy(ys.size());
    for (std::size_t i = 0; i < xs.size(); ++i) gx[i] = t.fx ? t.fx(xs[i]) : 1.0;
    for (std::size_t j = 0; j < ys.size(); ++j) gy[j] = t.scale * (t.fy ? t.fy(ys[j]) : 1.0);
    out.x_.push_back(std::move(gx));
    out.y_.push_back(std::move(gy));
  }
  return out;
}

}  // namespace mlsg
