#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

namespace qfldp {

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

namespace detail {

template <unsigned N>
QuadratureRule expand_boost_rule() {
  using G = boost::math::quadrature::gauss<double, N>;
  const auto& x = G::abscissa();
  const auto& w = G::weights();
  QuadratureRule r;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] == 0.0) {
      r.nodes.push_back(0.0);
      r.weights.push_back(w[i]);
      continue;
    }
    r.nodes.push_back(-x[i]);
    r.weights.push_back(w[i]);
    r.nodes.push_back(x[i]);
    r.weights.push_back(w[i]);
  }
  return r;
}

}  // namespace detail

// Gauss-Legendre rules on [-1, 1]
inline const QuadratureRule& gauss_legendre_8() {
  static const QuadratureRule r = detail::expand_boost_rule<8>();
  return r;
}

inline const QuadratureRule& gauss_legendre_16() {
  static const QuadratureRule r = detail::expand_boost_rule<16>();
  return r;
}

// Composite 16-point rule on [a, b] with roughly `density` nodes per unit
// length; panels never straddle a breakpoint.
inline QuadratureRule composite_rule(double a, double b, int density,
                                     std::vector<double> breaks = {}) {
  QuadratureRule out;
  if (!(b > a)) return out;
  breaks.push_back(a);
  breaks.push_back(b);
  std::sort(breaks.begin(), breaks.end());
  const auto& g = gauss_legendre_16();
  for (std::size_t s = 0; s + 1 < breaks.size(); ++s) {
    double lo = std::max(a, breaks[s]);
    double hi = std::min(b, breaks[s + 1]);
    if (!(hi > lo)) continue;
    int panels = std::max(1, static_cast<int>(std::ceil((hi - lo) * density / 16.0 - 1e-12)));
    double width = (hi - lo) / panels;
    for (int p = 0; p < panels; ++p) {
      double c = lo + (p + 0.5) * width;
      for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        out.nodes.push_back(c + 0.5 * width * g.nodes[i]);
        out.weights.push_back(0.5 * width * g.weights[i]);
      }
    }
  }
  return out;
}

template <class F>
double integrate(F&& f, const QuadratureRule& r) {
  double acc = 0.0;
  for (std::size_t i = 0; i < r.nodes.size(); ++i) acc += r.weights[i] * f(r.nodes[i]);
  return acc;
}

}  // namespace qfldp
