#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "errors.hpp"
#include "lattice.hpp"
#include "quadrature.hpp"

namespace qfldp {

enum class FieldShape { smooth_bump, half_sine, square_ramp, sampled };

inline FieldShape parse_field_shape(const std::string& tag) {
  if (tag == "smooth-bump") return FieldShape::smooth_bump;
  if (tag == "half-sine") return FieldShape::half_sine;
  if (tag == "square-ramp") return FieldShape::square_ramp;
  if (tag == "sampled") return FieldShape::sampled;
  throw ConfigError("unknown field profile '" + tag + "'");
}

inline std::string to_string(FieldShape s) {
  switch (s) {
    case FieldShape::smooth_bump: return "smooth-bump";
    case FieldShape::half_sine: return "half-sine";
    case FieldShape::square_ramp: return "square-ramp";
    case FieldShape::sampled: return "sampled";
  }
  return "?";
}

constexpr double kRampFraction = 0.25;

// E(α) = amplitude · f(α + shift) · polarization, with f supported on [−T, 0]
// before the shift. `direction` is the unit vector w along which currents are
// measured.
struct FieldProfile {
  FieldShape shape = FieldShape::smooth_bump;
  int dim = 1;
  double T = 1.0;
  double amplitude = 1.0;
  double shift = 0.0;
  int density = 16;  // Gauss-Legendre nodes per unit time
  std::array<double, kMaxDim> polarization{1.0, 0.0, 0.0};
  std::array<double, kMaxDim> direction{1.0, 0.0, 0.0};
  std::vector<double> samples;  // uniform nodes on [−T, 0], sampled shape only

  void validate() const {
    if (dim < 1 || dim > kMaxDim) throw ConfigError("field dimension must be 1, 2 or 3");
    if (!(T > 0) || !std::isfinite(T)) throw ConfigError("field support T must be positive");
    if (!std::isfinite(amplitude)) throw ConfigError("field amplitude must be finite");
    if (density < 1) throw ConfigError("quadrature density must be positive");
    double n2 = 0;
    for (int i = 0; i < dim; ++i) n2 += direction[i] * direction[i];
    if (std::abs(std::sqrt(n2) - 1.0) > 1e-12) throw ConfigError("direction must be a unit vector");
    for (int i = dim; i < kMaxDim; ++i)
      if (direction[i] != 0.0 || polarization[i] != 0.0) throw ConfigError("field has components beyond d");
    if (shape == FieldShape::sampled) {
      if (samples.size() < 2) throw ConfigError("sampled field needs at least two samples");
      if (std::abs(samples.front()) > 1e-12 || std::abs(samples.back()) > 1e-12)
        throw ConfigError("sampled field must vanish at the ends of its support");
    }
  }

  // support [−T − shift, −shift]
  double support_lo() const { return -T - shift; }
  double support_hi() const { return -shift; }

  // unshifted shape on [−T, 0]
  double base_shape(double a) const {
    if (!(a > -T) || !(a < 0.0)) return 0.0;
    switch (shape) {
      case FieldShape::smooth_bump: {
        double u = (2.0 * a + T) / T;
        double g = 1.0 - u * u;
        if (g <= 0) return 0.0;
        return std::exp(1.0 - 1.0 / g);
      }
      case FieldShape::half_sine: return std::sin(M_PI * (a + T) / T);
      case FieldShape::square_ramp: {
        double r = kRampFraction * T;
        if (a < -T + r) return (a + T) / r;
        if (a > -r) return -a / r;
        return 1.0;
      }
      case FieldShape::sampled: {
        double pos = (a + T) / T * double(samples.size() - 1);
        std::size_t i = std::min<std::size_t>(static_cast<std::size_t>(pos), samples.size() - 2);
        double f = pos - double(i);
        return (1.0 - f) * samples[i] + f * samples[i + 1];
      }
    }
    return 0.0;
  }

  double scalar(double a) const { return amplitude * base_shape(a + shift); }

  double component(double a, int q) const { return scalar(a) * polarization[q]; }

  double norm_at(double a) const {
    double n2 = 0;
    for (int q = 0; q < dim; ++q) n2 += polarization[q] * polarization[q];
    return std::abs(scalar(a)) * std::sqrt(n2);
  }

  // kinks of the unshifted shape, including the support ends
  std::vector<double> base_breakpoints() const {
    std::vector<double> b{-T};
    if (shape == FieldShape::square_ramp) {
      b.push_back(-T + kRampFraction * T);
      b.push_back(-kRampFraction * T);
    } else if (shape == FieldShape::sampled) {
      for (std::size_t i = 1; i + 1 < samples.size(); ++i) b.push_back(-T + T * double(i) / (samples.size() - 1));
    }
    b.push_back(0.0);
    return b;
  }

  std::vector<double> breakpoints() const {
    auto b = base_breakpoints();
    for (auto& v : b) v -= shift;
    return b;
  }

  // ∫_{−T}^{t} f for the unshifted shape
  double base_primitive(double t) const {
    if (t <= -T) return 0.0;
    double tt = std::min(t, 0.0);
    switch (shape) {
      case FieldShape::half_sine: return T / M_PI * (1.0 - std::cos(M_PI * (tt + T) / T));
      case FieldShape::square_ramp: {
        double r = kRampFraction * T;
        double acc = 0.0;
        double x = std::min(tt, -T + r);
        acc += 0.5 * (x + T) * (x + T) / r;
        if (tt > -T + r) acc += std::min(tt, -r) - (-T + r);
        if (tt > -r) acc += 0.5 * (r * r - tt * tt) / r;
        return acc;
      }
      case FieldShape::sampled: {
        const std::size_t m = samples.size();
        double h = T / double(m - 1);
        double acc = 0.0;
        for (std::size_t i = 0; i + 1 < m; ++i) {
          double a = -T + h * double(i), b = a + h;
          if (tt <= a) break;
          double e = std::min(tt, b);
          double fe = samples[i] + (samples[i + 1] - samples[i]) * (e - a) / h;
          acc += 0.5 * (samples[i] + fe) * (e - a);
        }
        return acc;
      }
      case FieldShape::smooth_bump: {
        // 32 panels of 16 Gauss-Legendre nodes; the bump is flat at both ends
        const auto& g = gauss_legendre_16();
        const int panels = 32;
        double width = (tt + T) / panels, acc = 0.0;
        for (int k = 0; k < panels; ++k) {
          double c = -T + (k + 0.5) * width;
          for (std::size_t i = 0; i < g.nodes.size(); ++i)
            acc += 0.5 * width * g.weights[i] * base_shape(c + 0.5 * width * g.nodes[i]);
        }
        return acc;
      }
    }
    return 0.0;
  }

  double shape_integral() const { return base_primitive(0.0); }

  // ∫_{−∞}^{t} E_q / polarization_q
  double primitive(double t) const { return amplitude * base_primitive(t + shift); }

  // E_t(α) = E(α + t)
  FieldProfile shifted(double t) const {
    FieldProfile f = *this;
    f.shift += t;
    return f;
  }

  FieldProfile scaled(double s) const {
    FieldProfile f = *this;
    f.amplitude *= s;
    return f;
  }
};

inline FieldProfile field_profile(const std::string& tag, double T, int dim = 1, double amplitude = 1.0) {
  FieldProfile f;
  f.shape = parse_field_shape(tag);
  if (f.shape == FieldShape::sampled) throw ConfigError("sampled profiles are built with sampled_field_profile");
  f.T = T;
  f.dim = dim;
  f.amplitude = amplitude;
  f.validate();
  return f;
}

inline FieldProfile sampled_field_profile(std::vector<double> samples, double T, int dim = 1) {
  FieldProfile f;
  f.shape = FieldShape::sampled;
  f.samples = std::move(samples);
  f.T = T;
  f.dim = dim;
  f.validate();
  return f;
}

}  // namespace qfldp
