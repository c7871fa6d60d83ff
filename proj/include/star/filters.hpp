#pragma once

#include <cmath>

#include "star/image.hpp"

namespace star {

/// Square window of (2*radius+1)^2 pixels, truncated at image borders.
struct WindowSpec {
  int radius = 1;
};

/// Exponents and stabilizer for the structure/texture weighting maps.
/// gamma_s > 1 amplifies structure, gamma_t < 1 reveals texture.
struct WeightParams {
  double gamma_s = 1.5;
  double gamma_t = 0.5;
  double eps_weight = 1e-2;
};

enum class WeightKind { Etv, Emlv };

/// One plane per derivative direction.
struct PlanePair {
  ImageGrid x;
  ImageGrid y;
};

/// Forward differences with Neumann boundary: the last column of x (last row
/// of y) is zero.
inline PlanePair forward_gradient(const ImageGrid& g) {
  const int h = g.height, w = g.width;
  PlanePair out{ImageGrid(h, w), ImageGrid(h, w)};
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      out.x.at(r, c) = (c < w - 1) ? g.at(r, c + 1) - g.at(r, c) : 0.0;
      out.y.at(r, c) = (r < h - 1) ? g.at(r + 1, c) - g.at(r, c) : 0.0;
    }
  }
  return out;
}

/// Per-direction absolute gradients (|gx|, |gy|).
inline PlanePair tv_map(const ImageGrid& g) {
  PlanePair out = forward_gradient(g);
  for (double& v : out.x.data) v = std::fabs(v);
  for (double& v : out.y.data) v = std::fabs(v);
  return out;
}

/// Per-direction absolute value of the window mean of the gradient. The
/// window is clipped at borders and the mean taken over the valid cells.
inline PlanePair mlv_map(const ImageGrid& g, WindowSpec w) {
  if (w.radius < 0) throw InvalidInput("mlv_map: radius must be >= 0");
  const PlanePair grad = forward_gradient(g);
  const int h = g.height, wd = g.width, ra = w.radius;
  PlanePair out{ImageGrid(h, wd), ImageGrid(h, wd)};
  for (int r = 0; r < h; ++r) {
    const int r0 = std::max(0, r - ra), r1 = std::min(h - 1, r + ra);
    for (int c = 0; c < wd; ++c) {
      const int c0 = std::max(0, c - ra), c1 = std::min(wd - 1, c + ra);
      double sx = 0.0, sy = 0.0;
      for (int rr = r0; rr <= r1; ++rr) {
        for (int cc = c0; cc <= c1; ++cc) {
          sx += grad.x.at(rr, cc);
          sy += grad.y.at(rr, cc);
        }
      }
      const double count = static_cast<double>((r1 - r0 + 1) * (c1 - c0 + 1));
      out.x.at(r, c) = std::fabs(sx / count);
      out.y.at(r, c) = std::fabs(sy / count);
    }
  }
  return out;
}

/// Pointwise m^gamma on a nonnegative map; 0^gamma = 0 for gamma > 0.
inline ImageGrid exponentiate_map(const ImageGrid& m, double gamma) {
  ImageGrid out = m;
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    const double v = out.data[i];
    if (v < 0.0) {
      throw InvalidInput("exponentiate_map: negative value at pixel index " +
                         std::to_string(i));
    }
    out.data[i] = std::pow(v, gamma);
  }
  return out;
}

/// Reciprocal exponentiated derivative map, one plane per direction:
/// weight_d = 1 / (map_d^gamma + eps_weight). Outputs lie in
/// (0, 1/eps_weight].
inline PlanePair build_weight(const ImageGrid& source, double gamma,
                              double eps_weight, WindowSpec w,
                              WeightKind kind) {
  if (eps_weight <= 0.0) throw InvalidInput("build_weight: eps_weight must be > 0");
  PlanePair map = (kind == WeightKind::Etv) ? tv_map(source) : mlv_map(source, w);
  for (ImageGrid* plane : {&map.x, &map.y}) {
    for (double& v : plane->data) v = 1.0 / (std::pow(v, gamma) + eps_weight);
  }
  return map;
}

}  // namespace star
