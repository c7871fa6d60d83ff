#pragma once

#include <cmath>

#include "star/image.hpp"

namespace star {

/// Hexcone RGB -> HSV, pointwise. Value is exactly max(R,G,B); hue and
/// saturation are 0 on the gray axis (including pure black).
inline HsvImage rgb_to_hsv(const RgbImage& img) {
  require_valid_rgb(img, "rgb_to_hsv");

  HsvImage out;
  out.h = ImageGrid(img.height(), img.width());
  out.s = ImageGrid(img.height(), img.width());
  out.v = ImageGrid(img.height(), img.width());

  for (std::size_t i = 0; i < img.r.size(); ++i) {
    const double r = img.r.data[i];
    const double g = img.g.data[i];
    const double b = img.b.data[i];
    const double v = std::max({r, g, b});
    const double mn = std::min({r, g, b});
    const double d = v - mn;

    double h = 0.0;
    double s = 0.0;
    if (d > 0.0 && v > 0.0) {
      s = d / v;
      double h6;
      if (v == r) {
        h6 = (g - b) / d;
        if (h6 < 0.0) h6 += 6.0;
      } else if (v == g) {
        h6 = (b - r) / d + 2.0;
      } else {
        h6 = (r - g) / d + 4.0;
      }
      h = h6 / 6.0;
      if (h >= 1.0) h = 0.0;  // keep hue in [0,1)
    }
    out.h.data[i] = h;
    out.s.data[i] = s;
    out.v.data[i] = v;
  }
  return out;
}

/// Inverse hexcone conversion. Hue must lie in [0,1), saturation in [0,1].
inline RgbImage hsv_to_rgb(const HsvImage& img) {
  require_same_shape(img.h, img.s, "hsv_to_rgb");
  require_same_shape(img.h, img.v, "hsv_to_rgb");
  require_finite(img.v, "hsv_to_rgb");

  RgbImage out;
  out.r = ImageGrid(img.height(), img.width());
  out.g = ImageGrid(img.height(), img.width());
  out.b = ImageGrid(img.height(), img.width());

  for (std::size_t i = 0; i < img.v.size(); ++i) {
    const double h = img.h.data[i];
    const double s = img.s.data[i];
    const double v = img.v.data[i];
    if (!(h >= 0.0 && h < 1.0)) {
      throw InvalidInput("hsv_to_rgb: hue out of [0,1) at pixel index " +
                         std::to_string(i));
    }
    if (!(s >= 0.0 && s <= 1.0)) {
      throw InvalidInput("hsv_to_rgb: saturation out of [0,1] at pixel index " +
                         std::to_string(i));
    }

    const double h6 = h * 6.0;
    const int sector = static_cast<int>(h6) % 6;
    const double f = h6 - std::floor(h6);
    const double p = v * (1.0 - s);
    const double q = v * (1.0 - s * f);
    const double t = v * (1.0 - s * (1.0 - f));

    double r, g, b;
    switch (sector) {
      case 0: r = v; g = t; b = p; break;
      case 1: r = q; g = v; b = p; break;
      case 2: r = p; g = v; b = t; break;
      case 3: r = p; g = q; b = v; break;
      case 4: r = t; g = p; b = v; break;
      default: r = v; g = p; b = q; break;
    }
    out.r.data[i] = r;
    out.g.data[i] = g;
    out.b.data[i] = b;
  }
  return out;
}

/// Returns hsv with the value plane replaced by v clamped to [0,1].
inline HsvImage replace_value_channel(const HsvImage& hsv, const ImageGrid& v) {
  require_same_shape(hsv.v, v, "replace_value_channel");
  require_finite(v, "replace_value_channel");
  HsvImage out = hsv;
  out.v = clamp01(v);
  return out;
}

}  // namespace star
