// Minimal library walkthrough: build a tiny test image in memory, decompose
// its value channel, and report what the two components look like.

#include <cstdio>

#include "star/star.hpp"

int main() {
  const int h = 64, w = 64;
  star::RgbImage img;
  img.r = star::ImageGrid(h, w);
  img.g = star::ImageGrid(h, w);
  img.b = star::ImageGrid(h, w);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      // lit-from-the-left gradient over a checkered surface
      const double light = 0.15 + 0.8 * c / (w - 1.0);
      const double albedo = ((r / 8 + c / 8) % 2 == 0) ? 0.9 : 0.4;
      img.r.at(r, c) = light * albedo;
      img.g.at(r, c) = light * albedo * 0.9;
      img.b.at(r, c) = light * albedo * 0.8;
    }
  }

  const star::HsvImage hsv = star::rgb_to_hsv(img);
  const star::Decomposition dec = star::star_decompose(hsv.v, star::StarParams{});

  std::printf("input value channel:  mean %.3f\n", star::mean_value(hsv.v));
  std::printf("illumination:         mean %.3f\n", star::mean_value(dec.illumination));
  std::printf("reflectance:          mean %.3f\n", star::mean_value(dec.reflectance));
  std::printf("inner iterations:     %zu\n", dec.trace.size());
  std::printf("final objective:      %.6g\n", dec.trace.back().objective);

  star::save_png("demo_input.png", img);
  star::save_png("demo_illumination.png",
                 star::hsv_to_rgb(star::replace_value_channel(hsv, dec.illumination)));
  star::save_png("demo_reflectance.png",
                 star::hsv_to_rgb(star::replace_value_channel(hsv, dec.reflectance)));
  std::printf("wrote demo_input.png, demo_illumination.png, demo_reflectance.png\n");
  return 0;
}
