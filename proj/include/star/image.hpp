#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace star {

// ---------------------------------------------------------------------------
// Errors

/// Base class for everything thrown by this library.
class StarError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed caller input: bad dimensions, non-finite pixels, values out of a
/// documented range.
class InvalidInput : public StarError {
 public:
  using StarError::StarError;
};

/// Stream or file level failure: bad magic, truncated payload, codec error.
class IoError : public StarError {
 public:
  using StarError::StarError;
};

/// An iterative solve stopped before reaching the requested residual.
class SolverFailure : public StarError {
 public:
  SolverFailure(const std::string& msg, double residual_)
      : StarError(msg), residual(residual_) {}
  double residual = 0.0;
};

/// Dense factorization hit a non-positive pivot.
class SingularSystem : public StarError {
 public:
  using StarError::StarError;
};

/// Illuminant estimate unusable for correction (zero or negative channel).
class InvalidIlluminant : public StarError {
 public:
  using StarError::StarError;
};

// ---------------------------------------------------------------------------
// Grid type

/// H x W plane of real intensities, row major, nominal range [0,1].
/// Solver intermediates may leave [0,1]; values are always finite.
struct ImageGrid {
  int height = 0;
  int width = 0;
  std::vector<double> data;

  ImageGrid() = default;
  ImageGrid(int h, int w, double fill = 0.0)
      : height(h), width(w),
        data(static_cast<std::size_t>(h) * static_cast<std::size_t>(w), fill) {
    if (h < 1 || w < 1) throw InvalidInput("ImageGrid: dimensions must be >= 1");
  }

  double& at(int r, int c) {
    return data[static_cast<std::size_t>(r) * width + c];
  }
  double at(int r, int c) const {
    return data[static_cast<std::size_t>(r) * width + c];
  }

  std::size_t size() const { return data.size(); }

  bool same_shape(const ImageGrid& o) const {
    return height == o.height && width == o.width;
  }
};

/// Three planes of equal shape, linear intensities in [0,1].
struct RgbImage {
  ImageGrid r, g, b;

  int height() const { return r.height; }
  int width() const { return r.width; }
};

/// Hue as fraction of a full turn in [0,1), saturation and value in [0,1].
struct HsvImage {
  ImageGrid h, s, v;

  int height() const { return v.height; }
  int width() const { return v.width; }
};

// ---------------------------------------------------------------------------
// Small grid helpers

inline double frobenius_norm(const ImageGrid& g) {
  double acc = 0.0;
  for (double x : g.data) acc += x * x;
  return std::sqrt(acc);
}

inline double mean_value(const ImageGrid& g) {
  double acc = 0.0;
  for (double x : g.data) acc += x;
  return acc / static_cast<double>(g.size());
}

inline ImageGrid clamp01(ImageGrid g) {
  for (double& x : g.data) x = std::clamp(x, 0.0, 1.0);
  return g;
}

/// Throws InvalidInput naming the first offending pixel index.
inline void require_finite(const ImageGrid& g, const char* what) {
  for (std::size_t i = 0; i < g.data.size(); ++i) {
    if (!std::isfinite(g.data[i])) {
      throw InvalidInput(std::string(what) + ": non-finite value at pixel index " +
                         std::to_string(i));
    }
  }
}

inline void require_same_shape(const ImageGrid& a, const ImageGrid& b,
                               const char* what) {
  if (!a.same_shape(b)) {
    throw InvalidInput(std::string(what) + ": dimension mismatch (" +
                       std::to_string(a.height) + "x" + std::to_string(a.width) +
                       " vs " + std::to_string(b.height) + "x" +
                       std::to_string(b.width) + ")");
  }
}

inline void require_valid_rgb(const RgbImage& img, const char* what) {
  require_same_shape(img.r, img.g, what);
  require_same_shape(img.r, img.b, what);
  require_finite(img.r, what);
  require_finite(img.g, what);
  require_finite(img.b, what);
}

}  // namespace star
