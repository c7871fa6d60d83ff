#pragma once

#include <cmath>
#include <numbers>
#include <ostream>
#include <string>
#include <vector>

#include "star/filters.hpp"
#include "star/color.hpp"
#include "star/image.hpp"
#include "star/solver.hpp"

namespace star {

/// All scalar knobs of the decomposition.
///
/// The three epsilons play distinct roles: eps_div stabilizes divisions,
/// eps_weight stabilizes the weight denominators, eps_conv is the
/// relative-change stopping threshold of the inner loop.
struct StarParams {
  double alpha = 0.001;    // illumination regularization weight
  double beta = 0.0001;    // reflectance regularization weight
  double gamma_s = 1.5;    // structure exponent (> 1 amplifies structure)
  double gamma_t = 0.5;    // texture exponent (< 1 reveals texture)
  double eps_div = 1e-8;
  // Weight stabilizer, i.e. the gradient-map floor. 1e-2 keeps the flat-area
  // smoothing local (screening length of a few pixels at the default alpha);
  // much smaller floors push the illumination toward a global constant.
  double eps_weight = 1e-2;
  double eps_conv = 1e-2;
  int inner_iters = 20;    // K, hard cap of the alternating loop
  int outer_iters = 4;     // L, number of weight refreshes
  WindowSpec window{1};
  WeightKind weight_kind = WeightKind::Emlv;
  SolverSettings solver;

  void validate() const {
    if (!(alpha > 0.0)) throw InvalidInput("StarParams: alpha must be > 0");
    if (!(beta > 0.0)) throw InvalidInput("StarParams: beta must be > 0");
    if (inner_iters < 1) throw InvalidInput("StarParams: inner_iters must be >= 1");
    if (outer_iters < 1) throw InvalidInput("StarParams: outer_iters must be >= 1");
    if (!(eps_conv > 0.0)) throw InvalidInput("StarParams: eps_conv must be > 0");
    if (!(eps_div > 0.0)) throw InvalidInput("StarParams: eps_div must be > 0");
    if (!(eps_weight > 0.0)) throw InvalidInput("StarParams: eps_weight must be > 0");
    if (window.radius < 0) throw InvalidInput("StarParams: window radius must be >= 0");
  }
};

struct IterationRecord {
  int outer = 0;         // weight-refresh stage, 0-based
  int inner = 0;         // alternating iteration within the stage, 1-based
  double rel_change_i = 0.0;
  double rel_change_r = 0.0;
  double objective = 0.0;
};

struct Decomposition {
  ImageGrid illumination;
  ImageGrid reflectance;
  std::vector<IterationRecord> trace;
};

/// Per-channel mean illumination of an RGB image.
struct IlluminantEstimate {
  double r = 0.0;
  double g = 0.0;
  double b = 0.0;

  double norm() const { return std::sqrt(r * r + g * g + b * b); }
};

// ---------------------------------------------------------------------------

/// ||O - I.R||_F^2 + alpha (||Sx.dxI||^2 + ||Sy.dyI||^2)
///                 + beta (||Tx.dxR||^2 + ||Ty.dyR||^2)
inline double objective(const ImageGrid& o, const ImageGrid& i,
                        const ImageGrid& r, const PlanePair& s,
                        const PlanePair& t, double alpha, double beta) {
  require_same_shape(o, i, "objective");
  require_same_shape(o, r, "objective");
  require_same_shape(o, s.x, "objective");
  require_same_shape(o, s.y, "objective");
  require_same_shape(o, t.x, "objective");
  require_same_shape(o, t.y, "objective");

  double data = 0.0;
  for (std::size_t k = 0; k < o.size(); ++k) {
    const double e = o.data[k] - i.data[k] * r.data[k];
    data += e * e;
  }
  const PlanePair gi = forward_gradient(i);
  const PlanePair gr = forward_gradient(r);
  double reg_i = 0.0, reg_r = 0.0;
  for (std::size_t k = 0; k < o.size(); ++k) {
    const double sx = s.x.data[k] * gi.x.data[k];
    const double sy = s.y.data[k] * gi.y.data[k];
    const double tx = t.x.data[k] * gr.x.data[k];
    const double ty = t.y.data[k] * gr.y.data[k];
    reg_i += sx * sx + sy * sy;
    reg_r += tx * tx + ty * ty;
  }
  return data + alpha * reg_i + beta * reg_r;
}

namespace detail {

inline DiagonalWeights make_diagonals(const std::vector<double>& fixed,
                                      const PlanePair& reg) {
  DiagonalWeights w;
  w.data_diag.resize(fixed.size());
  w.reg_diag_x.resize(fixed.size());
  w.reg_diag_y.resize(fixed.size());
  for (std::size_t k = 0; k < fixed.size(); ++k) {
    w.data_diag[k] = fixed[k] * fixed[k];
    w.reg_diag_x[k] = reg.x.data[k] * reg.x.data[k];
    w.reg_diag_y[k] = reg.y.data[k] * reg.y.data[k];
  }
  return w;
}

inline double rel_change(const ImageGrid& next, const ImageGrid& prev,
                         double eps_div) {
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < next.size(); ++k) {
    const double d = next.data[k] - prev.data[k];
    num += d * d;
    den += prev.data[k] * prev.data[k];
  }
  return std::sqrt(num) / (std::sqrt(den) + eps_div);
}

}  // namespace detail

/// One alternating stage: updates I and R in turn with fixed weight maps
/// until the relative change of either falls to eps_conv or inner_iters
/// elapse. Solves are warm-started from the previous iterate.
inline Decomposition star_inner(const ImageGrid& o, const PlanePair& s_weights,
                                const PlanePair& t_weights,
                                const StarParams& params,
                                const ImageGrid& init_i, const ImageGrid& init_r,
                                int outer_index = 0) {
  params.validate();
  require_finite(o, "star_inner");
  require_same_shape(o, init_i, "star_inner");
  require_same_shape(o, init_r, "star_inner");
  for (const ImageGrid* plane :
       {&s_weights.x, &s_weights.y, &t_weights.x, &t_weights.y}) {
    require_same_shape(o, *plane, "star_inner");
    for (double v : plane->data) {
      if (!(v > 0.0) || !std::isfinite(v)) {
        throw InvalidInput("star_inner: weights must be strictly positive");
      }
    }
  }

  const GradientOperator op{o.height, o.width};
  Decomposition dec{init_i, init_r, {}};

  for (int k = 0; k < params.inner_iters; ++k) {
    const ImageGrid prev_i = dec.illumination;
    const ImageGrid prev_r = dec.reflectance;

    try {
      const DiagonalWeights wi =
          detail::make_diagonals(dec.reflectance.data, s_weights);
      dec.illumination.data =
          solve_subproblem(op, wi, dec.reflectance.data, o.data, params.alpha,
                           params.solver, prev_i.data);
    } catch (const SolverFailure& e) {
      throw SolverFailure("star_inner: I-update failed at stage " +
                              std::to_string(outer_index) + ", iteration " +
                              std::to_string(k + 1) + ": " + e.what(),
                          e.residual);
    }

    try {
      const DiagonalWeights wr =
          detail::make_diagonals(dec.illumination.data, t_weights);
      dec.reflectance.data =
          solve_subproblem(op, wr, dec.illumination.data, o.data, params.beta,
                           params.solver, prev_r.data);
    } catch (const SolverFailure& e) {
      throw SolverFailure("star_inner: R-update failed at stage " +
                              std::to_string(outer_index) + ", iteration " +
                              std::to_string(k + 1) + ": " + e.what(),
                          e.residual);
    }

    IterationRecord rec;
    rec.outer = outer_index;
    rec.inner = k + 1;
    rec.rel_change_i = detail::rel_change(dec.illumination, prev_i, params.eps_div);
    rec.rel_change_r = detail::rel_change(dec.reflectance, prev_r, params.eps_div);
    rec.objective = objective(o, dec.illumination, dec.reflectance, s_weights,
                              t_weights, params.alpha, params.beta);
    dec.trace.push_back(rec);

    if (rec.rel_change_i <= params.eps_conv || rec.rel_change_r <= params.eps_conv) {
      break;
    }
  }
  return dec;
}

/// Full decomposition of a value channel. Reweighted least squares over
/// outer_iters stages: each stage rebuilds the structure map from the
/// current I and the texture map from the current R, then re-runs the inner
/// loop from the standard V^0.5 start. Restarting the iterates (rather than
/// chaining them) keeps the data term anchored to the image; a chained I
/// drifts toward a constant as its own shrinking gradients feed back into
/// ever larger structure weights.
inline Decomposition star_decompose(const ImageGrid& v, const StarParams& params) {
  params.validate();
  require_finite(v, "star_decompose");
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (v.data[k] < 0.0 || v.data[k] > 1.0) {
      throw InvalidInput("star_decompose: value out of [0,1] at pixel index " +
                         std::to_string(k));
    }
  }

  ImageGrid init(v.height, v.width);
  for (std::size_t k = 0; k < v.size(); ++k) init.data[k] = std::sqrt(v.data[k]);

  Decomposition dec{init, init, {}};
  for (int l = 0; l < params.outer_iters; ++l) {
    const PlanePair s = build_weight(dec.illumination, params.gamma_s,
                                     params.eps_weight, params.window,
                                     params.weight_kind);
    const PlanePair t = build_weight(dec.reflectance, params.gamma_t,
                                     params.eps_weight, params.window,
                                     params.weight_kind);
    Decomposition stage = star_inner(v, s, t, params, init, init, l);
    dec.illumination = std::move(stage.illumination);
    dec.reflectance = std::move(stage.reflectance);
    dec.trace.insert(dec.trace.end(), stage.trace.begin(), stage.trace.end());
  }
  return dec;
}

// ---------------------------------------------------------------------------
// Applications

/// Gamma-brightened recombination R . I^(1/gamma_e) of a decomposition.
inline ImageGrid enhanced_value_channel(const Decomposition& dec,
                                        double gamma_e) {
  if (!(gamma_e > 0.0)) {
    throw InvalidInput("enhanced_value_channel: gamma_e must be > 0");
  }
  ImageGrid enhanced(dec.illumination.height, dec.illumination.width);
  for (std::size_t k = 0; k < enhanced.size(); ++k) {
    // Iterates are unclamped, so guard the fractional power against
    // slightly negative illumination values.
    const double illum = std::max(dec.illumination.data[k], 0.0);
    enhanced.data[k] = dec.reflectance.data[k] * std::pow(illum, 1.0 / gamma_e);
  }
  return enhanced;
}

/// Low-light enhancement: decompose the V channel, recombine as
/// V' = R . I^(1/gamma_e), keep the original hue and saturation.
inline RgbImage enhance_lowlight(const RgbImage& img, const StarParams& params,
                                 double gamma_e = 2.2) {
  if (!(gamma_e > 0.0)) throw InvalidInput("enhance_lowlight: gamma_e must be > 0");
  const HsvImage hsv = rgb_to_hsv(img);
  const Decomposition dec = star_decompose(hsv.v, params);
  return hsv_to_rgb(replace_value_channel(hsv, enhanced_value_channel(dec, gamma_e)));
}

/// Decomposes each RGB plane independently and returns the per-plane mean
/// illumination. An all-black plane has no usable illumination and raises
/// InvalidIlluminant.
inline IlluminantEstimate estimate_illuminant(const RgbImage& img,
                                              const StarParams& params) {
  require_valid_rgb(img, "estimate_illuminant");
  const ImageGrid* planes[3] = {&img.r, &img.g, &img.b};
  double means[3];
  for (int c = 0; c < 3; ++c) {
    double peak = 0.0;
    for (double x : planes[c]->data) peak = std::max(peak, x);
    if (peak == 0.0) {
      throw InvalidIlluminant("estimate_illuminant: channel " +
                              std::to_string(c) + " is all black");
    }
    means[c] = mean_value(star_decompose(*planes[c], params).illumination);
  }
  return IlluminantEstimate{means[0], means[1], means[2]};
}

/// Diagonal von Kries correction, normalized so a neutral estimate is the
/// identity: out_c = img_c * ||est|| / (sqrt(3) * est_c), clamped to [0,1].
inline RgbImage color_correct(const RgbImage& img, const IlluminantEstimate& est) {
  require_valid_rgb(img, "color_correct");
  if (!(est.r > 0.0) || !(est.g > 0.0) || !(est.b > 0.0)) {
    throw InvalidIlluminant("color_correct: estimate components must be > 0");
  }
  const double scale = est.norm() / std::sqrt(3.0);
  RgbImage out = img;
  const double f[3] = {scale / est.r, scale / est.g, scale / est.b};
  ImageGrid* planes[3] = {&out.r, &out.g, &out.b};
  for (int c = 0; c < 3; ++c) {
    for (double& x : planes[c]->data) x = std::clamp(x * f[c], 0.0, 1.0);
  }
  return out;
}

/// Angle in degrees between two illuminant vectors, cosine clamped to [-1,1].
inline double angular_error(const IlluminantEstimate& est,
                            const IlluminantEstimate& truth) {
  const double ne = est.norm();
  const double nt = truth.norm();
  if (ne == 0.0 || nt == 0.0) {
    throw InvalidInput("angular_error: zero-length illuminant vector");
  }
  const double dot = est.r * truth.r + est.g * truth.g + est.b * truth.b;
  const double c = std::clamp(dot / (ne * nt), -1.0, 1.0);
  return std::acos(c) * 180.0 / std::numbers::pi;
}

/// Convergence trace as CSV, one row per inner iteration.
inline void write_trace_csv(const std::vector<IterationRecord>& trace,
                            std::ostream& out) {
  out << "outer,inner,rel_change_I,rel_change_R,objective\n";
  for (const IterationRecord& rec : trace) {
    out << rec.outer << ',' << rec.inner << ',' << rec.rel_change_i << ','
        << rec.rel_change_r << ',' << rec.objective << '\n';
  }
}

}  // namespace star
