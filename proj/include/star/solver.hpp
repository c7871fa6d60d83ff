#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "star/image.hpp"

namespace star {

/// Implicit forward-difference operator pair (Gx, Gy) on an H x W grid,
/// acting on row-major flattened vectors. Matches filters::forward_gradient.
struct GradientOperator {
  int height = 0;
  int width = 0;

  std::size_t size() const {
    return static_cast<std::size_t>(height) * width;
  }
};

/// Diagonals of the normal equations: data_diag holds the squared fixed
/// factor (e.g. r^2), reg_diag_x/y the squared per-direction weights.
struct DiagonalWeights {
  std::vector<double> data_diag;
  std::vector<double> reg_diag_x;
  std::vector<double> reg_diag_y;
};

enum class SolveMethod { ConjugateGradient, DenseDirect };

struct SolverSettings {
  SolveMethod method = SolveMethod::ConjugateGradient;
  double cg_tol = 1e-6;       // relative residual target
  int cg_max_iters = 10000;
  double tikhonov = 1e-12;    // keeps the all-zero data diagonal solvable
  int dense_max_pixels = 64 * 64;
};

namespace detail {

inline void check_length(const GradientOperator& op, std::size_t n,
                         const char* what) {
  if (n != op.size()) {
    throw InvalidInput(std::string(what) + ": length mismatch (" +
                       std::to_string(n) + " vs " + std::to_string(op.size()) +
                       ")");
  }
}

inline void apply_gradient_into(const GradientOperator& op,
                                std::span<const double> v,
                                std::span<double> gx, std::span<double> gy) {
  const int h = op.height, w = op.width;
  for (int r = 0; r < h; ++r) {
    const std::size_t row = static_cast<std::size_t>(r) * w;
    for (int c = 0; c < w; ++c) {
      gx[row + c] = (c < w - 1) ? v[row + c + 1] - v[row + c] : 0.0;
      gy[row + c] = (r < h - 1) ? v[row + w + c] - v[row + c] : 0.0;
    }
  }
}

inline void apply_gradient_transpose_into(const GradientOperator& op,
                                          std::span<const double> gx,
                                          std::span<const double> gy,
                                          std::span<double> out) {
  const int h = op.height, w = op.width;
  for (int r = 0; r < h; ++r) {
    const std::size_t row = static_cast<std::size_t>(r) * w;
    for (int c = 0; c < w; ++c) {
      double acc = 0.0;
      if (c > 0) acc += gx[row + c - 1];
      if (c < w - 1) acc -= gx[row + c];
      if (r > 0) acc += gy[row - w + c];
      if (r < h - 1) acc -= gy[row + c];
      out[row + c] = acc;
    }
  }
}

/// In-place Cholesky solve of a symmetric positive definite n x n system.
/// a is row-major and gets overwritten by its factor.
inline std::vector<double> cholesky_solve(int n, std::vector<double>& a,
                                          std::span<const double> b) {
  for (int j = 0; j < n; ++j) {
    double d = a[static_cast<std::size_t>(j) * n + j];
    for (int k = 0; k < j; ++k) {
      const double ljk = a[static_cast<std::size_t>(j) * n + k];
      d -= ljk * ljk;
    }
    if (!(d > 0.0)) {
      throw SingularSystem("cholesky_solve: non-positive pivot at row " +
                           std::to_string(j));
    }
    const double ljj = std::sqrt(d);
    a[static_cast<std::size_t>(j) * n + j] = ljj;
    for (int i = j + 1; i < n; ++i) {
      double s = a[static_cast<std::size_t>(i) * n + j];
      for (int k = 0; k < j; ++k) {
        s -= a[static_cast<std::size_t>(i) * n + k] *
             a[static_cast<std::size_t>(j) * n + k];
      }
      a[static_cast<std::size_t>(i) * n + j] = s / ljj;
    }
  }
  // forward then backward substitution
  std::vector<double> x(b.begin(), b.end());
  for (int i = 0; i < n; ++i) {
    double s = x[i];
    for (int k = 0; k < i; ++k) s -= a[static_cast<std::size_t>(i) * n + k] * x[k];
    x[i] = s / a[static_cast<std::size_t>(i) * n + i];
  }
  for (int i = n - 1; i >= 0; --i) {
    double s = x[i];
    for (int k = i + 1; k < n; ++k) s -= a[static_cast<std::size_t>(k) * n + i] * x[k];
    x[i] = s / a[static_cast<std::size_t>(i) * n + i];
  }
  return x;
}

}  // namespace detail

/// Flattened forward differences: returns (gx, gy) identical to
/// forward_gradient of the unflattened grid.
inline std::pair<std::vector<double>, std::vector<double>> apply_gradient(
    const GradientOperator& op, std::span<const double> v) {
  detail::check_length(op, v.size(), "apply_gradient");
  std::vector<double> gx(op.size()), gy(op.size());
  detail::apply_gradient_into(op, v, gx, gy);
  return {std::move(gx), std::move(gy)};
}

/// Adjoint of apply_gradient: <G u, (gx,gy)> == <u, G^T (gx,gy)> for all u.
inline std::vector<double> apply_gradient_transpose(const GradientOperator& op,
                                                    std::span<const double> gx,
                                                    std::span<const double> gy) {
  detail::check_length(op, gx.size(), "apply_gradient_transpose");
  detail::check_length(op, gy.size(), "apply_gradient_transpose");
  std::vector<double> out(op.size());
  detail::apply_gradient_transpose_into(op, gx, gy, out);
  return out;
}

/// One application of the normal matrix D_f^2 + lambda * (Gx^T Wx Gx +
/// Gy^T Wy Gy) with the squared diagonals from `weights`. No Tikhonov term.
inline std::vector<double> apply_normal(const GradientOperator& op,
                                        const DiagonalWeights& weights,
                                        double lambda,
                                        std::span<const double> x) {
  detail::check_length(op, x.size(), "apply_normal");
  const std::size_t n = op.size();
  std::vector<double> gx(n), gy(n), out(n);
  detail::apply_gradient_into(op, x, gx, gy);
  for (std::size_t i = 0; i < n; ++i) {
    gx[i] *= weights.reg_diag_x[i];
    gy[i] *= weights.reg_diag_y[i];
  }
  detail::apply_gradient_transpose_into(op, gx, gy, out);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = weights.data_diag[i] * x[i] + lambda * out[i];
  }
  return out;
}

namespace detail {

inline void validate_solve_inputs(const GradientOperator& op,
                                  const DiagonalWeights& weights,
                                  std::span<const double> fixed_factor,
                                  std::span<const double> observation,
                                  double lambda,
                                  const SolverSettings& settings) {
  const std::size_t n = op.size();
  check_length(op, fixed_factor.size(), "solve_subproblem(fixed_factor)");
  check_length(op, observation.size(), "solve_subproblem(observation)");
  check_length(op, weights.data_diag.size(), "solve_subproblem(data_diag)");
  check_length(op, weights.reg_diag_x.size(), "solve_subproblem(reg_diag_x)");
  check_length(op, weights.reg_diag_y.size(), "solve_subproblem(reg_diag_y)");
  if (!(lambda > 0.0)) throw InvalidInput("solve_subproblem: lambda must be > 0");
  if (!(settings.cg_tol > 0.0 && settings.cg_tol < 1.0)) {
    throw InvalidInput("solve_subproblem: cg_tol must lie in (0,1)");
  }
  if (settings.tikhonov < 0.0) {
    throw InvalidInput("solve_subproblem: tikhonov must be >= 0");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(weights.data_diag[i]) || weights.data_diag[i] < 0.0 ||
        !std::isfinite(weights.reg_diag_x[i]) || weights.reg_diag_x[i] <= 0.0 ||
        !std::isfinite(weights.reg_diag_y[i]) || weights.reg_diag_y[i] <= 0.0 ||
        !std::isfinite(fixed_factor[i]) || !std::isfinite(observation[i])) {
      throw InvalidInput("solve_subproblem: bad entry at index " +
                         std::to_string(i));
    }
  }
}

inline std::vector<double> solve_dense_direct(const GradientOperator& op,
                                              const DiagonalWeights& weights,
                                              double lambda,
                                              std::span<const double> b,
                                              const SolverSettings& settings) {
  const int n = static_cast<int>(op.size());
  if (n > settings.dense_max_pixels) {
    throw InvalidInput("solve_subproblem: grid too large for DenseDirect (" +
                       std::to_string(n) + " > " +
                       std::to_string(settings.dense_max_pixels) + " pixels)");
  }
  // Probe the matrix-free operator column by column.
  std::vector<double> a(static_cast<std::size_t>(n) * n);
  std::vector<double> e(n, 0.0);
  for (int j = 0; j < n; ++j) {
    e[j] = 1.0;
    const std::vector<double> col = apply_normal(op, weights, lambda, e);
    e[j] = 0.0;
    for (int i = 0; i < n; ++i) a[static_cast<std::size_t>(i) * n + j] = col[i];
    a[static_cast<std::size_t>(j) * n + j] += settings.tikhonov;
  }
  std::vector<double> a_factor = a;
  std::vector<double> x = detail::cholesky_solve(n, a_factor, b);

  double rnorm = 0.0, bnorm = 0.0;
  for (int i = 0; i < n; ++i) {
    double ax = 0.0;
    for (int j = 0; j < n; ++j) ax += a[static_cast<std::size_t>(i) * n + j] * x[j];
    rnorm += (ax - b[i]) * (ax - b[i]);
    bnorm += b[i] * b[i];
  }
  if (bnorm > 0.0 && std::sqrt(rnorm / bnorm) > 1e-10) {
    throw SolverFailure("solve_subproblem: dense residual above 1e-10",
                        std::sqrt(rnorm / bnorm));
  }
  return x;
}

}  // namespace detail

/// Solves (D_f^T D_f + lambda G^T D_w^2 G + tikhonov I) x = D_f^T o for the
/// flattened grid x. Jacobi-preconditioned conjugate gradients by default;
/// `init` warm-starts the iteration (empty means start from zero).
inline std::vector<double> solve_subproblem(
    const GradientOperator& op, const DiagonalWeights& weights,
    std::span<const double> fixed_factor, std::span<const double> observation,
    double lambda, const SolverSettings& settings,
    std::span<const double> init = {}) {
  detail::validate_solve_inputs(op, weights, fixed_factor, observation, lambda,
                                settings);
  const std::size_t n = op.size();

  std::vector<double> b(n);
  double bnorm2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    b[i] = fixed_factor[i] * observation[i];
    bnorm2 += b[i] * b[i];
  }
  if (bnorm2 == 0.0) {
    // SPD system with zero right-hand side: the unique solution is zero.
    return std::vector<double>(n, 0.0);
  }

  if (settings.method == SolveMethod::DenseDirect) {
    return detail::solve_dense_direct(op, weights, lambda, b, settings);
  }

  if (!init.empty()) detail::check_length(op, init.size(), "solve_subproblem(init)");

  // Jacobi diagonal of the full system matrix.
  const int h = op.height, w = op.width;
  std::vector<double> diag(n);
  for (int r = 0; r < h; ++r) {
    const std::size_t row = static_cast<std::size_t>(r) * w;
    for (int c = 0; c < w; ++c) {
      double d = 0.0;
      if (c < w - 1) d += weights.reg_diag_x[row + c];
      if (c > 0) d += weights.reg_diag_x[row + c - 1];
      if (r < h - 1) d += weights.reg_diag_y[row + c];
      if (r > 0) d += weights.reg_diag_y[row - w + c];
      diag[row + c] = weights.data_diag[row + c] + lambda * d + settings.tikhonov;
    }
  }

  std::vector<double> x(n, 0.0);
  if (!init.empty()) x.assign(init.begin(), init.end());

  std::vector<double> gx(n), gy(n), ap(n), resid(n), z(n), p(n);
  auto apply_full = [&](std::span<const double> v, std::span<double> out) {
    detail::apply_gradient_into(op, v, gx, gy);
    for (std::size_t i = 0; i < n; ++i) {
      gx[i] *= weights.reg_diag_x[i];
      gy[i] *= weights.reg_diag_y[i];
    }
    detail::apply_gradient_transpose_into(op, gx, gy, out);
    for (std::size_t i = 0; i < n; ++i) {
      out[i] = weights.data_diag[i] * v[i] + lambda * out[i] +
               settings.tikhonov * v[i];
    }
  };

  const double bnorm = std::sqrt(bnorm2);
  apply_full(x, resid);
  double rnorm2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    resid[i] = b[i] - resid[i];
    rnorm2 += resid[i] * resid[i];
  }
  if (std::sqrt(rnorm2) / bnorm <= settings.cg_tol) return x;

  double rz = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    z[i] = resid[i] / diag[i];
    rz += resid[i] * z[i];
  }
  p = z;

  double rel = std::sqrt(rnorm2) / bnorm;
  for (int it = 0; it < settings.cg_max_iters; ++it) {
    apply_full(p, ap);
    double pap = 0.0;
    for (std::size_t i = 0; i < n; ++i) pap += p[i] * ap[i];
    if (!(pap > 0.0)) {
      throw SolverFailure("solve_subproblem: CG breakdown (non-positive curvature)",
                          rel);
    }
    const double alpha = rz / pap;
    rnorm2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += alpha * p[i];
      resid[i] -= alpha * ap[i];
      rnorm2 += resid[i] * resid[i];
    }
    rel = std::sqrt(rnorm2) / bnorm;
    if (rel <= settings.cg_tol) {
      for (double v : x) {
        if (!std::isfinite(v)) {
          throw SolverFailure("solve_subproblem: non-finite solution", rel);
        }
      }
      return x;
    }
    double rz_next = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      z[i] = resid[i] / diag[i];
      rz_next += resid[i] * z[i];
    }
    const double beta = rz_next / rz;
    rz = rz_next;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  throw SolverFailure("solve_subproblem: CG did not converge within " +
                          std::to_string(settings.cg_max_iters) + " iterations",
                      rel);
}

}  // namespace star
