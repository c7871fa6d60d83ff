#pragma once

// Brute-force reference implementations used by the test suites. Everything
// here recomputes from first principles (explicit dense matrices, plain
// loops) and deliberately shares no computation path with solver.hpp.

#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "star/solver.hpp"

namespace star::oracle {

struct DenseSystem {
  int n = 0;
  std::vector<double> matrix;  // row-major n x n
  std::vector<double> rhs;

  double& at(int i, int j) { return matrix[static_cast<std::size_t>(i) * n + j]; }
  double at(int i, int j) const {
    return matrix[static_cast<std::size_t>(i) * n + j];
  }
};

/// Explicit dense forward-difference matrices for an h x w grid, row-major
/// vectorization. Row (r,c) of the x matrix is -1 at (r,c), +1 at (r,c+1)
/// except in the last column, which is a zero row; the y matrix likewise.
inline std::pair<std::vector<double>, std::vector<double>> dense_gradient_matrices(
    int h, int w) {
  const int n = h * w;
  std::vector<double> gx(static_cast<std::size_t>(n) * n, 0.0);
  std::vector<double> gy(static_cast<std::size_t>(n) * n, 0.0);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const int row = r * w + c;
      if (c < w - 1) {
        gx[static_cast<std::size_t>(row) * n + row] = -1.0;
        gx[static_cast<std::size_t>(row) * n + row + 1] = 1.0;
      }
      if (r < h - 1) {
        gy[static_cast<std::size_t>(row) * n + row] = -1.0;
        gy[static_cast<std::size_t>(row) * n + row + w] = 1.0;
      }
    }
  }
  return {std::move(gx), std::move(gy)};
}

/// Explicit normal equations diag(f^2) + lambda (Gx^T Wx Gx + Gy^T Wy Gy),
/// assembled by dense matrix products; rhs is f . o.
inline DenseSystem assemble_dense(const GradientOperator& op,
                                  const DiagonalWeights& weights,
                                  std::span<const double> fixed_factor,
                                  std::span<const double> observation,
                                  double lambda) {
  const int n = static_cast<int>(op.size());
  if (n > 4096) throw InvalidInput("assemble_dense: size cap 64x64 exceeded");

  auto [gx, gy] = dense_gradient_matrices(op.height, op.width);
  DenseSystem sys;
  sys.n = n;
  sys.matrix.assign(static_cast<std::size_t>(n) * n, 0.0);
  sys.rhs.assign(n, 0.0);

  // scaled = diag(w) * G, then accumulate G^T * scaled
  auto accumulate = [&](const std::vector<double>& g,
                        const std::vector<double>& w) {
    std::vector<double> scaled(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        scaled[static_cast<std::size_t>(i) * n + j] =
            w[i] * g[static_cast<std::size_t>(i) * n + j];
      }
    }
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        double acc = 0.0;
        for (int k = 0; k < n; ++k) {
          acc += g[static_cast<std::size_t>(k) * n + i] *
                 scaled[static_cast<std::size_t>(k) * n + j];
        }
        sys.matrix[static_cast<std::size_t>(i) * n + j] += lambda * acc;
      }
    }
  };
  accumulate(gx, weights.reg_diag_x);
  accumulate(gy, weights.reg_diag_y);

  for (int i = 0; i < n; ++i) {
    sys.matrix[static_cast<std::size_t>(i) * n + i] +=
        fixed_factor[i] * fixed_factor[i];
    sys.rhs[i] = fixed_factor[i] * observation[i];
  }
  return sys;
}

/// Cholesky solve with a residual check; throws SingularSystem on a
/// non-positive pivot.
inline std::vector<double> dense_solve(const DenseSystem& sys) {
  const int n = sys.n;
  std::vector<double> l(static_cast<std::size_t>(n) * n, 0.0);
  for (int j = 0; j < n; ++j) {
    double d = sys.at(j, j);
    for (int k = 0; k < j; ++k) d -= l[static_cast<std::size_t>(j) * n + k] *
                                     l[static_cast<std::size_t>(j) * n + k];
    if (!(d > 0.0)) {
      throw SingularSystem("dense_solve: non-positive pivot at row " +
                           std::to_string(j));
    }
    l[static_cast<std::size_t>(j) * n + j] = std::sqrt(d);
    for (int i = j + 1; i < n; ++i) {
      double s = sys.at(i, j);
      for (int k = 0; k < j; ++k) {
        s -= l[static_cast<std::size_t>(i) * n + k] *
             l[static_cast<std::size_t>(j) * n + k];
      }
      l[static_cast<std::size_t>(i) * n + j] =
          s / l[static_cast<std::size_t>(j) * n + j];
    }
  }
  std::vector<double> x = sys.rhs;
  for (int i = 0; i < n; ++i) {
    double s = x[i];
    for (int k = 0; k < i; ++k) s -= l[static_cast<std::size_t>(i) * n + k] * x[k];
    x[i] = s / l[static_cast<std::size_t>(i) * n + i];
  }
  for (int i = n - 1; i >= 0; --i) {
    double s = x[i];
    for (int k = i + 1; k < n; ++k) s -= l[static_cast<std::size_t>(k) * n + i] * x[k];
    x[i] = s / l[static_cast<std::size_t>(i) * n + i];
  }

  double rnorm = 0.0, bnorm = 0.0;
  for (int i = 0; i < n; ++i) {
    double ax = 0.0;
    for (int j = 0; j < n; ++j) ax += sys.at(i, j) * x[j];
    rnorm += (ax - sys.rhs[i]) * (ax - sys.rhs[i]);
    bnorm += sys.rhs[i] * sys.rhs[i];
  }
  if (bnorm > 0.0 && std::sqrt(rnorm / bnorm) > 1e-10) {
    throw SolverFailure("dense_solve: residual above 1e-10",
                        std::sqrt(rnorm / bnorm));
  }
  return x;
}

using ValueFn = std::function<double(std::span<const double>)>;
using GradientFn = std::function<std::vector<double>(std::span<const double>)>;

/// Steepest descent on a convex quadratic. Step length comes from an exact
/// line search (the gradient is affine, so A*g = grad(x+g) - grad(x)); `rate`
/// is the fallback step when the curvature probe is not positive. Runs the
/// gradient norm down to 1e-8 of its initial value, comfortably under the
/// 1e-6 contract.
inline std::vector<double> descent_minimize(const ValueFn& value,
                                            const GradientFn& gradient,
                                            std::vector<double> x, int max_steps,
                                            double rate) {
  const std::vector<double> g0 = gradient(x);
  double g0_norm = 0.0;
  for (double v : g0) g0_norm += v * v;
  g0_norm = std::sqrt(g0_norm);
  if (g0_norm == 0.0) return x;

  double prev_value = value(x);
  int rises = 0;
  std::vector<double> probe(x.size());
  for (int step = 0; step < max_steps; ++step) {
    const std::vector<double> g = gradient(x);
    double gnorm2 = 0.0;
    for (double v : g) gnorm2 += v * v;
    if (std::sqrt(gnorm2) <= 1e-8 * g0_norm) return x;

    for (std::size_t i = 0; i < x.size(); ++i) probe[i] = x[i] + g[i];
    const std::vector<double> gp = gradient(probe);
    double curvature = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) curvature += g[i] * (gp[i] - g[i]);
    const double alpha = curvature > 0.0 ? gnorm2 / curvature : rate;

    for (std::size_t i = 0; i < x.size(); ++i) x[i] -= alpha * g[i];
    const double v = value(x);
    rises = (v > prev_value) ? rises + 1 : 0;
    if (rises >= 100) {
      throw SolverFailure("descent_minimize: objective rose 100 steps in a row", v);
    }
    prev_value = v;
  }
  return x;
}

/// Self-contained least-squares instance matching solve_subproblem's
/// contract. value() evaluates the quadratic with plain grid loops;
/// gradient() multiplies through the dense assembly.
struct SubproblemInstance {
  GradientOperator op;
  std::vector<double> observation;
  std::vector<double> fixed_factor;
  std::vector<double> reg_x;  // squared per-direction weights
  std::vector<double> reg_y;
  double lambda = 1.0;

  DiagonalWeights diagonals() const {
    DiagonalWeights w;
    w.data_diag.resize(fixed_factor.size());
    for (std::size_t i = 0; i < fixed_factor.size(); ++i) {
      w.data_diag[i] = fixed_factor[i] * fixed_factor[i];
    }
    w.reg_diag_x = reg_x;
    w.reg_diag_y = reg_y;
    return w;
  }

  /// ||o - f.x||^2 + lambda * (sum wx (dx x)^2 + sum wy (dy x)^2), with the
  /// forward differences written out longhand.
  double value(std::span<const double> x) const {
    const int h = op.height, w = op.width;
    double acc = 0.0;
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        const int i = r * w + c;
        const double e = observation[i] - fixed_factor[i] * x[i];
        acc += e * e;
        if (c < w - 1) {
          const double dx = x[i + 1] - x[i];
          acc += lambda * reg_x[i] * dx * dx;
        }
        if (r < h - 1) {
          const double dy = x[i + w] - x[i];
          acc += lambda * reg_y[i] * dy * dy;
        }
      }
    }
    return acc;
  }

  /// 2 (A x - b) via the dense assembly.
  std::vector<double> gradient(std::span<const double> x) const {
    const DenseSystem sys =
        assemble_dense(op, diagonals(), fixed_factor, observation, lambda);
    std::vector<double> g(sys.n);
    for (int i = 0; i < sys.n; ++i) {
      double ax = 0.0;
      for (int j = 0; j < sys.n; ++j) ax += sys.at(i, j) * x[j];
      g[i] = 2.0 * (ax - sys.rhs[i]);
    }
    return g;
  }

  std::vector<double> minimize_by_descent(std::span<const double> init,
                                          int max_steps = 200000,
                                          double rate = 1e-3) const {
    // assemble once; descent evaluates the gradient thousands of times
    const DenseSystem sys =
        assemble_dense(op, diagonals(), fixed_factor, observation, lambda);
    auto grad = [&sys](std::span<const double> v) {
      std::vector<double> g(sys.n);
      for (int i = 0; i < sys.n; ++i) {
        double ax = 0.0;
        for (int j = 0; j < sys.n; ++j) ax += sys.at(i, j) * v[j];
        g[i] = 2.0 * (ax - sys.rhs[i]);
      }
      return g;
    };
    std::vector<double> x(init.begin(), init.end());
    return descent_minimize(
        [this](std::span<const double> v) { return value(v); }, grad,
        std::move(x), max_steps, rate);
  }
};

}  // namespace star::oracle
