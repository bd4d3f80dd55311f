#pragma once

#include "mipdiff/field.hpp"

namespace mipdiff {

/// First and second central differences of a field (unit spacing,
/// reflected boundary u(-1) = u(1)). uxy is shared by both off-diagonal
/// Hessian entries.
struct DerivativeBundle {
  ScalarField ux, uy, uxx, uyy, uxy;

  std::size_t width() const noexcept { return ux.width(); }
  std::size_t height() const noexcept { return ux.height(); }
};

DerivativeBundle derivatives(const ScalarField& field);

struct Direction {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Direction&, const Direction&) = default;
};

struct Eigen2 {
  double lambda_max = 0.0;
  double lambda_min = 0.0;
  Direction e1;  // eigenvector of lambda_max
  Direction e2;  // eigenvector of lambda_min
};

/// Closed-form eigen-solve of the symmetric matrix [[a, b], [b, c]].
/// A zero matrix yields (0,0) directions; an isotropic nonzero matrix
/// yields e1 = (1,0), e2 = (0,1). Each eigenvector is oriented so that its
/// larger-magnitude component is non-negative (x wins ties).
Eigen2 symmetric_eigen(double a, double b, double c) noexcept;

struct HessianEigenField {
  ScalarField lambda_max, lambda_min;
  ScalarField e1_x, e1_y, e2_x, e2_y;
};

HessianEigenField hessian_eigen(const DerivativeBundle& bundle);

/// v^T H v at a single pixel.
inline double quadratic_form(const DerivativeBundle& b, std::size_t i, Direction v) noexcept {
  if (v.x == 0.0 && v.y == 0.0) return 0.0;
  return v.x * v.x * b.uxx[i] + 2.0 * v.x * v.y * b.uxy[i] + v.y * v.y * b.uyy[i];
}

ScalarField directional_second_derivative(const DerivativeBundle& bundle, Direction v);
/// Per-pixel direction variant (vx, vy fields), used with eigen/gradient fields.
ScalarField directional_second_derivative(const DerivativeBundle& bundle,
                                          const ScalarField& vx, const ScalarField& vy);

/// C = sqrt(uxx^2 + uyy^2).
ScalarField structureness(const DerivativeBundle& bundle);

/// Gradient direction, curvature directions, second directional
/// derivatives along each and structureness: the per-pixel state consumed
/// by the directional filters.
struct DiffusionBasis {
  ScalarField eta_x, eta_y;
  ScalarField e1_x, e1_y;
  ScalarField e2_x, e2_y;
  ScalarField d_eta, d_e1, d_e2;
  ScalarField c;
  ScalarField grad_mag;
};

DiffusionBasis diffusion_basis(const DerivativeBundle& bundle);

}  // namespace mipdiff
