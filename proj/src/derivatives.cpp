#include "mipdiff/derivatives.hpp"

#include <cmath>

namespace mipdiff {
namespace {

// Reflected (Neumann) index: -1 -> 1, n -> n-2.
inline std::size_t reflect(std::ptrdiff_t i, std::size_t n) noexcept {
  const auto last = static_cast<std::ptrdiff_t>(n) - 1;
  if (i < 0) return static_cast<std::size_t>(-i);
  if (i > last) return static_cast<std::size_t>(2 * last - i);
  return static_cast<std::size_t>(i);
}

Direction orient(double x, double y) noexcept {
  const bool flip = std::abs(x) >= std::abs(y) ? x < 0.0 : y < 0.0;
  if (flip) {
    x = -x;
    y = -y;
  }
  // Normalise signed zeros so equal directions compare bit-identical.
  return {x + 0.0, y + 0.0};
}

}  // namespace

DerivativeBundle derivatives(const ScalarField& field) {
  const auto w = field.width();
  const auto h = field.height();
  if (w < 3 || h < 3)
    throw Error(ErrorCode::dimension_too_small, "derivatives need a field of at least 3x3");

  DerivativeBundle b{ScalarField(w, h), ScalarField(w, h), ScalarField(w, h), ScalarField(w, h),
                     ScalarField(w, h)};
  for (std::size_t y = 0; y < h; ++y) {
    const auto iy = static_cast<std::ptrdiff_t>(y);
    const auto ym = reflect(iy - 1, h);
    const auto yp = reflect(iy + 1, h);
    for (std::size_t x = 0; x < w; ++x) {
      const auto ix = static_cast<std::ptrdiff_t>(x);
      const auto xm = reflect(ix - 1, w);
      const auto xp = reflect(ix + 1, w);
      const double c = field(x, y);
      b.ux(x, y) = (field(xp, y) - field(xm, y)) / 2.0;
      b.uy(x, y) = (field(x, yp) - field(x, ym)) / 2.0;
      b.uxx(x, y) = field(xp, y) - 2.0 * c + field(xm, y);
      b.uyy(x, y) = field(x, yp) - 2.0 * c + field(x, ym);
      b.uxy(x, y) = (field(xp, yp) - field(xp, ym) - field(xm, yp) + field(xm, ym)) / 4.0;
    }
  }
  return b;
}

Eigen2 symmetric_eigen(double a, double b, double c) noexcept {
  Eigen2 out;
  if (a == 0.0 && b == 0.0 && c == 0.0) return out;

  const double mean = (a + c) / 2.0;
  const double half_diff = (a - c) / 2.0;
  const double radius = std::hypot(half_diff, b);
  out.lambda_max = mean + radius;
  out.lambda_min = mean - radius;
  if (radius == 0.0) {
    out.e1 = {1.0, 0.0};
    out.e2 = {0.0, 1.0};
    return out;
  }

  // Two algebraically equivalent eigenvector candidates for lambda_max;
  // pick the one that avoids cancellation.
  double vx, vy;
  if (half_diff >= 0.0) {
    vx = half_diff + radius;
    vy = b;
  } else {
    vx = b;
    vy = radius - half_diff;
  }
  const double norm = std::hypot(vx, vy);
  vx /= norm;
  vy /= norm;
  out.e1 = orient(vx, vy);
  out.e2 = orient(-vy, vx);
  return out;
}

HessianEigenField hessian_eigen(const DerivativeBundle& bundle) {
  const auto w = bundle.width();
  const auto h = bundle.height();
  require_same_shape(bundle.uxx, bundle.uyy, "hessian_eigen");
  require_same_shape(bundle.uxx, bundle.uxy, "hessian_eigen");
  HessianEigenField out{ScalarField(w, h), ScalarField(w, h), ScalarField(w, h),
                        ScalarField(w, h), ScalarField(w, h), ScalarField(w, h)};
  for (std::size_t i = 0; i < w * h; ++i) {
    const auto e = symmetric_eigen(bundle.uxx[i], bundle.uxy[i], bundle.uyy[i]);
    out.lambda_max[i] = e.lambda_max;
    out.lambda_min[i] = e.lambda_min;
    out.e1_x[i] = e.e1.x;
    out.e1_y[i] = e.e1.y;
    out.e2_x[i] = e.e2.x;
    out.e2_y[i] = e.e2.y;
  }
  return out;
}

ScalarField directional_second_derivative(const DerivativeBundle& bundle, Direction v) {
  ScalarField out(bundle.width(), bundle.height());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = quadratic_form(bundle, i, v);
  return out;
}

ScalarField directional_second_derivative(const DerivativeBundle& bundle, const ScalarField& vx,
                                          const ScalarField& vy) {
  require_same_shape(bundle.uxx, vx, "directional_second_derivative");
  require_same_shape(vx, vy, "directional_second_derivative");
  ScalarField out(bundle.width(), bundle.height());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = quadratic_form(bundle, i, {vx[i], vy[i]});
  return out;
}

ScalarField structureness(const DerivativeBundle& bundle) {
  ScalarField out(bundle.width(), bundle.height());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double a = bundle.uxx[i];
    const double c = bundle.uyy[i];
    out[i] = std::sqrt(a * a + c * c);
  }
  return out;
}

DiffusionBasis diffusion_basis(const DerivativeBundle& bundle) {
  const auto w = bundle.width();
  const auto h = bundle.height();
  DiffusionBasis out{ScalarField(w, h), ScalarField(w, h), ScalarField(w, h), ScalarField(w, h),
                     ScalarField(w, h), ScalarField(w, h), ScalarField(w, h), ScalarField(w, h),
                     ScalarField(w, h), ScalarField(w, h), ScalarField(w, h)};
  for (std::size_t i = 0; i < w * h; ++i) {
    const double gx = bundle.ux[i];
    const double gy = bundle.uy[i];
    const double gm = std::hypot(gx, gy);
    Direction eta;
    if (gm > 0.0) eta = {gx / gm, gy / gm};
    const auto e = symmetric_eigen(bundle.uxx[i], bundle.uxy[i], bundle.uyy[i]);

    out.eta_x[i] = eta.x;
    out.eta_y[i] = eta.y;
    out.e1_x[i] = e.e1.x;
    out.e1_y[i] = e.e1.y;
    out.e2_x[i] = e.e2.x;
    out.e2_y[i] = e.e2.y;
    out.d_eta[i] = quadratic_form(bundle, i, eta);
    out.d_e1[i] = quadratic_form(bundle, i, e.e1);
    out.d_e2[i] = quadratic_form(bundle, i, e.e2);
    const double a = bundle.uxx[i];
    const double c = bundle.uyy[i];
    out.c[i] = std::sqrt(a * a + c * c);
    out.grad_mag[i] = gm;
  }
  return out;
}

}  // namespace mipdiff
