#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "mipdiff/diffusion.hpp"
#include "mipdiff/metrics.hpp"
#include "mipdiff/phantom.hpp"
#include "mipdiff/projection.hpp"
#include "oracles.hpp"

using namespace mipdiff;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::ok;
}

double pixel_sum(const ScalarField& f) {
  long double s = 0.0L;
  for (double v : f.values()) s += v;
  return static_cast<double>(s);
}

ScalarField gaussian_dip(std::size_t n, double depth, double width) {
  ScalarField f(n, n, 1.0);
  const double c = static_cast<double>(n / 2);
  for (std::size_t y = 0; y < n; ++y)
    for (std::size_t x = 0; x < n; ++x) {
      const double d = static_cast<double>(x) - c;
      f(x, y) -= depth * std::exp(-d * d / (2.0 * width * width));
    }
  return f;
}

AdaptiveParams adaptive(double alpha, AdaptiveMode mode, double step = 0.01) {
  AdaptiveParams p;
  p.alpha = alpha;
  p.mode = mode;
  p.step = step;
  return p;
}

}  // namespace

TEST_CASE("pm diffusivity") {
  PMParams p;
  p.delta = 0.7;
  CHECK(pm_diffusivity(0.0, p) == 1.0);
  CHECK(pm_diffusivity(0.7, p) == 0.5);
  p.kind = DiffusivityKind::exponential;
  CHECK(pm_diffusivity(0.0, p) == 1.0);
  CHECK(pm_diffusivity(0.7, p) == doctest::Approx(static_cast<double>(std::exp(-1.0L))).epsilon(1e-15));
  for (auto kind : {DiffusivityKind::rational, DiffusivityKind::exponential}) {
    p.kind = kind;
    double prev = 2.0;
    for (double g = 0.0; g < 5.0; g += 0.01) {
      const double v = pm_diffusivity(g, p);
      CHECK(v <= prev);
      CHECK(v <= 1.0);
      prev = v;
    }
  }
  p.kind = DiffusivityKind::rational;
  CHECK(pm_diffusivity(1e150, p) > 0.0);
}

TEST_CASE("pm potential second derivative is d/ds of s*g(s)") {
  PMParams p;
  p.delta = 1.3;
  for (auto kind : {DiffusivityKind::rational, DiffusivityKind::exponential}) {
    p.kind = kind;
    for (double s = 0.05; s < 4.0; s += 0.25) {
      const double h = 1e-6;
      const double numeric = ((s + h) * pm_diffusivity(s + h, p) - (s - h) * pm_diffusivity(s - h, p)) / (2 * h);
      CHECK(pm_potential_second_derivative(s, p) == doctest::Approx(numeric).epsilon(1e-7));
    }
  }
}

TEST_CASE("pm params validation") {
  PMParams p;
  p.dt = 0.3;
  CHECK(code_of([&] { p.validate(); }) == ErrorCode::invalid_argument);
  p.dt = 0.25;
  p.delta = 0.0;
  CHECK(code_of([&] { p.validate(); }) == ErrorCode::invalid_argument);
}

TEST_CASE("pm step fixed point, conservation and point source") {
  PMParams p;
  p.delta = 10.0;
  p.dt = 0.25;
  const ScalarField flat(6, 5, 3.25);
  CHECK(pm_step(flat, p) == flat);

  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const auto f = oracle::random_field(rng, 4 + trial % 13, 3 + trial % 7, 0.0, 5.0);
    PMParams q;
    q.delta = 0.5 + trial * 0.1;
    const auto g = run_pm(f, q);
    CHECK(std::abs(pixel_sum(g) - pixel_sum(f)) <= 1e-8 * std::abs(pixel_sum(f)));
  }

  ScalarField spike(5, 5, 0.0);
  spike(2, 2) = 1.0;
  const auto out = pm_step(spike, p);
  CHECK(out(2, 2) < 1.0);
  for (auto [x, y] : {std::pair{1, 2}, {3, 2}, {2, 1}, {2, 3}}) CHECK(out(x, y) > 0.0);
  CHECK(oracle::max_abs_diff(out, oracle::pm_step(spike, 10.0, 0.25)) < 1e-15);
}

TEST_CASE("pm step matches the neighbour-sum oracle") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const auto f = oracle::random_field(rng, 2 + trial % 15, 2 + (trial * 3) % 15);
    PMParams p;
    p.delta = 0.1 + 0.05 * trial;
    p.dt = 0.05 + 0.004 * trial;
    p.kind = trial % 2 ? DiffusivityKind::rational : DiffusivityKind::exponential;
    const auto expected = oracle::pm_step(f, p.delta, p.dt, p.kind == DiffusivityKind::rational);
    CHECK(oracle::max_abs_diff(pm_step(f, p), expected) < 1e-12);
  }
}

TEST_CASE("orthogonal step") {
  PMParams p;
  const ScalarField flat(5, 5, -2.0);
  CHECK(orthogonal_step(flat, p) == flat);

  ScalarField ramp(7, 7);
  for (std::size_t y = 0; y < 7; ++y)
    for (std::size_t x = 0; x < 7; ++x) ramp(x, y) = static_cast<double>(x);
  const auto out = orthogonal_step(ramp, p);
  for (std::size_t y = 1; y < 6; ++y)
    for (std::size_t x = 1; x < 6; ++x) CHECK(out(x, y) == ramp(x, y));
}

TEST_CASE("orthogonal decomposition agrees with the divergence form on smooth fields") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    auto f = oracle::smooth_field(rng, 9, 9);
    PMParams p;
    p.delta = default_delta(f);
    p.dt = 0.1;
    p.kind = trial % 2 ? DiffusivityKind::rational : DiffusivityKind::exponential;
    const auto ortho = orthogonal_step(f, p);
    const auto pm = oracle::pm_step(f, p.delta, p.dt, p.kind == DiffusivityKind::rational);
    double se = 0.0;
    std::size_t n = 0;
    for (std::size_t y = 1; y < 8; ++y)
      for (std::size_t x = 1; x < 8; ++x) {
        const double d = (ortho(x, y) - pm(x, y)) / p.dt;
        se += d * d;
        ++n;
      }
    const double rms = std::sqrt(se / static_cast<double>(n));
    CHECK(rms < 5e-2 * (f.max() - f.min()));
  }
}

TEST_CASE("histogram bounds") {
  ScalarField u(1000, 1);
  for (std::size_t i = 0; i < 1000; ++i) u[i] = static_cast<double>(1000 - i);
  const auto b = histogram_bounds(u, 0.05);
  CHECK(b.ue_min == 25.0);
  CHECK(b.ue_max == 975.0);

  const auto c = histogram_bounds(ScalarField(10, 10, 0.3), 0.05);
  CHECK(c.ue_min == 0.3);
  CHECK(c.ue_max == 0.3);

  std::mt19937_64 rng(4);
  // 202 samples: the tail counts 10.1 are non-integral, so nearest-rank
  // picks mirrored samples.
  auto half = oracle::random_field(rng, 101, 1);
  ScalarField sym(202, 1);
  for (std::size_t i = 0; i < 101; ++i) {
    sym[2 * i] = half[i];
    sym[2 * i + 1] = -half[i];
  }
  const auto s = histogram_bounds(sym, 0.1);
  CHECK(s.ue_min == -s.ue_max);

  std::vector<double> sample(sym.values().begin(), sym.values().end());
  CHECK(s.ue_min == oracle::nearest_rank(sample, 0.05));
  CHECK(s.ue_max == oracle::nearest_rank(sample, 0.95));

  CHECK(code_of([] { histogram_bounds(ScalarField(9, 11), 0.05); }) == ErrorCode::too_few_pixels);
}

TEST_CASE("adaptive mu") {
  CHECK(adaptive_mu(1.0, 0.0, 3.0, AdaptiveMode::mip) == 0.0);
  CHECK(adaptive_mu(1.0, 0.0, 3.0, AdaptiveMode::mip_min) == 0.0);
  const long double e = std::exp(-1.0L);
  const double expected = static_cast<double>(-(1.0L - e) / (1.0L + e));
  CHECK(adaptive_mu(0.5, 1.0, 2.0, AdaptiveMode::mip_min) == doctest::Approx(expected).epsilon(1e-15));
  CHECK(expected == doctest::Approx(-0.462117).epsilon(1e-6));
  CHECK(adaptive_mu(1.0, 5.0, 1.0, AdaptiveMode::mip, BoundPair{-1.0, 1.0}) == 0.0);
  CHECK(adaptive_mu(1.0, 0.5, 1.0, AdaptiveMode::mip, BoundPair{-1.0, 1.0}) > 0.0);

  CHECK(adaptive_mu(1e200, 1e200, 1e10, AdaptiveMode::mip) == 1.0);
  CHECK(adaptive_mu(1e200, -1e200, 1e10, AdaptiveMode::mip_min) == 1.0);

  double prev_min = 2.0, prev_max = -2.0;
  for (double d = -3.0; d <= 3.0; d += 0.01) {
    const double a = adaptive_mu(0.8, d, 2.5, AdaptiveMode::mip);
    const double b = adaptive_mu(0.8, d, 2.5, AdaptiveMode::mip_min);
    CHECK(std::abs(a) <= 1.0);
    CHECK(a == -adaptive_mu(0.8, -d, 2.5, AdaptiveMode::mip));
    CHECK(b == -a);
    CHECK(a >= prev_max);
    CHECK(b <= prev_min);
    prev_max = a;
    prev_min = b;
  }
}

TEST_CASE("directional step identities") {
  std::mt19937_64 rng(8);
  const auto f = oracle::random_field(rng, 12, 12);
  for (auto mode : {AdaptiveMode::mip, AdaptiveMode::mip_min}) {
    const auto p = adaptive(0.0, mode, 0.2);
    CHECK(directional_step(f, p) == f);
    const ScalarField flat(10, 10, 4.0);
    CHECK(directional_step(flat, adaptive(3.0, mode, 0.2)) == flat);
  }
}

TEST_CASE("directional step deepens a dip in mip_min mode") {
  const auto f = gaussian_dip(33, 0.2, 2.0);
  const auto out = directional_step(f, adaptive(5.0, AdaptiveMode::mip_min, 0.2));
  CHECK(out(16, 16) < f(16, 16));
  const auto expected = oracle::directional_step(f, 5.0, true, 0.2);
  CHECK(oracle::max_abs_diff(out, expected) < 1e-12);
}

TEST_CASE("directional step matches the scalar oracle") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 40; ++trial) {
    const auto f = oracle::random_field(rng, 10 + trial % 7, 10 + (trial * 5) % 7);
    const bool min_mode = trial % 2 == 0;
    const double alpha = 0.5 + 0.25 * trial;
    const auto p = adaptive(alpha, min_mode ? AdaptiveMode::mip_min : AdaptiveMode::mip, 0.05);
    const auto basis = diffusion_basis(derivatives(f));
    const auto got = directional_step(f, p, bounds_for(basis, p));
    const auto expected = oracle::directional_step(f, alpha, min_mode, 0.05);
    CHECK(oracle::max_abs_diff(got, expected) < 1e-12);
  }
}

TEST_CASE("directional step commutes with constant shifts") {
  std::mt19937_64 rng(21);
  const auto f = oracle::random_field(rng, 12, 12);
  auto g = f;
  for (auto& v : g.values()) v += 0.5;
  const auto p = adaptive(2.0, AdaptiveMode::mip_min, 0.1);
  const auto a = directional_step(f, p), b = directional_step(g, p);
  for (std::size_t i = 0; i < f.size(); ++i) CHECK(std::abs(b[i] - a[i] - 0.5) < 1e-12);
}

TEST_CASE("mip mode leaves pixels outside both bounds unchanged") {
  std::mt19937_64 rng(14);
  const auto f = oracle::random_field(rng, 40, 40);
  auto p = adaptive(3.0, AdaptiveMode::mip, 0.1);
  p.tail_prob = 0.4;
  const auto basis = diffusion_basis(derivatives(f));
  const auto bounds = bounds_for(basis, p);
  const auto out = directional_step(f, p, bounds);
  int checked = 0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    const bool eta_out = !(bounds.eta->ue_min < basis.d_eta[i] && basis.d_eta[i] < bounds.eta->ue_max);
    const bool e2_out = !(bounds.e2->ue_min < basis.d_e2[i] && basis.d_e2[i] < bounds.e2->ue_max);
    if (eta_out && e2_out) {
      CHECK(out[i] == f[i]);
      ++checked;
    }
  }
  CHECK(checked > 0);

  // Shared bounds pool eta and e2 samples.
  auto shared = p;
  shared.bounds = BoundsPolicy::shared;
  const auto sb = bounds_for(basis, shared);
  CHECK(sb.eta->ue_min == sb.e2->ue_min);
  auto none = p;
  none.bounds = BoundsPolicy::none;
  CHECK(!bounds_for(basis, none).eta);
}

TEST_CASE("run filter convergence and trace") {
  const ScalarField flat(8, 8, 1.0);
  const auto r = run_filter(flat, adaptive(2.0, AdaptiveMode::mip_min));
  CHECK(r.trace.iterations == 1);
  CHECK(r.trace.converged);
  REQUIRE(r.trace.relative_change.size() == 1);
  CHECK(r.trace.relative_change[0] == 0.0);
  CHECK(r.field == flat);

  std::mt19937_64 rng(2);
  const auto f = oracle::random_field(rng, 12, 12);
  const auto id = run_filter(f, adaptive(0.0, AdaptiveMode::mip));
  CHECK(id.trace.iterations == 1);
  CHECK(id.field == f);

  CHECK(run_filter(f, adaptive(2.0, AdaptiveMode::mip_min)).trace.to_csv().rfind("iteration,relative_change\n", 0) == 0);
}

TEST_CASE("run filter on a phantom mIP slice records a finite trace") {
  auto spec = PhantomSpec::venous();
  spec.depth = 8;
  spec.tubes[0].axis = {{4, 20, 4}, {60, 44, 4}};
  const auto ph = generate(spec);
  const auto mip = project(ph.noisy, ProjectionKind::min);
  const auto r = run_filter(mip, AdaptiveParams{});
  CHECK(r.trace.iterations >= 1);
  for (double v : r.trace.relative_change) CHECK(std::isfinite(v));
  CHECK((r.trace.relative_change.back() < AdaptiveParams{}.tolerance ||
         r.trace.iterations == AdaptiveParams{}.max_iterations));
  CHECK(r.field.all_finite());
  CHECK(r.trace.mu_u_sum.same_shape(mip));
}

TEST_CASE("run filter stops before producing non-finite values") {
  const auto f = gaussian_dip(33, 0.2, 1.0);
  auto p = adaptive(16.0, AdaptiveMode::mip_min, 1e150);
  p.max_iterations = 50;
  const auto r = run_filter(f, p);
  CHECK(r.trace.diverged);
  CHECK(r.field.all_finite());
}

TEST_CASE("filter slices is independent of the thread count") {
  const auto ph = generate([] {
    auto s = PhantomSpec::venous();
    s.depth = 6;
    s.tubes[0].axis = {{4, 20, 3}, {60, 44, 3}};
    return s;
  }());
  const auto a = filter_slices(ph.noisy, AdaptiveParams{}, 1);
  const auto b = filter_slices(ph.noisy, AdaptiveParams{}, 4);
  CHECK(a.volume == b.volume);
  REQUIRE(a.traces.size() == 6);
  for (std::size_t z = 0; z < 6; ++z) CHECK(a.traces[z].relative_change == b.traces[z].relative_change);
}

TEST_CASE("hysteresis combine") {
  std::mt19937_64 rng(5);
  const auto low = oracle::random_field(rng, 6, 6), high = oracle::random_field(rng, 6, 6);
  ScalarField c(6, 6, 1.0);
  HysteresisParams p;
  p.c_threshold = std::numeric_limits<double>::infinity();
  CHECK(hysteresis_combine(low, high, c, p) == low);
  p.c_threshold = 0.0;
  CHECK(hysteresis_combine(low, high, c, p) == high);

  ScalarField checker(6, 6);
  for (std::size_t y = 0; y < 6; ++y)
    for (std::size_t x = 0; x < 6; ++x) checker(x, y) = (x + y) % 2 ? 0.75 : 0.25;
  p.c_threshold = 0.5;
  const auto out = hysteresis_combine(low, high, checker, p);
  for (std::size_t i = 0; i < 36; ++i) CHECK(out[i] == (checker[i] > 0.5 ? high[i] : low[i]));

  CHECK(code_of([&] { hysteresis_combine(low, ScalarField(5, 6), checker, p); }) == ErrorCode::dimension_mismatch);

  HysteresisParams bad;
  bad.alpha_low = 8.0;
  bad.alpha_high = 2.0;
  CHECK(code_of([&] { bad.validate(); }) == ErrorCode::invalid_argument);
}

TEST_CASE("hysteresis filter takes the larger-psnr run as reference") {
  const auto f = gaussian_dip(24, 0.2, 1.5);
  std::mt19937_64 rng(9);
  auto noisy = f;
  std::normal_distribution<double> n(0.0, 0.02);
  for (auto& v : noisy.values()) v += n(rng);
  const auto r = hysteresis_filter(noisy, AdaptiveParams{}, HysteresisParams{});
  const auto roi = Roi::full(noisy);
  const bool high_better = psnr_vs_input(noisy, r.high, roi) > psnr_vs_input(noisy, r.low, roi);
  CHECK(r.reference_is_high == high_better);
  const auto c_ref = structureness(derivatives(high_better ? r.high : r.low));
  std::vector<double> cs(c_ref.values().begin(), c_ref.values().end());
  CHECK(r.threshold == oracle::nearest_rank(cs, 0.9));
  for (std::size_t i = 0; i < noisy.size(); ++i) CHECK(r.combined[i] == (c_ref[i] > r.threshold ? r.high[i] : r.low[i]));
}
