#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "mipdiff/projection.hpp"
#include "oracles.hpp"

using namespace mipdiff;

namespace {

Volume random_volume(std::mt19937_64& rng, std::size_t w, std::size_t h, std::size_t d, double lo = -1.0,
                     double hi = 1.0) {
  std::vector<ScalarField> slices;
  for (std::size_t z = 0; z < d; ++z) slices.push_back(oracle::random_field(rng, w, h, lo, hi));
  return Volume(std::move(slices));
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::ok;
}

}  // namespace

TEST_CASE("projection examples") {
  std::mt19937_64 rng(1);
  const auto one = oracle::random_field(rng, 5, 4);
  const Volume single(std::vector<ScalarField>{one});
  CHECK(project(single, ProjectionKind::max) == one);
  CHECK(project(single, ProjectionKind::min) == one);

  Volume v(2, 1, 3);
  const double a[3] = {1, 5, 3}, b[3] = {-2, 0, 4};
  for (std::size_t z = 0; z < 3; ++z) {
    v(0, 0, z) = a[z];
    v(1, 0, z) = b[z];
  }
  CHECK(project(v, ProjectionKind::max) == ScalarField(2, 1, std::vector<double>{5, 4}));
  CHECK(project(v, ProjectionKind::min) == ScalarField(2, 1, std::vector<double>{1, -2}));
}

TEST_CASE("projection duality, bounds and permutation invariance") {
  std::mt19937_64 rng(2);
  const auto v = random_volume(rng, 8, 8, 16);
  std::vector<ScalarField> negated, reversed;
  for (const auto& s : v.slices()) {
    auto n = s;
    for (auto& x : n.values()) x = -x;
    negated.push_back(n);
  }
  for (auto it = v.slices().rbegin(); it != v.slices().rend(); ++it) reversed.push_back(*it);
  const auto mx = project(v, ProjectionKind::max);
  const auto mn_neg = project(Volume(negated), ProjectionKind::min);
  for (std::size_t i = 0; i < mx.size(); ++i) CHECK(mx[i] == -mn_neg[i]);
  const auto mn = project(v, ProjectionKind::min);
  for (const auto& s : v.slices())
    for (std::size_t i = 0; i < s.size(); ++i) {
      CHECK(mn[i] <= s[i]);
      CHECK(mx[i] >= s[i]);
    }
  CHECK(project(Volume(reversed), ProjectionKind::min) == mn);
}

TEST_CASE("projection index ties go to the lowest slice") {
  Volume v(1, 1, 4, 2.0);
  v(0, 0, 2) = 1.0;
  v(0, 0, 3) = 1.0;
  CHECK(project_with_index(v, ProjectionKind::min).index[0] == 2);
  CHECK(project_with_index(v, ProjectionKind::max).index[0] == 0);
}

TEST_CASE("phase mask") {
  const double pi = std::numbers::pi;
  CHECK(phase_weight(0.0, 4) == 1.0);
  CHECK(phase_weight(-pi, 4) == 0.0);
  CHECK(phase_weight(-pi / 2, 4) == 0.0625);
  CHECK(phase_weight(pi / 2, 7) == 1.0);

  Volume phase(5, 1, 1);
  const double values[5] = {-pi, -2.0, -1.0, -0.1, 0.0};
  for (std::size_t i = 0; i < 5; ++i) phase(i, 0, 0) = values[i];
  const auto w = phase_mask(phase, PhaseMaskParams{});
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(w(i, 0, 0) >= 0.0);
    CHECK(w(i, 0, 0) <= 1.0);
    if (i > 0) CHECK(w(i, 0, 0) >= w(i - 1, 0, 0));
  }

  // Samples stored as binary32 may round pi outward.
  phase(0, 0, 0) = static_cast<double>(static_cast<float>(-pi));
  CHECK(phase_mask(phase, PhaseMaskParams{})(0, 0, 0) == 0.0);
  phase(0, 0, 0) = -3.2;
  CHECK(code_of([&] { phase_mask(phase, PhaseMaskParams{}); }) == ErrorCode::out_of_range);
  CHECK(code_of([&] { phase_mask(Volume(1, 1, 1), PhaseMaskParams{0}); }) == ErrorCode::invalid_argument);
}

TEST_CASE("apply mask") {
  std::mt19937_64 rng(3);
  const auto mag = random_volume(rng, 4, 4, 3, 0.0, 2.0);
  CHECK(apply_mask(mag, Volume(4, 4, 3, 1.0)) == mag);
  CHECK(apply_mask(mag, Volume(4, 4, 3, 0.0)) == Volume(4, 4, 3, 0.0));
  const auto w = random_volume(rng, 4, 4, 3, 0.0, 1.0);
  const auto out = apply_mask(mag, w);
  for (std::size_t z = 0; z < 3; ++z)
    for (std::size_t y = 0; y < 4; ++y)
      for (std::size_t x = 0; x < 4; ++x) {
        CHECK(out(x, y, z) == mag(x, y, z) * w(x, y, z));
        CHECK(out(x, y, z) <= mag(x, y, z));
      }
  CHECK(code_of([&] { apply_mask(mag, Volume(4, 4, 2)); }) == ErrorCode::dimension_mismatch);
}

TEST_CASE("swi pipeline degenerate cases") {
  std::mt19937_64 rng(4);
  const auto mag = random_volume(rng, 10, 10, 4, 0.5, 1.5);
  const auto phase = random_volume(rng, 10, 10, 4, 0.0, 3.0);
  AdaptiveParams p;
  p.alpha = 0.0;
  const auto r = swi_pipeline(mag, phase, p, PhaseMaskParams{});
  CHECK(r.enhanced == project(mag, ProjectionKind::min));

  p.alpha = 2.0;
  const auto f = swi_pipeline(mag, phase, p, PhaseMaskParams{});
  CHECK(f.enhanced == f.filtered_mip);
  CHECK(f.filtered_mip == project(filter_slices(mag, p).volume, ProjectionKind::min));
}

TEST_CASE("swi mask order variants") {
  std::mt19937_64 rng(6);
  const auto mag = random_volume(rng, 10, 10, 3, 0.5, 1.5);
  const auto phase = random_volume(rng, 10, 10, 3, -3.0, 3.0);
  AdaptiveParams p;
  p.alpha = 0.0;
  const auto post = swi_pipeline(mag, phase, p, PhaseMaskParams{}, MaskOrder::post_projection);
  const auto pre = swi_pipeline(mag, phase, p, PhaseMaskParams{}, MaskOrder::pre_projection);
  const auto sel = project_with_index(mag, ProjectionKind::min);
  const auto masked = apply_mask(mag, phase_mask(phase, PhaseMaskParams{}));
  for (std::size_t y = 0; y < 10; ++y)
    for (std::size_t x = 0; x < 10; ++x) {
      const auto z = sel.index[y * 10 + x];
      CHECK(post.enhanced(x, y) == mag(x, y, z) * phase_weight(phase(x, y, z), 4));
      double lo = masked(x, y, 0);
      for (std::size_t k = 1; k < 3; ++k) lo = std::min(lo, masked(x, y, k));
      CHECK(pre.enhanced(x, y) == lo);
    }
}

TEST_CASE("mip pipeline on a single slice with alpha 0 is the identity") {
  std::mt19937_64 rng(7);
  const auto s = oracle::random_field(rng, 12, 12);
  AdaptiveParams p;
  p.alpha = 0.0;
  CHECK(mip_pipeline(Volume(std::vector<ScalarField>{s}), p).field == s);
}
