#include <doctest.h>

#include <cmath>

#include "mipdiff/phantom.hpp"
#include "mipdiff/projection.hpp"

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

double noise_std(const PhantomOutput& out) {
  double sum = 0.0, sq = 0.0;
  std::size_t n = 0;
  for (std::size_t z = 0; z < out.clean.depth(); ++z)
    for (std::size_t i = 0; i < out.clean.slice(z).size(); ++i) {
      const double d = out.noisy.slice(z)[i] - out.clean.slice(z)[i];
      sum += d;
      sq += d * d;
      ++n;
    }
  const double mean = sum / static_cast<double>(n);
  return std::sqrt((sq - static_cast<double>(n) * mean * mean) / static_cast<double>(n - 1));
}

double segment_distance(double px, double py, double pz, const Point3& a, const Point3& b) {
  // Sample the segment finely; accurate to well under a voxel.
  double best = INFINITY;
  for (int i = 0; i <= 20000; ++i) {
    const double t = i / 20000.0;
    const double dx = a.x + t * (b.x - a.x) - px, dy = a.y + t * (b.y - a.y) - py, dz = a.z + t * (b.z - a.z) - pz;
    best = std::min(best, std::sqrt(dx * dx + dy * dy + dz * dz));
  }
  return best;
}

}  // namespace

TEST_CASE("zero noise and empty scene") {
  auto spec = PhantomSpec::venous();
  spec.noise_sigma = 0.0;
  const auto out = generate(spec);
  CHECK(out.noisy == out.clean);

  PhantomSpec empty;
  empty.width = 9;
  empty.height = 7;
  empty.depth = 3;
  empty.baseline_amplitude = 0.0;
  const auto e = generate(empty);
  CHECK(e.clean == Volume(9, 7, 3, 1.0));
  CHECK(e.truth_mask == Volume(9, 7, 3, 0.0));
}

TEST_CASE("venous preset noise level") {
  const auto out = generate(PhantomSpec::venous());
  CHECK(out.clean.width() * out.clean.height() * out.clean.depth() >= 100000);
  CHECK(std::abs(noise_std(out) - 0.05) <= 0.05 * 0.05);
}

TEST_CASE("noise std grows with sigma") {
  auto spec = PhantomSpec::venous();
  double prev = -1.0;
  for (double s : {0.0, 0.01, 0.05, 0.2}) {
    spec.noise_sigma = s;
    const double v = noise_std(generate(spec));
    CHECK(v >= prev);
    prev = v;
  }
}

TEST_CASE("determinism") {
  const auto spec = PhantomSpec::phase_contrast();
  const auto a = generate(spec);
  const auto b = generate(spec);
  CHECK(a.noisy == b.noisy);
  CHECK(a.phase == b.phase);
  REQUIRE(a.channel_volumes.size() == 2);
  CHECK(a.channel_volumes == b.channel_volumes);
  REQUIRE(a.flow.channels.size() == 2);
  for (std::size_t k = 0; k < 2; ++k) {
    CHECK(a.flow.channels[k].x == b.flow.channels[k].x);
    CHECK(a.flow.channels[k].z == b.flow.channels[k].z);
  }
  CHECK(keyed_normal(1, 0, 5) == keyed_normal(1, 0, 5));
  CHECK(keyed_normal(1, 0, 5) != keyed_normal(2, 0, 5));
  CHECK(keyed_normal(1, 0, 5) != keyed_normal(1, 1, 5));

  auto other = spec;
  other.seed = 99;
  CHECK_FALSE(generate(other).noisy == a.noisy);
}

TEST_CASE("truth mask follows the tube geometry") {
  PhantomSpec spec;
  spec.width = 24;
  spec.height = 20;
  spec.depth = 6;
  spec.tubes.push_back({{{2.0, 3.0, 1.0}, {21.0, 16.0, 4.0}}, 2.5, -0.3});
  const auto out = generate(spec);
  const auto& a = spec.tubes[0].axis[0];
  const auto& b = spec.tubes[0].axis[1];
  std::size_t mismatches = 0, inside = 0;
  for (std::size_t z = 0; z < 6; ++z)
    for (std::size_t y = 0; y < 20; ++y)
      for (std::size_t x = 0; x < 24; ++x) {
        const double d = segment_distance(static_cast<double>(x), static_cast<double>(y), static_cast<double>(z), a, b);
        if (std::abs(d - 2.5) < 1e-3) continue;
        const bool expect = d <= 2.5;
        inside += expect;
        if ((out.truth_mask(x, y, z) == 1.0) != expect) ++mismatches;
      }
  CHECK(inside > 0);
  CHECK(mismatches == 0);
}

TEST_CASE("phase follows dark tubes") {
  const auto out = generate(PhantomSpec::venous());
  const double pi = 3.14159265358979323846;
  for (const auto& s : out.phase.slices())
    for (double v : s.values()) {
      CHECK(v <= 0.0);
      CHECK(v >= -pi);
    }
  CHECK(out.phase(32, 32, 16) < -1.0);
  CHECK(out.phase(32, 32, 0) > -1e-12);
}

TEST_CASE("spec validation") {
  auto spec = PhantomSpec::venous();
  spec.tubes[0].axis[1].x = 64.0;
  CHECK(code_of([&] { generate(spec); }) == ErrorCode::geometry_out_of_bounds);
  spec = PhantomSpec::venous();
  spec.tubes[0].radius = 0.5;
  CHECK(code_of([&] { generate(spec); }) == ErrorCode::invalid_argument);
  spec = PhantomSpec::venous();
  spec.noise_sigma = -1.0;
  CHECK(code_of([&] { generate(spec); }) == ErrorCode::invalid_argument);
  spec = PhantomSpec::phase_contrast();
  spec.channels->sigma[1] = 0.0;
  CHECK(code_of([&] { generate(spec); }) == ErrorCode::non_positive_sigma);
}

TEST_CASE("dip amplitude") {
  ScalarField mask(15, 15, 0.0);
  mask(7, 7) = 1.0;
  CHECK(dip_amplitude(ScalarField(15, 15, 0.7), mask) == 0.0);
  ScalarField f(15, 15, 1.0);
  f(7, 7) = 0.8;
  CHECK(std::abs(dip_amplitude(f, mask) - 0.2) < 1e-12);
  CHECK(code_of([] { dip_amplitude(ScalarField(4, 4), ScalarField(4, 4)); }) == ErrorCode::no_tube_pixels);

  const auto out = generate(PhantomSpec::venous());
  const auto mask_proj = project(out.truth_mask, ProjectionKind::max);
  CHECK(dip_amplitude(project(out.clean, ProjectionKind::min), mask_proj) > 0.1);
}

TEST_CASE("describe echoes the spec") {
  const auto text = describe(PhantomSpec::phase_contrast());
  CHECK(text.find("width = 64") != std::string::npos);
  CHECK(text.find("seed = 3") != std::string::npos);
  CHECK(text.find(kPhantomRng) != std::string::npos);
}
