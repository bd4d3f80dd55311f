#include "mipdiff/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "mipdiff/io.hpp"
#include "mipdiff/projection.hpp"

namespace mipdiff {
namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

std::uint64_t splitmix64(std::uint64_t& state) noexcept {
  state += kGolden;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Uniform in (0, 1].
double unit_open(std::uint64_t bits) noexcept {
  return static_cast<double>((bits >> 11) + 1) * 0x1.0p-53;
}

double segment_distance(const Point3& p, const Point3& a, const Point3& b) noexcept {
  const double dx = b.x - a.x, dy = b.y - a.y, dz = b.z - a.z;
  const double len2 = dx * dx + dy * dy + dz * dz;
  double t = 0.0;
  if (len2 > 0.0) t = std::clamp(((p.x - a.x) * dx + (p.y - a.y) * dy + (p.z - a.z) * dz) / len2, 0.0, 1.0);
  const double ex = a.x + t * dx - p.x, ey = a.y + t * dy - p.y, ez = a.z + t * dz - p.z;
  return std::sqrt(ex * ex + ey * ey + ez * ez);
}

double axis_distance(const Point3& p, const TubeSpec& tube) noexcept {
  if (tube.axis.size() == 1) return segment_distance(p, tube.axis[0], tube.axis[0]);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < tube.axis.size(); ++i)
    best = std::min(best, segment_distance(p, tube.axis[i], tube.axis[i + 1]));
  return best;
}

enum Stream : std::uint64_t { kVolumeNoise = 0, kChannelNoise = 1, kFlowNoise = 1000 };

}  // namespace

double keyed_normal(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) noexcept {
  std::uint64_t state = seed;
  state = splitmix64(state) ^ (stream * 0xD1B54A32D192ED03ull);
  state = splitmix64(state) ^ (index * kGolden);
  const double u1 = unit_open(splitmix64(state));
  const double u2 = unit_open(splitmix64(state));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

void PhantomSpec::validate() const {
  if (width == 0 || height == 0 || depth == 0)
    throw Error(ErrorCode::dimension_too_small, "phantom dimensions must be positive");
  if (!(noise_sigma >= 0.0)) throw Error(ErrorCode::invalid_argument, "noise_sigma must be >= 0");
  for (const auto& t : tubes) {
    if (t.axis.empty()) throw Error(ErrorCode::invalid_argument, "tube without axis points");
    if (!(t.radius >= 1.0)) throw Error(ErrorCode::invalid_argument, "tube radius must be >= 1");
    if (t.contrast == 0.0 || !std::isfinite(t.contrast))
      throw Error(ErrorCode::invalid_argument, "tube contrast must be non-zero");
    for (const auto& p : t.axis) {
      if (!(p.x >= 0.0 && p.x <= static_cast<double>(width - 1) && p.y >= 0.0 &&
            p.y <= static_cast<double>(height - 1) && p.z >= 0.0 &&
            p.z <= static_cast<double>(depth - 1))) {
        std::ostringstream os;
        os << "tube control point (" << p.x << "," << p.y << "," << p.z << ") outside volume";
        throw Error(ErrorCode::geometry_out_of_bounds, os.str());
      }
    }
  }
  if (channels) {
    const auto& c = *channels;
    if (c.count == 0) throw Error(ErrorCode::invalid_argument, "channel count must be >= 1");
    if (c.centers.size() != c.count || c.widths.size() != c.count || c.sigma.size() != c.count)
      throw Error(ErrorCode::dimension_mismatch, "channel centers/widths/sigma must match count");
    for (double w : c.widths)
      if (!(w > 0.0)) throw Error(ErrorCode::invalid_argument, "sensitivity widths must be positive");
    for (double s : c.sigma)
      if (!(s > 0.0)) throw Error(ErrorCode::non_positive_sigma, "channel sigma must be positive");
  }
}

PhantomSpec PhantomSpec::venous() {
  PhantomSpec s;
  s.tubes.push_back({{{4.0, 20.0, 16.0}, {60.0, 44.0, 16.0}}, 2.0, -0.2});
  return s;
}

PhantomSpec PhantomSpec::phase_contrast() {
  PhantomSpec s;
  s.depth = 16;
  s.baseline_level = 0.2;
  s.seed = 3;
  s.tubes.push_back({{{4.0, 20.0, 8.0}, {60.0, 44.0, 8.0}}, 2.0, 0.5});
  s.channels = ChannelSpec{2, {{16.0, 32.0}, {48.0, 32.0}}, {40.0, 40.0}, {0.05, 0.10}};
  return s;
}

PhantomOutput generate(const PhantomSpec& spec) {
  spec.validate();
  const auto w = spec.width, h = spec.height, d = spec.depth;
  const double pi = std::numbers::pi;

  PhantomOutput out;
  out.clean = Volume(w, h, d, 0.0);
  out.truth_mask = Volume(w, h, d, 0.0);
  out.phase = Volume(w, h, d, 0.0);

  for (std::size_t z = 0; z < d; ++z) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        const double fx = static_cast<double>(x), fy = static_cast<double>(y);
        // Wavelengths: width along x, height/2 along y.
        const double mixture = 0.5 * std::sin(2.0 * pi * fx / static_cast<double>(w) + 0.3) +
                               0.5 * std::cos(4.0 * pi * fy / static_cast<double>(h) + 1.1);
        double v = spec.baseline_level * (1.0 + spec.baseline_amplitude * mixture);
        double inside = 0.0;
        double dark_weight = 0.0;
        const Point3 p{fx, fy, static_cast<double>(z)};
        for (const auto& tube : spec.tubes) {
          const double dist = axis_distance(p, tube);
          const double s = tube.radius / 2.0;
          const double profile = std::exp(-dist * dist / (2.0 * s * s));
          v += tube.contrast * profile;
          if (dist <= tube.radius) inside = 1.0;
          if (tube.contrast < 0.0) dark_weight += profile;
        }
        out.clean(x, y, z) = v;
        out.truth_mask(x, y, z) = inside;
        out.phase(x, y, z) = -(pi / 2.0) * std::min(dark_weight, 1.0);
      }
    }
  }

  out.noisy = out.clean;
  if (spec.noise_sigma > 0.0) {
    for (std::size_t z = 0; z < d; ++z) {
      auto& s = out.noisy.slice(z);
      for (std::size_t i = 0; i < s.size(); ++i)
        s[i] += spec.noise_sigma * keyed_normal(spec.seed, kVolumeNoise, z * w * h + i);
    }
  }

  if (!spec.channels) return out;
  const auto& ch = *spec.channels;
  for (std::size_t k = 0; k < ch.count; ++k) {
    const auto [cx, cy] = ch.centers[k];
    const double width = ch.widths[k];
    ScalarField sens(w, h);
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        const double dx = static_cast<double>(x) - cx, dy = static_cast<double>(y) - cy;
        sens(x, y) = std::exp(-(dx * dx + dy * dy) / (2.0 * width * width));
      }

    Volume vol = out.clean;
    for (std::size_t z = 0; z < d; ++z) {
      auto& s = vol.slice(z);
      for (std::size_t i = 0; i < s.size(); ++i)
        s[i] = s[i] * sens[i] + ch.sigma[k] * keyed_normal(spec.seed, kChannelNoise + k, z * w * h + i);
    }
    out.channel_volumes.push_back(std::move(vol));

    FlowChannel flow;
    ScalarField* components[3] = {&flow.x, &flow.y, &flow.z};
    for (std::size_t c = 0; c < 3; ++c) {
      Volume comp = out.clean;
      const std::uint64_t stream = kFlowNoise + 3 * k + c;
      for (std::size_t z = 0; z < d; ++z) {
        auto& s = comp.slice(z);
        for (std::size_t i = 0; i < s.size(); ++i)
          s[i] = s[i] * sens[i] / 3.0 + ch.sigma[k] * keyed_normal(spec.seed, stream, z * w * h + i);
      }
      *components[c] = project(comp, ProjectionKind::max);
    }
    out.flow.channels.push_back(std::move(flow));
  }
  return out;
}

double dip_amplitude(const ScalarField& projected, const ScalarField& truth_mask_projection) {
  require_same_shape(projected, truth_mask_projection, "dip_amplitude");
  const auto w = projected.width();
  const auto h = projected.height();
  double total = 0.0;
  std::size_t count = 0;
  std::vector<double> window;
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      if (!(truth_mask_projection(x, y) > 0.5)) continue;
      window.clear();
      const std::size_t x0 = x >= 4 ? x - 4 : 0, x1 = std::min(w - 1, x + 4);
      const std::size_t y0 = y >= 4 ? y - 4 : 0, y1 = std::min(h - 1, y + 4);
      for (std::size_t yy = y0; yy <= y1; ++yy)
        for (std::size_t xx = x0; xx <= x1; ++xx)
          if (!(truth_mask_projection(xx, yy) > 0.5)) window.push_back(projected(xx, yy));
      if (window.empty()) continue;
      const auto mid = window.size() / 2;
      std::nth_element(window.begin(), window.begin() + static_cast<std::ptrdiff_t>(mid), window.end());
      double median = window[mid];
      if (window.size() % 2 == 0) {
        const double below = *std::max_element(window.begin(), window.begin() + static_cast<std::ptrdiff_t>(mid));
        median = (median + below) / 2.0;
      }
      total += median - projected(x, y);
      ++count;
    }
  }
  if (count == 0) throw Error(ErrorCode::no_tube_pixels, "dip amplitude: no tube pixels with background");
  return total / static_cast<double>(count);
}

std::string describe(const PhantomSpec& spec) {
  std::ostringstream os;
  os << "width = " << spec.width << '\n'
     << "height = " << spec.height << '\n'
     << "depth = " << spec.depth << '\n'
     << "baseline_level = " << format_double(spec.baseline_level) << '\n'
     << "baseline_amplitude = " << format_double(spec.baseline_amplitude) << '\n'
     << "noise_sigma = " << format_double(spec.noise_sigma) << '\n'
     << "seed = " << spec.seed << '\n'
     << "rng = " << kPhantomRng << '\n';
  for (std::size_t t = 0; t < spec.tubes.size(); ++t) {
    const auto& tube = spec.tubes[t];
    os << "tube" << t << ".radius = " << format_double(tube.radius) << '\n'
       << "tube" << t << ".contrast = " << format_double(tube.contrast) << '\n'
       << "tube" << t << ".axis =";
    for (const auto& p : tube.axis)
      os << ' ' << format_double(p.x) << ',' << format_double(p.y) << ',' << format_double(p.z);
    os << '\n';
  }
  if (spec.channels) {
    const auto& c = *spec.channels;
    os << "channels = " << c.count << '\n';
    for (std::size_t k = 0; k < c.count; ++k)
      os << "channel" << k + 1 << " = center " << format_double(c.centers[k].first) << ','
         << format_double(c.centers[k].second) << " width " << format_double(c.widths[k])
         << " sigma " << format_double(c.sigma[k]) << '\n';
  }
  return os.str();
}

}  // namespace mipdiff
