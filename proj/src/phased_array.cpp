#include "mipdiff/phased_array.hpp"

#include <cmath>
#include <sstream>

#include "parallel.hpp"

namespace mipdiff {

void ChannelSet::validate() const {
  if (channels.empty()) throw Error(ErrorCode::invalid_argument, "channel set is empty");
  for (const auto& c : channels) require_same_shape(channels.front(), c, "channel set");
  if (!sigma) return;
  if (sigma->size() != channels.size()) {
    std::ostringstream os;
    os << "sigma list has " << sigma->size() << " entries for " << channels.size() << " channels";
    throw Error(ErrorCode::dimension_mismatch, os.str());
  }
  for (double s : *sigma)
    if (!(s > 0.0) || !std::isfinite(s))
      throw Error(ErrorCode::non_positive_sigma, "sigma values must be positive");
}

void FlowChannelSet::validate() const {
  if (channels.empty()) throw Error(ErrorCode::invalid_argument, "flow channel set is empty");
  const auto& ref = channels.front().x;
  for (const auto& c : channels) {
    require_same_shape(ref, c.x, "flow channel set");
    require_same_shape(ref, c.y, "flow channel set");
    require_same_shape(ref, c.z, "flow channel set");
  }
}

ChannelSet combine_flow(const FlowChannelSet& flow, FlowCombineMode mode) {
  flow.validate();
  ChannelSet out;
  for (const auto& c : flow.channels) {
    ScalarField m(c.x.width(), c.x.height());
    for (std::size_t i = 0; i < m.size(); ++i) {
      if (mode == FlowCombineMode::sum)
        m[i] = c.x[i] + c.y[i] + c.z[i];
      else
        m[i] = std::sqrt(c.x[i] * c.x[i] + c.y[i] * c.y[i] + c.z[i] * c.z[i]);
    }
    out.channels.push_back(std::move(m));
  }
  return out;
}

PaCombineResult pa_combine(const ChannelSet& set) {
  set.validate();
  PaCombineResult out{ScalarField(set.channels.front().width(), set.channels.front().height()),
                      !set.sigma.has_value()};
  for (std::size_t k = 0; k < set.channels.size(); ++k) {
    const double sigma = set.sigma ? (*set.sigma)[k] : 1.0;
    const auto& m = set.channels[k];
    for (std::size_t i = 0; i < m.size(); ++i) {
      const double v = m[i] / sigma;
      out.image[i] += v * v;
    }
  }
  for (auto& v : out.image.values()) v = std::sqrt(v);
  return out;
}

ChannelSet filter_synthesized_scale(const std::vector<FilterResult>& filtered_channels,
                                    const FilterTrace& combined_trace, double guard) {
  if (filtered_channels.empty()) throw Error(ErrorCode::invalid_argument, "no filtered channels");
  const auto& den = combined_trace.mu_u_sum;
  ChannelSet out;
  for (const auto& ch : filtered_channels) {
    const auto& num = ch.trace.mu_u_sum;
    require_same_shape(ch.field, num, "filter_synthesized_scale");
    require_same_shape(ch.field, den, "filter_synthesized_scale");
    ScalarField scaled = ch.field;
    for (std::size_t i = 0; i < scaled.size(); ++i)
      if (!(std::abs(den[i]) < guard)) scaled[i] = ch.field[i] * (num[i] / den[i]);
    out.channels.push_back(std::move(scaled));
  }
  return out;
}

PcResult pc_pipeline(const FlowChannelSet& flow, const AdaptiveParams& params,
                     FlowCombineMode mode, std::optional<std::vector<double>> sigma, int threads) {
  auto mip_params = params;
  mip_params.mode = AdaptiveMode::mip;
  mip_params.validate();

  PcResult out;
  out.raw = combine_flow(flow, mode);
  out.raw.sigma = std::move(sigma);
  out.plain = pa_combine(out.raw).image;

  // Channel runs and the combined run are independent; index n is the
  // combined image.
  const auto n = out.raw.channels.size();
  out.filtered.resize(n);
  detail::parallel_for(n + 1, threads, [&](std::size_t k) {
    if (k < n)
      out.filtered[k] = run_filter(out.raw.channels[k], mip_params);
    else
      out.combined_filter = run_filter(out.plain, mip_params);
  });

  out.scaled = filter_synthesized_scale(out.filtered, out.combined_filter.trace);
  out.combined = pa_combine(out.scaled).image;
  return out;
}

}  // namespace mipdiff
