// Batch front-end over the mipdiff C API.
//
// Every subcommand reads "key = value" settings (defaults, then --config
// file, then command-line flags), runs one pipeline and writes a
// <output-stem>.manifest that can be fed back through --config.

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mipdiff/mipdiff.h"

namespace fs = std::filesystem;

namespace {

constexpr int kExitIo = 1;
constexpr int kExitConfig = 2;

struct Failure : std::runtime_error {
  Failure(int exit_code, const std::string& message)
      : std::runtime_error(message), exit_code(exit_code) {}
  int exit_code;
};

[[noreturn]] void config_error(const std::string& message) { throw Failure(kExitConfig, message); }
[[noreturn]] void io_error(const std::string& message) { throw Failure(kExitIo, message); }

// Library failures caused by parameter values are configuration errors;
// everything else concerns the data on disk.
void check(int status, const std::string& context) {
  if (status == MIPDIFF_OK) return;
  const std::string message = context + ": " + mipdiff_last_error();
  switch (status) {
    case MIPDIFF_ERR_INVALID_ARGUMENT:
    case MIPDIFF_ERR_EMPTY_ROI:
    case MIPDIFF_ERR_GEOMETRY_OUT_OF_BOUNDS:
      config_error(message);
    default:
      io_error(message);
  }
}

// ---- handles ---------------------------------------------------------------

template <class T, void (*Destroy)(T*)>
struct Deleter {
  void operator()(T* p) const { Destroy(p); }
};

using Field = std::unique_ptr<mipdiff_field, Deleter<mipdiff_field, mipdiff_field_destroy>>;
using VolumePtr = std::unique_ptr<mipdiff_volume, Deleter<mipdiff_volume, mipdiff_volume_destroy>>;
using Trace = std::unique_ptr<mipdiff_trace, Deleter<mipdiff_trace, mipdiff_trace_destroy>>;
using SliceFilter = std::unique_ptr<mipdiff_slice_filter,
                                    Deleter<mipdiff_slice_filter, mipdiff_slice_filter_destroy>>;
using FlowSet = std::unique_ptr<mipdiff_flow_set, Deleter<mipdiff_flow_set, mipdiff_flow_set_destroy>>;
using PcResult = std::unique_ptr<mipdiff_pc_result, Deleter<mipdiff_pc_result, mipdiff_pc_result_destroy>>;
using PhantomSpec = std::unique_ptr<mipdiff_phantom_spec,
                                    Deleter<mipdiff_phantom_spec, mipdiff_phantom_spec_destroy>>;
using Phantom = std::unique_ptr<mipdiff_phantom, Deleter<mipdiff_phantom, mipdiff_phantom_destroy>>;
using Table = std::unique_ptr<mipdiff_table, Deleter<mipdiff_table, mipdiff_table_destroy>>;

// ---- text helpers ----------------------------------------------------------

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, sep)) out.push_back(trim(item));
  return out;
}

std::string shortest(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  std::array<char, 32> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), end);
}

std::optional<double> parse_double(const std::string& s) {
  double v = 0.0;
  const auto* first = s.data();
  const auto* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::optional<long long> parse_integer(const std::string& s) {
  long long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) io_error("cannot open " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1)
    io_error("sha256 initialisation failed");
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<size_t>(in.gcount()));
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md.data(), &len);
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i)
    os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return os.str();
}

// ---- settings --------------------------------------------------------------

struct Key {
  std::string name;
  std::string fallback;
  std::string help;
};

class Settings {
 public:
  Settings(std::string command, std::vector<Key> keys) : command_(std::move(command)), keys_(std::move(keys)) {
    for (const auto& k : keys_) values_[k.name] = k.fallback;
  }

  const std::vector<Key>& keys() const { return keys_; }
  const std::string& command() const { return command_; }

  bool known(const std::string& key) const { return values_.count(key) != 0; }

  void set(const std::string& key, const std::string& value) {
    if (!known(key)) config_error("unknown key '" + key + "' for " + command_);
    values_[key] = value;
  }

  void load(const fs::path& path) {
    std::ifstream in(path);
    if (!in) io_error("cannot read config file " + path.string());
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
      ++number;
      if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      const auto where = path.string() + ":" + std::to_string(number);
      if (eq == std::string::npos) config_error(where + ": expected 'key = value'");
      const auto key = trim(std::string_view(line).substr(0, eq));
      const auto value = trim(std::string_view(line).substr(eq + 1));
      if (key == "command") {
        if (value != command_) config_error(where + ": key 'command' is '" + value + "', expected " + command_);
        continue;
      }
      if (!known(key)) config_error(where + ": unknown key '" + key + "'");
      values_[key] = value;
    }
  }

  std::string str(const std::string& key) const { return values_.at(key); }

  std::string required(const std::string& key) const {
    auto v = str(key);
    if (v.empty()) config_error("key '" + key + "' is required");
    return v;
  }

  double real(const std::string& key, std::optional<double> min = {}, bool exclusive = false) const {
    const auto v = parse_double(str(key));
    if (!v) config_error("key '" + key + "': '" + str(key) + "' is not a finite number");
    if (min && (exclusive ? !(*v > *min) : !(*v >= *min)))
      config_error("key '" + key + "' must be " + (exclusive ? "> " : ">= ") + shortest(*min));
    return *v;
  }

  long long integer(const std::string& key, long long min) const {
    const auto v = parse_integer(str(key));
    if (!v) config_error("key '" + key + "': '" + str(key) + "' is not an integer");
    if (*v < min) config_error("key '" + key + "' must be >= " + std::to_string(min));
    return *v;
  }

  int choice(const std::string& key, const std::vector<std::string>& options) const {
    const auto v = str(key);
    for (std::size_t i = 0; i < options.size(); ++i)
      if (options[i] == v) return static_cast<int>(i);
    std::string list;
    for (const auto& o : options) list += (list.empty() ? "" : "|") + o;
    config_error("key '" + key + "': '" + v + "' is not one of " + list);
  }

  bool flag(const std::string& key) const {
    return choice(key, {"off", "on"}) == 1;
  }

  std::string body() const {
    std::ostringstream os;
    os << "command = " << command_ << '\n';
    for (const auto& k : keys_) os << k.name << " = " << values_.at(k.name) << '\n';
    return os.str();
  }

 private:
  std::string command_;
  std::vector<Key> keys_;
  std::map<std::string, std::string> values_;
};

const std::vector<Key> kFilterKeys = {
    {"alpha", "2", "structureness gain (0 disables filtering)"},
    {"step", "0.01", "explicit update step"},
    {"tolerance", "0.0001", "relative L2 change that stops iteration"},
    {"max_iterations", "50", "iteration cap"},
    {"tail_prob", "0.05", "two-sided histogram tail for the mip gating range"},
    {"bounds", "per_direction", "gating range policy: per_direction|shared|none"},
};

const std::vector<Key> kHysteresisKeys = {
    {"hysteresis", "off", "two-alpha hysteresis: off|on"},
    {"alpha_low", "2", "hysteresis low alpha"},
    {"alpha_high", "8", "hysteresis high alpha"},
    {"c_threshold", "auto", "structureness cutoff (auto: 90th percentile)"},
};

std::vector<Key> join(std::initializer_list<std::vector<Key>> parts) {
  std::vector<Key> out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

mipdiff_adaptive_params adaptive_params(const Settings& s, int mode) {
  mipdiff_adaptive_params p;
  mipdiff_adaptive_params_default(&p);
  p.mode = mode;
  if (s.known("alpha")) p.alpha = s.real("alpha", 0.0);
  p.step = s.real("step", 0.0, true);
  p.tolerance = s.real("tolerance", 0.0);
  p.max_iterations = static_cast<int>(s.integer("max_iterations", 1));
  p.tail_prob = s.real("tail_prob", 0.0, true);
  if (p.tail_prob >= 1.0) config_error("key 'tail_prob' must be < 1");
  p.bounds = s.choice("bounds", {"per_direction", "shared", "none"});
  return p;
}

std::optional<mipdiff_hysteresis_params> hysteresis_params(const Settings& s) {
  if (!s.flag("hysteresis")) return std::nullopt;
  mipdiff_hysteresis_params h;
  mipdiff_hysteresis_params_default(&h);
  h.alpha_low = s.real("alpha_low", 0.0);
  h.alpha_high = s.real("alpha_high", 0.0);
  if (s.str("c_threshold") != "auto") {
    h.has_c_threshold = 1;
    h.c_threshold = s.real("c_threshold", 0.0);
  }
  return h;
}

mipdiff_roi roi_setting(const Settings& s) {
  mipdiff_roi roi{1, 0, 0, 0, 0};
  const auto v = s.str("roi");
  if (v == "full") return roi;
  const auto parts = split(v, ',');
  std::array<long long, 4> n{};
  bool ok = parts.size() == 4;
  for (std::size_t i = 0; ok && i < 4; ++i) {
    const auto p = parse_integer(parts[i]);
    ok = p && *p >= 0;
    if (ok) n[i] = *p;
  }
  if (!ok) config_error("key 'roi': expected 'full' or 'x0,y0,width,height'");
  if (n[2] == 0 || n[3] == 0) config_error("key 'roi': empty region");
  return {0, static_cast<size_t>(n[0]), static_cast<size_t>(n[1]), static_cast<size_t>(n[2]),
          static_cast<size_t>(n[3])};
}

void check_roi(const mipdiff_roi& roi, const mipdiff_field* image) {
  if (roi.full) return;
  if (roi.x0 + roi.width > mipdiff_field_width(image) || roi.y0 + roi.height > mipdiff_field_height(image))
    config_error("key 'roi' exceeds the " + std::to_string(mipdiff_field_width(image)) + "x" +
                 std::to_string(mipdiff_field_height(image)) + " image");
}

// ---- run context -----------------------------------------------------------

class Run {
 public:
  explicit Run(Settings settings) : settings_(std::move(settings)) {}

  const Settings& settings() const { return settings_; }

  fs::path output() const { return settings_.required("output"); }

  // Output path without its extension.
  fs::path stem() const {
    auto p = output();
    return p.extension() == ".vol" || p.extension() == ".csv" ? p.replace_extension() : p;
  }

  fs::path sibling(const std::string& suffix) const {
    auto s = stem();
    return s.string() + suffix;
  }

  VolumePtr read(const fs::path& path) {
    if (!fs::exists(path)) io_error("input file not found: " + path.string());
    mipdiff_volume* v = nullptr;
    check(mipdiff_volume_read(path.string().c_str(), &v), "reading " + path.string());
    digest(path);
    return VolumePtr(v);
  }

  void digest(const fs::path& path) { digests_.emplace_back(path.string(), sha256_file(path)); }

  void note(const std::string& line) { notes_.push_back(line); }

  void prepare_output_dir() const {
    const auto parent = stem().parent_path();
    std::error_code ec;
    if (!parent.empty()) fs::create_directories(parent, ec);
    if (ec) io_error("cannot create " + parent.string() + ": " + ec.message());
  }

  void write_volume(const mipdiff_volume* v, const fs::path& path) {
    check(mipdiff_volume_write(v, path.string().c_str()), "writing " + path.string());
    written_.push_back(path);
  }

  // 1-slice MIPVOL plus a PGM preview.
  void write_image(const mipdiff_field* f, const fs::path& base) {
    mipdiff_volume* v = nullptr;
    check(mipdiff_volume_from_field(f, &v), "wrapping image");
    VolumePtr vol(v);
    write_volume(vol.get(), base.string() + ".vol");
    const auto pgm = base.string() + ".pgm";
    check(mipdiff_export_pgm(f, pgm.c_str()), "writing " + pgm);
    written_.push_back(pgm);
  }

  void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) io_error("cannot write " + path.string());
    written_.push_back(path);
  }

  void finish() {
    std::ostringstream os;
    os << "# mipdiff " << mipdiff_version() << " run manifest\n";
    for (const auto& [path, hex] : digests_) os << "# sha256 " << path << " = " << hex << '\n';
    for (const auto& n : notes_) os << "# " << n << '\n';
    os << settings_.body();
    const auto manifest = sibling(".manifest");
    std::ofstream out(manifest, std::ios::binary);
    out << os.str();
    if (!out) io_error("cannot write " + manifest.string());
  }

 private:
  Settings settings_;
  std::vector<std::pair<std::string, std::string>> digests_;
  std::vector<std::string> notes_;
  std::vector<fs::path> written_;
};

Field project_volume(const mipdiff_volume* v, int kind) {
  mipdiff_field* f = nullptr;
  check(mipdiff_project(v, kind, &f), "projection");
  return Field(f);
}

std::string metrics_header() { return "method,psnr_input,psnr_ref,cr,cpp\n"; }

std::string format_psnr(double v) { return std::isinf(v) && v > 0 ? "identical" : shortest(v); }

std::string metrics_row(const std::string& label, const mipdiff_field* input, const mipdiff_field* filtered,
                        const mipdiff_field* reference, const mipdiff_roi& roi) {
  double psnr = 0.0, cr = 0.0, cpp = 0.0;
  check(mipdiff_psnr_vs_input(input, filtered, &roi, &psnr), "psnr");
  check(mipdiff_contrast_ratio(filtered, &roi, &cr), "contrast ratio");
  check(mipdiff_contrast_per_pixel(filtered, &cpp), "contrast per pixel");
  std::string ref = "na";
  if (reference) {
    double r = 0.0;
    check(mipdiff_psnr_vs_reference(reference, filtered, &roi, &r), "reference psnr");
    ref = format_psnr(r);
  }
  return label + ',' + format_psnr(psnr) + ',' + ref + ',' + shortest(cr) + ',' + shortest(cpp) + '\n';
}

void note_trace(Run& run, const std::string& label, const mipdiff_trace* t) {
  run.note(label + " iterations = " + std::to_string(mipdiff_trace_iterations(t)) +
           " converged = " + (mipdiff_trace_converged(t) ? "yes" : "no") +
           (mipdiff_trace_diverged(t) ? " diverged = yes" : ""));
}

// ---- subcommands -----------------------------------------------------------

void cmd_phantom(Run& run) {
  const auto& s = run.settings();
  const int preset = s.choice("preset", {"venous", "phase_contrast"});
  mipdiff_phantom_spec* raw = nullptr;
  check(mipdiff_phantom_spec_create(preset, &raw), "phantom preset");
  PhantomSpec spec(raw);

  size_t dims[3] = {0, 0, 0};
  check(mipdiff_phantom_spec_size(spec.get(), &dims[0], &dims[1], &dims[2]), "phantom size");
  const char* dim_keys[3] = {"width", "height", "depth"};
  for (int i = 0; i < 3; ++i)
    if (s.str(dim_keys[i]) != "preset") dims[i] = static_cast<size_t>(s.integer(dim_keys[i], 1));
  check(mipdiff_phantom_spec_set_size(spec.get(), dims[0], dims[1], dims[2]), "phantom size");
  if (s.str("noise_sigma") != "preset")
    check(mipdiff_phantom_spec_set_noise(spec.get(), s.real("noise_sigma", 0.0)), "key 'noise_sigma'");
  if (s.str("seed") != "preset") {
    const auto seed = parse_integer(s.str("seed"));
    if (!seed || *seed < 0) config_error("key 'seed' must be a non-negative integer");
    check(mipdiff_phantom_spec_set_seed(spec.get(), static_cast<uint64_t>(*seed)), "key 'seed'");
  }
  if (s.str("baseline_level") != "preset")
    check(mipdiff_phantom_spec_set_baseline_level(spec.get(), s.real("baseline_level")), "key 'baseline_level'");
  if (s.str("baseline_amplitude") != "preset")
    check(mipdiff_phantom_spec_set_baseline_amplitude(spec.get(), s.real("baseline_amplitude")),
          "key 'baseline_amplitude'");

  // "x,y,z x,y,z ... radius contrast", tubes separated by ';'.
  if (const auto tubes = s.str("tubes"); tubes != "preset") {
    check(mipdiff_phantom_spec_clear_tubes(spec.get()), "phantom tubes");
    if (tubes != "none") {
      for (const auto& entry : split(tubes, ';')) {
        std::istringstream is(entry);
        std::vector<std::string> tokens;
        for (std::string t; is >> t;) tokens.push_back(t);
        if (tokens.size() < 3) config_error("key 'tubes': '" + entry + "' needs points, radius and contrast");
        std::vector<double> xyz;
        for (std::size_t i = 0; i + 2 < tokens.size(); ++i) {
          const auto c = split(tokens[i], ',');
          if (c.size() != 3) config_error("key 'tubes': bad point '" + tokens[i] + "'");
          for (const auto& v : c) {
            const auto d = parse_double(v);
            if (!d) config_error("key 'tubes': bad coordinate '" + v + "'");
            xyz.push_back(*d);
          }
        }
        const auto radius = parse_double(tokens[tokens.size() - 2]);
        const auto contrast = parse_double(tokens.back());
        if (!radius || !contrast) config_error("key 'tubes': bad radius/contrast in '" + entry + "'");
        check(mipdiff_phantom_spec_add_tube(spec.get(), xyz.data(), xyz.size() / 3, *radius, *contrast),
              "key 'tubes'");
      }
    }
  }

  // "cx,cy,width,sigma" per channel separated by ';'.
  if (const auto channels = s.str("channels"); channels != "preset") {
    std::vector<double> centers, widths, sigma;
    if (channels != "none") {
      for (const auto& entry : split(channels, ';')) {
        const auto v = split(entry, ',');
        std::array<double, 4> n{};
        if (v.size() != 4) config_error("key 'channels': expected cx,cy,width,sigma in '" + entry + "'");
        for (std::size_t i = 0; i < 4; ++i) {
          const auto d = parse_double(v[i]);
          if (!d) config_error("key 'channels': bad number '" + v[i] + "'");
          n[i] = *d;
        }
        centers.push_back(n[0]);
        centers.push_back(n[1]);
        widths.push_back(n[2]);
        sigma.push_back(n[3]);
      }
    }
    check(mipdiff_phantom_spec_set_channels(spec.get(), widths.size(), centers.data(), widths.data(),
                                            sigma.data()),
          "key 'channels'");
  }

  mipdiff_phantom* generated = nullptr;
  check(mipdiff_phantom_generate(spec.get(), &generated), "phantom generation");
  Phantom phantom(generated);

  run.prepare_output_dir();
  run.write_volume(mipdiff_phantom_clean(phantom.get()), run.sibling("_clean.vol"));
  run.write_volume(mipdiff_phantom_noisy(phantom.get()), run.sibling("_noisy.vol"));
  run.write_volume(mipdiff_phantom_mask(phantom.get()), run.sibling("_mask.vol"));
  run.write_volume(mipdiff_phantom_phase(phantom.get()), run.sibling("_phase.vol"));

  size_t needed = 0;
  check(mipdiff_phantom_spec_describe(spec.get(), nullptr, 0, &needed), "phantom description");
  std::string text(needed, '\0');
  check(mipdiff_phantom_spec_describe(spec.get(), text.data(), text.size(), &needed), "phantom description");
  text.resize(needed - 1);
  run.write_text(run.sibling(".txt"), text);

  const auto count = mipdiff_phantom_channels(phantom.get());
  if (count == 0) return;
  const auto* flow = mipdiff_phantom_flow(phantom.get());
  std::string sigma_list;
  for (size_t k = 0; k < count; ++k) {
    const auto base = run.sibling("_c" + std::to_string(k + 1));
    run.write_volume(mipdiff_phantom_channel(phantom.get(), k), base.string() + ".vol");
    const char* names[3] = {"_x", "_y", "_z"};
    for (int c = 0; c < 3; ++c) {
      mipdiff_field* f = nullptr;
      check(mipdiff_flow_set_component(flow, k, c, &f), "flow component");
      Field comp(f);
      mipdiff_volume* v = nullptr;
      check(mipdiff_volume_from_field(comp.get(), &v), "flow component");
      VolumePtr vol(v);
      run.write_volume(vol.get(), base.string() + names[c] + ".vol");
    }
    sigma_list += shortest(mipdiff_phantom_spec_channel_sigma(spec.get(), k)) + '\n';
  }
  run.write_text(run.sibling("_sigma.txt"), sigma_list);
}

void cmd_filter(Run& run) {
  const auto& s = run.settings();
  const int mode = s.choice("mode", {"mip", "mip_min"});
  const auto params = adaptive_params(s, mode);
  const auto hyst = hysteresis_params(s);
  const int threads = static_cast<int>(s.integer("threads", 1));
  auto input = run.read(s.required("input"));
  run.prepare_output_dir();

  if (hyst) {
    const auto depth = mipdiff_volume_depth(input.get());
    const auto w = mipdiff_volume_width(input.get()), h = mipdiff_volume_height(input.get());
    std::vector<double> data;
    data.reserve(w * h * depth);
    for (size_t z = 0; z < depth; ++z) {
      mipdiff_field* slice = nullptr;
      check(mipdiff_volume_slice(input.get(), z, &slice), "slice");
      Field in(slice);
      mipdiff_field* out = nullptr;
      check(mipdiff_hysteresis_filter(in.get(), &params, &*hyst, &out), "hysteresis filter");
      Field result(out);
      const double* p = mipdiff_field_data(result.get());
      data.insert(data.end(), p, p + w * h);
    }
    mipdiff_volume* v = nullptr;
    check(mipdiff_volume_create(w, h, depth, data.data(), &v), "result volume");
    VolumePtr vol(v);
    run.write_volume(vol.get(), run.output());
    return;
  }

  mipdiff_slice_filter* raw = nullptr;
  check(mipdiff_filter_slices(input.get(), &params, threads, &raw), "filter");
  SliceFilter result(raw);
  run.write_volume(mipdiff_slice_filter_volume(result.get()), run.output());
  for (size_t z = 0; z < mipdiff_slice_filter_count(result.get()); ++z) {
    const auto* trace = mipdiff_slice_filter_trace(result.get(), z);
    const auto path = run.sibling("_trace_z" + std::to_string(z) + ".csv");
    check(mipdiff_trace_write_csv(trace, path.string().c_str()), "writing " + path.string());
    note_trace(run, "slice " + std::to_string(z), trace);
  }
}

void cmd_project(Run& run) {
  const auto& s = run.settings();
  const int kind = s.choice("projection", {"max", "min"});
  auto input = run.read(s.required("input"));
  run.prepare_output_dir();
  auto image = project_volume(input.get(), kind);
  run.write_image(image.get(), run.stem());
}

std::optional<Field> reference_projection(Run& run, int kind, const mipdiff_volume* input) {
  const auto path = run.settings().str("reference");
  if (path == "none") return std::nullopt;
  auto ref = run.read(path);
  if (mipdiff_volume_width(ref.get()) != mipdiff_volume_width(input) ||
      mipdiff_volume_height(ref.get()) != mipdiff_volume_height(input) ||
      mipdiff_volume_depth(ref.get()) != mipdiff_volume_depth(input))
    io_error("reference " + path + " does not match the input dimensions");
  return project_volume(ref.get(), kind);
}

void cmd_swi(Run& run) {
  const auto& s = run.settings();
  const auto params = adaptive_params(s, MIPDIFF_MODE_MIP_MIN);
  const auto m = s.integer("mask_exponent", 1);
  const int order = s.choice("mask_order", {"post", "pre"});
  const int threads = static_cast<int>(s.integer("threads", 1));
  const auto roi = roi_setting(s);
  auto magnitude = run.read(s.required("input"));
  auto phase = run.read(s.required("phase"));
  auto reference = reference_projection(run, MIPDIFF_PROJECT_MIN, magnitude.get());
  run.prepare_output_dir();

  mipdiff_field *enh = nullptr, *fmip = nullptr;
  check(mipdiff_swi_pipeline(magnitude.get(), phase.get(), &params, static_cast<int>(m), order, threads,
                             &enh, &fmip),
        "swi pipeline");
  Field enhanced(enh), filtered(fmip);
  auto unfiltered = project_volume(magnitude.get(), MIPDIFF_PROJECT_MIN);
  check_roi(roi, unfiltered.get());

  run.write_image(enhanced.get(), run.stem());
  run.write_image(filtered.get(), run.sibling("_filtered_mip"));
  const auto* ref = reference ? reference->get() : nullptr;
  run.write_text(run.sibling("_metrics.csv"),
                 metrics_header() + metrics_row("filtered_mip", unfiltered.get(), filtered.get(), ref, roi) +
                     metrics_row("swi", unfiltered.get(), enhanced.get(), ref, roi));
}

void cmd_mip(Run& run) {
  const auto& s = run.settings();
  const auto params = adaptive_params(s, MIPDIFF_MODE_MIP);
  const auto roi = roi_setting(s);
  auto input = run.read(s.required("input"));
  auto reference = reference_projection(run, MIPDIFF_PROJECT_MAX, input.get());
  run.prepare_output_dir();

  mipdiff_field* out = nullptr;
  mipdiff_trace* tr = nullptr;
  check(mipdiff_mip_pipeline(input.get(), &params, &out, &tr), "mip pipeline");
  Field result(out);
  Trace trace(tr);
  auto unfiltered = project_volume(input.get(), MIPDIFF_PROJECT_MAX);
  check_roi(roi, unfiltered.get());

  run.write_image(result.get(), run.stem());
  const auto trace_path = run.sibling("_trace.csv");
  check(mipdiff_trace_write_csv(trace.get(), trace_path.string().c_str()), "writing " + trace_path.string());
  note_trace(run, "mip", trace.get());
  run.write_text(run.sibling("_metrics.csv"),
                 metrics_header() + metrics_row("mip", unfiltered.get(), result.get(),
                                                reference ? reference->get() : nullptr, roi));
}

Field single_image(Run& run, const VolumePtr& v, const std::string& what) {
  if (mipdiff_volume_depth(v.get()) != 1) io_error(what + " must hold a single slice");
  mipdiff_field* f = nullptr;
  check(mipdiff_volume_slice(v.get(), 0, &f), what);
  (void)run;
  return Field(f);
}

void cmd_pc(Run& run) {
  const auto& s = run.settings();
  const auto params = adaptive_params(s, MIPDIFF_MODE_MIP);
  const int mode = s.choice("flow_mode", {"sum", "rss"});
  const int threads = static_cast<int>(s.integer("threads", 1));
  const auto roi = roi_setting(s);
  const std::string stem = s.required("input");

  size_t count = 0;
  if (s.str("channels") == "auto") {
    while (fs::exists(stem + "_c" + std::to_string(count + 1) + "_x.vol")) ++count;
    if (count == 0) io_error("no flow channels found: " + stem + "_c1_x.vol");
  } else {
    count = static_cast<size_t>(s.integer("channels", 1));
  }

  mipdiff_flow_set* raw_set = nullptr;
  check(mipdiff_flow_set_create(&raw_set), "flow set");
  FlowSet flow(raw_set);
  for (size_t k = 0; k < count; ++k) {
    std::array<Field, 3> comps;
    const char* names[3] = {"_x", "_y", "_z"};
    for (int c = 0; c < 3; ++c) {
      auto vol = run.read(stem + "_c" + std::to_string(k + 1) + names[c] + ".vol");
      comps[c] = single_image(run, vol, "flow component");
    }
    check(mipdiff_flow_set_add(flow.get(), comps[0].get(), comps[1].get(), comps[2].get()), "flow channel");
  }

  std::optional<std::vector<double>> sigma;
  if (const auto path = s.str("sigma"); path != "none") {
    std::ifstream in(path);
    if (!in) io_error("cannot read sigma list " + path);
    run.digest(path);
    std::vector<double> values;
    std::string line;
    while (std::getline(in, line)) {
      if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      line = trim(line);
      if (line.empty()) continue;
      const auto v = parse_double(line);
      if (!v || !(*v > 0.0)) io_error("sigma list " + path + ": '" + line + "' is not a positive number");
      values.push_back(*v);
    }
    if (values.size() != count)
      io_error("sigma list " + path + " has " + std::to_string(values.size()) + " entries for " +
               std::to_string(count) + " channels");
    sigma = std::move(values);
  }

  run.prepare_output_dir();
  mipdiff_pc_result* raw_result = nullptr;
  check(mipdiff_pc_pipeline(flow.get(), &params, mode, sigma ? sigma->data() : nullptr, threads, &raw_result),
        "pc pipeline");
  PcResult result(raw_result);
  const auto* plain = mipdiff_pc_result_plain(result.get());
  const auto* combined = mipdiff_pc_result_combined(result.get());
  check_roi(roi, plain);

  for (size_t k = 0; k < count; ++k) {
    mipdiff_volume* v = nullptr;
    check(mipdiff_volume_from_field(mipdiff_pc_result_scaled(result.get(), k), &v), "scaled channel");
    VolumePtr vol(v);
    run.write_volume(vol.get(), run.sibling("_c" + std::to_string(k + 1) + ".vol"));
  }
  run.write_image(combined, run.stem());
  run.write_image(plain, run.sibling("_plain"));
  run.write_text(run.sibling("_metrics.csv"),
                 metrics_header() + metrics_row("plain", plain, plain, nullptr, roi) +
                     metrics_row("filter_synthesized", plain, combined, nullptr, roi));
}

Field image_setting(Run& run, const std::string& key, int kind) {
  auto v = run.read(run.settings().required(key));
  if (mipdiff_volume_depth(v.get()) == 1) return single_image(run, v, key);
  return project_volume(v.get(), kind);
}

void cmd_metrics(Run& run) {
  const auto& s = run.settings();
  const int kind = s.choice("projection", {"max", "min"});
  const auto roi = roi_setting(s);
  const auto label = s.required("label");
  if (label.find(',') != std::string::npos) config_error("key 'label' must not contain ','");
  auto input = image_setting(run, "input", kind);
  auto filtered = image_setting(run, "filtered", kind);
  std::optional<Field> reference;
  if (s.str("reference") != "none") reference = image_setting(run, "reference", kind);
  check_roi(roi, input.get());
  run.prepare_output_dir();
  run.write_text(run.output(), metrics_header() + metrics_row(label, input.get(), filtered.get(),
                                                              reference ? reference->get() : nullptr, roi));
}

mipdiff_compare_config compare_config(const Settings& s) {
  mipdiff_compare_config c;
  mipdiff_compare_config_default(&c);
  c.projection = s.choice("projection", {"max", "min"});
  c.adaptive = adaptive_params(s, c.projection == MIPDIFF_PROJECT_MIN ? MIPDIFF_MODE_MIP_MIN : MIPDIFF_MODE_MIP);
  c.roi = roi_setting(s);
  c.threads = static_cast<int>(s.integer("threads", 1));
  if (s.known("hysteresis")) {
    if (auto h = hysteresis_params(s)) {
      c.use_hysteresis = 1;
      c.hysteresis = *h;
    }
  }
  if (s.known("delta")) {
    if (s.str("delta") == "auto") {
      c.pm.auto_delta = 1;
    } else {
      c.pm.auto_delta = 0;
      c.pm.delta = s.real("delta", 0.0, true);
    }
    c.pm.dt = s.real("dt", 0.0, true);
    if (c.pm.dt > 0.25) config_error("key 'dt' must be <= 0.25");
    c.pm.iterations = static_cast<int>(s.integer("pm_iterations", 0));
    c.pm.kind = s.choice("diffusivity", {"rational", "exponential"});
  }
  return c;
}

void cmd_compare(Run& run) {
  const auto& s = run.settings();
  const auto config = compare_config(s);
  auto input = run.read(s.required("input"));
  VolumePtr reference;
  if (s.str("reference") != "none") reference = run.read(s.str("reference"));
  auto unfiltered = project_volume(input.get(), config.projection);
  check_roi(config.roi, unfiltered.get());
  run.prepare_output_dir();

  mipdiff_table* raw = nullptr;
  check(mipdiff_compare(input.get(), reference.get(), &config, &raw), "compare");
  Table table(raw);
  run.write_text(run.output(), mipdiff_table_csv(table.get()));
  const char* names[] = {"perona_malik", "orthogonal", "directional", "proposed"};
  for (size_t r = 0; r < mipdiff_table_rows(table.get()) && r < 4; ++r)
    run.write_image(mipdiff_table_image(table.get(), r), run.sibling(std::string("_") + names[r]));
}

void cmd_alpha_sweep(Run& run) {
  const auto& s = run.settings();
  const auto config = compare_config(s);
  std::vector<double> alphas;
  for (const auto& a : split(s.required("alphas"), ',')) {
    const auto v = parse_double(a);
    if (!v || *v < 0.0) config_error("key 'alphas': '" + a + "' is not a non-negative number");
    alphas.push_back(*v);
  }
  if (alphas.empty()) config_error("key 'alphas' is empty");
  auto input = run.read(s.required("input"));
  auto unfiltered = project_volume(input.get(), config.projection);
  check_roi(config.roi, unfiltered.get());
  run.prepare_output_dir();

  mipdiff_table* raw = nullptr;
  check(mipdiff_alpha_sweep(input.get(), alphas.data(), alphas.size(), &config, &raw), "alpha sweep");
  Table table(raw);
  run.write_text(run.output(), mipdiff_table_csv(table.get()));
}

// ---- command table ---------------------------------------------------------

struct Command {
  std::string name;
  std::string help;
  std::vector<Key> keys;
  void (*run)(Run&);
};

std::vector<Command> commands() {
  const Key input{"input", "", "input MIPVOL volume"};
  const Key output{"output", "", "output path"};
  const Key threads{"threads", "1", "worker threads"};
  const Key roi{"roi", "full", "metrics region: full or x0,y0,width,height"};
  const Key reference{"reference", "none", "clean reference volume for psnr_ref"};
  const std::vector<Key> pm = {
      {"delta", "auto", "Perona-Malik threshold (auto: 10% of the dynamic range)"},
      {"dt", "0.2", "Perona-Malik time step"},
      {"pm_iterations", "10", "Perona-Malik iterations"},
      {"diffusivity", "rational", "rational|exponential"},
  };
  std::vector<Key> sweep_filter(kFilterKeys.begin() + 1, kFilterKeys.end());

  return {
      {"phantom", "generate a synthetic vessel phantom",
       {{"output", "", "output stem"},
        {"preset", "venous", "venous|phase_contrast"},
        {"width", "preset", "volume width"},
        {"height", "preset", "volume height"},
        {"depth", "preset", "volume depth"},
        {"baseline_level", "preset", "mean background level"},
        {"baseline_amplitude", "preset", "background variation"},
        {"noise_sigma", "preset", "Gaussian noise sigma"},
        {"seed", "preset", "noise seed"},
        {"tubes", "preset", "'x,y,z x,y,z ... radius contrast' separated by ';', or none"},
        {"channels", "preset", "'cx,cy,width,sigma' separated by ';', or none"}},
       cmd_phantom},
      {"filter", "filter every slice of a volume",
       join({{input, output, threads, {"mode", "mip_min", "mip|mip_min"}}, kFilterKeys, kHysteresisKeys}),
       cmd_filter},
      {"project", "maximum or minimum intensity projection",
       {input, output, {"projection", "max", "max|min"}}, cmd_project},
      {"swi", "per-slice filtering, minimum projection and phase mask",
       join({{input, output, threads, {"phase", "", "phase volume (radians)"},
              {"mask_exponent", "4", "phase mask exponent"},
              {"mask_order", "post", "post|pre projection masking"}, reference, roi},
             kFilterKeys}),
       cmd_swi},
      {"mip", "maximum projection, then filtering", join({{input, output, reference, roi}, kFilterKeys}),
       cmd_mip},
      {"pc", "filter-synthesized phased-array combination of flow channels",
       join({{{"input", "", "flow stem (<stem>_c<k>_{x,y,z}.vol)"},
              output,
              threads,
              {"channels", "auto", "channel count or auto"},
              {"sigma", "none", "per-channel sigma list file"},
              {"flow_mode", "sum", "sum|rss"},
              roi},
             kFilterKeys}),
       cmd_pc},
      {"metrics", "psnr, contrast ratio and contrast per pixel",
       {{"input", "", "unfiltered image or volume"},
        {"filtered", "", "filtered image or volume"},
        reference,
        output,
        roi,
        {"projection", "min", "projection applied to multi-slice inputs: max|min"},
        {"label", "filtered", "method column value"}},
       cmd_metrics},
      {"compare", "compare the diffusion filters on one volume",
       join({{input, output, threads, reference, roi, {"projection", "min", "max|min"}}, pm, kFilterKeys,
             kHysteresisKeys}),
       cmd_compare},
      {"alpha-sweep", "psnr against alpha",
       join({{input, output, threads, roi, {"projection", "min", "max|min"},
              {"alphas", "1,2,4,8,16", "comma-separated alpha grid"}},
             sweep_filter}),
       cmd_alpha_sweep},
  };
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mipdiff: adaptive directional diffusion for intensity projections"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(mipdiff_version()));

  const auto table = commands();
  std::vector<std::map<std::string, std::string>> flag_values(table.size());
  std::vector<std::string> config_paths(table.size());
  std::vector<CLI::App*> subs;

  for (std::size_t i = 0; i < table.size(); ++i) {
    auto* sub = app.add_subcommand(table[i].name, table[i].help);
    sub->add_option("--config", config_paths[i], "settings file of 'key = value' lines");
    for (const auto& key : table[i].keys) {
      auto names = "--" + key.name;
      if (auto dashed = key.name; dashed.find('_') != std::string::npos) {
        std::replace(dashed.begin(), dashed.end(), '_', '-');
        names += ",--" + dashed;
      }
      if (key.name == "input") names += ",-i";
      if (key.name == "output") names += ",-o";
      auto help = key.help + (key.fallback.empty() ? "" : " [" + key.fallback + "]");
      sub->add_option_function<std::string>(
          names, [&flag_values, i, name = key.name](const std::string& v) { flag_values[i][name] = v; }, help);
    }
    subs.push_back(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  for (std::size_t i = 0; i < table.size(); ++i) {
    if (!subs[i]->parsed()) continue;
    try {
      Settings settings(table[i].name, table[i].keys);
      if (!config_paths[i].empty()) settings.load(config_paths[i]);
      for (const auto& [k, v] : flag_values[i]) settings.set(k, v);
      Run run(std::move(settings));
      table[i].run(run);
      run.finish();
      return 0;
    } catch (const Failure& f) {
      std::cerr << "mipdiff " << table[i].name << ": " << f.what() << '\n';
      return f.exit_code;
    } catch (const std::exception& e) {
      std::cerr << "mipdiff " << table[i].name << ": " << e.what() << '\n';
      return kExitIo;
    }
  }
  return kExitConfig;
}
