#include "mipdiff/io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

namespace mipdiff {
namespace {

constexpr const char* kMagic = "MIPVOL1";
constexpr std::size_t kMaxHeader = 256;

std::uint32_t to_little_endian(std::uint32_t v) noexcept {
  if constexpr (std::endian::native == std::endian::big) {
    v = ((v & 0x000000FFu) << 24) | ((v & 0x0000FF00u) << 8) | ((v & 0x00FF0000u) >> 8) |
        ((v & 0xFF000000u) >> 24);
  }
  return v;
}

[[noreturn]] void io_error(const std::string& what, const std::filesystem::path& path) {
  throw Error(ErrorCode::io_failure, what + ": " + path.string());
}

bool parse_dim(const std::string& token, std::size_t& out) {
  if (token.empty()) return false;
  const auto* first = token.data();
  const auto* last = first + token.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc{} && ptr == last && out > 0;
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc{}) return "nan";
  return std::string(buf, ptr);
}

Volume read_volume(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) io_error("cannot open volume", path);

  std::string header;
  char ch = 0;
  bool terminated = false;
  while (header.size() < kMaxHeader && in.get(ch)) {
    if (ch == '\n') {
      terminated = true;
      break;
    }
    header.push_back(ch);
  }

  std::istringstream hs(header);
  std::string magic, sx, sy, sz, extra;
  hs >> magic;
  if (magic != kMagic)
    throw Error(ErrorCode::magic_mismatch, "not a MIPVOL1 file (magic '" + magic + "'): " + path.string());
  hs >> sx >> sy >> sz;
  std::size_t nx = 0, ny = 0, nz = 0;
  if (!terminated || !parse_dim(sx, nx) || !parse_dim(sy, ny) || !parse_dim(sz, nz) || (hs >> extra))
    throw Error(ErrorCode::dimension_mismatch, "malformed MIPVOL header '" + header + "': " + path.string());

  constexpr auto kLimit = std::numeric_limits<std::size_t>::max() / 4;
  if (nx > kLimit / ny || nx * ny > kLimit / nz)
    throw Error(ErrorCode::dimension_mismatch, "MIPVOL dimensions overflow: " + path.string());

  const std::size_t count = nx * ny * nz;
  std::vector<char> raw(count * 4);
  in.read(raw.data(), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size()) {
    std::ostringstream os;
    os << "MIPVOL payload has " << in.gcount() / 4 << " of " << count << " samples: " << path.string();
    throw Error(ErrorCode::truncated_payload, os.str());
  }
  if (in.peek() != std::char_traits<char>::eof())
    throw Error(ErrorCode::dimension_mismatch,
                "MIPVOL payload longer than header dimensions: " + path.string());

  std::vector<ScalarField> slices;
  slices.reserve(nz);
  std::size_t offset = 0;
  for (std::size_t z = 0; z < nz; ++z) {
    ScalarField slice(nx, ny);
    for (std::size_t i = 0; i < nx * ny; ++i, offset += 4) {
      std::uint32_t bits;
      std::memcpy(&bits, raw.data() + offset, 4);
      const float v = std::bit_cast<float>(to_little_endian(bits));
      if (!std::isfinite(v)) {
        std::ostringstream os;
        os << "non-finite sample at index " << offset / 4 << ": " << path.string();
        throw Error(ErrorCode::non_finite_value, os.str());
      }
      slice[i] = static_cast<double>(v);
    }
    slices.push_back(std::move(slice));
  }
  return Volume(std::move(slices));
}

void write_volume(const Volume& volume, const std::filesystem::path& path) {
  if (volume.depth() == 0) throw Error(ErrorCode::invalid_argument, "cannot write an empty volume");
  std::vector<char> raw;
  raw.reserve(volume.width() * volume.height() * volume.depth() * 4);
  for (const auto& slice : volume.slices()) {
    for (double v : slice.values()) {
      const auto f = static_cast<float>(v);
      if (!std::isfinite(f))
        throw Error(ErrorCode::non_finite_value, "volume sample not representable as binary32");
      const auto bits = to_little_endian(std::bit_cast<std::uint32_t>(f));
      char bytes[4];
      std::memcpy(bytes, &bits, 4);
      raw.insert(raw.end(), bytes, bytes + 4);
    }
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) io_error("cannot create volume", path);
  out << kMagic << ' ' << volume.width() << ' ' << volume.height() << ' ' << volume.depth() << '\n';
  out.write(raw.data(), static_cast<std::streamsize>(raw.size()));
  if (!out) io_error("failed writing volume", path);
}

void export_pgm(const ScalarField& field, const std::filesystem::path& path) {
  if (field.empty()) throw Error(ErrorCode::invalid_argument, "cannot export an empty field");
  if (!field.all_finite()) throw Error(ErrorCode::non_finite_value, "PGM export of non-finite field");
  const double lo = field.min();
  const double hi = field.max();
  const double range = hi - lo;

  std::vector<unsigned char> raw;
  raw.reserve(field.size() * 2);
  for (double v : field.values()) {
    std::uint16_t q = 0;
    if (range > 0.0) q = static_cast<std::uint16_t>(std::lround((v - lo) / range * 65535.0));
    raw.push_back(static_cast<unsigned char>(q >> 8));
    raw.push_back(static_cast<unsigned char>(q & 0xFF));
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) io_error("cannot create PGM", path);
  out << "P5\n" << field.width() << ' ' << field.height() << "\n65535\n";
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) io_error("failed writing PGM", path);
}

void export_profile_csv(const ScalarField& field, std::size_t row_index,
                        const std::filesystem::path& path) {
  if (row_index >= field.height()) {
    std::ostringstream os;
    os << "profile row " << row_index << " outside field of height " << field.height();
    throw Error(ErrorCode::out_of_range, os.str());
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) io_error("cannot create profile CSV", path);
  out << "x,value\n";
  for (std::size_t x = 0; x < field.width(); ++x)
    out << x << ',' << format_double(field(x, row_index)) << '\n';
  if (!out) io_error("failed writing profile CSV", path);
}

std::vector<double> read_sigma_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) io_error("cannot open sigma list", path);
  std::vector<double> sigma;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const auto e = line.find_last_not_of(" \t\r");
    const std::string token = line.substr(b, e - b + 1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    if (ec != std::errc{} || ptr != token.data() + token.size()) {
      std::ostringstream os;
      os << "sigma list line " << line_no << " is not a number: " << path.string();
      throw Error(ErrorCode::invalid_argument, os.str());
    }
    if (!(v > 0.0) || !std::isfinite(v)) {
      std::ostringstream os;
      os << "sigma list line " << line_no << " must be positive: " << path.string();
      throw Error(ErrorCode::non_positive_sigma, os.str());
    }
    sigma.push_back(v);
  }
  return sigma;
}

}  // namespace mipdiff
