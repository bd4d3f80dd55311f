#pragma once

#include <filesystem>
#include <vector>

#include "mipdiff/field.hpp"

namespace mipdiff {

// MIPVOL: "MIPVOL1 <nx> <ny> <nz>\n" then nx*ny*nz little-endian binary32
// samples, x fastest, then y, then z.

Volume read_volume(const std::filesystem::path& path);
void write_volume(const Volume& volume, const std::filesystem::path& path);

/// 16-bit binary PGM (P5, maxval 65535, big-endian samples), linearly
/// rescaled from [min, max]. Constant fields export as zeros.
void export_pgm(const ScalarField& field, const std::filesystem::path& path);

/// "x,value" header followed by one line per pixel of row `row_index`.
void export_profile_csv(const ScalarField& field, std::size_t row_index,
                        const std::filesystem::path& path);

/// One positive decimal per line; blank lines and '#' comments ignored.
std::vector<double> read_sigma_list(const std::filesystem::path& path);

/// Shortest round-trip decimal representation.
std::string format_double(double value);

}  // namespace mipdiff
