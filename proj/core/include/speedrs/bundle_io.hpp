#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "speedrs/path.hpp"

namespace speedrs {

// PB1 bundle block, all integers and floats little-endian:
//
//   "SPDR" | u32 version (=1) | u32 n_paths | u32 len | u32 dim | u64 seed
//   | n_paths * len * (dim + 1) float64, path-major, row-major, time in column 0
//
// A dataset file is a plain concatenation of blocks. The ModelSpec of each
// block lives in a sidecar "<file>.json" holding one JSON line per block.
inline constexpr std::uint32_t kPb1Version = 1;

void write_pb1(std::ostream& out, const PathBundle& bundle);
// Reads one block. Returns false on clean end-of-stream before a block starts.
bool read_pb1(std::istream& in, PathBundle& bundle);

// Writes all bundles to `file` and their model ids to `file.json`.
void write_pb1_file(const std::filesystem::path& file, const std::vector<PathBundle>& bundles);
std::vector<PathBundle> read_pb1_file(const std::filesystem::path& file);

}  // namespace speedrs
