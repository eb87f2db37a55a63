#include "speedrs/bundle_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "speedrs/error.hpp"

namespace speedrs {
namespace {

constexpr std::array<char, 4> kMagic{'S', 'P', 'D', 'R'};

template <class T>
void put_le(std::ostream& out, T value) {
  std::array<unsigned char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  out.write(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
}

template <class T>
T get_le(std::istream& in) {
  std::array<unsigned char, sizeof(T)> bytes;
  in.read(reinterpret_cast<char*>(bytes.data()), sizeof(T));
  if (!in) fail(Errc::Io, "truncated PB1 block");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

}  // namespace

void write_pb1(std::ostream& out, const PathBundle& bundle) {
  bundle.validate();
  const std::size_t len = bundle.paths.front().length();
  const std::size_t dim = bundle.dim();
  for (const auto& p : bundle.paths)
    if (p.length() != len) fail(Errc::LengthMismatch, "PB1 requires a uniform path length");
  out.write(kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(out, kPb1Version);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(bundle.size()));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(len));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(dim));
  put_le<std::uint64_t>(out, bundle.seed);
  for (const auto& p : bundle.paths)
    for (std::size_t i = 0; i < len; ++i) {
      put_le<double>(out, p.time(i));
      for (double v : p.row(i)) put_le<double>(out, v);
    }
  if (!out) fail(Errc::Io, "failed writing PB1 block");
}

bool read_pb1(std::istream& in, PathBundle& bundle) {
  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size());
  if (in.gcount() == 0 && in.eof()) return false;
  if (!in || magic != kMagic) fail(Errc::Io, "bad PB1 magic");
  const auto version = get_le<std::uint32_t>(in);
  if (version != kPb1Version) fail(Errc::Io, "unsupported PB1 version " + std::to_string(version));
  const auto n_paths = get_le<std::uint32_t>(in);
  const auto len = get_le<std::uint32_t>(in);
  const auto dim = get_le<std::uint32_t>(in);
  bundle.seed = get_le<std::uint64_t>(in);
  bundle.paths.clear();
  bundle.paths.reserve(n_paths);
  for (std::uint32_t p = 0; p < n_paths; ++p) {
    std::vector<double> t(len), v(static_cast<std::size_t>(len) * dim);
    for (std::uint32_t i = 0; i < len; ++i) {
      t[i] = get_le<double>(in);
      for (std::uint32_t k = 0; k < dim; ++k) v[static_cast<std::size_t>(i) * dim + k] = get_le<double>(in);
    }
    bundle.paths.emplace_back(std::move(t), std::move(v), dim);
  }
  return true;
}

void write_pb1_file(const std::filesystem::path& file, const std::vector<PathBundle>& bundles) {
  std::ofstream out(file, std::ios::binary);
  if (!out) fail(Errc::Io, "cannot open " + file.string());
  std::ofstream side(file.string() + ".json");
  if (!side) fail(Errc::Io, "cannot open sidecar for " + file.string());
  for (const auto& b : bundles) {
    write_pb1(out, b);
    side << (b.model_id.empty() ? std::string("null") : b.model_id) << '\n';
  }
}

std::vector<PathBundle> read_pb1_file(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) fail(Errc::Io, "cannot open " + file.string());
  std::vector<PathBundle> out;
  PathBundle b;
  while (read_pb1(in, b)) out.push_back(std::move(b));
  std::ifstream side(file.string() + ".json");
  std::string line;
  for (auto& bundle : out) {
    if (!side || !std::getline(side, line)) break;
    bundle.model_id = line == "null" ? std::string() : line;
  }
  return out;
}

}  // namespace speedrs
