#pragma once

// On-disk formats.
//
// A block store is a directory holding `manifest.json` plus one binary file
// per degree l: row-major, little-endian IEEE-754 float64. Coefficient stores
// hold K x (2l+1) blocks, autocorrelation stores hold K x K blocks. Every
// block carries its byte length and CRC-32 in the manifest. Stores are
// written into a sibling staging directory and renamed into place, so an
// interrupted write never leaves a loadable half-written store.

#include <nlohmann/json.hpp>
#include <zlib.h>

#include <bit>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "kamor/errors.hpp"
#include "kamor/kam.hpp"
#include "kamor/phantom.hpp"

namespace kamor {

namespace fs = std::filesystem;
using json = nlohmann::json;

inline constexpr const char* kCoefficientSchema = "kamor.coefficients/1";
inline constexpr const char* kAutocorrelationSchema = "kamor.autocorrelation/1";
inline constexpr const char* kPhantomSchema = "kamor.phantom/1";
inline constexpr const char* kParityTag = "even-real/odd-imaginary";

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

static_assert(sizeof(double) == 8 && std::numeric_limits<double>::is_iec559);

inline std::string encode_le(const Matrix& m) {
  std::string out;
  out.reserve(static_cast<std::size_t>(m.size()) * 8);
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const auto bits = std::bit_cast<std::uint64_t>(m(r, c));
      for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xFF));
    }
  return out;
}

inline Matrix decode_le(const std::string& bytes, Eigen::Index rows, Eigen::Index cols) {
  Matrix m(rows, cols);
  std::size_t pos = 0;
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) {
      std::uint64_t bits = 0;
      for (int b = 0; b < 8; ++b)
        bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[pos++])) << (8 * b);
      m(r, c) = std::bit_cast<double>(bits);
    }
  return m;
}

inline std::string crc32_hex(const std::string& bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  crc = ::crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()),
                static_cast<uInt>(bytes.size()));
  std::ostringstream os;
  os << std::hex << std::setw(8) << std::setfill('0') << static_cast<std::uint32_t>(crc);
  return os.str();
}

inline void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw IoError("write failed: " + path.string());
}

inline std::string read_file(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

inline std::string block_file_name(int l) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "l%03d.bin", l);
  return buf;
}

/// Writes `files` plus manifest into a staging directory and renames it to
/// `dir`, replacing any previous store there.
inline void commit_store(const fs::path& dir, const json& manifest,
                         const std::vector<std::pair<std::string, std::string>>& files) {
  const fs::path target = fs::absolute(dir);
  const fs::path staging = target.parent_path() / ("." + target.filename().string() + ".partial");
  std::error_code ec;
  fs::remove_all(staging, ec);
  fs::create_directories(staging, ec);
  if (ec) throw IoError("cannot create " + staging.string() + ": " + ec.message());
  for (const auto& [name, bytes] : files) write_file(staging / name, bytes);
  write_file(staging / "manifest.json", manifest.dump(2) + "\n");
  fs::remove_all(target, ec);
  fs::rename(staging, target, ec);
  if (ec) throw IoError("cannot move store into " + target.string() + ": " + ec.message());
}

inline json read_manifest(const fs::path& dir, const char* schema) {
  const fs::path mpath = dir / "manifest.json";
  if (!fs::exists(mpath)) throw IoError("missing manifest: " + mpath.string());
  json m;
  try {
    m = json::parse(read_file(mpath));
  } catch (const json::exception& e) {
    throw IntegrityError("unparseable manifest " + mpath.string() + ": " + e.what());
  }
  if (m.value("schema", std::string{}) != schema)
    throw IntegrityError(mpath.string() + ": expected schema " + schema);
  return m;
}

inline Matrix read_block(const fs::path& dir, const json& entry, Eigen::Index rows,
                         Eigen::Index cols) {
  const fs::path path = dir / entry.at("file").get<std::string>();
  if (!fs::exists(path)) throw IoError("missing block file: " + path.string());
  if (entry.at("rows").get<Eigen::Index>() != rows || entry.at("cols").get<Eigen::Index>() != cols)
    throw IntegrityError(path.string() + ": declared shape does not match the grid");
  const std::string bytes = read_file(path);
  const auto expected = static_cast<std::size_t>(rows * cols * 8);
  if (bytes.size() != expected || entry.at("bytes").get<std::size_t>() != expected)
    throw IntegrityError(path.string() + ": expected " + std::to_string(expected) +
                         " bytes, found " + std::to_string(bytes.size()));
  if (crc32_hex(bytes) != entry.at("crc32").get<std::string>())
    throw IntegrityError(path.string() + ": checksum mismatch");
  return decode_le(bytes, rows, cols);
}

inline json block_entry(int l, const std::string& bytes, Eigen::Index rows, Eigen::Index cols) {
  return {{"l", l},       {"file", block_file_name(l)}, {"rows", rows},
          {"cols", cols}, {"bytes", bytes.size()},      {"crc32", crc32_hex(bytes)}};
}

}  // namespace detail

inline void save_coefficients(const CoefficientSet& set, const fs::path& dir) {
  set.validate();
  json manifest = {{"schema", kCoefficientSchema},
                   {"grid", set.grid.ks},
                   {"L", set.L},
                   {"parity", kParityTag},
                   {"dtype", "float64-le"},
                   {"layout", "row-major"},
                   {"blocks", json::array()}};
  std::vector<std::pair<std::string, std::string>> files;
  for (int l = 0; l <= set.L; ++l) {
    std::string bytes = detail::encode_le(set.blocks[l]);
    manifest["blocks"].push_back(detail::block_entry(l, bytes, set.K(), block_width(l)));
    files.emplace_back(detail::block_file_name(l), std::move(bytes));
  }
  detail::commit_store(dir, manifest, files);
}

inline CoefficientSet load_coefficients(const fs::path& dir) {
  const json m = detail::read_manifest(dir, kCoefficientSchema);
  try {
    if (m.at("parity").get<std::string>() != kParityTag)
      throw IntegrityError(dir.string() + ": unknown parity convention");
    CoefficientSet set;
    set.grid.ks = m.at("grid").get<std::vector<double>>();
    set.L = m.at("L").get<int>();
    set.grid.validate();
    const json& blocks = m.at("blocks");
    if (static_cast<int>(blocks.size()) != set.L + 1)
      throw IntegrityError(dir.string() + ": block count does not match L");
    for (int l = 0; l <= set.L; ++l) {
      if (blocks[l].at("l").get<int>() != l)
        throw IntegrityError(dir.string() + ": blocks out of order");
      set.blocks.push_back(detail::read_block(dir, blocks[l], set.K(), block_width(l)));
    }
    return set;
  } catch (const json::exception& e) {
    throw IntegrityError(dir.string() + ": malformed manifest: " + e.what());
  }
}

struct AutocorrelationStore {
  RadialGrid grid;
  std::vector<Autocorrelation> cls;
};

inline void save_autocorrelations(const RadialGrid& grid,
                                  const std::vector<Autocorrelation>& cls,
                                  const fs::path& dir) {
  grid.validate();
  json manifest = {{"schema", kAutocorrelationSchema},
                   {"grid", grid.ks},
                   {"L", static_cast<int>(cls.size()) - 1},
                   {"dtype", "float64-le"},
                   {"layout", "row-major"},
                   {"blocks", json::array()}};
  std::vector<std::pair<std::string, std::string>> files;
  for (std::size_t i = 0; i < cls.size(); ++i) {
    const int l = static_cast<int>(i);
    if (cls[i].l != l || cls[i].C.rows() != grid.K() || cls[i].C.cols() != grid.K())
      throw DimensionError("save_autocorrelations: C_" + std::to_string(l) +
                           " does not match the grid");
    std::string bytes = detail::encode_le(cls[i].C);
    manifest["blocks"].push_back(detail::block_entry(l, bytes, grid.K(), grid.K()));
    files.emplace_back(detail::block_file_name(l), std::move(bytes));
  }
  detail::commit_store(dir, manifest, files);
}

inline AutocorrelationStore load_autocorrelations(const fs::path& dir) {
  const json m = detail::read_manifest(dir, kAutocorrelationSchema);
  try {
    AutocorrelationStore s;
    s.grid.ks = m.at("grid").get<std::vector<double>>();
    s.grid.validate();
    const int L = m.at("L").get<int>();
    const json& blocks = m.at("blocks");
    if (static_cast<int>(blocks.size()) != L + 1)
      throw IntegrityError(dir.string() + ": block count does not match L");
    for (int l = 0; l <= L; ++l) {
      if (blocks[l].at("l").get<int>() != l)
        throw IntegrityError(dir.string() + ": blocks out of order");
      s.cls.push_back({l, detail::read_block(dir, blocks[l], s.grid.K(), s.grid.K())});
    }
    return s;
  } catch (const json::exception& e) {
    throw IntegrityError(dir.string() + ": malformed manifest: " + e.what());
  }
}

/// Writes a text file via a temporary sibling and rename.
inline void write_text_atomic(const fs::path& path, const std::string& text) {
  const fs::path target = fs::absolute(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.parent_path() / ("." + target.filename().string() + ".partial");
  detail::write_file(tmp, text);
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) throw IoError("cannot move " + tmp.string() + " to " + target.string());
}

inline json phantom_to_json(const Phantom& p) {
  json blobs = json::array();
  for (const Blob& b : p.blobs)
    blobs.push_back({{"center", {b.center.x(), b.center.y(), b.center.z()}},
                     {"sigma", b.sigma},
                     {"amplitude", b.amplitude}});
  return {{"schema", kPhantomSchema}, {"blobs", blobs}};
}

inline Phantom phantom_from_json(const json& j) {
  Phantom p;
  try {
    for (const json& b : j.at("blobs")) {
      const auto c = b.at("center").get<std::vector<double>>();
      if (c.size() != 3) throw InputError("phantom blob center must have 3 components");
      p.blobs.push_back({Eigen::Vector3d(c[0], c[1], c[2]), b.at("sigma").get<double>(),
                         b.at("amplitude").get<double>()});
    }
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed phantom description: ") + e.what());
  }
  p.validate();
  return p;
}

inline Phantom load_phantom(const fs::path& path) {
  try {
    return phantom_from_json(json::parse(detail::read_file(path)));
  } catch (const json::parse_error& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

inline void save_phantom(const Phantom& p, const fs::path& path) {
  write_text_atomic(path, phantom_to_json(p).dump(2) + "\n");
}

}  // namespace kamor
