#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <system_error>
#include <utility>
#include <vector>

#include "json.hpp"
#include "tsfactor/epoch_set.hpp"
#include "tsfactor/errors.hpp"

namespace tsfactor {

namespace fs = std::filesystem;

enum class DataFormat { kCsvDir, kPackedBinary };

/// A loaded dataset: samples plus the optional region grouping stored beside them.
struct Dataset {
  EpochSet data;
  RegionMap regions;
};

// ---------------------------------------------------------------------------
// Small text helpers

inline std::string format_double(double v) {
  std::array<char, 32> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc()) throw IoError("cannot format number");
  return std::string(buf.data(), ptr);
}

inline double parse_double(std::string_view token, const std::string& where) {
  while (!token.empty() && (token.front() == ' ' || token.front() == '\t')) token.remove_prefix(1);
  while (!token.empty() && (token.back() == ' ' || token.back() == '\t' || token.back() == '\r')) token.remove_suffix(1);
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc() || ptr != token.data() + token.size())
    throw ParseError(where + ": cannot parse '" + std::string(token) + "' as a number");
  return v;
}

/// Writes `contents` to `path` through a temporary file and a rename.
inline void write_file_atomic(const fs::path& path, const std::string& contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw IoError("failed writing " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Rows = series, columns = samples, no header.
inline std::string matrix_to_csv(const Eigen::MatrixXd& m) {
  std::string out;
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index t = 0; t < m.cols(); ++t) {
      if (t) out += ',';
      out += format_double(m(i, t));
    }
    out += '\n';
  }
  return out;
}

inline Eigen::MatrixXd csv_to_matrix(const std::string& text, const std::string& file) {
  std::vector<std::vector<double>> rows;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<double> row;
    std::size_t pos = 0;
    while (true) {
      const std::size_t comma = line.find(',', pos);
      const std::string_view tok(line.data() + pos, (comma == std::string::npos ? line.size() : comma) - pos);
      const double v = parse_double(tok, file + ":" + std::to_string(line_no));
      if (!std::isfinite(v))
        throw ValidationError(file + ":" + std::to_string(line_no) + ": non-finite value '" + std::string(tok) + "'");
      row.push_back(v);
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw ShapeError(file + ":" + std::to_string(line_no) + ": expected " + std::to_string(rows.front().size()) +
                       " columns, found " + std::to_string(row.size()));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError(file + ": no data rows");
  Eigen::MatrixXd m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t t = 0; t < rows[i].size(); ++t) m(static_cast<Index>(i), static_cast<Index>(t)) = rows[i][t];
  return m;
}

// ---------------------------------------------------------------------------
// Sidecar metadata

inline nlohmann::json metadata_json(const EpochSet& es, const RegionMap& regions) {
  nlohmann::json meta;
  meta["sampling_rate"] = es.sampling_rate();
  meta["channel_labels"] = es.channel_labels();
  if (es.channel_positions()) {
    nlohmann::json pos = nlohmann::json::array();
    for (const auto& p : *es.channel_positions()) pos.push_back({p.x, p.y});
    meta["channel_positions"] = pos;
  }
  if (!regions.empty()) {
    nlohmann::json reg = nlohmann::json::object();
    for (const auto& r : regions.regions()) {
      nlohmann::json members = nlohmann::json::array();
      for (Index c : r.channels) members.push_back(es.channel_labels()[static_cast<std::size_t>(c)]);
      reg[r.name] = members;
    }
    meta["regions"] = reg;
  }
  return meta;
}

struct Metadata {
  double sampling_rate{1.0};
  std::vector<std::string> labels;
  std::optional<std::vector<Position>> positions;
  std::vector<std::pair<std::string, std::vector<std::string>>> regions;
};

inline Metadata parse_metadata(const std::string& text, const std::string& file) {
  Metadata meta;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
    meta.sampling_rate = j.at("sampling_rate").get<double>();
    meta.labels = j.at("channel_labels").get<std::vector<std::string>>();
    if (j.contains("channel_positions") && !j["channel_positions"].is_null()) {
      meta.positions.emplace();
      for (const auto& p : j["channel_positions"]) {
        if (!p.is_array() || p.size() != 2) throw ParseError(file + ": channel_positions entries must be [x, y] pairs");
        meta.positions->push_back({p[0].get<double>(), p[1].get<double>()});
      }
    }
    if (j.contains("regions"))
      for (const auto& [name, members] : j["regions"].items())
        meta.regions.emplace_back(name, members.get<std::vector<std::string>>());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(file + ": " + e.what());
  }
  return meta;
}

/// Region file: {"regions": {name: [labels]}} or a bare {name: [labels]} object.
inline RegionMap load_region_map(const fs::path& path, const std::vector<std::string>& labels) {
  std::vector<std::pair<std::string, std::vector<std::string>>> groups;
  try {
    nlohmann::json j = nlohmann::json::parse(read_file(path));
    const nlohmann::json& obj = j.contains("regions") ? j["regions"] : j;
    for (const auto& [name, members] : obj.items()) groups.emplace_back(name, members.get<std::vector<std::string>>());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return RegionMap::from_labels(groups, labels);
}

// ---------------------------------------------------------------------------
// csv-dir: epoch_<k>.csv (k = 0..E-1) plus meta.json

inline Dataset load_csv_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError(dir.string() + " is not a directory");
  std::vector<std::pair<long long, fs::path>> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("epoch_", 0) != 0 || entry.path().extension() != ".csv") continue;
    const std::string idx = name.substr(6, name.size() - 6 - 4);
    long long k = 0;
    auto [ptr, ec] = std::from_chars(idx.data(), idx.data() + idx.size(), k);
    if (ec != std::errc() || ptr != idx.data() + idx.size()) continue;
    files.emplace_back(k, entry.path());
  }
  if (files.empty()) throw IoError(dir.string() + ": no epoch_<k>.csv files");
  std::sort(files.begin(), files.end());

  std::vector<Eigen::MatrixXd> epochs;
  for (const auto& [k, path] : files) {
    Eigen::MatrixXd m = csv_to_matrix(read_file(path), path.string());
    if (!epochs.empty() && (m.rows() != epochs.front().rows() || m.cols() != epochs.front().cols()))
      throw ShapeError(path.string() + ": shape " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                       " differs from " + std::to_string(epochs.front().rows()) + "x" +
                       std::to_string(epochs.front().cols()));
    epochs.push_back(std::move(m));
  }

  Metadata meta;
  const fs::path meta_path = dir / "meta.json";
  if (fs::exists(meta_path))
    meta = parse_metadata(read_file(meta_path), meta_path.string());
  EpochSet es(std::move(epochs), meta.sampling_rate, std::move(meta.labels), std::move(meta.positions));
  RegionMap regions = RegionMap::from_labels(meta.regions, es.channel_labels());
  return {std::move(es), std::move(regions)};
}

inline void save_csv_dir(const EpochSet& es, const fs::path& dir, const RegionMap& regions = {}) {
  fs::create_directories(dir);
  for (std::size_t e = 0; e < es.num_epochs(); ++e)
    write_file_atomic(dir / ("epoch_" + std::to_string(e) + ".csv"), matrix_to_csv(es.epoch(e)));
  write_file_atomic(dir / "meta.json", metadata_json(es, regions).dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// packed binary: "XHTS", u16 version, u32 E, n, T (little endian), then
// E*n*T little-endian f64 in [epoch][channel][time] order. Labels, rate and
// regions go to an optional "<file>.meta.json" sidecar.

inline constexpr std::array<char, 4> kPackedMagic{'X', 'H', 'T', 'S'};
inline constexpr std::uint16_t kPackedVersion = 1;

namespace detail {

template <typename U>
void put_le(std::string& out, U v) {
  for (std::size_t b = 0; b < sizeof(U); ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xff));
}

template <typename U>
U get_le(const std::string& in, std::size_t& pos, const std::string& file) {
  if (pos + sizeof(U) > in.size()) throw ParseError(file + ": truncated at byte " + std::to_string(pos));
  U v = 0;
  for (std::size_t b = 0; b < sizeof(U); ++b) v |= static_cast<U>(static_cast<unsigned char>(in[pos + b])) << (8 * b);
  pos += sizeof(U);
  return v;
}

}  // namespace detail

inline fs::path sidecar_path(const fs::path& file) {
  fs::path p = file;
  p += ".meta.json";
  return p;
}

inline std::string pack_epochs(const EpochSet& es) {
  std::string out(kPackedMagic.begin(), kPackedMagic.end());
  detail::put_le<std::uint16_t>(out, kPackedVersion);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(es.num_epochs()));
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(es.channels()));
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(es.samples()));
  out.reserve(out.size() + es.num_epochs() * static_cast<std::size_t>(es.channels() * es.samples()) * 8);
  for (const auto& ep : es.epochs())
    for (Index i = 0; i < ep.rows(); ++i)
      for (Index t = 0; t < ep.cols(); ++t) detail::put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(ep(i, t)));
  return out;
}

inline Dataset load_packed(const fs::path& file) {
  const std::string bytes = read_file(file);
  const std::string name = file.string();
  if (bytes.size() < 4 || !std::equal(kPackedMagic.begin(), kPackedMagic.end(), bytes.begin()))
    throw ParseError(name + ": missing XHTS magic");
  std::size_t pos = 4;
  const auto version = detail::get_le<std::uint16_t>(bytes, pos, name);
  if (version != kPackedVersion) throw ParseError(name + ": unsupported version " + std::to_string(version));
  const auto E = detail::get_le<std::uint32_t>(bytes, pos, name);
  const auto n = detail::get_le<std::uint32_t>(bytes, pos, name);
  const auto T = detail::get_le<std::uint32_t>(bytes, pos, name);
  const std::uint64_t expected = static_cast<std::uint64_t>(E) * n * T * 8;
  if (bytes.size() - pos != expected)
    throw ShapeError(name + ": payload has " + std::to_string(bytes.size() - pos) + " bytes, header implies " +
                     std::to_string(expected));
  std::vector<Eigen::MatrixXd> epochs(E, Eigen::MatrixXd(n, T));
  for (auto& ep : epochs)
    for (Index i = 0; i < static_cast<Index>(n); ++i)
      for (Index t = 0; t < static_cast<Index>(T); ++t)
        ep(i, t) = std::bit_cast<double>(detail::get_le<std::uint64_t>(bytes, pos, name));
  Metadata meta;
  if (fs::exists(sidecar_path(file))) meta = parse_metadata(read_file(sidecar_path(file)), sidecar_path(file).string());
  EpochSet es(std::move(epochs), meta.sampling_rate, std::move(meta.labels), std::move(meta.positions));
  RegionMap regions = RegionMap::from_labels(meta.regions, es.channel_labels());
  return {std::move(es), std::move(regions)};
}

inline void save_packed(const EpochSet& es, const fs::path& file, const RegionMap& regions = {}) {
  write_file_atomic(file, pack_epochs(es));
  write_file_atomic(sidecar_path(file), metadata_json(es, regions).dump(2) + "\n");
}

// ---------------------------------------------------------------------------

/// Directories are read as csv-dir, regular files as packed binary.
inline DataFormat detect_format(const fs::path& path) {
  if (!fs::exists(path)) throw IoError(path.string() + " does not exist");
  return fs::is_directory(path) ? DataFormat::kCsvDir : DataFormat::kPackedBinary;
}

inline Dataset load_dataset(const fs::path& path, std::optional<DataFormat> format = std::nullopt) {
  const DataFormat f = format.value_or(detect_format(path));
  return f == DataFormat::kCsvDir ? load_csv_dir(path) : load_packed(path);
}

inline EpochSet load_epochs(const fs::path& path, std::optional<DataFormat> format = std::nullopt) {
  return load_dataset(path, format).data;
}

inline void save_epochs(const EpochSet& es, const fs::path& path, DataFormat format, const RegionMap& regions = {}) {
  if (format == DataFormat::kCsvDir)
    save_csv_dir(es, path, regions);
  else
    save_packed(es, path, regions);
}

}  // namespace tsfactor
