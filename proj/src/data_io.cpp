#include "actseg/data_io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "actseg/binary_io.hpp"
#include "actseg/error.hpp"

namespace actseg {

namespace fs = std::filesystem;

namespace {

constexpr char kFeatureMagic[4] = {'S', 'E', 'G', 'F'};
constexpr std::uint32_t kFeatureVersion = 1;

std::ifstream open_in(const fs::path& path, bool binary) {
  std::ifstream is(path, binary ? std::ios::binary : std::ios::in);
  if (!is) throw FormatError("cannot open '" + path.string() + "'");
  return is;
}

std::ofstream open_out(const fs::path& path, bool binary) {
  std::ofstream os(path, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
  if (!os) throw FormatError("cannot open '" + path.string() + "' for writing");
  return os;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, '\t')) out.push_back(cur);
  return out;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void save_features_binary(const fs::path& path, const Matrix& features) {
  auto os = open_out(path, true);
  os.write(kFeatureMagic, 4);
  binio::put_u32(os, kFeatureVersion);
  binio::put_u32(os, static_cast<std::uint32_t>(features.rows()));
  binio::put_u32(os, static_cast<std::uint32_t>(features.cols()));
  for (double v : features.data()) binio::put_f64(os, v);
  if (!os) throw FormatError("write failed for '" + path.string() + "'");
}

Matrix load_features_binary(const fs::path& path) {
  auto is = open_in(path, true);
  binio::Reader in(is, path.string());
  char magic[4];
  in.bytes(magic, 4);
  if (!std::equal(magic, magic + 4, kFeatureMagic)) {
    throw FormatError(path.string() + ": bad magic");
  }
  const std::uint32_t version = in.u32();
  if (version != kFeatureVersion) in.fail("unsupported version " + std::to_string(version));
  const std::uint32_t T = in.u32();
  const std::uint32_t D = in.u32();
  if (T == 0 || D == 0) in.fail("empty feature matrix");
  Matrix m(T, D);
  for (auto& v : m.data()) v = in.f64();
  if (!in.at_end()) in.fail("trailing bytes");
  return m;
}

void save_features_csv(const fs::path& path, const Matrix& features) {
  auto os = open_out(path, false);
  for (std::size_t t = 0; t < features.rows(); ++t) {
    for (std::size_t d = 0; d < features.cols(); ++d) {
      if (d) os << ',';
      os << format_double(features(t, d));
    }
    os << '\n';
  }
  if (!os) throw FormatError("write failed for '" + path.string() + "'");
}

Matrix load_features_csv(const fs::path& path) {
  auto is = open_in(path, false);
  std::vector<double> values;
  std::size_t cols = 0;
  std::size_t rows = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::size_t count = 0;
    const char* p = t.data();
    const char* end = t.data() + t.size();
    while (p < end) {
      while (p < end && (*p == ',' || *p == ' ' || *p == '\t')) ++p;
      if (p >= end) break;
      double v;
      auto [next, ec] = std::from_chars(p, end, v);
      if (ec != std::errc() || (next < end && *next != ',' && *next != ' ' && *next != '\t')) {
        throw FormatError(path.string() + ": line " + std::to_string(line_no) +
                          ": malformed number");
      }
      values.push_back(v);
      ++count;
      p = next;
    }
    if (rows == 0) {
      cols = count;
    } else if (count != cols) {
      throw FormatError(path.string() + ": line " + std::to_string(line_no) + ": expected " +
                        std::to_string(cols) + " columns, found " + std::to_string(count));
    }
    ++rows;
  }
  if (rows == 0 || cols == 0) throw FormatError(path.string() + ": no feature rows");
  Matrix m(rows, cols);
  m.data() = std::move(values);
  return m;
}

void save_features(const fs::path& path, const Matrix& features) {
  if (path.extension() == ".csv") {
    save_features_csv(path, features);
  } else {
    save_features_binary(path, features);
  }
}

Matrix load_features(const fs::path& path) {
  return path.extension() == ".csv" ? load_features_csv(path) : load_features_binary(path);
}

void save_labels(const fs::path& path, const std::vector<int>& labels) {
  auto os = open_out(path, false);
  for (int l : labels) os << l << '\n';
  if (!os) throw FormatError("write failed for '" + path.string() + "'");
}

std::vector<int> load_labels(const fs::path& path, std::optional<std::size_t> expected_length) {
  auto is = open_in(path, false);
  std::vector<int> labels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty()) continue;
    int v = 0;
    auto [next, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || next != t.data() + t.size()) {
      throw FormatError(path.string() + ": line " + std::to_string(line_no) +
                        ": not an integer label");
    }
    if (v < 0) {
      throw FormatError(path.string() + ": line " + std::to_string(line_no) +
                        ": negative label");
    }
    labels.push_back(v);
  }
  if (expected_length && labels.size() != *expected_length) {
    throw LengthError(path.string() + ": " + std::to_string(labels.size()) +
                      " labels, expected " + std::to_string(*expected_length));
  }
  return labels;
}

void save_manifest(const fs::path& path, const DatasetManifest& manifest) {
  auto os = open_out(path, false);
  os << "#actseg-manifest\tfeature_dim=" << manifest.feature_dim
     << "\tk=" << manifest.num_actions << '\n';
  for (const auto& e : manifest.entries) {
    for (const auto* field : {&e.video_id, &e.task_id, &e.features_path}) {
      if (field->find_first_of("\t\n") != std::string::npos || field->empty()) {
        throw FormatError("manifest fields must be non-empty and contain no tabs/newlines");
      }
    }
    os << e.video_id << '\t' << e.task_id << '\t' << e.features_path << '\t'
       << e.labels_path.value_or("-") << '\n';
  }
  if (!os) throw FormatError("write failed for '" + path.string() + "'");
}

DatasetManifest load_manifest(const fs::path& path) {
  auto is = open_in(path, false);
  DatasetManifest m;
  std::string line;
  if (!std::getline(is, line)) throw FormatError(path.string() + ": empty manifest");
  const auto header = split_tabs(trim(line));
  if (header.empty() || header[0] != "#actseg-manifest") {
    throw FormatError(path.string() + ": line 1: missing '#actseg-manifest' header");
  }
  bool have_dim = false;
  bool have_k = false;
  for (std::size_t i = 1; i < header.size(); ++i) {
    const auto eq = header[i].find('=');
    if (eq == std::string::npos) throw FormatError(path.string() + ": line 1: bad header field");
    const std::string key = header[i].substr(0, eq);
    const std::string val = header[i].substr(eq + 1);
    std::size_t n = 0;
    auto [ptr, ec] = std::from_chars(val.data(), val.data() + val.size(), n);
    if (ec != std::errc() || ptr != val.data() + val.size()) {
      throw FormatError(path.string() + ": line 1: bad value for '" + key + "'");
    }
    if (key == "feature_dim") {
      m.feature_dim = n;
      have_dim = true;
    } else if (key == "k") {
      m.num_actions = n;
      have_k = true;
    } else {
      throw FormatError(path.string() + ": line 1: unknown header field '" + key + "'");
    }
  }
  if (!have_dim || !have_k) throw FormatError(path.string() + ": header needs feature_dim and k");

  std::size_t line_no = 1;
  std::set<std::string> ids;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty() || line[0] == '#') continue;
    const auto f = split_tabs(line);
    if (f.size() != 4) {
      throw FormatError(path.string() + ": line " + std::to_string(line_no) +
                        ": expected 4 tab-separated fields, found " + std::to_string(f.size()));
    }
    ManifestEntry e{f[0], f[1], f[2], std::nullopt};
    if (f[3] != "-") e.labels_path = f[3];
    if (!ids.insert(e.video_id).second) {
      throw FormatError(path.string() + ": line " + std::to_string(line_no) +
                        ": duplicate video_id '" + e.video_id + "'");
    }
    m.entries.push_back(std::move(e));
  }
  return m;
}

fs::path resolve_relative(const fs::path& manifest_path, const std::string& p) {
  fs::path q(p);
  if (q.is_absolute()) return q;
  return manifest_path.parent_path() / q;
}

std::vector<FeatureSequence> load_dataset(const fs::path& manifest_path,
                                          DatasetManifest* manifest_out) {
  const DatasetManifest m = load_manifest(manifest_path);
  std::vector<FeatureSequence> videos;
  for (const auto& e : m.entries) {
    FeatureSequence v;
    v.video_id = e.video_id;
    v.task_id = e.task_id;
    v.features = load_features(resolve_relative(manifest_path, e.features_path));
    if (v.dim() != m.feature_dim) {
      throw DimensionError("video '" + e.video_id + "' has " + std::to_string(v.dim()) +
                           " feature columns, manifest says " + std::to_string(m.feature_dim));
    }
    if (e.labels_path) {
      v.gt_labels = load_labels(resolve_relative(manifest_path, *e.labels_path), v.length());
    }
    videos.push_back(std::move(v));
  }
  if (manifest_out) *manifest_out = m;
  return videos;
}

}  // namespace actseg
