#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "actseg/model.hpp"

namespace actseg {

/// Binary feature file: "SEGF", u32 version(=1), u32 T, u32 D, then T*D
/// little-endian f64 values, row-major.
void save_features_binary(const std::filesystem::path& path, const Matrix& features);
Matrix load_features_binary(const std::filesystem::path& path);

/// CSV feature file: one frame per line, D values separated by commas or
/// whitespace; '#' starts a comment line. Written with 17 significant digits.
void save_features_csv(const std::filesystem::path& path, const Matrix& features);
Matrix load_features_csv(const std::filesystem::path& path);

/// Dispatches on extension: ".csv" is CSV, anything else is binary.
void save_features(const std::filesystem::path& path, const Matrix& features);
Matrix load_features(const std::filesystem::path& path);

/// One non-negative integer per line.
void save_labels(const std::filesystem::path& path, const std::vector<int>& labels);
/// Throws LengthError when `expected_length` is given and differs, FormatError
/// for non-integer or negative entries.
std::vector<int> load_labels(const std::filesystem::path& path,
                             std::optional<std::size_t> expected_length = std::nullopt);

struct ManifestEntry {
  std::string video_id;
  std::string task_id;
  std::string features_path;
  std::optional<std::string> labels_path;

  bool operator==(const ManifestEntry&) const = default;
};

/// Text manifest: a header line
///   #actseg-manifest<TAB>feature_dim=D<TAB>k=K
/// then one tab-separated record per video:
///   video_id, task_id, features path, labels path or "-".
/// Relative paths resolve against the manifest's directory.
struct DatasetManifest {
  std::size_t feature_dim = 0;
  std::size_t num_actions = 0;
  std::vector<ManifestEntry> entries;

  bool operator==(const DatasetManifest&) const = default;
};

void save_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);
DatasetManifest load_manifest(const std::filesystem::path& path);

/// Reads every video listed in the manifest (with ground truth when listed).
std::vector<FeatureSequence> load_dataset(const std::filesystem::path& manifest_path,
                                          DatasetManifest* manifest_out = nullptr);

std::filesystem::path resolve_relative(const std::filesystem::path& manifest_path,
                                       const std::string& p);

}  // namespace actseg
