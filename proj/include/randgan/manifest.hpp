#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace randgan {

enum class ClassLabel { Normal, Pneumonia, COVID19, SyntheticA, SyntheticB, SyntheticUnknown };
enum class Split { train, test };

std::string_view to_string(ClassLabel label);
std::string_view to_string(Split split);
// Accepts the canonical tokens plus the "COVID-19"/"Covid" spellings.
std::optional<ClassLabel> parse_label(std::string_view token);
std::optional<Split> parse_split(std::string_view token);

// Labels that are never allowed in a training split.
bool is_unknown_class(ClassLabel label);

struct ImageRecord {
  std::filesystem::path path;
  ClassLabel label{};
  Split split{};
  std::string source;

  friend bool operator==(const ImageRecord&, const ImageRecord&) = default;
};

struct DatasetManifest {
  std::vector<ImageRecord> records;

  std::map<std::pair<ClassLabel, Split>, std::size_t> counts() const;
  std::size_t count(ClassLabel label, Split split) const;
  std::size_t count(ClassLabel label) const;
};

struct LoadOptions {
  // Check that every record path points at an existing file.
  bool verify_paths = true;
};

// Parses `path,label,split,source` lines; `#` lines and blank lines are skipped.
// Relative record paths are resolved against the manifest's directory.
DatasetManifest load_manifest(const std::filesystem::path& path, const LoadOptions& options = {});
DatasetManifest parse_manifest(std::string_view text, const std::filesystem::path& base_dir,
                               const LoadOptions& options = {});

// Serialises records; paths are written relative to `base_dir` when possible.
std::string format_manifest(const DatasetManifest& manifest, const std::filesystem::path& base_dir);

struct SplitResult {
  std::vector<ImageRecord> train;
  std::vector<ImageRecord> test;
  std::map<ClassLabel, std::size_t> test_counts;
};

// Deterministic partition in manifest order. The train side never contains
// `unknown_label`.
SplitResult build_split(const DatasetManifest& manifest, ClassLabel unknown_label);

}  // namespace randgan
