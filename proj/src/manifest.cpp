#include "randgan/manifest.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <sstream>

#include "randgan/error.hpp"

namespace randgan {

namespace {

constexpr std::array<std::pair<ClassLabel, std::string_view>, 6> kLabelNames{{
    {ClassLabel::Normal, "Normal"},
    {ClassLabel::Pneumonia, "Pneumonia"},
    {ClassLabel::COVID19, "COVID19"},
    {ClassLabel::SyntheticA, "SyntheticA"},
    {ClassLabel::SyntheticB, "SyntheticB"},
    {ClassLabel::SyntheticUnknown, "SyntheticUnknown"},
}};

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

}  // namespace

std::string_view to_string(ClassLabel label) {
  for (const auto& [l, name] : kLabelNames)
    if (l == label) return name;
  return "?";
}

std::string_view to_string(Split split) { return split == Split::train ? "train" : "test"; }

std::optional<ClassLabel> parse_label(std::string_view token) {
  const std::string t = lower(trim(token));
  for (const auto& [l, name] : kLabelNames)
    if (lower(name) == t) return l;
  if (t == "covid-19" || t == "covid") return ClassLabel::COVID19;
  return std::nullopt;
}

std::optional<Split> parse_split(std::string_view token) {
  const std::string t = lower(trim(token));
  if (t == "train") return Split::train;
  if (t == "test") return Split::test;
  return std::nullopt;
}

bool is_unknown_class(ClassLabel label) {
  return label == ClassLabel::COVID19 || label == ClassLabel::SyntheticUnknown;
}

std::map<std::pair<ClassLabel, Split>, std::size_t> DatasetManifest::counts() const {
  std::map<std::pair<ClassLabel, Split>, std::size_t> out;
  for (const auto& r : records) ++out[{r.label, r.split}];
  return out;
}

std::size_t DatasetManifest::count(ClassLabel label, Split split) const {
  return static_cast<std::size_t>(std::count_if(records.begin(), records.end(), [&](const ImageRecord& r) {
    return r.label == label && r.split == split;
  }));
}

std::size_t DatasetManifest::count(ClassLabel label) const {
  return count(label, Split::train) + count(label, Split::test);
}

DatasetManifest parse_manifest(std::string_view text, const std::filesystem::path& base_dir,
                               const LoadOptions& options) {
  DatasetManifest manifest;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = trim(text.substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    if (line.empty() || line.front() == '#') continue;

    const std::string where = "manifest line " + std::to_string(line_no) + ": ";
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
      std::size_t comma = line.find(',', start);
      fields.push_back(trim(line.substr(start, comma == std::string_view::npos ? comma : comma - start)));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (fields.size() != 4)
      throw Error(where + "expected 4 fields (path,label,split,source), got " + std::to_string(fields.size()));
    if (fields[0].empty()) throw Error(where + "empty path");

    auto label = parse_label(fields[1]);
    if (!label) throw Error(where + "unknown label '" + std::string(fields[1]) + "'");
    auto split = parse_split(fields[2]);
    if (!split) throw Error(where + "unknown split '" + std::string(fields[2]) + "'");
    if (*split == Split::train && is_unknown_class(*label))
      throw Error(where + "unknown-class-in-train: label " + std::string(to_string(*label)) +
                  " may not appear in the train split");

    std::filesystem::path p{std::string(fields[0])};
    if (p.is_relative()) p = base_dir / p;
    if (options.verify_paths && !std::filesystem::is_regular_file(p))
      throw Error(where + "image not found: " + p.string());
    manifest.records.push_back({p, *label, *split, std::string(fields[3])});
  }
  return manifest;
}

DatasetManifest load_manifest(const std::filesystem::path& path, const LoadOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open manifest: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_manifest(ss.str(), path.parent_path(), options);
}

std::string format_manifest(const DatasetManifest& manifest, const std::filesystem::path& base_dir) {
  std::string out = "# path,label,split,source\n";
  for (const auto& r : manifest.records) {
    std::filesystem::path p = r.path;
    if (!base_dir.empty() && p.is_absolute()) {
      auto rel = p.lexically_relative(base_dir);
      if (!rel.empty() && *rel.begin() != "..") p = rel;
    }
    out += p.generic_string();
    out += ',';
    out += to_string(r.label);
    out += ',';
    out += to_string(r.split);
    out += ',';
    out += r.source;
    out += '\n';
  }
  return out;
}

SplitResult build_split(const DatasetManifest& manifest, ClassLabel unknown_label) {
  if (manifest.count(unknown_label) == 0)
    throw Error("build_split: unknown label " + std::string(to_string(unknown_label)) +
                " is absent from the manifest");
  SplitResult out;
  for (const auto& r : manifest.records) {
    if (r.split == Split::train) {
      if (r.label != unknown_label) out.train.push_back(r);
    } else {
      out.test.push_back(r);
      ++out.test_counts[r.label];
    }
  }
  return out;
}

}  // namespace randgan
