#include "randgan/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "randgan/error.hpp"
#include "randgan/image_io.hpp"
#include "randgan/rng.hpp"

namespace randgan {

namespace {

constexpr double kBackground = 0.08;
constexpr double kFrameWidth = 0.06;   // fraction of image size
constexpr double kMarkerSize = 0.14;   // fraction of image size

struct Blob {
  double cx, cy, r;
};

void validate_rule(const ShapeRule& r, const char* name) {
  if (r.blobs < 0 || r.blob_radius <= 0 || r.texture_amplitude < 0 || r.texture_period <= 0)
    throw Error(std::string("synth: invalid shape rule for ") + name);
}

const ShapeRule& rule_for(const SyntheticConfig& c, ClassLabel label) {
  switch (label) {
    case ClassLabel::SyntheticA: return c.class_a;
    case ClassLabel::SyntheticB: return c.class_b;
    case ClassLabel::SyntheticUnknown: return c.unknown;
    default: throw Error("synth: label " + std::string(to_string(label)) + " is not a synthetic class");
  }
}

const ClassCounts& counts_for(const SyntheticConfig& c, ClassLabel label) {
  switch (label) {
    case ClassLabel::SyntheticA: return c.counts_a;
    case ClassLabel::SyntheticB: return c.counts_b;
    default: return c.counts_unknown;
  }
}

// Artifact intensity at (y, x) for the given source, before strength scaling.
double artifact_value(int source, int y, int x, int size) {
  const int frame = std::max(1, static_cast<int>(std::lround(kFrameWidth * size)));
  const int marker = std::max(2, static_cast<int>(std::lround(kMarkerSize * size)));
  double v = 0.0;
  switch (source % 4) {
    case 0:
      if (y < frame || x < frame) v += 0.55;
      if (y < marker && x < marker) v += 0.3;
      break;
    case 1:
      if (y >= size - frame || x >= size - frame) v += 0.45;
      if (y >= size - marker && x >= size - marker) v += 0.35;
      v += 0.12;  // brighter background overall
      break;
    case 2:
      if (y < frame || y >= size - frame) v += 0.5;
      break;
    default:
      if (x < frame || x >= size - frame) v += 0.5;
      break;
  }
  return v;
}

}  // namespace

bool EllipseShape::contains(int y, int x) const {
  const double dx = (x + 0.5 - cx) / rx;
  const double dy = (y + 0.5 - cy) / ry;
  return dx * dx + dy * dy <= 1.0;
}

void SyntheticConfig::validate() const {
  if (image_size < 16) throw Error("synth: image_size must be at least 16");
  validate_rule(class_a, "class_a");
  validate_rule(class_b, "class_b");
  validate_rule(unknown, "unknown");
  if (counts_a.train < 1 || counts_a.test < 1 || counts_b.train < 1 || counts_b.test < 1 || counts_unknown.test < 1)
    throw Error("synth: every class needs at least one image per split it appears in");
  if (counts_unknown.train != 0) throw Error("synth: the unknown class may not have training images");
  if (counts_a.train < 0 || counts_b.train < 0) throw Error("synth: negative counts");
  if (artifact_strength < 0) throw Error("synth: artifact_strength must be >= 0");
  if (num_sources < 1) throw Error("synth: num_sources must be >= 1");
  if (source_bias < 0 || source_bias > 1) throw Error("synth: source_bias must be in [0,1]");
  if (noise_sigma < 0) throw Error("synth: noise_sigma must be >= 0");
}

SyntheticSample render_synthetic(const SyntheticConfig& config, ClassLabel label, int source,
                                 std::uint64_t image_seed) {
  const ShapeRule& rule = rule_for(config, label);
  const int n = config.image_size;
  std::mt19937_64 content(derive_seed(image_seed, {1}));
  std::mt19937_64 artifact(derive_seed(image_seed, {2}));
  std::uniform_real_distribution<double> unif(-1.0, 1.0);

  EllipseShape e;
  e.cx = (0.5 + 0.04 * unif(content)) * n;
  e.cy = (0.5 + 0.04 * unif(content)) * n;
  e.rx = (0.28 + 0.03 * unif(content)) * n;
  e.ry = (0.34 + 0.03 * unif(content)) * n;
  const double organ = 0.55 + 0.05 * unif(content);
  const double shading = 0.06 * unif(content);

  std::vector<Blob> blobs;
  for (int b = 0; b < rule.blobs; ++b) {
    // Blob centres stay well inside the ellipse.
    const double ang = std::numbers::pi * unif(content);
    const double rad = 0.5 * std::abs(unif(content));
    const double r = rule.blob_radius * n * (1.0 + 0.15 * unif(content));
    blobs.push_back({e.cx + rad * e.rx * std::cos(ang), e.cy + rad * e.ry * std::sin(ang), r});
  }
  const double phase = std::numbers::pi * unif(content);
  const double period = rule.texture_period * n;

  std::normal_distribution<double> noise(0.0, 1.0);
  const double artifact_scale = config.artifact_strength * (1.0 + 0.5 * unif(artifact));

  SyntheticSample s;
  s.label = label;
  s.source = source;
  s.ellipse = e;
  s.mask = BinaryMask(n, n);
  s.image.height = n;
  s.image.width = n;
  s.image.channels = 1;
  s.image.range = ValueRange::byte();
  s.image.data.resize(static_cast<std::size_t>(n) * n);

  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      double v = kBackground;
      const bool inside = e.contains(y, x);
      if (inside) {
        s.mask.at(y, x) = 1;
        v = organ + shading * ((y + 0.5 - e.cy) / e.ry);
        for (const auto& b : blobs) {
          const double d = std::hypot(x + 0.5 - b.cx, y + 0.5 - b.cy) / b.r;
          if (d < 1.0) v += rule.blob_intensity * (1.0 - d * d);
        }
        if (rule.texture_amplitude > 0)
          v += rule.texture_amplitude * std::sin(2.0 * std::numbers::pi * (y + 0.5) / period + phase);
      } else {
        v += artifact_scale * artifact_value(source, y, x, n);
      }
      v += config.noise_sigma * noise(content);
      s.image.data[static_cast<std::size_t>(y) * n + x] =
          static_cast<float>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
    }
  }
  return s;
}

std::vector<SyntheticSample> synth_samples(const SyntheticConfig& config) {
  config.validate();
  std::vector<SyntheticSample> out;
  std::mt19937_64 source_rng(derive_seed(config.seed, {0xA5}));
  constexpr ClassLabel kClasses[] = {ClassLabel::SyntheticA, ClassLabel::SyntheticB, ClassLabel::SyntheticUnknown};
  for (Split split : {Split::train, Split::test}) {
    for (ClassLabel label : kClasses) {
      const ClassCounts& c = counts_for(config, label);
      const int count = split == Split::train ? c.train : c.test;
      for (int i = 0; i < count; ++i) {
        int source;
        std::uniform_int_distribution<int> any(0, config.num_sources - 1);
        if (split == Split::train && label != ClassLabel::SyntheticUnknown) {
          const int home = (label == ClassLabel::SyntheticA ? 0 : 1) % config.num_sources;
          std::bernoulli_distribution biased(config.source_bias);
          source = biased(source_rng) ? home : any(source_rng);
        } else {
          source = any(source_rng);
        }
        const std::uint64_t image_seed =
            derive_seed(config.seed, {static_cast<std::uint64_t>(label), static_cast<std::uint64_t>(split),
                                      static_cast<std::uint64_t>(i)});
        SyntheticSample s = render_synthetic(config, label, source, image_seed);
        s.split = split;
        char name[96];
        std::snprintf(name, sizeof(name), "%s_%s_%05d", std::string(to_string(label)).c_str(),
                      std::string(to_string(split)).c_str(), i);
        s.name = name;
        out.push_back(std::move(s));
      }
    }
  }
  return out;
}

DatasetManifest synth_generate(const SyntheticConfig& config, const std::filesystem::path& out_dir) {
  DatasetManifest manifest;
  for (auto& s : synth_samples(config)) {
    const auto image_path = out_dir / "images" / (s.name + ".png");
    Image gray(s.image.height, s.image.width, s.image.range, s.image.data);
    write_png(image_path, gray);
    write_mask_png(out_dir / "masks" / (s.name + ".png"), s.mask);
    manifest.records.push_back({image_path, s.label, s.split, "src" + std::to_string(s.source)});
  }
  write_file_atomic(out_dir / "manifest.csv", format_manifest(manifest, out_dir));
  return manifest;
}

}  // namespace randgan
