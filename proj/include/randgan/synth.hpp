#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "randgan/image.hpp"
#include "randgan/manifest.hpp"

namespace randgan {

// Drawing recipe for one synthetic class. Every class shares the elliptical
// "organ" foreground; classes differ by bright blobs and a stripe texture
// drawn inside it.
struct ShapeRule {
  int blobs = 0;
  double blob_radius = 0.08;  // fraction of image size
  double blob_intensity = 0.35;
  double texture_amplitude = 0.0;
  double texture_period = 0.125;  // fraction of image size
};

struct ClassCounts {
  int train = 0;
  int test = 0;
};

struct SyntheticConfig {
  int image_size = 64;
  ShapeRule class_a{};
  ShapeRule class_b{.blobs = 1, .blob_radius = 0.09};
  ShapeRule unknown{.blobs = 2, .blob_radius = 0.07, .texture_amplitude = 0.12};
  ClassCounts counts_a{200, 40};
  ClassCounts counts_b{200, 40};
  ClassCounts counts_unknown{0, 40};
  // Scales the per-source border frame, corner marker and background offset.
  double artifact_strength = 1.0;
  int num_sources = 2;
  // Probability that a training image of class A (B) comes from source 0 (1).
  double source_bias = 0.9;
  double noise_sigma = 0.02;
  std::uint64_t seed = 7;

  void validate() const;
};

struct EllipseShape {
  double cx = 0, cy = 0;  // pixel coordinates of the centre
  double rx = 0, ry = 0;  // semi-axes in pixels
  // Pixel (y, x) is foreground when its centre lies inside the ellipse.
  bool contains(int y, int x) const;
};

struct SyntheticSample {
  std::string name;
  ClassLabel label{};
  Split split{};
  int source = 0;
  ColorImage image;  // single channel, 0..255 integer values
  BinaryMask mask;   // exact ellipse raster
  EllipseShape ellipse;
};

// Renders one image. Content depends only on (config, label, image_seed); the
// source only adds artifacts outside the foreground, so artifact_strength = 0
// makes the source irrelevant.
SyntheticSample render_synthetic(const SyntheticConfig& config, ClassLabel label, int source,
                                 std::uint64_t image_seed);

// All samples in deterministic order: train then test; class A, B, unknown.
std::vector<SyntheticSample> synth_samples(const SyntheticConfig& config);

// Writes images/<name>.png, masks/<name>.png and manifest.csv under `out_dir`.
DatasetManifest synth_generate(const SyntheticConfig& config, const std::filesystem::path& out_dir);

}  // namespace randgan
