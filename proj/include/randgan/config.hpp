#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include <json.hpp>

#include "randgan/anomaly.hpp"
#include "randgan/fusion.hpp"
#include "randgan/gan.hpp"
#include "randgan/mask_ops.hpp"
#include "randgan/preprocess.hpp"
#include "randgan/segmentation.hpp"
#include "randgan/synth.hpp"

namespace randgan {

struct SegmentSettings {
  UNetSpec unet{};
  SegTrainConfig train{};
  MaskPostprocessConfig postprocess{};
  int predict_batch = 8;
};

// Every stage's settings in one JSON document:
//   { "seed": n, "threads": n, "synth": {...}, "preprocess": {...},
//     "segment": {...}, "gan": {...}, "score": {...}, "eval": {...} }
// A top-level seed fills every section that does not set its own.
struct RunConfig {
  std::optional<std::uint64_t> seed;
  int threads = 1;
  SyntheticConfig synth{};
  PreprocessConfig preprocess{};
  SegmentSettings segment{};
  GanConfig gan{};
  InversionConfig score{};
  EvalConfig eval{};

  // Sets the global seed and every section seed.
  void override_seed(std::uint64_t s);
};

RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& c);

nlohmann::json to_json(const SyntheticConfig& c);
nlohmann::json to_json(const PreprocessConfig& c);
nlohmann::json to_json(const SegmentSettings& c);

}  // namespace randgan
