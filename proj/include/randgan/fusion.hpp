#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "randgan/manifest.hpp"

namespace randgan {

enum class Normalization { none, minmax, zscore };
std::string_view to_string(Normalization n);
std::optional<Normalization> parse_normalization(std::string_view token);

// minmax -> [0,1]; zscore -> mean 0, population sd 1; none -> identity.
std::vector<double> normalize_scores(std::span<const double> scores, Normalization method);

// Sum of two per-model anomaly scores.
double fuse(double a, double b);

// One row of an anomaly score file (`path,label,model_tag,R,D,A,restarts_used`).
struct ScoreRecord {
  std::string path;
  ClassLabel label{};
  std::string model_tag;
  double residual = 0;
  double discrimination = 0;
  double score = 0;
  int restarts_used = 0;
};

std::vector<ScoreRecord> read_score_file(const std::filesystem::path& path);
std::string format_score_file(std::span<const ScoreRecord> rows);

struct ScoreRow {
  std::string id;
  ClassLabel label{};
  double score_a = 0;
  double score_b = 0;
  double fused = 0;
};

struct ScoreTable {
  std::string model_a;
  std::string model_b;
  std::vector<ScoreRow> rows;

  // Normalises each model's column over the whole table, then sums.
  void refuse(Normalization per_model);
};

// Joins two score files on image path. Every image must be present in both.
ScoreTable join_scores(std::span<const ScoreRecord> a, std::span<const ScoreRecord> b);

struct RocPoint {
  double fpr = 0;
  double tpr = 0;
  double threshold = 0;  // +inf for the (0,0) point
};

struct RocResult {
  double auc = 0;
  std::vector<RocPoint> points;
};

// Mann-Whitney AUC (ties count one half) plus the ROC staircase over every
// distinct threshold. `positive[i]` marks the positive class.
RocResult roc_auc(std::span<const double> scores, std::span<const std::uint8_t> positive);
std::string format_roc_csv(const RocResult& roc);
RocResult read_roc_csv(const std::filesystem::path& path);

struct EvalConfig {
  int repeats = 5;
  // Negatives drawn per known class for balanced runs. Empty means split the
  // positive count evenly (floor first), e.g. 573 -> 286 + 287.
  std::vector<std::pair<ClassLabel, int>> negatives_per_class;
  bool balanced = true;
  std::uint64_t seed = 0;
  Normalization normalization = Normalization::minmax;
  ClassLabel unknown_label = ClassLabel::COVID19;

  void validate() const;
};

// Samples counts[k] indices without replacement from pools[k]; seeded by
// seed + run_index.
std::vector<std::size_t> balanced_sample(std::span<const std::vector<std::size_t>> pools,
                                         std::span<const int> counts, std::uint64_t seed, int run_index);

struct ClassGap {
  ClassLabel a{};
  ClassLabel b{};
  double gap = 0;  // MAS(a) - MAS(b)
};

struct MeanAnomalyGaps {
  std::map<ClassLabel, double> mas;
  std::vector<ClassGap> gaps;
};

// Per-class mean of the (normalised) fused scores and all pairwise differences.
MeanAnomalyGaps mean_anomaly_gaps(const ScoreTable& table, Normalization normalization);

struct RunResult {
  int index = 0;
  std::uint64_t seed = 0;
  std::size_t positives = 0;
  std::map<ClassLabel, std::size_t> negatives;
  double auc = 0;
  double auc_model_a = 0;
  double auc_model_b = 0;
  RocResult roc;
};

struct EvalReport {
  std::vector<RunResult> runs;
  double mean_auc = 0;
  double mean_auc_model_a = 0;
  double mean_auc_model_b = 0;
  RunResult imbalanced;
  MeanAnomalyGaps mas;
  EvalConfig config;
  std::string model_a;
  std::string model_b;
};

EvalReport run_protocol(ScoreTable table, const EvalConfig& config);

nlohmann::json to_json(const EvalConfig& config);
EvalConfig eval_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const EvalReport& report);

}  // namespace randgan
