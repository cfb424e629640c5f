#include "randgan/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "randgan/config_reader.hpp"
#include "randgan/error.hpp"

namespace randgan {

using nlohmann::json;

std::string_view to_string(Normalization n) {
  switch (n) {
    case Normalization::none: return "none";
    case Normalization::minmax: return "minmax";
    case Normalization::zscore: return "zscore";
  }
  return "?";
}

std::optional<Normalization> parse_normalization(std::string_view token) {
  if (token == "none") return Normalization::none;
  if (token == "minmax") return Normalization::minmax;
  if (token == "zscore") return Normalization::zscore;
  return std::nullopt;
}

std::vector<double> normalize_scores(std::span<const double> scores, Normalization method) {
  if (scores.empty()) throw Error("normalize_scores: empty input");
  std::vector<double> out(scores.begin(), scores.end());
  switch (method) {
    case Normalization::none:
      break;
    case Normalization::minmax: {
      auto [lo, hi] = std::minmax_element(out.begin(), out.end());
      const double min = *lo, max = *hi;
      if (!(max > min)) throw Error("normalize_scores: degenerate range for minmax (all scores equal)");
      for (double& v : out) v = (v - min) / (max - min);
      break;
    }
    case Normalization::zscore: {
      const double n = static_cast<double>(out.size());
      const double mean = std::accumulate(out.begin(), out.end(), 0.0) / n;
      double ss = 0;
      for (double v : out) ss += (v - mean) * (v - mean);
      const double sd = std::sqrt(ss / n);
      if (!(sd > 0)) throw Error("normalize_scores: zero variance for zscore");
      for (double& v : out) v = (v - mean) / sd;
      break;
    }
  }
  return out;
}

double fuse(double a, double b) {
  if (!std::isfinite(a) || !std::isfinite(b)) throw Error("fuse: non-finite anomaly score");
  return a + b;
}

// --- score files ------------------------------------------------------------

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string f;
  while (std::getline(ss, f, ',')) out.push_back(f);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error(where + ": not a number '" + s + "'");
  }
}

}  // namespace

std::string format_score_file(std::span<const ScoreRecord> rows) {
  std::string out = "# path,label,model_tag,R,D,A,restarts_used\n";
  for (const auto& r : rows) {
    out += r.path + ',' + std::string(to_string(r.label)) + ',' + r.model_tag + ',' + fmt_double(r.residual) + ',' +
           fmt_double(r.discrimination) + ',' + fmt_double(r.score) + ',' + std::to_string(r.restarts_used) + '\n';
  }
  return out;
}

std::vector<ScoreRecord> read_score_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open score file " + path.string());
  std::vector<ScoreRecord> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    auto f = split_csv(line);
    if (f.size() != 7) throw Error(where + ": expected 7 fields");
    auto label = parse_label(f[1]);
    if (!label) throw Error(where + ": unknown label '" + f[1] + "'");
    ScoreRecord r;
    r.path = f[0];
    r.label = *label;
    r.model_tag = f[2];
    r.residual = parse_double(f[3], where);
    r.discrimination = parse_double(f[4], where);
    r.score = parse_double(f[5], where);
    r.restarts_used = static_cast<int>(parse_double(f[6], where));
    rows.push_back(std::move(r));
  }
  return rows;
}

// --- score table ------------------------------------------------------------

void ScoreTable::refuse(Normalization per_model) {
  if (rows.empty()) return;
  std::vector<double> a, b;
  for (const auto& r : rows) {
    a.push_back(r.score_a);
    b.push_back(r.score_b);
  }
  auto na = normalize_scores(a, per_model);
  auto nb = normalize_scores(b, per_model);
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i].fused = fuse(na[i], nb[i]);
}

ScoreTable join_scores(std::span<const ScoreRecord> a, std::span<const ScoreRecord> b) {
  std::map<std::string, const ScoreRecord*> by_path;
  for (const auto& r : b) by_path[r.path] = &r;
  ScoreTable t;
  if (!a.empty()) t.model_a = a.front().model_tag;
  if (!b.empty()) t.model_b = b.front().model_tag;
  std::vector<std::string> missing;
  for (const auto& r : a) {
    auto it = by_path.find(r.path);
    if (it == by_path.end()) {
      missing.push_back(r.path);
      continue;
    }
    if (it->second->label != r.label) throw Error("join_scores: label disagreement for " + r.path);
    t.rows.push_back({r.path, r.label, r.score, it->second->score, fuse(r.score, it->second->score)});
    by_path.erase(it);
  }
  for (const auto& [p, r] : by_path) missing.push_back(p);
  if (!missing.empty())
    throw Error("join_scores: " + std::to_string(missing.size()) +
                " image(s) lack a score from one of the models, first: " + missing.front());
  return t;
}

// --- ROC / AUC ----------------------------------------------------------------

RocResult roc_auc(std::span<const double> scores, std::span<const std::uint8_t> positive) {
  if (scores.size() != positive.size()) throw Error("roc_auc: scores and labels differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return scores[i] > scores[j]; });
  const auto n_pos = static_cast<std::size_t>(std::count_if(positive.begin(), positive.end(), [](auto v) { return v != 0; }));
  const std::size_t n_neg = scores.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw Error("roc_auc: both classes must be present");
  for (double s : scores)
    if (std::isnan(s)) throw Error("roc_auc: NaN score");

  RocResult out;
  out.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
  // Doubled Mann-Whitney count keeps the tie half-credit integral.
  std::uint64_t twice_u = 0;
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double t = scores[order[i]];
    std::size_t gp = 0, gn = 0;
    for (; i < order.size() && scores[order[i]] == t; ++i) (positive[order[i]] ? gp : gn)++;
    // Positives in this group beat every negative already passed (fp) and tie with gn.
    twice_u += static_cast<std::uint64_t>(gp) * (2 * (n_neg - fp - gn) + gn);
    tp += gp;
    fp += gn;
    out.points.push_back({static_cast<double>(fp) / n_neg, static_cast<double>(tp) / n_pos, t});
  }
  out.auc = static_cast<double>(twice_u) / (2.0 * static_cast<double>(n_pos) * static_cast<double>(n_neg));
  return out;
}

std::string format_roc_csv(const RocResult& roc) {
  std::string out = "fpr,tpr,threshold\n";
  for (const auto& p : roc.points)
    out += fmt_double(p.fpr) + ',' + fmt_double(p.tpr) + ',' + (std::isinf(p.threshold) ? "inf" : fmt_double(p.threshold)) + '\n';
  return out;
}

RocResult read_roc_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open ROC file " + path.string());
  RocResult roc;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#' || line.rfind("fpr", 0) == 0) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    auto f = split_csv(line);
    if (f.size() != 3) throw Error(where + ": expected fpr,tpr,threshold");
    roc.points.push_back({parse_double(f[0], where), parse_double(f[1], where),
                          f[2] == "inf" ? std::numeric_limits<double>::infinity() : parse_double(f[2], where)});
  }
  if (roc.points.size() < 2) throw Error(path.string() + ": ROC needs at least two points");
  for (std::size_t i = 1; i < roc.points.size(); ++i) {
    const auto& p = roc.points[i - 1];
    const auto& q = roc.points[i];
    roc.auc += (q.fpr - p.fpr) * (q.tpr + p.tpr) / 2.0;
  }
  return roc;
}

// --- protocol -----------------------------------------------------------------

void EvalConfig::validate() const {
  if (repeats < 1) throw Error("eval: repeats must be >= 1");
  for (const auto& [label, n] : negatives_per_class) {
    if (n < 1) throw Error("eval: negatives per class must be >= 1");
    if (label == unknown_label) throw Error("eval: the unknown label cannot be a negative class");
  }
}

std::vector<std::size_t> balanced_sample(std::span<const std::vector<std::size_t>> pools, std::span<const int> counts,
                                         std::uint64_t seed, int run_index) {
  if (pools.size() != counts.size()) throw Error("balanced_sample: one count per pool required");
  std::mt19937_64 rng(seed + static_cast<std::uint64_t>(run_index));
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < pools.size(); ++k) {
    const auto need = static_cast<std::size_t>(counts[k]);
    if (counts[k] < 0 || need > pools[k].size())
      throw Error("balanced_sample: pool " + std::to_string(k) + " has " + std::to_string(pools[k].size()) +
                  " images, " + std::to_string(counts[k]) + " requested");
    std::vector<std::size_t> pool = pools[k];
    for (std::size_t i = 0; i < need; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
      std::swap(pool[i], pool[pick(rng)]);
    }
    std::vector<std::size_t> chosen(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(need));
    std::sort(chosen.begin(), chosen.end());
    out.insert(out.end(), chosen.begin(), chosen.end());
  }
  return out;
}

MeanAnomalyGaps mean_anomaly_gaps(const ScoreTable& table, Normalization normalization) {
  if (table.rows.empty()) throw Error("mean_anomaly_gaps: empty score table");
  std::vector<double> fused;
  for (const auto& r : table.rows) fused.push_back(r.fused);
  auto norm = normalize_scores(fused, normalization);
  std::map<ClassLabel, std::pair<double, std::size_t>> acc;
  for (std::size_t i = 0; i < norm.size(); ++i) {
    auto& [sum, n] = acc[table.rows[i].label];
    sum += norm[i];
    ++n;
  }
  MeanAnomalyGaps out;
  for (const auto& [label, sn] : acc) out.mas[label] = sn.first / static_cast<double>(sn.second);
  for (auto i = out.mas.begin(); i != out.mas.end(); ++i)
    for (auto j = std::next(i); j != out.mas.end(); ++j) out.gaps.push_back({i->first, j->first, i->second - j->second});
  return out;
}

namespace {

RunResult evaluate_subset(const ScoreTable& table, std::span<const std::size_t> positives,
                          std::span<const std::size_t> negatives) {
  RunResult r;
  std::vector<double> fused, a, b;
  std::vector<std::uint8_t> lab;
  auto add = [&](std::size_t i, std::uint8_t p) {
    fused.push_back(table.rows[i].fused);
    a.push_back(table.rows[i].score_a);
    b.push_back(table.rows[i].score_b);
    lab.push_back(p);
  };
  for (auto i : positives) add(i, 1);
  for (auto i : negatives) {
    add(i, 0);
    ++r.negatives[table.rows[i].label];
  }
  r.positives = positives.size();
  r.roc = roc_auc(fused, lab);
  r.auc = r.roc.auc;
  r.auc_model_a = roc_auc(a, lab).auc;
  r.auc_model_b = roc_auc(b, lab).auc;
  return r;
}

}  // namespace

EvalReport run_protocol(ScoreTable table, const EvalConfig& config) {
  config.validate();
  if (table.rows.empty()) throw Error("run_protocol: empty score table");
  table.refuse(config.normalization);

  std::vector<std::size_t> positives;
  std::map<ClassLabel, std::vector<std::size_t>> pools;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    if (table.rows[i].label == config.unknown_label)
      positives.push_back(i);
    else
      pools[table.rows[i].label].push_back(i);
  }
  if (positives.empty()) throw Error("run_protocol: no images of the unknown class in the score table");
  if (pools.empty()) throw Error("run_protocol: no known-class images in the score table");

  std::vector<std::vector<std::size_t>> pool_list;
  std::vector<int> counts;
  if (config.negatives_per_class.empty()) {
    const int k = static_cast<int>(pools.size());
    const int n = static_cast<int>(positives.size());
    int i = 0;
    for (const auto& [label, pool] : pools) {
      pool_list.push_back(pool);
      counts.push_back(n / k + (i >= k - n % k ? 1 : 0));
      ++i;
    }
  } else {
    for (const auto& [label, count] : config.negatives_per_class) {
      auto it = pools.find(label);
      if (it == pools.end()) throw Error("run_protocol: no test images of class " + std::string(to_string(label)));
      pool_list.push_back(it->second);
      counts.push_back(count);
    }
  }

  EvalReport report;
  report.config = config;
  report.model_a = table.model_a;
  report.model_b = table.model_b;

  std::vector<std::size_t> all_negatives;
  for (const auto& p : pool_list) all_negatives.insert(all_negatives.end(), p.begin(), p.end());
  std::sort(all_negatives.begin(), all_negatives.end());

  for (int run = 0; run < config.repeats; ++run) {
    auto negatives = config.balanced ? balanced_sample(pool_list, counts, config.seed, run) : all_negatives;
    RunResult r = evaluate_subset(table, positives, negatives);
    r.index = run;
    r.seed = config.seed + static_cast<std::uint64_t>(run);
    report.mean_auc += r.auc;
    report.mean_auc_model_a += r.auc_model_a;
    report.mean_auc_model_b += r.auc_model_b;
    report.runs.push_back(std::move(r));
  }
  report.mean_auc /= config.repeats;
  report.mean_auc_model_a /= config.repeats;
  report.mean_auc_model_b /= config.repeats;

  report.imbalanced = evaluate_subset(table, positives, all_negatives);
  report.imbalanced.index = -1;
  report.imbalanced.seed = config.seed;
  report.mas = mean_anomaly_gaps(table, config.normalization == Normalization::none ? Normalization::none
                                                                                    : Normalization::minmax);
  return report;
}

// --- JSON -----------------------------------------------------------------------

json to_json(const EvalConfig& c) {
  json neg = json::array();
  for (const auto& [label, n] : c.negatives_per_class) neg.push_back({{"label", to_string(label)}, {"count", n}});
  return {{"repeats", c.repeats},
          {"negatives_per_class", neg},
          {"balanced", c.balanced},
          {"seed", c.seed},
          {"normalization", to_string(c.normalization)},
          {"unknown_label", to_string(c.unknown_label)}};
}

EvalConfig eval_config_from_json(const json& j) {
  std::vector<std::string> errors;
  EvalConfig c;
  ConfigReader r(j, "eval", errors);
  r.get("repeats", c.repeats);
  r.get("balanced", c.balanced);
  r.get("seed", c.seed);
  if (auto* v = r.raw("normalization")) {
    auto n = v->is_string() ? parse_normalization(v->get<std::string>()) : std::nullopt;
    if (n) c.normalization = *n;
    else r.error("normalization", "expected one of none, minmax, zscore");
  }
  if (auto* v = r.raw("unknown_label")) {
    auto l = v->is_string() ? parse_label(v->get<std::string>()) : std::nullopt;
    if (l) c.unknown_label = *l;
    else r.error("unknown_label", "unknown label");
  }
  if (auto* v = r.raw("negatives_per_class")) {
    if (!v->is_array()) {
      r.error("negatives_per_class", "expected an array of {label, count}");
    } else {
      for (const auto& e : *v) {
        auto l = e.contains("label") && e["label"].is_string() ? parse_label(e["label"].get<std::string>()) : std::nullopt;
        if (!l || !e.contains("count") || !e["count"].is_number_integer() || e.size() != 2) {
          r.error("negatives_per_class", "entries must be {\"label\": <label>, \"count\": <int>}");
          continue;
        }
        c.negatives_per_class.emplace_back(*l, e["count"].get<int>());
      }
    }
  }
  r.finish();
  throw_if_errors(errors);
  c.validate();
  return c;
}

namespace {

json run_json(const RunResult& r) {
  json neg = json::object();
  for (const auto& [label, n] : r.negatives) neg[std::string(to_string(label))] = n;
  json roc = json::array();
  for (const auto& p : r.roc.points)
    roc.push_back({p.fpr, p.tpr, std::isinf(p.threshold) ? json(nullptr) : json(p.threshold)});
  return {{"index", r.index},       {"seed", r.seed},
          {"positives", r.positives}, {"negatives", neg},
          {"auc", r.auc},           {"auc_model_a", r.auc_model_a},
          {"auc_model_b", r.auc_model_b}, {"roc", roc}};
}

}  // namespace

json to_json(const EvalReport& report) {
  json runs = json::array();
  for (const auto& r : report.runs) runs.push_back(run_json(r));
  json mas = json::object();
  for (const auto& [label, v] : report.mas.mas) mas[std::string(to_string(label))] = v;
  json gaps = json::array();
  for (const auto& g : report.mas.gaps) gaps.push_back({{"a", to_string(g.a)}, {"b", to_string(g.b)}, {"gap", g.gap}});
  std::vector<std::uint64_t> seeds;
  for (const auto& r : report.runs) seeds.push_back(r.seed);
  return {{"model_a", report.model_a},
          {"model_b", report.model_b},
          {"mean_auc", report.mean_auc},
          {"mean_auc_model_a", report.mean_auc_model_a},
          {"mean_auc_model_b", report.mean_auc_model_b},
          {"runs", runs},
          {"imbalanced", run_json(report.imbalanced)},
          {"mean_anomaly_scores", mas},
          {"mas_gaps", gaps},
          {"seeds", seeds},
          {"config", to_json(report.config)}};
}

}  // namespace randgan
