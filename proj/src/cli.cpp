#include "randgan/cli.hpp"

#include <CLI11.hpp>

#include <map>
#include <set>
#include <unistd.h>

#include "randgan/anomaly.hpp"
#include "randgan/config.hpp"
#include "randgan/error.hpp"
#include "randgan/image_io.hpp"
#include "randgan/manifest.hpp"
#include "randgan/plot.hpp"

namespace randgan {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr const char* kSnapshot = "config.resolved.json";

// Output directory staged beside its final location and renamed into place on
// commit, so a failed command leaves nothing behind.
class OutputDir {
 public:
  explicit OutputDir(const fs::path& target) : final_(fs::absolute(target).lexically_normal()) {
    if (final_.filename().empty()) final_ = final_.parent_path();
    if (fs::exists(final_)) {
      if (!fs::is_directory(final_)) throw Error("--out " + final_.string() + " exists and is not a directory");
      if (!fs::is_empty(final_) && !fs::exists(final_ / kSnapshot))
        throw Error("--out " + final_.string() + " is a non-empty directory that was not produced by randgan");
    }
    stage_ = final_.parent_path() / ("." + final_.filename().string() + ".staging-" + std::to_string(::getpid()));
    fs::remove_all(stage_);
    fs::create_directories(stage_);
  }
  OutputDir(const OutputDir&) = delete;
  OutputDir& operator=(const OutputDir&) = delete;
  ~OutputDir() {
    if (!committed_) {
      std::error_code ec;
      fs::remove_all(stage_, ec);
    }
  }

  const fs::path& path() const { return stage_; }
  const fs::path& final_path() const { return final_; }

  void commit(const json& snapshot) {
    write_file_atomic(stage_ / kSnapshot, snapshot.dump(2) + "\n");
    if (fs::exists(final_)) fs::remove_all(final_);
    fs::rename(stage_, final_);
    committed_ = true;
  }

 private:
  fs::path final_;
  fs::path stage_;
  bool committed_ = false;
};

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<int> threads;

  void add_to(CLI::App* cmd, bool needs_out = true) {
    cmd->add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
    cmd->add_option("--seed", seed, "overrides every seed in the configuration");
    auto* o = cmd->add_option("--out", out, "output directory");
    if (needs_out) o->required();
    cmd->add_option("--threads", threads, "intra-op threads (default from config, 1)")->check(CLI::PositiveNumber);
  }

  RunConfig resolve() const {
    RunConfig c = config_path.empty() ? RunConfig{} : load_run_config(config_path);
    if (seed) c.override_seed(*seed);
    if (threads) c.threads = *threads;
    torch::set_num_threads(c.threads);
    return c;
  }
};

json snapshot(const std::string& command, const json& inputs, const RunConfig& config) {
  return {{"command", command}, {"inputs", inputs}, {"config", to_json(config)}};
}

ClassLabel label_arg(const std::string& s) {
  auto l = parse_label(s);
  if (!l) throw Error("unknown label '" + s + "'");
  return *l;
}

std::optional<Split> split_filter(const std::string& s) {
  if (s == "all") return std::nullopt;
  auto sp = parse_split(s);
  if (!sp) throw Error("--split must be train, test or all");
  return sp;
}

std::vector<ImageRecord> select(const DatasetManifest& m, std::optional<Split> split,
                                std::optional<ClassLabel> label = std::nullopt) {
  std::vector<ImageRecord> out;
  for (const auto& r : m.records)
    if ((!split || r.split == *split) && (!label || r.label == *label)) out.push_back(r);
  return out;
}

bool is_tensor_file(const fs::path& p) { return p.extension() == ".bin"; }

// Loads one model input: preprocessed tensor files are used as stored (size and
// range checked), PNGs go through the preprocess chain at the requested size.
Image load_input(const ImageRecord& r, const PreprocessConfig& base, int size, ValueRange range) {
  if (is_tensor_file(r.path)) {
    Image img = read_tensor_file(r.path);
    if (img.height() != size || img.width() != size)
      throw Error(r.path.string() + ": tensor is " + std::to_string(img.height()) + "x" +
                  std::to_string(img.width()) + ", expected " + std::to_string(size));
    if (!(img.range() == range)) throw Error(r.path.string() + ": tensor has the wrong value range");
    return img;
  }
  PreprocessConfig pc = base;
  pc.target_size = size;
  pc.output_range = range;
  return preprocess(read_png(r.path), pc);
}

BinaryMask load_mask_for(const fs::path& mask_dir, const fs::path& image_path) {
  const fs::path p = mask_dir / image_path.filename();
  if (!fs::is_regular_file(p)) throw Error("no mask for " + image_path.string() + " (looked for " + p.string() + ")");
  return read_mask_png(p);
}

void check_unique_names(const std::vector<ImageRecord>& records) {
  std::set<std::string> seen;
  for (const auto& r : records)
    if (!seen.insert(r.path.stem().string()).second)
      throw Error("two manifest entries share the file name " + r.path.stem().string());
}

fs::path checkpoint_stem(const std::string& arg, const char* default_name) {
  fs::path p(arg);
  if (fs::is_directory(p)) return p / default_name;
  if (p.extension() == ".json" || p.extension() == ".bin") p.replace_extension();
  return p;
}

// ---------------------------------------------------------------- commands

int cmd_synth(const Common& common, std::ostream& out) {
  RunConfig cfg = common.resolve();
  OutputDir dir(common.out);
  auto manifest = synth_generate(cfg.synth, dir.path());
  dir.commit(snapshot("synth", json::object(), cfg));
  out << "synth: wrote " << manifest.records.size() << " images to " << dir.final_path().string() << "\n";
  return 0;
}

int cmd_preprocess(const Common& common, const std::string& manifest_path, const std::string& mask_dir,
                   std::ostream& out) {
  RunConfig cfg = common.resolve();
  cfg.preprocess.validate();
  auto manifest = load_manifest(manifest_path);
  check_unique_names(manifest.records);
  OutputDir dir(common.out);
  fs::create_directories(dir.path() / "tensors");
  fs::create_directories(dir.path() / "png");
  DatasetManifest result;
  for (const auto& r : manifest.records) {
    std::optional<BinaryMask> mask;
    if (!mask_dir.empty()) mask = load_mask_for(mask_dir, r.path);
    Image img = preprocess(read_png(r.path), cfg.preprocess, mask ? &*mask : nullptr);
    const std::string stem = r.path.stem().string();
    const fs::path tensor = dir.path() / "tensors" / (stem + ".bin");
    write_tensor_file(tensor, img);
    write_png(dir.path() / "png" / (stem + ".png"), img);
    result.records.push_back({tensor, r.label, r.split, r.source});
  }
  write_file_atomic(dir.path() / "manifest.csv", format_manifest(result, dir.path()));
  dir.commit(snapshot("preprocess", {{"manifest", manifest_path}, {"mask_dir", mask_dir}}, cfg));
  out << "preprocess: " << result.records.size() << " images -> " << dir.final_path().string() << "\n";
  return 0;
}

int cmd_segment_train(const Common& common, const std::string& manifest_path, const std::string& mask_dir,
                      const std::string& split, const std::string& init, std::ostream& out) {
  RunConfig cfg = common.resolve();
  const auto& s = cfg.segment;
  auto records = select(load_manifest(manifest_path), split_filter(split));
  if (records.empty()) throw Error("segment train: no images selected");
  std::vector<SegPair> pairs;
  for (const auto& r : records) {
    Image img = load_input(r, cfg.preprocess, s.unet.input_size, ValueRange::unit());
    pairs.push_back({std::move(img), resize_mask(load_mask_for(mask_dir, r.path), s.unet.input_size)});
  }
  OutputDir dir(common.out);
  SegModel model;
  std::vector<double> history;
  if (init.empty()) {
    model = build_unet(s.unet.input_size, s.unet, s.train.seed);
    history = train_seg(model, pairs, s.train);
  } else {
    SegModel base = load_seg_model(checkpoint_stem(init, "unet"));
    if (base.spec().input_size != s.unet.input_size)
      throw Error("segment train: --init model input size differs from segment.input_size");
    model = transfer_finetune(base, pairs, s.train, &history);
  }

  std::vector<Image> images;
  for (const auto& p : pairs) images.push_back(p.image);
  auto probs = predict_masks(model, images, s.predict_batch);
  double dsc = 0;
  for (std::size_t i = 0; i < pairs.size(); ++i) dsc += dice(postprocess_mask(probs[i], s.postprocess), pairs[i].mask);
  dsc /= static_cast<double>(pairs.size());

  std::string csv = "epoch,loss\n";
  char buf[64];
  for (std::size_t e = 0; e < history.size(); ++e) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g\n", e, history[e]);
    csv += buf;
  }
  write_file_atomic(dir.path() / "history.csv", csv);
  save_seg_model(dir.path() / "unet", model, {{"train_images", pairs.size()}, {"train_dice", dsc}});
  dir.commit(snapshot("segment train",
                      {{"manifest", manifest_path}, {"mask_dir", mask_dir}, {"split", split}, {"init", init}}, cfg));
  out << "segment train: " << pairs.size() << " images, training DSC " << dsc << "\n";
  return 0;
}

int cmd_segment_apply(const Common& common, const std::string& model_path, const std::string& manifest_path,
                      const std::string& truth_dir, std::ostream& out) {
  RunConfig cfg = common.resolve();
  SegModel model = load_seg_model(checkpoint_stem(model_path, "unet"));
  const int size = model.spec().input_size;
  auto manifest = load_manifest(manifest_path);
  check_unique_names(manifest.records);
  OutputDir dir(common.out);
  fs::create_directories(dir.path() / "masks");
  std::string dice_csv = "path,dice\n";
  double dice_sum = 0;
  const auto& recs = manifest.records;
  const std::size_t batch = static_cast<std::size_t>(cfg.segment.predict_batch);
  for (std::size_t start = 0; start < recs.size(); start += batch) {
    const std::size_t end = std::min(recs.size(), start + batch);
    std::vector<Image> images;
    for (std::size_t i = start; i < end; ++i)
      images.push_back(load_input(recs[i], cfg.preprocess, size, ValueRange::unit()));
    auto probs = predict_masks(model, images, cfg.segment.predict_batch);
    for (std::size_t i = start; i < end; ++i) {
      BinaryMask m = postprocess_mask(probs[i - start], cfg.segment.postprocess);
      write_mask_png(dir.path() / "masks" / (recs[i].path.stem().string() + ".png"), m);
      if (!truth_dir.empty()) {
        const double d = dice(m, resize_mask(load_mask_for(truth_dir, recs[i].path), size));
        dice_sum += d;
        char buf[64];
        std::snprintf(buf, sizeof buf, ",%.17g\n", d);
        dice_csv += recs[i].path.filename().string() + buf;
      }
    }
  }
  json summary = {{"images", recs.size()}, {"mask_size", size}};
  if (!truth_dir.empty()) {
    write_file_atomic(dir.path() / "dice.csv", dice_csv);
    summary["mean_dice"] = recs.empty() ? 0.0 : dice_sum / static_cast<double>(recs.size());
  }
  write_file_atomic(dir.path() / "summary.json", summary.dump(2) + "\n");
  dir.commit(snapshot("segment apply", {{"model", model_path}, {"manifest", manifest_path}, {"truth_dir", truth_dir}},
                      cfg));
  out << "segment apply: " << recs.size() << " masks";
  if (!truth_dir.empty()) out << ", mean DSC " << summary["mean_dice"].get<double>();
  out << "\n";
  return 0;
}

int cmd_gan_train(const Common& common, const std::string& manifest_path, const std::string& label_name,
                  const std::string& variant, std::ostream& out) {
  RunConfig cfg = common.resolve();
  if (!variant.empty()) {
    auto v = parse_variant(variant);
    if (!v) throw Error("--variant must be randgan or anogan");
    cfg.gan.variant = *v;
  }
  const ClassLabel label = label_arg(label_name);
  if (is_unknown_class(label)) throw Error("gan-train: " + label_name + " is the held-out unknown class");
  auto records = select(load_manifest(manifest_path), Split::train, label);
  if (records.empty()) throw Error("gan-train: no training images labelled " + std::string(to_string(label)));
  std::vector<Image> images;
  for (const auto& r : records)
    images.push_back(load_input(r, cfg.preprocess, cfg.gan.image_size, ValueRange::symmetric()));

  OutputDir dir(common.out);
  GanModel model = build_gan(cfg.gan);
  model.train_label = std::string(to_string(label));
  auto history = train_gan(model, images, [&](const EpochLoss& e) {
    out << "gan-train " << model.tag() << " epoch " << e.epoch << " loss_D " << e.loss_d << " loss_G " << e.loss_g
        << "\n";
  });
  write_file_atomic(dir.path() / "history.csv", format_history_csv(history));
  save_gan(dir.path() / "model", model, {{"train_images", images.size()}});
  dir.commit(snapshot("gan-train", {{"manifest", manifest_path}, {"label", label_name}, {"variant", variant}}, cfg));
  return 0;
}

int cmd_score(const Common& common, const std::string& model_path, const std::string& manifest_path,
              const std::string& split, std::ostream& out) {
  RunConfig cfg = common.resolve();
  GanModel model = load_gan(checkpoint_stem(model_path, "model"));
  auto records = select(load_manifest(manifest_path), split_filter(split));
  if (records.empty()) throw Error("score: no images selected");
  std::vector<Image> images;
  for (const auto& r : records)
    images.push_back(load_input(r, cfg.preprocess, model.config.image_size, ValueRange::symmetric()));

  OutputDir dir(common.out);
  auto results = invert_latent_batch(model, images, cfg.score);
  std::vector<ScoreRecord> rows;
  for (std::size_t i = 0; i < records.size(); ++i)
    rows.push_back({records[i].path.filename().string(), records[i].label, model.tag(), results[i].residual,
                    results[i].discrimination, results[i].score, results[i].restarts_used});
  write_file_atomic(dir.path() / "scores.csv", format_score_file(rows));
  dir.commit(snapshot("score", {{"model", model_path}, {"manifest", manifest_path}, {"split", split}}, cfg));
  out << "score: " << rows.size() << " images scored by " << model.tag() << "\n";
  return 0;
}

int cmd_evaluate(const Common& common, const std::string& scores_a, const std::string& scores_b, std::ostream& out) {
  RunConfig cfg = common.resolve();
  auto a = read_score_file(scores_a);
  auto b = read_score_file(scores_b);
  ScoreTable table = join_scores(a, b);
  EvalReport report = run_protocol(std::move(table), cfg.eval);

  OutputDir dir(common.out);
  write_file_atomic(dir.path() / "report.json", to_json(report).dump(2) + "\n");
  for (const auto& run : report.runs)
    write_file_atomic(dir.path() / ("roc_run" + std::to_string(run.index) + ".csv"), format_roc_csv(run.roc));
  if (!report.runs.empty()) write_file_atomic(dir.path() / "roc.csv", format_roc_csv(report.runs.front().roc));
  write_file_atomic(dir.path() / "roc_imbalanced.csv", format_roc_csv(report.imbalanced.roc));
  dir.commit(snapshot("evaluate", {{"scores_a", scores_a}, {"scores_b", scores_b}}, cfg));
  out << "evaluate: mean AUC " << report.mean_auc << " (" << report.model_a << " alone " << report.mean_auc_model_a
      << ", " << report.model_b << " alone " << report.mean_auc_model_b << ")\n";
  return 0;
}

int cmd_plot(const Common& common, const std::vector<std::string>& rocs, int size, std::ostream& out) {
  RunConfig cfg = common.resolve();
  std::vector<RocCurve> curves;
  for (const auto& r : rocs) curves.push_back({fs::path(r).stem().string(), read_roc_csv(r)});
  OutputDir dir(common.out);
  write_rgb_png(dir.path() / "roc.png", render_roc_plot(curves, size));
  json legend = json::array();
  for (std::size_t i = 0; i < curves.size(); ++i)
    legend.push_back({{"curve", curves[i].name}, {"auc", curves[i].roc.auc}, {"colour_index", i}});
  write_file_atomic(dir.path() / "legend.json", legend.dump(2) + "\n");
  dir.commit(snapshot("plot", {{"roc", rocs}, {"size", size}}, cfg));
  out << "plot: " << curves.size() << " curve(s) -> " << (dir.final_path() / "roc.png").string() << "\n";
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"randgan: semi-supervised anomaly detection with randomized-context GANs"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  Common common;
  std::string manifest, mask_dir, split = "test", label, variant, model, init, truth_dir, scores_a, scores_b;
  std::vector<std::string> rocs;
  int plot_size = 512;

  auto* synth = app.add_subcommand("synth", "generate the three-class synthetic dataset");
  common.add_to(synth);

  auto* pre = app.add_subcommand("preprocess", "grayscale, resize, normalise and optionally mask a manifest");
  common.add_to(pre);
  pre->add_option("--manifest", manifest)->required()->check(CLI::ExistingFile);
  pre->add_option("--mask-dir", mask_dir, "masks with the same file names as the images")->check(CLI::ExistingDirectory);

  auto* seg = app.add_subcommand("segment", "lung segmentation");
  seg->require_subcommand(1);
  auto* seg_train = seg->add_subcommand("train", "train (or fine-tune with --init) the U-Net");
  common.add_to(seg_train);
  seg_train->add_option("--manifest", manifest)->required()->check(CLI::ExistingFile);
  seg_train->add_option("--mask-dir", mask_dir)->required()->check(CLI::ExistingDirectory);
  seg_train->add_option("--split", split, "train, test or all")->capture_default_str();
  seg_train->add_option("--init", init, "pre-trained checkpoint to fine-tune");
  auto* seg_apply = seg->add_subcommand("apply", "predict post-processed masks for a manifest");
  common.add_to(seg_apply);
  seg_apply->add_option("--model", model)->required();
  seg_apply->add_option("--manifest", manifest)->required()->check(CLI::ExistingFile);
  seg_apply->add_option("--truth-dir", truth_dir, "ground-truth masks for a DSC report")->check(CLI::ExistingDirectory);

  auto* gan = app.add_subcommand("gan-train", "train one GAN on one known class");
  common.add_to(gan);
  gan->add_option("--manifest", manifest)->required()->check(CLI::ExistingFile);
  gan->add_option("--label", label, "known class to train on")->required();
  gan->add_option("--variant", variant, "randgan or anogan (overrides gan.variant)");

  auto* score = app.add_subcommand("score", "anomaly scores of a manifest under one trained GAN");
  common.add_to(score);
  score->add_option("--model", model)->required();
  score->add_option("--manifest", manifest)->required()->check(CLI::ExistingFile);
  score->add_option("--split", split, "train, test or all")->capture_default_str();

  auto* eval = app.add_subcommand("evaluate", "fuse two score files and run the resampling protocol");
  common.add_to(eval);
  eval->add_option("--scores-a", scores_a)->required();
  eval->add_option("--scores-b", scores_b)->required();

  auto* plot = app.add_subcommand("plot", "render ROC csv files to a PNG");
  common.add_to(plot);
  plot->add_option("--roc", rocs)->required();
  plot->add_option("--size", plot_size)->capture_default_str();

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (synth->parsed()) return cmd_synth(common, out);
    if (pre->parsed()) return cmd_preprocess(common, manifest, mask_dir, out);
    if (seg_train->parsed()) return cmd_segment_train(common, manifest, mask_dir, split, init, out);
    if (seg_apply->parsed()) return cmd_segment_apply(common, model, manifest, truth_dir, out);
    if (gan->parsed()) return cmd_gan_train(common, manifest, label, variant, out);
    if (score->parsed()) return cmd_score(common, model, manifest, split, out);
    if (eval->parsed()) return cmd_evaluate(common, scores_a, scores_b, out);
    if (plot->parsed()) return cmd_plot(common, rocs, plot_size, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace randgan
