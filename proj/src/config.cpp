#include "randgan/config.hpp"

#include <fstream>
#include <sstream>

#include "randgan/config_reader.hpp"
#include "randgan/error.hpp"

namespace randgan {

using json = nlohmann::json;

namespace {

std::string range_name(const ValueRange& r) { return r == ValueRange::unit() ? "unit" : "symmetric"; }

json rule_json(const ShapeRule& r) {
  return {{"blobs", r.blobs},
          {"blob_radius", r.blob_radius},
          {"blob_intensity", r.blob_intensity},
          {"texture_amplitude", r.texture_amplitude},
          {"texture_period", r.texture_period}};
}

void read_rule(ConfigReader& parent, const std::string& key, ShapeRule& rule) {
  const json* v = parent.raw(key);
  if (!v) return;
  ConfigReader r(*v, parent.section() + "." + key, parent.errors());
  r.get("blobs", rule.blobs);
  r.get("blob_radius", rule.blob_radius);
  r.get("blob_intensity", rule.blob_intensity);
  r.get("texture_amplitude", rule.texture_amplitude);
  r.get("texture_period", rule.texture_period);
  r.finish();
}

void read_counts(ConfigReader& parent, const std::string& key, ClassCounts& counts) {
  const json* v = parent.raw(key);
  if (!v) return;
  ConfigReader r(*v, parent.section() + "." + key, parent.errors());
  r.get("train", counts.train);
  r.get("test", counts.test);
  r.finish();
}

SyntheticConfig synth_from_json(const json& j, std::vector<std::string>& errors, bool& has_seed) {
  SyntheticConfig c;
  ConfigReader r(j, "synth", errors);
  r.get("image_size", c.image_size);
  read_rule(r, "class_a", c.class_a);
  read_rule(r, "class_b", c.class_b);
  read_rule(r, "unknown", c.unknown);
  read_counts(r, "counts_a", c.counts_a);
  read_counts(r, "counts_b", c.counts_b);
  read_counts(r, "counts_unknown", c.counts_unknown);
  r.get("artifact_strength", c.artifact_strength);
  r.get("num_sources", c.num_sources);
  r.get("source_bias", c.source_bias);
  r.get("noise_sigma", c.noise_sigma);
  has_seed = r.raw("seed") != nullptr;
  r.get("seed", c.seed);
  r.finish();
  return c;
}

PreprocessConfig preprocess_from_json(const json& j, std::vector<std::string>& errors) {
  PreprocessConfig c;
  ConfigReader r(j, "preprocess", errors);
  r.get("target_size", c.target_size);
  if (const json* v = r.raw("output_range")) {
    if (*v == "unit")
      c.output_range = ValueRange::unit();
    else if (*v == "symmetric")
      c.output_range = ValueRange::symmetric();
    else
      r.error("output_range", "expected \"unit\" or \"symmetric\"");
  }
  if (const json* v = r.raw("interpolation")) {
    if (*v == "bilinear")
      c.interpolation = Interpolation::bilinear;
    else if (*v == "nearest")
      c.interpolation = Interpolation::nearest;
    else
      r.error("interpolation", "expected \"bilinear\" or \"nearest\"");
  }
  r.finish();
  return c;
}

SegmentSettings segment_from_json(const json& j, std::vector<std::string>& errors, bool& has_seed) {
  SegmentSettings c;
  ConfigReader r(j, "segment", errors);
  r.get("input_size", c.unet.input_size);
  r.get("depth", c.unet.depth);
  r.get("base_channels", c.unet.base_channels);
  r.get("inception", c.unet.inception);
  r.get("epochs", c.train.epochs);
  r.get("batch_size", c.train.batch_size);
  r.get("learning_rate", c.train.learning_rate);
  r.get("freeze_fraction", c.train.freeze_fraction);
  has_seed = r.raw("seed") != nullptr;
  r.get("seed", c.train.seed);
  r.get("threshold", c.postprocess.threshold);
  r.get("morph_kernel", c.postprocess.morph_kernel);
  if (const json* v = r.raw("morph_operations")) {
    c.postprocess.operations.clear();
    if (!v->is_array()) r.error("morph_operations", "expected an array of \"open\" / \"close\"");
    else
      for (const auto& op : *v) {
        if (op == "open")
          c.postprocess.operations.push_back(MorphOp::open);
        else if (op == "close")
          c.postprocess.operations.push_back(MorphOp::close);
        else
          r.error("morph_operations", "expected \"open\" or \"close\"");
      }
  }
  r.get("predict_batch", c.predict_batch);
  r.finish();
  return c;
}

// Runs a section parser that throws its own aggregated error.
template <typename F>
void collect(std::vector<std::string>& errors, F&& parse) {
  try {
    parse();
  } catch (const Error& e) {
    std::string msg = e.what();
    const std::string prefix = "invalid configuration:\n  ";
    if (msg.rfind(prefix, 0) == 0) msg = msg.substr(prefix.size());
    errors.push_back(msg);
  }
}

}  // namespace

void RunConfig::override_seed(std::uint64_t s) {
  seed = s;
  synth.seed = s;
  segment.train.seed = s;
  gan.seed = s;
  score.seed = s;
  eval.seed = s;
}

RunConfig run_config_from_json(const json& j) {
  std::vector<std::string> errors;
  RunConfig c;
  ConfigReader top(j, "config", errors);
  if (const json* s = top.raw("seed")) {
    if (s->is_number_unsigned())
      c.seed = s->get<std::uint64_t>();
    else
      top.error("seed", "expected a non-negative integer");
  }
  top.get("threads", c.threads);
  if (c.threads < 1) top.error("threads", "must be >= 1");

  bool synth_seed = false, segment_seed = false;
  if (const json* v = top.raw("synth")) {
    c.synth = synth_from_json(*v, errors, synth_seed);
    collect(errors, [&] { c.synth.validate(); });
  }
  if (const json* v = top.raw("preprocess")) {
    c.preprocess = preprocess_from_json(*v, errors);
    collect(errors, [&] { c.preprocess.validate(); });
  }
  if (const json* v = top.raw("segment")) {
    c.segment = segment_from_json(*v, errors, segment_seed);
    collect(errors, [&] {
      c.segment.unet.validate();
      c.segment.train.validate();
      c.segment.postprocess.validate();
      if (c.segment.predict_batch < 1) throw Error("segment.predict_batch: must be >= 1");
    });
  }
  const json* gan = top.raw("gan");
  const json* score = top.raw("score");
  const json* eval = top.raw("eval");
  if (gan) collect(errors, [&] { c.gan = gan_config_from_json(*gan); });
  if (score) collect(errors, [&] { c.score = inversion_config_from_json(*score); });
  if (eval) collect(errors, [&] { c.eval = eval_config_from_json(*eval); });
  top.finish();
  throw_if_errors(errors);

  if (c.seed) {
    const auto s = *c.seed;
    if (!synth_seed) c.synth.seed = s;
    if (!segment_seed) c.segment.train.seed = s;
    if (!gan || !gan->contains("seed")) c.gan.seed = s;
    if (!score || !score->contains("seed")) c.score.seed = s;
    if (!eval || !eval->contains("seed")) c.eval.seed = s;
  }
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open config: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  json j;
  try {
    j = json::parse(ss.str());
  } catch (const json::parse_error& e) {
    throw Error("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return run_config_from_json(j);
}

json to_json(const SyntheticConfig& c) {
  auto counts = [](const ClassCounts& k) { return json{{"train", k.train}, {"test", k.test}}; };
  return {{"image_size", c.image_size},
          {"class_a", rule_json(c.class_a)},
          {"class_b", rule_json(c.class_b)},
          {"unknown", rule_json(c.unknown)},
          {"counts_a", counts(c.counts_a)},
          {"counts_b", counts(c.counts_b)},
          {"counts_unknown", counts(c.counts_unknown)},
          {"artifact_strength", c.artifact_strength},
          {"num_sources", c.num_sources},
          {"source_bias", c.source_bias},
          {"noise_sigma", c.noise_sigma},
          {"seed", c.seed}};
}

json to_json(const PreprocessConfig& c) {
  return {{"target_size", c.target_size},
          {"output_range", range_name(c.output_range)},
          {"interpolation", c.interpolation == Interpolation::bilinear ? "bilinear" : "nearest"}};
}

json to_json(const SegmentSettings& c) {
  json ops = json::array();
  for (auto op : c.postprocess.operations) ops.push_back(op == MorphOp::open ? "open" : "close");
  return {{"input_size", c.unet.input_size},
          {"depth", c.unet.depth},
          {"base_channels", c.unet.base_channels},
          {"inception", c.unet.inception},
          {"epochs", c.train.epochs},
          {"batch_size", c.train.batch_size},
          {"learning_rate", c.train.learning_rate},
          {"freeze_fraction", c.train.freeze_fraction},
          {"seed", c.train.seed},
          {"threshold", c.postprocess.threshold},
          {"morph_kernel", c.postprocess.morph_kernel},
          {"morph_operations", ops},
          {"predict_batch", c.predict_batch}};
}

json to_json(const RunConfig& c) {
  json j = {{"threads", c.threads},
            {"synth", to_json(c.synth)},
            {"preprocess", to_json(c.preprocess)},
            {"segment", to_json(c.segment)},
            {"gan", to_json(c.gan)},
            {"score", to_json(c.score)},
            {"eval", to_json(c.eval)}};
  if (c.seed) j["seed"] = *c.seed;
  return j;
}

}  // namespace randgan
