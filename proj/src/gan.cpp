#include "randgan/gan.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "randgan/checkpoint.hpp"
#include "randgan/config_reader.hpp"
#include "randgan/error.hpp"
#include "randgan/rng.hpp"

namespace randgan {

namespace nn = torch::nn;

namespace {

// Independent init streams so the shared trunk and the discriminator start
// identical for both variants.
constexpr std::uint64_t kTrunkStream = 0x6E01;
constexpr std::uint64_t kExtraStream = 0x6E02;
constexpr std::uint64_t kDiscStream = 0x6E03;
constexpr std::uint64_t kNoiseStream = 0x6E04;
constexpr std::uint64_t kShuffleStream = 0x6E05;
constexpr std::uint64_t kInversionContextStream = 0x6E06;

bool is_extra(const std::string& name) { return name.rfind("encoder.", 0) == 0 || name.rfind("block", 0) == 0; }

std::string_view to_string(GanObjective o) { return o == GanObjective::minimax ? "minimax" : "non_saturating"; }

}  // namespace

std::string_view to_string(GanVariant v) { return v == GanVariant::randgan ? "randgan" : "anogan"; }

std::optional<GanVariant> parse_variant(std::string_view token) {
  std::string t(token);
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
  if (t == "randgan") return GanVariant::randgan;
  if (t == "anogan") return GanVariant::anogan;
  return std::nullopt;
}

int GanConfig::upsample_stages() const {
  int k = 0;
  for (int s = 4; s < image_size; s *= 2) ++k;
  return k;
}

void GanConfig::validate() const {
  if (image_size < 8 || (4 << upsample_stages()) != image_size)
    throw Error("gan: image_size must be 4*2^k with k >= 1, got " + std::to_string(image_size));
  if (latent_dim < 1) throw Error("gan: latent_dim must be > 0");
  if (base_channels < 4) throw Error("gan: base_channels must be >= 4");
  if (context_dim < 1) throw Error("gan: context_dim must be > 0");
  if (context_channels < 4) throw Error("gan: context_channels must be >= 4");
  if (feature_tap < 1 || feature_tap > 4) throw Error("gan: feature_tap must be in 1..4");
  if (epochs < 1) throw Error("gan: epochs must be >= 1");
  if (batch_size < 1) throw Error("gan: batch_size must be >= 1");
  if (!(lr_generator > 0) || !(lr_discriminator > 0)) throw Error("gan: learning rates must be > 0");
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) throw Error("gan: betas must lie in [0,1)");
}

nlohmann::json to_json(const GanConfig& c) {
  return {{"variant", to_string(c.variant)},
          {"image_size", c.image_size},
          {"latent_dim", c.latent_dim},
          {"base_channels", c.base_channels},
          {"context_dim", c.context_dim},
          {"context_channels", c.context_channels},
          {"feature_tap", c.feature_tap},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"lr_generator", c.lr_generator},
          {"lr_discriminator", c.lr_discriminator},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"objective", to_string(c.objective)},
          {"seed", c.seed}};
}

GanConfig gan_config_from_json(const nlohmann::json& j, GanConfig c) {
  std::vector<std::string> errors;
  ConfigReader r(j, "gan", errors);
  if (const auto* p = r.raw("profile")) {
    if (*p == "desk") {
      c.image_size = 32;
      c.base_channels = 16;
      c.context_dim = 16;
      c.context_channels = 8;
      c.batch_size = 32;
    } else if (*p != "full") {
      r.error("profile", "expected \"full\" or \"desk\"");
    }
  }
  if (const auto* v = r.raw("variant")) {
    auto parsed = v->is_string() ? parse_variant(v->get<std::string>()) : std::nullopt;
    if (parsed)
      c.variant = *parsed;
    else
      r.error("variant", "expected \"randgan\" or \"anogan\"");
  }
  if (const auto* o = r.raw("objective")) {
    if (*o == "non_saturating")
      c.objective = GanObjective::non_saturating;
    else if (*o == "minimax")
      c.objective = GanObjective::minimax;
    else
      r.error("objective", "expected \"non_saturating\" or \"minimax\"");
  }
  r.get("image_size", c.image_size);
  r.get("latent_dim", c.latent_dim);
  r.get("base_channels", c.base_channels);
  r.get("context_dim", c.context_dim);
  r.get("context_channels", c.context_channels);
  r.get("feature_tap", c.feature_tap);
  r.get("epochs", c.epochs);
  r.get("batch_size", c.batch_size);
  r.get("lr_generator", c.lr_generator);
  r.get("lr_discriminator", c.lr_discriminator);
  r.get("beta1", c.beta1);
  r.get("beta2", c.beta2);
  r.get("seed", c.seed);
  r.finish();
  throw_if_errors(errors);
  c.validate();
  return c;
}

ContextEncoderImpl::ContextEncoderImpl(int channels, int context_dim) {
  down1 = register_module("down1", nn::Conv2d(nn::Conv2dOptions(1, channels, 4).stride(2).padding(1)));
  block1 = register_module("block1", InceptionResBlock(channels, channels, true, 0.2));
  down2 = register_module("down2", nn::Conv2d(nn::Conv2dOptions(channels, 2 * channels, 4).stride(2).padding(1)));
  block2 = register_module("block2", InceptionResBlock(2 * channels, 2 * channels, true, 0.2));
  project = register_module("project", nn::Linear(2 * channels, context_dim));
}

torch::Tensor ContextEncoderImpl::forward(const torch::Tensor& images) {
  if (images.dim() != 4 || images.size(1) != 1 || images.size(0) < 1)
    throw Error("encode_context: expected a non-empty (N,1,H,W) batch");
  auto h = block1(torch::leaky_relu(down1(images), 0.2));
  h = block2(torch::leaky_relu(down2(h), 0.2));
  h = h.mean({2, 3});
  // Mean over the batch: the context is invariant to the order of the sampled images.
  return torch::tanh(project(h)).mean(0);
}

GeneratorImpl::GeneratorImpl(const GanConfig& c)
    : variant(c.variant), latent_dim(c.latent_dim), context_dim(c.context_dim) {
  c.validate();
  const int k = c.upsample_stages();
  seed_channels = c.base_channels << (k - 1);
  const int in = latent_dim + (uses_context() ? context_dim : 0);
  project = register_module("project", nn::Linear(in, seed_channels * 16));
  norms.push_back(register_module("norm_in", nn::GroupNorm(nn::GroupNormOptions(group_count(seed_channels), seed_channels))));
  int ch = seed_channels;
  for (int i = 0; i + 1 < k; ++i) {
    const int next = ch / 2;
    ups.push_back(register_module("up" + std::to_string(i),
                                  nn::ConvTranspose2d(nn::ConvTranspose2dOptions(ch, next, 4).stride(2).padding(1))));
    norms.push_back(register_module("norm" + std::to_string(i),
                                    nn::GroupNorm(nn::GroupNormOptions(group_count(next), next))));
    ch = next;
  }
  out = register_module("out", nn::ConvTranspose2d(nn::ConvTranspose2dOptions(ch, 1, 4).stride(2).padding(1)));
  if (uses_context()) {
    encoder = register_module("encoder", ContextEncoder(c.context_channels, context_dim));
    ch = seed_channels;
    for (int i = 0; i + 1 < k; ++i) {
      ch /= 2;
      blocks.push_back(register_module("block" + std::to_string(i), InceptionResBlock(ch, ch, true, 0.0)));
    }
  }
}

torch::Tensor GeneratorImpl::encode_context(const torch::Tensor& images) {
  if (!encoder) throw Error("encode_context: the AnoGAN generator has no context encoder");
  return encoder(images);
}

torch::Tensor GeneratorImpl::forward(const torch::Tensor& z, const torch::Tensor& context) {
  if (z.dim() != 2 || z.size(1) != latent_dim)
    throw Error("generator: z must be (B," + std::to_string(latent_dim) + ")");
  const int64_t b = z.size(0);
  auto h = z;
  if (uses_context()) {
    if (!context.defined()) throw Error("generator: RANDGAN requires a context");
    auto ctx = context.dim() == 1 ? context.unsqueeze(0).expand({b, context_dim}) : context;
    if (ctx.size(0) != b || ctx.size(1) != context_dim) throw Error("generator: context shape mismatch");
    h = torch::cat({z, ctx}, 1);
  }
  h = torch::relu(norms[0](project(h).view({b, seed_channels, 4, 4})));
  for (std::size_t i = 0; i < ups.size(); ++i) {
    h = torch::relu(norms[i + 1](ups[i](h)));
    if (!blocks.empty()) h = blocks[i](h);
  }
  return torch::tanh(out(h));
}

std::vector<std::pair<std::string, torch::Tensor>> GeneratorImpl::trunk_parameters() const {
  std::vector<std::pair<std::string, torch::Tensor>> out_params;
  for (const auto& item : named_parameters(true)) {
    if (is_extra(item.key())) continue;
    auto t = item.value();
    if (item.key() == "project.weight") t = t.narrow(1, 0, latent_dim);
    out_params.emplace_back(item.key(), t);
  }
  return out_params;
}

DiscriminatorImpl::DiscriminatorImpl(const GanConfig& c) : feature_tap(c.feature_tap) {
  c.validate();
  int in = 1;
  int size = c.image_size;
  for (int i = 0; i < 4; ++i) {
    const int ch = c.base_channels << i;
    auto opts = size > 4 ? nn::Conv2dOptions(in, ch, 4).stride(2).padding(1) : nn::Conv2dOptions(in, ch, 3).padding(1);
    if (size > 4) size /= 2;
    convs.push_back(register_module("conv" + std::to_string(i), nn::Conv2d(opts)));
    in = ch;
    if (i + 1 == feature_tap) feature_dim_ = static_cast<int64_t>(ch) * size * size;
  }
  head = register_module("head", nn::Linear(static_cast<int64_t>(in) * size * size, 1));
}

Discrimination DiscriminatorImpl::forward(const torch::Tensor& x) {
  Discrimination d;
  auto h = x;
  for (std::size_t i = 0; i < convs.size(); ++i) {
    h = torch::leaky_relu(convs[i](h), 0.2);
    if (static_cast<int>(i) + 1 == feature_tap) d.features = h.flatten(1);
  }
  d.logit = head(h.flatten(1)).squeeze(1);
  d.prob = torch::sigmoid(d.logit);
  return d;
}

std::string GanModel::tag() const {
  std::string t(to_string(config.variant));
  if (!train_label.empty()) t += "-" + train_label;
  return t;
}

void GanModel::to(torch::Dtype dtype) {
  generator->to(dtype);
  discriminator->to(dtype);
  if (inversion_context.defined()) inversion_context = inversion_context.to(dtype);
}

Generator build_generator(const GanConfig& config) {
  Generator g(config);
  torch::NoGradGuard guard;
  auto trunk = at::detail::createCPUGenerator(derive_seed(config.seed, {kTrunkStream}));
  auto extra = at::detail::createCPUGenerator(derive_seed(config.seed, {kExtraStream}));
  for (auto& item : g->named_parameters(true)) {
    auto p = item.value();
    if (is_extra(item.key())) {
      init_parameter(item.key(), p, extra, InitScheme::dcgan);
    } else if (item.key() == "project.weight") {
      auto latent = p.narrow(1, 0, g->latent_dim);
      init_parameter(item.key(), latent, trunk, InitScheme::dcgan);
      if (p.size(1) > g->latent_dim) {
        auto ctx = p.narrow(1, g->latent_dim, p.size(1) - g->latent_dim);
        init_parameter(item.key(), ctx, extra, InitScheme::dcgan);
      }
    } else {
      init_parameter(item.key(), p, trunk, InitScheme::dcgan);
    }
  }
  return g;
}

Discriminator build_discriminator(const GanConfig& config) {
  Discriminator d(config);
  init_module(*d, derive_seed(config.seed, {kDiscStream}), InitScheme::dcgan);
  return d;
}

GanModel build_gan(const GanConfig& config) {
  config.validate();
  GanModel m;
  m.config = config;
  m.generator = build_generator(config);
  m.discriminator = build_discriminator(config);
  return m;
}

std::vector<int64_t> sample_context_indices(int64_t n, int batch_size, std::mt19937_64& rng) {
  if (n < 1) throw Error("sample_context_batch: empty training set");
  if (batch_size < 1) throw Error("sample_context_batch: batch_size must be >= 1");
  std::uniform_int_distribution<int64_t> pick(0, n - 1);
  std::vector<int64_t> idx(static_cast<std::size_t>(batch_size));
  for (auto& i : idx) i = pick(rng);
  return idx;
}

torch::Tensor sample_context_batch(const torch::Tensor& train, int batch_size, std::mt19937_64& rng) {
  if (!train.defined() || train.dim() != 4) throw Error("sample_context_batch: expected an (N,1,H,W) tensor");
  auto idx = sample_context_indices(train.size(0), batch_size, rng);
  return train.index_select(0, torch::tensor(idx));
}

namespace {

void check_model_image(const GanConfig& config, const Image& image, const char* who) {
  if (image.height() != config.image_size || image.width() != config.image_size)
    throw Error(std::string(who) + ": image is " + std::to_string(image.height()) + "x" +
                std::to_string(image.width()) + ", model expects " + std::to_string(config.image_size) + "x" +
                std::to_string(config.image_size));
  for (float v : image.pixels())
    if (!(v >= -1.0f && v <= 1.0f)) throw Error(std::string(who) + ": pixel values must lie in [-1,1]");
}

}  // namespace

Discrimination discriminate(const GanModel& model, const Image& image) {
  check_model_image(model.config, image, "discriminate");
  torch::NoGradGuard guard;
  return model.discriminator.ptr()->forward(image_to_tensor(image, module_dtype(*model.discriminator)));
}

void freeze_inversion_context(GanModel& model, const std::vector<Image>& train) {
  if (!model.generator->uses_context()) {
    model.inversion_context = torch::Tensor();
    return;
  }
  if (train.empty()) throw Error("freeze_inversion_context: empty training set");
  torch::NoGradGuard guard;
  std::mt19937_64 rng(derive_seed(model.config.seed, {kInversionContextStream}));
  auto x = images_to_tensor(train, module_dtype(*model.generator));
  model.inversion_context = model.generator->encode_context(sample_context_batch(x, model.config.batch_size, rng));
}

std::vector<EpochLoss> train_gan(GanModel& model, const std::vector<Image>& train, const EpochCallback& on_epoch) {
  const auto& c = model.config;
  c.validate();
  if (train.empty()) throw Error("train_gan: empty training set");
  for (const auto& img : train) check_model_image(c, img, "train_gan");

  auto& g = model.generator;
  auto& d = model.discriminator;
  const auto dtype = module_dtype(*g);
  const auto x_all = images_to_tensor(train, dtype);
  const int64_t n = x_all.size(0);

  auto noise = at::detail::createCPUGenerator(derive_seed(c.seed, {kNoiseStream}));
  std::mt19937_64 rng(derive_seed(c.seed, {kShuffleStream}));
  auto z_opts = torch::TensorOptions().dtype(dtype);
  auto draw_context = [&]() -> torch::Tensor {
    if (!g->uses_context()) return {};
    return g->encode_context(sample_context_batch(x_all, c.batch_size, rng));
  };

  torch::optim::Adam opt_d(d->parameters(),
                           torch::optim::AdamOptions(c.lr_discriminator).betas({c.beta1, c.beta2}));
  torch::optim::Adam opt_g(g->parameters(), torch::optim::AdamOptions(c.lr_generator).betas({c.beta1, c.beta2}));
  g->train();
  d->train();

  std::vector<int64_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::vector<EpochLoss> history;
  for (int epoch = 0; epoch < c.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double sum_d = 0, sum_g = 0;
    int steps = 0;
    for (std::size_t start = 0; start < order.size(); start += c.batch_size) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(c.batch_size));
      auto real = x_all.index_select(0, torch::tensor(std::vector<int64_t>(order.begin() + start, order.begin() + end)));
      const int64_t b = real.size(0);

      torch::Tensor fake;
      {
        torch::NoGradGuard guard;
        fake = g->forward(torch::randn({b, c.latent_dim}, noise, z_opts), draw_context());
      }
      auto logit_real = d->forward(real).logit;
      auto logit_fake = d->forward(fake).logit;
      auto loss_d = torch::binary_cross_entropy_with_logits(logit_real, torch::ones_like(logit_real)) +
                    torch::binary_cross_entropy_with_logits(logit_fake, torch::zeros_like(logit_fake));
      opt_d.zero_grad();
      loss_d.backward();
      opt_d.step();

      auto logit_g = d->forward(g->forward(torch::randn({b, c.latent_dim}, noise, z_opts), draw_context())).logit;
      torch::Tensor loss_g;
      if (c.objective == GanObjective::non_saturating)
        loss_g = torch::binary_cross_entropy_with_logits(logit_g, torch::ones_like(logit_g));
      else
        loss_g = -torch::softplus(logit_g).mean();  // mean log(1 - D(G(z)))
      opt_g.zero_grad();
      loss_g.backward();
      opt_g.step();

      sum_d += loss_d.item<double>();
      sum_g += loss_g.item<double>();
      ++steps;
    }
    EpochLoss rec{epoch, sum_d / steps, sum_g / steps};
    if (!std::isfinite(rec.loss_d) || !std::isfinite(rec.loss_g)) {
      std::ostringstream msg;
      msg << "train_gan: divergence at epoch " << epoch << " (loss_D=" << rec.loss_d << ", loss_G=" << rec.loss_g
          << ")";
      throw Error(msg.str());
    }
    history.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  d->zero_grad();
  g->zero_grad();
  g->eval();
  d->eval();
  freeze_inversion_context(model, train);
  return history;
}

std::string format_history_csv(const std::vector<EpochLoss>& history) {
  std::string out = "epoch,loss_D,loss_G\n";
  char buf[96];
  for (const auto& h : history) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g\n", h.epoch, h.loss_d, h.loss_g);
    out += buf;
  }
  return out;
}

void save_gan(const std::filesystem::path& stem, const GanModel& model, nlohmann::json extra) {
  TensorMap tensors;
  collect_state(*model.generator, "G.", tensors);
  collect_state(*model.discriminator, "D.", tensors);
  if (model.inversion_context.defined()) tensors["inversion_context"] = model.inversion_context.detach().clone();
  nlohmann::json meta = std::move(extra);
  if (meta.is_null()) meta = nlohmann::json::object();
  meta["kind"] = "gan";
  meta["config"] = to_json(model.config);
  meta["variant"] = to_string(model.config.variant);
  meta["latent_dim"] = model.config.latent_dim;
  meta["feature_tap"] = model.config.feature_tap;
  meta["seed"] = model.config.seed;
  meta["train_label"] = model.train_label;
  meta["tag"] = model.tag();
  save_checkpoint(stem, tensors, std::move(meta));
}

GanModel load_gan(const std::filesystem::path& stem) {
  auto ckpt = load_checkpoint(stem);
  const auto& meta = ckpt.metadata;
  if (meta.value("kind", "") != "gan") throw Error(stem.string() + " is not a GAN checkpoint");
  GanModel m = build_gan(gan_config_from_json(meta.at("config")));
  m.train_label = meta.value("train_label", "");
  restore_state(*m.generator, "G.", ckpt.tensors);
  restore_state(*m.discriminator, "D.", ckpt.tensors);
  if (auto it = ckpt.tensors.find("inversion_context"); it != ckpt.tensors.end()) m.inversion_context = it->second;
  if (m.generator->uses_context() && !m.inversion_context.defined())
    throw Error(stem.string() + ": RANDGAN checkpoint lacks its inversion context");
  m.generator->eval();
  m.discriminator->eval();
  return m;
}

}  // namespace randgan
