#include "randgan/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "randgan/checkpoint.hpp"
#include "randgan/error.hpp"
#include "randgan/rng.hpp"

namespace randgan {

namespace nn = torch::nn;

void UNetSpec::validate() const {
  if (depth < 1) throw Error("unet: depth must be >= 1");
  if (base_channels < 4) throw Error("unet: base_channels must be >= 4");
  if (input_size <= 0 || input_size % (1 << depth) != 0)
    throw Error("unet: input size " + std::to_string(input_size) + " is not divisible by 2^" + std::to_string(depth));
}

ConvBlockImpl::ConvBlockImpl(int in, int out, bool inception) {
  if (inception) {
    block = register_module("block", InceptionResBlock(in, out, true));
  } else {
    conv1 = register_module("conv1", nn::Conv2d(nn::Conv2dOptions(in, out, 3).padding(1)));
    conv2 = register_module("conv2", nn::Conv2d(nn::Conv2dOptions(out, out, 3).padding(1)));
  }
}

torch::Tensor ConvBlockImpl::forward(const torch::Tensor& x) {
  if (block) return block(x);
  return torch::relu(conv2(torch::relu(conv1(x))));
}

UNetImpl::UNetImpl(UNetSpec s) : spec(s) {
  spec.validate();
  reset();
}

void UNetImpl::reset() {
  encoder.clear();
  upsample.clear();
  decoder.clear();
  const int c = spec.base_channels;
  int in = 1;
  for (int i = 0; i < spec.depth; ++i) {
    encoder.push_back(register_module("enc" + std::to_string(i), ConvBlock(in, c << i, spec.inception)));
    in = c << i;
  }
  bottleneck = register_module("bottleneck", ConvBlock(in, c << spec.depth, spec.inception));
  for (int i = spec.depth - 1; i >= 0; --i) {
    const int up_in = c << (i + 1);
    upsample.push_back(register_module(
        "up" + std::to_string(i), nn::ConvTranspose2d(nn::ConvTranspose2dOptions(up_in, c << i, 2).stride(2))));
    decoder.push_back(register_module("dec" + std::to_string(i), ConvBlock(2 * (c << i), c << i, spec.inception)));
  }
  head = register_module("head", nn::Conv2d(nn::Conv2dOptions(c, 1, 1)));
}

torch::Tensor UNetImpl::forward(torch::Tensor x) {
  std::vector<torch::Tensor> skips;
  for (auto& enc : encoder) {
    x = enc(x);
    skips.push_back(x);
    x = torch::max_pool2d(x, 2);
  }
  x = bottleneck(x);
  for (std::size_t i = 0; i < decoder.size(); ++i) {
    x = upsample[i](x);
    x = decoder[i](torch::cat({x, skips[skips.size() - 1 - i]}, 1));
  }
  return head(x);
}

int64_t SegModel::parameter_count() const {
  int64_t n = 0;
  for (const auto& p : net->parameters()) n += p.numel();
  return n;
}

SegModel SegModel::clone() const {
  SegModel out;
  // Explicit state copy: libtorch's Cloneable does not deep-copy plain Module children.
  out.net = UNet(spec());
  TensorMap state;
  collect_state(*net, "", state);
  restore_state(*out.net, "", state);
  out.frozen_prefix_fraction = frozen_prefix_fraction;
  return out;
}

SegModel build_unet(int input_size, UNetSpec spec, std::uint64_t seed) {
  spec.input_size = input_size;
  SegModel m;
  m.net = UNet(spec);
  init_module(*m.net, derive_seed(seed, {0x5E6}), InitScheme::kaiming);
  return m;
}

void SegTrainConfig::validate() const {
  if (epochs < 0) throw Error("segment: epochs must be >= 0");
  if (batch_size < 1) throw Error("segment: batch_size must be >= 1");
  if (!(learning_rate > 0)) throw Error("segment: learning_rate must be > 0");
  if (!(freeze_fraction >= 0.0 && freeze_fraction <= 1.0))
    throw Error("segment: freeze_fraction must lie in [0,1]");
}

std::size_t frozen_group_count(std::size_t groups, double fraction) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw Error("freeze fraction must lie in [0,1]");
  // Small epsilon keeps exact products such as 0.25 * 40 from rounding up.
  return std::min(groups, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(groups) - 1e-9)));
}

namespace {

void check_pairs(const SegModel& model, const std::vector<SegPair>& pairs) {
  if (pairs.empty()) throw Error("segment: empty training set");
  const int s = model.spec().input_size;
  for (const auto& p : pairs) {
    if (p.image.height() != s || p.image.width() != s)
      throw Error("segment: training image is " + std::to_string(p.image.height()) + "x" +
                  std::to_string(p.image.width()) + ", model expects " + std::to_string(s));
    if (p.mask.height() != s || p.mask.width() != s) throw Error("segment: mask shape does not match image");
  }
}

torch::Tensor masks_to_tensor(const std::vector<SegPair>& pairs, torch::Dtype dtype) {
  const auto& first = pairs.front().mask;
  auto out = torch::empty({static_cast<int64_t>(pairs.size()), 1, first.height(), first.width()}, torch::kFloat32);
  float* dst = out.data_ptr<float>();
  for (const auto& p : pairs)
    for (auto v : p.mask.values()) *dst++ = static_cast<float>(v);
  return out.to(dtype);
}

void check_input(const SegModel& model, const Image& image) {
  const int s = model.spec().input_size;
  if (image.height() != s || image.width() != s)
    throw Error("predict_mask: image is " + std::to_string(image.height()) + "x" + std::to_string(image.width()) +
                ", model expects " + std::to_string(s) + "x" + std::to_string(s));
  if (!(image.range() == ValueRange::unit()) || !image.within_range())
    throw Error("predict_mask: image must be normalised to [0,1]");
}

}  // namespace

std::vector<double> train_seg(SegModel& model, const std::vector<SegPair>& pairs, const SegTrainConfig& config) {
  config.validate();
  check_pairs(model, pairs);
  std::vector<double> history;
  if (config.epochs == 0) return history;

  auto groups = parameter_groups(*model.net);
  const std::size_t frozen = frozen_group_count(groups.size(), config.freeze_fraction);
  std::vector<torch::Tensor> trainable;
  for (std::size_t g = 0; g < groups.size(); ++g)
    for (auto& p : groups[g].second->parameters(false)) {
      p.set_requires_grad(g >= frozen);
      if (g >= frozen) trainable.push_back(p);
    }
  model.frozen_prefix_fraction = config.freeze_fraction;
  if (trainable.empty()) {
    history.assign(static_cast<std::size_t>(config.epochs), std::nan(""));
    return history;
  }

  const auto dtype = module_dtype(*model.net);
  std::vector<Image> images;
  for (const auto& p : pairs) images.push_back(p.image);
  const auto x_all = images_to_tensor(images, dtype);
  const auto y_all = masks_to_tensor(pairs, dtype);

  torch::optim::Adam opt(trainable, torch::optim::AdamOptions(config.learning_rate));
  model.net->train();
  std::vector<int64_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::mt19937_64 rng(derive_seed(config.seed, {static_cast<std::uint64_t>(epoch)}));
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0;
    int batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      auto idx = torch::tensor(std::vector<int64_t>(order.begin() + start, order.begin() + end));
      auto logits = model.net->forward(x_all.index_select(0, idx));
      auto loss = torch::binary_cross_entropy_with_logits(logits, y_all.index_select(0, idx));
      opt.zero_grad();
      loss.backward();
      opt.step();
      total += loss.item<double>();
      ++batches;
    }
    const double mean = total / batches;
    if (!std::isfinite(mean)) throw Error("segment: non-finite loss at epoch " + std::to_string(epoch));
    history.push_back(mean);
  }
  for (auto& p : model.net->parameters()) p.set_requires_grad(true);
  model.net->eval();
  return history;
}

SegModel transfer_finetune(const SegModel& model, const std::vector<SegPair>& pairs, const SegTrainConfig& config,
                           std::vector<double>* history) {
  config.validate();
  SegModel tuned = model.clone();
  auto h = train_seg(tuned, pairs, config);
  tuned.frozen_prefix_fraction = config.freeze_fraction;
  if (history) *history = std::move(h);
  return tuned;
}

std::vector<Image> predict_masks(const SegModel& model, const std::vector<Image>& images, int batch_size) {
  if (batch_size < 1) throw Error("predict_mask: batch_size must be >= 1");
  for (const auto& img : images) check_input(model, img);
  torch::NoGradGuard guard;
  model.net.ptr()->eval();
  const auto dtype = module_dtype(*model.net);
  std::vector<Image> out;
  for (std::size_t start = 0; start < images.size(); start += batch_size) {
    const std::size_t end = std::min(images.size(), start + static_cast<std::size_t>(batch_size));
    std::vector<Image> chunk(images.begin() + start, images.begin() + end);
    auto probs = torch::sigmoid(model.net.ptr()->forward(images_to_tensor(chunk, dtype)));
    for (int64_t i = 0; i < probs.size(0); ++i) out.push_back(tensor_to_image(probs, i, ValueRange::unit()));
  }
  return out;
}

Image predict_mask(const SegModel& model, const Image& image) { return predict_masks(model, {image}, 1).front(); }

void save_seg_model(const std::filesystem::path& stem, const SegModel& model, nlohmann::json extra) {
  TensorMap tensors;
  collect_state(*model.net, "unet.", tensors);
  nlohmann::json meta = std::move(extra);
  if (meta.is_null()) meta = nlohmann::json::object();
  meta["kind"] = "segmentation";
  meta["architecture"] = {{"input_size", model.spec().input_size},
                          {"depth", model.spec().depth},
                          {"base_channels", model.spec().base_channels},
                          {"inception", model.spec().inception}};
  meta["freeze_fraction"] = model.frozen_prefix_fraction;
  meta["parameter_count"] = model.parameter_count();
  save_checkpoint(stem, tensors, std::move(meta));
}

SegModel load_seg_model(const std::filesystem::path& stem) {
  auto ckpt = load_checkpoint(stem);
  const auto& meta = ckpt.metadata;
  if (meta.value("kind", "") != "segmentation") throw Error(stem.string() + " is not a segmentation checkpoint");
  const auto& a = meta.at("architecture");
  UNetSpec spec{a.at("input_size").get<int>(), a.at("depth").get<int>(), a.at("base_channels").get<int>(),
                a.at("inception").get<bool>()};
  SegModel m;
  m.net = UNet(spec);
  restore_state(*m.net, "unet.", ckpt.tensors);
  m.frozen_prefix_fraction = meta.value("freeze_fraction", 0.0);
  m.net->eval();
  return m;
}

}  // namespace randgan
