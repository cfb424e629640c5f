#include "randgan/nn_blocks.hpp"

#include <cmath>

#include "randgan/error.hpp"
#include "randgan/rng.hpp"

namespace randgan {

namespace nn = torch::nn;

int group_count(int channels) {
  for (int g : {8, 4, 2})
    if (channels % g == 0) return g;
  return 1;
}

InceptionResBlockImpl::InceptionResBlockImpl(int in, int out, bool group_norm, double leak_) : leak(leak_) {
  if (out < 3) throw Error("inception block needs at least 3 output channels");
  const int c1 = out / 4;
  const int c3 = out / 2;
  const int c5 = out - c1 - c3;
  branch1 = register_module("branch1", nn::Conv2d(nn::Conv2dOptions(in, c1, 1)));
  branch3 = register_module("branch3", nn::Conv2d(nn::Conv2dOptions(in, c3, 3).padding(1)));
  branch5 = register_module("branch5", nn::Conv2d(nn::Conv2dOptions(in, c5, 5).padding(2)));
  shortcut = register_module("shortcut", nn::Conv2d(nn::Conv2dOptions(in, out, 1)));
  if (group_norm) norm = register_module("norm", nn::GroupNorm(nn::GroupNormOptions(group_count(out), out)));
}

torch::Tensor InceptionResBlockImpl::forward(const torch::Tensor& x) {
  auto y = torch::cat({branch1(x), branch3(x), branch5(x)}, 1);
  if (norm) y = norm(y);
  return torch::leaky_relu(y + shortcut(x), leak);
}

void init_parameter(const std::string& name, torch::Tensor& p, at::Generator& gen, InitScheme scheme) {
  torch::NoGradGuard guard;
  const bool is_bias = name.size() >= 4 && name.compare(name.size() - 4, 4, "bias") == 0;
  if (is_bias) {
    p.zero_();
    return;
  }
  if (p.dim() == 1) {
    // normalisation scale
    if (scheme == InitScheme::dcgan)
      p.copy_(1.0 + 0.02 * torch::randn(p.sizes(), gen, torch::TensorOptions().dtype(p.dtype())));
    else
      p.fill_(1.0);
    return;
  }
  double std = 0.02;
  if (scheme == InitScheme::kaiming) {
    const double fan_in = static_cast<double>(p.numel() / p.size(0));
    std = std::sqrt(2.0 / fan_in);
  }
  p.copy_(std * torch::randn(p.sizes(), gen, torch::TensorOptions().dtype(p.dtype())));
}

void init_module(nn::Module& module, std::uint64_t seed, InitScheme scheme) {
  auto gen = at::detail::createCPUGenerator(seed);
  for (auto& item : module.named_parameters(true)) init_parameter(item.key(), item.value(), gen, scheme);
}

torch::Dtype module_dtype(const nn::Module& module) {
  auto params = module.parameters();
  if (params.empty()) return torch::kFloat32;
  return params.front().scalar_type();
}

torch::Tensor image_to_tensor(const Image& image, torch::Dtype dtype) {
  auto px = image.pixels();
  auto t = torch::from_blob(const_cast<float*>(px.data()), {1, 1, image.height(), image.width()}, torch::kFloat32);
  return t.to(dtype).clone();
}

torch::Tensor images_to_tensor(const std::vector<Image>& images, torch::Dtype dtype) {
  if (images.empty()) throw Error("images_to_tensor: empty batch");
  const int h = images.front().height(), w = images.front().width();
  auto out = torch::empty({static_cast<int64_t>(images.size()), 1, h, w}, torch::kFloat32);
  auto* dst = out.data_ptr<float>();
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i].height() != h || images[i].width() != w) throw Error("images_to_tensor: mixed image shapes");
    auto px = images[i].pixels();
    std::copy(px.begin(), px.end(), dst + i * static_cast<std::size_t>(h) * w);
  }
  return out.to(dtype);
}

Image tensor_to_image(const torch::Tensor& batch, int64_t index, ValueRange range) {
  auto t = batch[index][0].detach().to(torch::kFloat32).contiguous();
  const int h = static_cast<int>(t.size(0)), w = static_cast<int>(t.size(1));
  std::vector<float> px(t.data_ptr<float>(), t.data_ptr<float>() + static_cast<std::size_t>(h) * w);
  for (float& v : px) v = std::clamp(v, static_cast<float>(range.lo), static_cast<float>(range.hi));
  return Image(h, w, range, std::move(px));
}

std::vector<std::pair<std::string, std::shared_ptr<nn::Module>>> parameter_groups(nn::Module& module) {
  std::vector<std::pair<std::string, std::shared_ptr<nn::Module>>> out;
  for (auto& item : module.named_modules("", false))
    if (!item.value()->named_parameters(false).is_empty()) out.emplace_back(item.key(), item.value());
  return out;
}

std::uint64_t parameter_hash(const nn::Module& module) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const torch::Tensor& t) {
    auto c = t.detach().contiguous();
    h = fnv1a(c.data_ptr(), c.numel() * c.element_size(), h);
  };
  for (const auto& p : module.parameters(true)) mix(p);
  for (const auto& b : module.buffers(true)) mix(b);
  return h;
}

}  // namespace randgan
