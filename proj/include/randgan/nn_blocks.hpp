#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <torch/torch.h>

#include "randgan/image.hpp"

namespace randgan {

// Parallel 1x1 / 3x3 / 5x5 convolutions concatenated to `out` channels, plus a
// 1x1 channel-matching shortcut added before the activation.
struct InceptionResBlockImpl : torch::nn::Module {
  InceptionResBlockImpl(int in, int out, bool group_norm = true, double leak = 0.0);
  torch::Tensor forward(const torch::Tensor& x);

  torch::nn::Conv2d branch1{nullptr}, branch3{nullptr}, branch5{nullptr}, shortcut{nullptr};
  torch::nn::GroupNorm norm{nullptr};
  double leak;
};
TORCH_MODULE(InceptionResBlock);

int group_count(int channels);

enum class InitScheme {
  dcgan,   // weights ~ N(0, 0.02), norm scales ~ N(1, 0.02), biases 0
  kaiming  // weights ~ N(0, sqrt(2 / fan_in)), norm scales 1, biases 0
};

// Fills one parameter tensor in place from `gen`.
void init_parameter(const std::string& name, torch::Tensor& p, at::Generator& gen, InitScheme scheme);

// Re-initialises every parameter of `module` in registration order.
void init_module(torch::nn::Module& module, std::uint64_t seed, InitScheme scheme);

torch::Dtype module_dtype(const torch::nn::Module& module);

// Stacks single-channel images into an (N,1,H,W) tensor.
torch::Tensor images_to_tensor(const std::vector<Image>& images, torch::Dtype dtype = torch::kFloat32);
torch::Tensor image_to_tensor(const Image& image, torch::Dtype dtype = torch::kFloat32);
// Extracts sample `index` of an (N,1,H,W) tensor as an image with `range`.
Image tensor_to_image(const torch::Tensor& batch, int64_t index, ValueRange range);

// Leaf modules that own parameters, in registration order ("parameter groups").
std::vector<std::pair<std::string, std::shared_ptr<torch::nn::Module>>> parameter_groups(torch::nn::Module& module);

// FNV-1a over every parameter and buffer, in registration order.
std::uint64_t parameter_hash(const torch::nn::Module& module);

}  // namespace randgan
