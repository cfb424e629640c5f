#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <json.hpp>
#include <torch/torch.h>

#include "randgan/image.hpp"
#include "randgan/mask_ops.hpp"
#include "randgan/nn_blocks.hpp"

namespace randgan {

struct UNetSpec {
  int input_size = 256;
  int depth = 4;
  int base_channels = 16;
  bool inception = true;  // inception/residual blocks instead of plain double convs

  void validate() const;
};

// Either an inception/residual block or two plain 3x3 conv + ReLU layers.
struct ConvBlockImpl : torch::nn::Module {
  ConvBlockImpl(int in, int out, bool inception);
  torch::Tensor forward(const torch::Tensor& x);

  InceptionResBlock block{nullptr};
  torch::nn::Conv2d conv1{nullptr}, conv2{nullptr};
};
TORCH_MODULE(ConvBlock);

// U-Net: `depth` encoder stages with 2x2 max-pooling, a bottleneck, and `depth`
// decoder stages that upsample with a 2x2 transposed convolution and
// concatenate the encoder output of matching size. Returns logits.
struct UNetImpl : torch::nn::Module {
  explicit UNetImpl(UNetSpec spec);
  void reset();
  torch::Tensor forward(torch::Tensor x);
  // Spatial size of the bottleneck feature map.
  int bottleneck_size() const { return spec.input_size >> spec.depth; }

  UNetSpec spec;
  std::vector<ConvBlock> encoder;
  ConvBlock bottleneck{nullptr};
  std::vector<torch::nn::ConvTranspose2d> upsample;
  std::vector<ConvBlock> decoder;
  torch::nn::Conv2d head{nullptr};
};
TORCH_MODULE(UNet);

struct SegModel {
  UNet net{nullptr};
  double frozen_prefix_fraction = 0.0;

  const UNetSpec& spec() const { return net->spec; }
  int64_t parameter_count() const;
  SegModel clone() const;
};

SegModel build_unet(int input_size, UNetSpec spec = {}, std::uint64_t seed = 0);

struct SegTrainConfig {
  int epochs = 50;
  int batch_size = 4;
  double learning_rate = 1e-4;
  double freeze_fraction = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SegPair {
  Image image;  // [0,1]
  BinaryMask mask;
};

// Binary cross-entropy on the sigmoid output, Adam. Returns mean loss per epoch.
std::vector<double> train_seg(SegModel& model, const std::vector<SegPair>& pairs, const SegTrainConfig& config);

// Freezes the first ceil(f * L) of the L parameter groups (encoder order) and
// trains the rest; returns the fine-tuned copy.
SegModel transfer_finetune(const SegModel& model, const std::vector<SegPair>& pairs, const SegTrainConfig& config,
                           std::vector<double>* history = nullptr);

// Number of leading parameter groups frozen for a given fraction.
std::size_t frozen_group_count(std::size_t groups, double fraction);

Image predict_mask(const SegModel& model, const Image& image);
std::vector<Image> predict_masks(const SegModel& model, const std::vector<Image>& images, int batch_size = 8);

void save_seg_model(const std::filesystem::path& stem, const SegModel& model, nlohmann::json extra = {});
SegModel load_seg_model(const std::filesystem::path& stem);

}  // namespace randgan
