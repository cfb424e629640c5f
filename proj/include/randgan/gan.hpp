#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>
#include <torch/torch.h>

#include "randgan/image.hpp"
#include "randgan/nn_blocks.hpp"

namespace randgan {

enum class GanVariant { randgan, anogan };
enum class GanObjective { non_saturating, minimax };

std::string_view to_string(GanVariant v);
std::optional<GanVariant> parse_variant(std::string_view token);

struct GanConfig {
  GanVariant variant = GanVariant::randgan;
  int image_size = 128;  // 4 * 2^k; 32 is the desk-scale profile
  int latent_dim = 100;
  int base_channels = 32;
  int context_dim = 32;
  int context_channels = 16;
  int feature_tap = 3;  // discriminator block (1-based) whose activations define f(x)
  int epochs = 25;
  int batch_size = 64;
  double lr_generator = 2e-4;
  double lr_discriminator = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  GanObjective objective = GanObjective::non_saturating;
  std::uint64_t seed = 0;

  void validate() const;
  // Number of 2x upsampling stages from the 4x4 seed to image_size.
  int upsample_stages() const;
};

nlohmann::json to_json(const GanConfig& c);
// Strict parse: unknown keys are errors. "profile": "desk" selects the 32x32 preset.
GanConfig gan_config_from_json(const nlohmann::json& j, GanConfig base = {});

// Maps the real-image context batch to one vector: per-image features from
// stride-2 convolutions and inception/residual blocks, global average pooled,
// projected, then averaged over the batch.
struct ContextEncoderImpl : torch::nn::Module {
  ContextEncoderImpl(int channels, int context_dim);
  torch::Tensor forward(const torch::Tensor& images);  // (N,1,S,S) -> (context_dim)

  torch::nn::Conv2d down1{nullptr}, down2{nullptr};
  InceptionResBlock block1{nullptr}, block2{nullptr};
  torch::nn::Linear project{nullptr};
};
TORCH_MODULE(ContextEncoder);

// DCGAN-style trunk: linear projection to 4x4 feature maps, then transposed
// convolutions doubling the resolution, tanh output. The RANDGAN variant adds
// the context encoder, concatenates its output to z before the projection, and
// inserts an inception/residual block after every intermediate stage.
struct GeneratorImpl : torch::nn::Module {
  explicit GeneratorImpl(const GanConfig& config);

  // z: (B, latent_dim). context: (context_dim) or undefined; ignored by AnoGAN.
  torch::Tensor forward(const torch::Tensor& z, const torch::Tensor& context = {});
  torch::Tensor encode_context(const torch::Tensor& images);
  bool uses_context() const { return variant == GanVariant::randgan; }

  // Parameters shared by both variants, keyed by name; the projection weight is
  // restricted to its latent columns.
  std::vector<std::pair<std::string, torch::Tensor>> trunk_parameters() const;

  GanVariant variant;
  int latent_dim;
  int context_dim;
  int seed_channels;
  torch::nn::Linear project{nullptr};
  std::vector<torch::nn::ConvTranspose2d> ups;
  std::vector<torch::nn::GroupNorm> norms;
  torch::nn::ConvTranspose2d out{nullptr};
  ContextEncoder encoder{nullptr};
  std::vector<InceptionResBlock> blocks;
};
TORCH_MODULE(Generator);

struct Discrimination {
  torch::Tensor logit;     // (B)
  torch::Tensor prob;      // (B), sigmoid(logit)
  torch::Tensor features;  // (B, F), flattened activations of the tapped block
};

// Four convolutional blocks (LeakyReLU 0.2; stride 2 while the map is larger
// than 4x4) and a linear head producing one logit.
struct DiscriminatorImpl : torch::nn::Module {
  explicit DiscriminatorImpl(const GanConfig& config);
  Discrimination forward(const torch::Tensor& x);
  int64_t feature_dim() const { return feature_dim_; }

  std::vector<torch::nn::Conv2d> convs;
  torch::nn::Linear head{nullptr};
  int feature_tap;
  int64_t feature_dim_ = 0;
};
TORCH_MODULE(Discriminator);

struct GanModel {
  GanConfig config;
  Generator generator{nullptr};
  Discriminator discriminator{nullptr};
  // Context frozen for inversion (RANDGAN only); undefined otherwise.
  torch::Tensor inversion_context;
  std::string train_label;

  std::string tag() const;
  // Switches both networks (and the frozen context) to float64 or float32.
  void to(torch::Dtype dtype);
};

// Seeded construction. Both variants built from the same seed share identical
// discriminators and identical generator trunk initialisation.
Generator build_generator(const GanConfig& config);
Discriminator build_discriminator(const GanConfig& config);
GanModel build_gan(const GanConfig& config);

// Uniform draws with replacement from [0, n).
std::vector<int64_t> sample_context_indices(int64_t n, int batch_size, std::mt19937_64& rng);
torch::Tensor sample_context_batch(const torch::Tensor& train, int batch_size, std::mt19937_64& rng);

// Checks shape (model size) and range [-1,1], then runs D.
Discrimination discriminate(const GanModel& model, const Image& image);

struct EpochLoss {
  int epoch = 0;
  double loss_d = 0;
  double loss_g = 0;
};

using EpochCallback = std::function<void(const EpochLoss&)>;

// Alternating minimax training: one D step on real vs generated, then one G
// step. RANDGAN draws a fresh random context batch for every G forward pass.
// Throws on an empty set or a non-finite loss.
std::vector<EpochLoss> train_gan(GanModel& model, const std::vector<Image>& train, const EpochCallback& on_epoch = {});

// Samples and encodes the context used at inversion time; seeded from the model
// seed. No-op for AnoGAN.
void freeze_inversion_context(GanModel& model, const std::vector<Image>& train);

std::string format_history_csv(const std::vector<EpochLoss>& history);

void save_gan(const std::filesystem::path& stem, const GanModel& model, nlohmann::json extra = {});
GanModel load_gan(const std::filesystem::path& stem);

}  // namespace randgan
