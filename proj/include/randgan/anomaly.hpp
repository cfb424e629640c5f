#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>
#include <torch/torch.h>

#include "randgan/gan.hpp"
#include "randgan/image.hpp"

namespace randgan {

enum class ZOptimizer { gd, adam };
enum class StepSchedule { constant, cosine };

struct InversionConfig {
  int steps = 500;
  double step_size = 0.01;
  int restarts = 3;
  double lambda = 0.2;
  std::uint64_t seed = 0;
  ZOptimizer optimizer = ZOptimizer::gd;
  StepSchedule schedule = StepSchedule::constant;
  int batch_size = 64;  // query images inverted together; rng streams are per image

  void validate() const;
};

nlohmann::json to_json(const InversionConfig& c);
InversionConfig inversion_config_from_json(const nlohmann::json& j, InversionConfig base = {});

struct AnomalyResult {
  std::vector<float> best_z;
  std::vector<float> initial_z;  // starting point of the chosen restart
  double residual = 0;           // R(x)
  double discrimination = 0;     // D(x)
  double score = 0;              // A(x) = (1 - lambda) R + lambda D
  double final_loss = 0;         // total loss at best_z
  int restarts_used = 0;         // restarts that finished with a finite loss
  Image reconstruction;          // G(best_z), range [-1,1]
};

// Sum of absolute differences. Shapes must match.
double residual_loss(const torch::Tensor& x, const torch::Tensor& gz);
double residual_loss(const Image& x, const Image& gz);
double discrimination_loss(const torch::Tensor& fx, const torch::Tensor& fgz);
double discrimination_loss(std::span<const float> fx, std::span<const float> fgz);

// Differentiable per-sample total loss (1 - lambda) L_R + lambda L_D for a batch
// of latent points. x: (B,1,S,S); z: (B,d); fx: D features of x (B,F).
torch::Tensor total_loss_batch(const GanModel& model, const torch::Tensor& x, const torch::Tensor& fx,
                               const torch::Tensor& z, double lambda);

// Scalar total loss for one image and latent point, and its gradient w.r.t. z.
// Runs in the model's dtype.
struct LossAndGrad {
  double loss = 0;
  double residual = 0;
  double discrimination = 0;
  std::vector<double> grad;
};
LossAndGrad total_loss_and_grad(const GanModel& model, const Image& x, std::span<const double> z, double lambda);
double total_loss(const GanModel& model, const Image& x, std::span<const double> z, double lambda);

// Gradient search over z with the model frozen. Each restart starts from
// N(0, I) drawn from a stream keyed by (seed, image_index, restart), so a
// result does not depend on which other images share its batch.
AnomalyResult invert_latent(const GanModel& model, const Image& x, const InversionConfig& config,
                            std::uint64_t image_index = 0);
std::vector<AnomalyResult> invert_latent_batch(const GanModel& model, const std::vector<Image>& images,
                                               const InversionConfig& config, std::uint64_t first_index = 0);

double anomaly_score(const GanModel& model, const Image& x, const InversionConfig& config,
                     std::uint64_t image_index = 0);

// Latent draws used for restart `restart` of image `image_index`.
std::vector<float> initial_latent(const InversionConfig& config, int latent_dim, std::uint64_t image_index,
                                  int restart);

}  // namespace randgan
