#include "randgan/anomaly.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "randgan/config_reader.hpp"
#include "randgan/error.hpp"
#include "randgan/rng.hpp"

namespace randgan {

void InversionConfig::validate() const {
  if (steps < 1) throw Error("score: steps must be >= 1");
  if (restarts < 1) throw Error("score: restarts must be >= 1");
  if (!(step_size > 0) || !std::isfinite(step_size)) throw Error("score: step_size must be > 0");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw Error("score: lambda must lie in [0,1]");
  if (batch_size < 1) throw Error("score: batch_size must be >= 1");
}

nlohmann::json to_json(const InversionConfig& c) {
  return {{"steps", c.steps},
          {"step_size", c.step_size},
          {"restarts", c.restarts},
          {"lambda", c.lambda},
          {"seed", c.seed},
          {"optimizer", c.optimizer == ZOptimizer::gd ? "gd" : "adam"},
          {"schedule", c.schedule == StepSchedule::constant ? "constant" : "cosine"},
          {"batch_size", c.batch_size}};
}

InversionConfig inversion_config_from_json(const nlohmann::json& j, InversionConfig c) {
  std::vector<std::string> errors;
  ConfigReader r(j, "score", errors);
  r.get("steps", c.steps);
  r.get("step_size", c.step_size);
  r.get("restarts", c.restarts);
  r.get("lambda", c.lambda);
  r.get("seed", c.seed);
  r.get("batch_size", c.batch_size);
  if (const auto* o = r.raw("optimizer")) {
    if (*o == "gd")
      c.optimizer = ZOptimizer::gd;
    else if (*o == "adam")
      c.optimizer = ZOptimizer::adam;
    else
      r.error("optimizer", "expected \"gd\" or \"adam\"");
  }
  if (const auto* s = r.raw("schedule")) {
    if (*s == "constant")
      c.schedule = StepSchedule::constant;
    else if (*s == "cosine")
      c.schedule = StepSchedule::cosine;
    else
      r.error("schedule", "expected \"constant\" or \"cosine\"");
  }
  r.finish();
  throw_if_errors(errors);
  c.validate();
  return c;
}

double residual_loss(const torch::Tensor& x, const torch::Tensor& gz) {
  if (!x.sizes().equals(gz.sizes())) throw Error("residual_loss: shape mismatch");
  return (x.to(torch::kFloat64) - gz.to(torch::kFloat64)).abs().sum().item<double>();
}

double residual_loss(const Image& x, const Image& gz) {
  if (x.height() != gz.height() || x.width() != gz.width()) throw Error("residual_loss: shape mismatch");
  double s = 0;
  auto a = x.pixels();
  auto b = gz.pixels();
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(static_cast<double>(a[i]) - b[i]);
  return s;
}

double discrimination_loss(const torch::Tensor& fx, const torch::Tensor& fgz) {
  if (!fx.sizes().equals(fgz.sizes())) throw Error("discrimination_loss: feature dimension mismatch");
  return (fx.to(torch::kFloat64) - fgz.to(torch::kFloat64)).abs().sum().item<double>();
}

double discrimination_loss(std::span<const float> fx, std::span<const float> fgz) {
  if (fx.size() != fgz.size()) throw Error("discrimination_loss: feature dimension mismatch");
  double s = 0;
  for (std::size_t i = 0; i < fx.size(); ++i) s += std::abs(static_cast<double>(fx[i]) - fgz[i]);
  return s;
}

namespace {

torch::Tensor context_for(const GanModel& model) {
  if (!model.generator.ptr()->uses_context()) return {};
  if (!model.inversion_context.defined()) throw Error("inversion: RANDGAN model has no frozen context");
  return model.inversion_context;
}

void check_query(const GanModel& model, const Image& x) {
  const int s = model.config.image_size;
  if (x.height() != s || x.width() != s)
    throw Error("invert_latent: query is " + std::to_string(x.height()) + "x" + std::to_string(x.width()) +
                ", model expects " + std::to_string(s) + "x" + std::to_string(s));
  for (float v : x.pixels())
    if (!(v >= -1.0f && v <= 1.0f)) throw Error("invert_latent: query values must lie in [-1,1]");
}

struct PerSample {
  torch::Tensor residual, discrimination, total;
};

PerSample losses(const GanModel& model, const torch::Tensor& x, const torch::Tensor& fx, const torch::Tensor& z,
                 double lambda) {
  auto gz = model.generator.ptr()->forward(z, context_for(model));
  auto fgz = model.discriminator.ptr()->forward(gz).features;
  PerSample out;
  out.residual = (x - gz).abs().sum({1, 2, 3});
  out.discrimination = (fx - fgz).abs().sum(1);
  out.total = (1.0 - lambda) * out.residual + lambda * out.discrimination;
  return out;
}

double step_size_at(const InversionConfig& c, int t) {
  if (c.schedule == StepSchedule::constant) return c.step_size;
  return c.step_size * 0.5 * (1.0 + std::cos(std::numbers::pi * t / c.steps));
}

}  // namespace

torch::Tensor total_loss_batch(const GanModel& model, const torch::Tensor& x, const torch::Tensor& fx,
                               const torch::Tensor& z, double lambda) {
  return losses(model, x, fx, z, lambda).total;
}

LossAndGrad total_loss_and_grad(const GanModel& model, const Image& x, std::span<const double> z, double lambda) {
  check_query(model, x);
  if (static_cast<int>(z.size()) != model.config.latent_dim) throw Error("total_loss: latent dimension mismatch");
  const auto dtype = module_dtype(*model.generator);
  auto xt = image_to_tensor(x, dtype);
  torch::Tensor fx;
  {
    torch::NoGradGuard guard;
    fx = model.discriminator.ptr()->forward(xt).features;
  }
  auto zt = torch::tensor(std::vector<double>(z.begin(), z.end()), torch::kFloat64)
                .to(dtype)
                .unsqueeze(0)
                .set_requires_grad(true);
  auto l = losses(model, xt, fx, zt, lambda);
  auto grad = torch::autograd::grad({l.total.sum()}, {zt})[0].to(torch::kFloat64).contiguous();
  LossAndGrad out;
  out.loss = l.total.item<double>();
  out.residual = l.residual.item<double>();
  out.discrimination = l.discrimination.item<double>();
  out.grad.assign(grad.data_ptr<double>(), grad.data_ptr<double>() + grad.numel());
  return out;
}

double total_loss(const GanModel& model, const Image& x, std::span<const double> z, double lambda) {
  check_query(model, x);
  if (static_cast<int>(z.size()) != model.config.latent_dim) throw Error("total_loss: latent dimension mismatch");
  torch::NoGradGuard guard;
  const auto dtype = module_dtype(*model.generator);
  auto xt = image_to_tensor(x, dtype);
  auto fx = model.discriminator.ptr()->forward(xt).features;
  auto zt = torch::tensor(std::vector<double>(z.begin(), z.end()), torch::kFloat64).to(dtype).unsqueeze(0);
  return losses(model, xt, fx, zt, lambda).total.item<double>();
}

std::vector<float> initial_latent(const InversionConfig& config, int latent_dim, std::uint64_t image_index,
                                  int restart) {
  auto gen = at::detail::createCPUGenerator(derive_seed(config.seed, {image_index, static_cast<std::uint64_t>(restart)}));
  auto z = torch::randn({latent_dim}, gen, torch::kFloat32);
  return {z.data_ptr<float>(), z.data_ptr<float>() + latent_dim};
}

std::vector<AnomalyResult> invert_latent_batch(const GanModel& model, const std::vector<Image>& images,
                                               const InversionConfig& config, std::uint64_t first_index) {
  config.validate();
  for (const auto& x : images) check_query(model, x);
  const int d = model.config.latent_dim;
  const auto dtype = module_dtype(*model.generator);
  const auto opts = torch::TensorOptions().dtype(dtype);
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;

  std::vector<AnomalyResult> results;
  results.reserve(images.size());
  for (std::size_t start = 0; start < images.size(); start += config.batch_size) {
    const std::size_t end = std::min(images.size(), start + static_cast<std::size_t>(config.batch_size));
    const int64_t b = static_cast<int64_t>(end - start);
    std::vector<Image> chunk(images.begin() + start, images.begin() + end);
    auto x = images_to_tensor(chunk, dtype);
    torch::Tensor fx;
    {
      torch::NoGradGuard guard;
      fx = model.discriminator.ptr()->forward(x).features;
    }

    auto best_loss = torch::full({b}, std::numeric_limits<double>::infinity(), torch::kFloat64);
    auto best_z = torch::zeros({b, d}, opts);
    auto best_init = torch::zeros({b, d}, opts);
    std::vector<int> finite_restarts(static_cast<std::size_t>(b), 0);

    for (int r = 0; r < config.restarts; ++r) {
      auto init = torch::empty({b, d}, torch::kFloat32);
      for (int64_t i = 0; i < b; ++i) {
        auto z0 = initial_latent(config, d, first_index + start + static_cast<std::uint64_t>(i), r);
        std::copy(z0.begin(), z0.end(), init[i].data_ptr<float>());
      }
      init = init.to(dtype);
      auto z = init.clone();
      auto m = torch::zeros_like(z), v = torch::zeros_like(z);
      auto ok = torch::ones({b}, torch::kBool);
      for (int t = 0; t < config.steps; ++t) {
        auto zv = z.detach().set_requires_grad(true);
        auto total = losses(model, x, fx, zv, config.lambda).total;
        auto g = torch::autograd::grad({total.sum()}, {zv})[0];
        torch::NoGradGuard guard;
        ok &= torch::isfinite(total) & torch::isfinite(g).all(1);
        g = torch::where(ok.unsqueeze(1), g, torch::zeros_like(g));
        const double lr = step_size_at(config, t);
        if (config.optimizer == ZOptimizer::gd) {
          z = z - lr * g;
        } else {
          m = kBeta1 * m + (1 - kBeta1) * g;
          v = kBeta2 * v + (1 - kBeta2) * g * g;
          const double c1 = 1 - std::pow(kBeta1, t + 1), c2 = 1 - std::pow(kBeta2, t + 1);
          z = z - lr * (m / c1) / ((v / c2).sqrt() + kEps);
        }
      }
      torch::NoGradGuard guard;
      auto final_loss = losses(model, x, fx, z, config.lambda).total.to(torch::kFloat64);
      ok &= torch::isfinite(final_loss);
      for (int64_t i = 0; i < b; ++i) {
        if (!ok[i].item<bool>()) continue;
        ++finite_restarts[static_cast<std::size_t>(i)];
        if (final_loss[i].item<double>() < best_loss[i].item<double>()) {
          best_loss[i] = final_loss[i];
          best_z[i] = z[i];
          best_init[i] = init[i];
        }
      }
    }

    torch::NoGradGuard guard;
    auto gz = model.generator.ptr()->forward(best_z, context_for(model));
    auto fgz = model.discriminator.ptr()->forward(gz).features;
    for (int64_t i = 0; i < b; ++i) {
      if (finite_restarts[static_cast<std::size_t>(i)] == 0)
        throw Error("invert_latent: every restart diverged for image " + std::to_string(first_index + start + i));
      AnomalyResult res;
      auto zf = best_z[i].to(torch::kFloat32).contiguous();
      auto zi = best_init[i].to(torch::kFloat32).contiguous();
      res.best_z.assign(zf.data_ptr<float>(), zf.data_ptr<float>() + d);
      res.initial_z.assign(zi.data_ptr<float>(), zi.data_ptr<float>() + d);
      res.residual = residual_loss(x[i], gz[i]);
      res.discrimination = discrimination_loss(fx[i], fgz[i]);
      res.score = (1.0 - config.lambda) * res.residual + config.lambda * res.discrimination;
      res.final_loss = best_loss[i].item<double>();
      res.restarts_used = finite_restarts[static_cast<std::size_t>(i)];
      res.reconstruction = tensor_to_image(gz.narrow(0, i, 1), 0, ValueRange::symmetric());
      results.push_back(std::move(res));
    }
  }
  return results;
}

AnomalyResult invert_latent(const GanModel& model, const Image& x, const InversionConfig& config,
                            std::uint64_t image_index) {
  return invert_latent_batch(model, {x}, config, image_index).front();
}

double anomaly_score(const GanModel& model, const Image& x, const InversionConfig& config, std::uint64_t image_index) {
  return invert_latent(model, x, config, image_index).score;
}

}  // namespace randgan
