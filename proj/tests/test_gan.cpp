#include <doctest.h>

#include <map>

#include "randgan/error.hpp"
#include "randgan/gan.hpp"
#include "randgan/preprocess.hpp"
#include "randgan/synth.hpp"
#include "test_util.hpp"

using namespace randgan;

namespace {

GanConfig tiny(GanVariant v, int size = 16) {
  GanConfig c;
  c.variant = v;
  c.image_size = size;
  c.latent_dim = 8;
  c.base_channels = 8;
  c.context_dim = 4;
  c.context_channels = 4;
  c.batch_size = 4;
  c.epochs = 1;
  c.seed = 11;
  return c;
}

std::vector<Image> class_a_images(int n, int size) {
  SyntheticConfig sc;
  sc.image_size = 32;
  sc.counts_a = {n, 1};
  sc.counts_b = {1, 1};
  sc.counts_unknown = {0, 1};
  PreprocessConfig pc;
  pc.target_size = size;
  auto samples = synth_samples(sc);
  std::vector<Image> out;
  for (int i = 0; i < n; ++i) out.push_back(preprocess(samples[i].image, pc));
  return out;
}

std::vector<torch::Tensor> snapshot(const torch::nn::Module& m) {
  std::vector<torch::Tensor> out;
  for (const auto& p : m.parameters()) out.push_back(p.detach().clone());
  return out;
}

}  // namespace

TEST_CASE("config validation") {
  GanConfig c;
  CHECK_NOTHROW(c.validate());
  CHECK(c.upsample_stages() == 5);
  c.image_size = 48;
  CHECK_THROWS_AS(c.validate(), Error);
  c.image_size = 8;
  CHECK(c.upsample_stages() == 1);
  c.latent_dim = 0;
  CHECK_THROWS_AS(c.validate(), Error);

  auto desk = gan_config_from_json({{"profile", "desk"}, {"variant", "anogan"}, {"seed", 3}});
  CHECK(desk.image_size == 32);
  CHECK(desk.variant == GanVariant::anogan);
  CHECK(desk.seed == 3u);
  CHECK(gan_config_from_json(to_json(desk)).image_size == 32);
  CHECK_THROWS_AS(gan_config_from_json({{"latent", 3}}), Error);
  CHECK_THROWS_AS(gan_config_from_json({{"variant", "dcgan"}}), Error);
}

TEST_CASE("generator output contract at full size") {
  torch::manual_seed(0);
  for (auto v : {GanVariant::randgan, GanVariant::anogan}) {
    GanConfig c;
    c.variant = v;
    auto m = build_gan(c);
    torch::NoGradGuard guard;
    auto z = 10.0 * torch::randn({2, c.latent_dim});
    torch::Tensor ctx;
    if (v == GanVariant::randgan) ctx = m.generator->encode_context(torch::rand({3, 1, 128, 128}) * 2 - 1);
    auto x = m.generator->forward(z, ctx);
    CHECK(x.sizes().vec() == std::vector<int64_t>{2, 1, 128, 128});
    CHECK(x.min().item<float>() >= -1.0f);
    CHECK(x.max().item<float>() <= 1.0f);
    auto d = m.discriminator->forward(x);
    CHECK(d.features.size(1) == m.discriminator->feature_dim());
  }
}

TEST_CASE("anogan ignores context, randgan depends on it") {
  torch::manual_seed(1);
  torch::NoGradGuard guard;
  auto z = torch::randn({3, 8});
  auto ctx1 = torch::randn({4});
  auto ctx2 = torch::randn({4});

  auto ano = build_gan(tiny(GanVariant::anogan));
  auto base = ano.generator->forward(z);
  CHECK(torch::equal(base, ano.generator->forward(z, ctx1)));
  CHECK(torch::equal(base, ano.generator->forward(z, ctx2)));
  CHECK_THROWS_AS(ano.generator->encode_context(torch::zeros({1, 1, 16, 16})), Error);

  auto rand = build_gan(tiny(GanVariant::randgan));
  auto a = rand.generator->forward(z, ctx1);
  auto b = rand.generator->forward(z, ctx2);
  CHECK((a - b).abs().max().item<float>() > 1e-6f);
  CHECK_THROWS_AS(rand.generator->forward(z), Error);

  // two different real batches give different encoded contexts, hence different images
  auto e1 = rand.generator->encode_context(torch::rand({4, 1, 16, 16}) * 2 - 1);
  auto e2 = rand.generator->encode_context(torch::rand({4, 1, 16, 16}) * 2 - 1);
  CHECK((rand.generator->forward(z, e1) - rand.generator->forward(z, e2)).abs().max().item<float>() > 0.0f);
}

TEST_CASE("context encoding") {
  auto m = build_gan(tiny(GanVariant::randgan));
  torch::NoGradGuard guard;
  torch::manual_seed(2);
  auto batch = torch::rand({6, 1, 16, 16}) * 2 - 1;
  auto c1 = m.generator->encode_context(batch);
  CHECK(c1.sizes().vec() == std::vector<int64_t>{4});
  CHECK(torch::equal(c1, m.generator->encode_context(batch)));
  CHECK(m.generator->encode_context(batch.narrow(0, 0, 1)).size(0) == 4);

  // mean aggregation: a permuted batch gives the same vector up to summation order
  auto perm = torch::tensor(std::vector<int64_t>{5, 3, 1, 0, 2, 4});
  auto c2 = m.generator->encode_context(batch.index_select(0, perm));
  CHECK(torch::allclose(c1, c2, 1e-6, 1e-6));
  // and equals the mean of per-image encodings passed through the same head
  auto sum = torch::zeros_like(c1);
  for (int i = 0; i < 6; ++i) sum += m.generator->encode_context(batch.narrow(0, i, 1));
  CHECK(torch::allclose(c1, sum / 6, 1e-5, 1e-6));
}

TEST_CASE("context sampling") {
  std::mt19937_64 rng(5);
  CHECK(sample_context_indices(1, 7, rng) == std::vector<int64_t>(7, 0));
  CHECK_THROWS_AS(sample_context_indices(0, 4, rng), Error);

  std::mt19937_64 r1(9), r2(9);
  CHECK(sample_context_indices(100, 32, r1) == sample_context_indices(100, 32, r2));

  std::mt19937_64 r3(13);
  auto idx = sample_context_indices(2, 10000, r3);
  const double ones = static_cast<double>(std::count(idx.begin(), idx.end(), 1));
  CHECK(ones / 10000 == doctest::Approx(0.5).epsilon(0.04));

  auto train = torch::arange(3).to(torch::kFloat32).view({3, 1, 1, 1});
  std::mt19937_64 r4(1);
  auto batch = sample_context_batch(train, 5, r4);
  CHECK(batch.size(0) == 5);
}

TEST_CASE("discriminate") {
  auto m = build_gan(tiny(GanVariant::anogan));
  auto imgs = class_a_images(3, 16);
  auto a = discriminate(m, imgs[0]);
  auto b = discriminate(m, imgs[0]);
  CHECK(torch::equal(a.prob, b.prob));
  CHECK(torch::equal(a.features, b.features));
  for (const auto& img : imgs) {
    auto d = discriminate(m, img);
    const double p = d.prob.item<double>();
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
    CHECK(d.features.size(1) == m.discriminator->feature_dim());
    CHECK(torch::isfinite(d.features).all().item<bool>());
  }
  CHECK_THROWS_AS(discriminate(m, Image(8, 8, ValueRange::symmetric())), Error);
  Image bad(16, 16, ValueRange::symmetric());
  bad.at(0, 0) = 1.5f;
  CHECK_THROWS_AS(discriminate(m, bad), Error);
}

TEST_CASE("both variants share initial conditions") {
  auto r = build_gan(tiny(GanVariant::randgan, 32));
  auto a = build_gan(tiny(GanVariant::anogan, 32));
  CHECK(parameter_hash(*r.discriminator) == parameter_hash(*a.discriminator));
  auto tr = r.generator->trunk_parameters();
  auto ta = a.generator->trunk_parameters();
  REQUIRE(tr.size() == ta.size());
  for (std::size_t i = 0; i < tr.size(); ++i) {
    CHECK(tr[i].first == ta[i].first);
    CHECK(torch::equal(tr[i].second, ta[i].second));
  }
  // dcgan init: weights have std near 0.02
  auto w = r.generator->project->weight;
  CHECK(w.std().item<double>() == doctest::Approx(0.02).epsilon(0.1));
}

TEST_CASE("one discriminator step raises D on the real batch") {
  auto m = build_gan(tiny(GanVariant::anogan));
  auto real = images_to_tensor(class_a_images(6, 16));
  auto before = m.discriminator->forward(real).prob.mean().item<double>();
  torch::optim::SGD opt(m.discriminator->parameters(), torch::optim::SGDOptions(1e-3));
  auto logit = m.discriminator->forward(real).logit;
  auto loss = torch::binary_cross_entropy_with_logits(logit, torch::ones_like(logit));
  opt.zero_grad();
  loss.backward();
  opt.step();
  auto after = m.discriminator->forward(real).prob.mean().item<double>();
  CHECK(after > before);
}

TEST_CASE("training smoke run and determinism") {
  auto imgs = class_a_images(8, 16);
  for (auto v : {GanVariant::randgan, GanVariant::anogan}) {
    CAPTURE(std::string(to_string(v)));
    auto m = build_gan(tiny(v));
    auto g0 = snapshot(*m.generator);
    auto d0 = snapshot(*m.discriminator);
    int callbacks = 0;
    auto history = train_gan(m, imgs, [&](const EpochLoss&) { ++callbacks; });
    REQUIRE(history.size() == 1u);
    CHECK(callbacks == 1);
    CHECK(std::isfinite(history[0].loss_d));
    CHECK(std::isfinite(history[0].loss_g));
    auto g1 = snapshot(*m.generator);
    auto d1 = snapshot(*m.discriminator);
    bool g_changed = false, d_changed = false;
    for (std::size_t i = 0; i < g0.size(); ++i) g_changed |= !torch::equal(g0[i], g1[i]);
    for (std::size_t i = 0; i < d0.size(); ++i) d_changed |= !torch::equal(d0[i], d1[i]);
    CHECK(g_changed);
    CHECK(d_changed);
    CHECK(m.inversion_context.defined() == (v == GanVariant::randgan));

    auto again = build_gan(tiny(v));
    auto h2 = train_gan(again, imgs);
    CHECK(parameter_hash(*again.generator) == parameter_hash(*m.generator));
    CHECK(parameter_hash(*again.discriminator) == parameter_hash(*m.discriminator));
    CHECK(h2[0].loss_d == history[0].loss_d);
  }

  auto m = build_gan(tiny(GanVariant::anogan));
  CHECK_THROWS_AS(train_gan(m, {}), Error);
  CHECK_THROWS_AS(train_gan(m, class_a_images(2, 32)), Error);
}

TEST_CASE("minimax objective trains too") {
  auto c = tiny(GanVariant::anogan);
  c.objective = GanObjective::minimax;
  auto m = build_gan(c);
  auto h = train_gan(m, class_a_images(8, 16));
  CHECK(std::isfinite(h[0].loss_g));
  CHECK(h[0].loss_g <= 0.0);
}

TEST_CASE("history csv") {
  auto csv = format_history_csv({{0, 1.5, 0.25}, {1, 1.0, 0.5}});
  CHECK(csv == "epoch,loss_D,loss_G\n0,1.5,0.25\n1,1,0.5\n");
}

TEST_CASE("gan checkpoint round trip") {
  auto dir = scratch_dir("gan_ckpt");
  auto imgs = class_a_images(4, 16);
  auto m = build_gan(tiny(GanVariant::randgan));
  m.train_label = "SyntheticA";
  train_gan(m, imgs);
  save_gan(dir / "g", m);
  auto back = load_gan(dir / "g");
  CHECK(back.tag() == "randgan-SyntheticA");
  CHECK(parameter_hash(*back.generator) == parameter_hash(*m.generator));
  CHECK(parameter_hash(*back.discriminator) == parameter_hash(*m.discriminator));
  CHECK(torch::equal(back.inversion_context, m.inversion_context));
  auto meta = nlohmann::json::parse(slurp(dir / "g.json"));
  CHECK(meta["variant"] == "randgan");
  CHECK(meta["latent_dim"] == 8);
  CHECK(meta["feature_tap"] == 3);
  CHECK(meta["seed"] == 11);
}
