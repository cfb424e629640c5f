#include <doctest.h>

#include "randgan/error.hpp"
#include "randgan/mask_ops.hpp"
#include "randgan/preprocess.hpp"
#include "randgan/segmentation.hpp"
#include "randgan/synth.hpp"
#include "test_util.hpp"

using namespace randgan;

namespace {

UNetSpec small_spec() { return {32, 2, 8, true}; }

std::vector<SegPair> synthetic_pairs(int n, int size) {
  SyntheticConfig sc;
  sc.image_size = size;
  sc.counts_a = {n, 1};
  sc.counts_b = {1, 1};
  sc.counts_unknown = {0, 1};
  PreprocessConfig pc;
  pc.target_size = size;
  pc.output_range = ValueRange::unit();
  std::vector<SegPair> out;
  auto samples = synth_samples(sc);
  for (int i = 0; i < n; ++i) out.push_back({preprocess(samples[i].image, pc), samples[i].mask});
  return out;
}

bool same_tensors(const std::vector<torch::Tensor>& a, const std::vector<torch::Tensor>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!torch::equal(a[i], b[i])) return false;
  return true;
}

std::vector<torch::Tensor> snapshot(torch::nn::Module& m) {
  std::vector<torch::Tensor> out;
  for (const auto& p : m.parameters()) out.push_back(p.detach().clone());
  return out;
}

}  // namespace

TEST_CASE("unet shapes and contracts") {
  auto m = build_unet(32, small_spec(), 1);
  auto y = m.net->forward(torch::zeros({3, 1, 32, 32}));
  CHECK(y.sizes().vec() == std::vector<int64_t>{3, 1, 32, 32});
  CHECK(m.net->bottleneck_size() == 8);

  CHECK_THROWS_AS(build_unet(30, small_spec()), Error);
  CHECK_THROWS_AS(predict_mask(m, Image(16, 16, ValueRange::unit())), Error);
  CHECK_THROWS_AS(predict_mask(m, Image(32, 32, ValueRange::symmetric())), Error);

  auto p = predict_mask(m, Image(32, 32, ValueRange::unit(), 0.5f));
  CHECK(p.height() == 32);
  CHECK(p.within_range());

  SUBCASE("plain conv blocks") {
    auto plain = build_unet(32, {32, 2, 8, false}, 1);
    CHECK(plain.net->forward(torch::zeros({1, 1, 32, 32})).size(3) == 32);
  }
}

TEST_CASE("seeded construction") {
  auto a = build_unet(32, small_spec(), 5);
  auto b = build_unet(32, small_spec(), 5);
  auto c = build_unet(32, small_spec(), 6);
  CHECK(parameter_hash(*a.net) == parameter_hash(*b.net));
  CHECK(parameter_hash(*a.net) != parameter_hash(*c.net));
}

TEST_CASE("frozen group count") {
  CHECK(frozen_group_count(40, 0.25) == 10);
  CHECK(frozen_group_count(10, 0.25) == 3);
  CHECK(frozen_group_count(4, 0.0) == 0);
  CHECK(frozen_group_count(4, 1.0) == 4);
  CHECK_THROWS_AS(frozen_group_count(4, 1.5), Error);
}

TEST_CASE("training validation") {
  auto m = build_unet(32, small_spec(), 1);
  SegTrainConfig cfg;
  CHECK_THROWS_AS(train_seg(m, {}, cfg), Error);
  auto pairs = synthetic_pairs(1, 16);
  CHECK_THROWS_AS(train_seg(m, pairs, cfg), Error);
  cfg.epochs = -1;
  CHECK_THROWS_AS(cfg.validate(), Error);

  // zero epochs leaves the model untouched
  cfg.epochs = 0;
  const auto before = parameter_hash(*m.net);
  CHECK(train_seg(m, synthetic_pairs(1, 32), cfg).empty());
  CHECK(parameter_hash(*m.net) == before);
}

TEST_CASE("overfit five pairs") {
  auto pairs = synthetic_pairs(5, 32);
  auto m = build_unet(32, small_spec(), 3);
  SegTrainConfig cfg;
  cfg.epochs = 150;
  cfg.learning_rate = 3e-3;
  cfg.batch_size = 5;
  cfg.seed = 3;
  auto history = train_seg(m, pairs, cfg);
  REQUIRE(history.size() == 150u);
  CHECK(history.back() < history.front());

  std::vector<Image> images;
  for (const auto& p : pairs) images.push_back(p.image);
  auto probs = predict_masks(m, images, 2);
  double total = 0;
  for (std::size_t i = 0; i < pairs.size(); ++i) total += dice(postprocess_mask(probs[i], {}), pairs[i].mask);
  CHECK(total / pairs.size() >= 0.95);

  SUBCASE("batch size does not change predictions") {
    auto single = predict_masks(m, images, 1);
    for (std::size_t i = 0; i < images.size(); ++i) {
      auto a = probs[i].pixels();
      auto b = single[i].pixels();
      for (std::size_t k = 0; k < a.size(); ++k) CHECK(a[k] == doctest::Approx(b[k]).epsilon(1e-5));
    }
  }
}

TEST_CASE("transfer finetune freezes the prefix") {
  auto base = build_unet(32, small_spec(), 4);
  const auto base_hash = parameter_hash(*base.net);
  SegTrainConfig cfg;
  cfg.epochs = 3;
  cfg.learning_rate = 1e-3;
  cfg.freeze_fraction = 0.25;
  auto tuned = transfer_finetune(base, synthetic_pairs(4, 32), cfg);
  CHECK(parameter_hash(*base.net) == base_hash);
  CHECK(tuned.frozen_prefix_fraction == 0.25);

  auto gb = parameter_groups(*base.net);
  auto gt = parameter_groups(*tuned.net);
  REQUIRE(gb.size() == gt.size());
  const auto frozen = frozen_group_count(gb.size(), 0.25);
  REQUIRE(frozen > 0);
  for (std::size_t g = 0; g < gb.size(); ++g) {
    const bool same = same_tensors(snapshot(*gb[g].second), snapshot(*gt[g].second));
    if (g < frozen)
      CHECK_MESSAGE(same, gb[g].first);
    else
      CHECK_MESSAGE(!same, gb[g].first);
  }
}

TEST_CASE("checkpoint round trip") {
  auto dir = scratch_dir("seg_ckpt");
  auto m = build_unet(32, small_spec(), 9);
  m.frozen_prefix_fraction = 0.5;
  save_seg_model(dir / "unet", m, {{"note", "x"}});
  auto back = load_seg_model(dir / "unet");
  CHECK(parameter_hash(*back.net) == parameter_hash(*m.net));
  CHECK(back.frozen_prefix_fraction == 0.5);
  CHECK(back.spec().depth == 2);

  Image probe(32, 32, ValueRange::unit(), 0.25f);
  CHECK(predict_mask(back, probe) == predict_mask(m, probe));

  // a corrupted blob is detected
  {
    std::ofstream f(dir / "unet.bin", std::ios::binary | std::ios::app);
    f << "x";
  }
  CHECK_THROWS_AS(load_seg_model(dir / "unet"), Error);
}
