#include <doctest.h>

#include <cmath>

#include "randgan/error.hpp"
#include "randgan/mask_ops.hpp"
#include "randgan/synth.hpp"
#include "test_util.hpp"

using namespace randgan;

namespace {

SyntheticConfig small_config() {
  SyntheticConfig c;
  c.image_size = 32;
  c.counts_a = {6, 3};
  c.counts_b = {6, 3};
  c.counts_unknown = {0, 3};
  return c;
}

// Row-interval rasterisation of an ellipse: pixel centre x_c is inside when
// |x_c - cx| <= rx * sqrt(1 - ((y_c - cy) / ry)^2).
BinaryMask rasterize(const EllipseShape& e, int n) {
  BinaryMask m(n, n);
  for (int y = 0; y < n; ++y) {
    const double t = (y + 0.5 - e.cy) / e.ry;
    if (t * t > 1.0) continue;
    const double half = e.rx * std::sqrt(1.0 - t * t);
    for (int x = 0; x < n; ++x)
      if (std::abs(x + 0.5 - e.cx) <= half) m.at(y, x) = 1;
  }
  return m;
}

}  // namespace

TEST_CASE("synthetic generation is a pure function of its config") {
  auto a = scratch_dir("synth_a");
  auto b = scratch_dir("synth_b");
  auto ma = synth_generate(small_config(), a);
  auto mb = synth_generate(small_config(), b);
  REQUIRE(ma.records.size() == mb.records.size());
  CHECK(ma.records.size() == 6 + 6 + 3 + 3 + 3);
  CHECK(slurp(a / "manifest.csv") == slurp(b / "manifest.csv"));
  for (std::size_t i = 0; i < ma.records.size(); ++i) {
    auto rel = ma.records[i].path.lexically_relative(a);
    CHECK(slurp(a / rel) == slurp(b / rel));
    CHECK(slurp(a / "masks" / rel.filename()) == slurp(b / "masks" / rel.filename()));
  }
  auto loaded = load_manifest(a / "manifest.csv");
  CHECK(loaded.records == ma.records);
  CHECK(loaded.count(ClassLabel::SyntheticUnknown, Split::train) == 0);
}

TEST_CASE("a different seed gives different images") {
  auto c1 = small_config();
  auto c2 = small_config();
  c2.seed = 8;
  auto s1 = synth_samples(c1);
  auto s2 = synth_samples(c2);
  CHECK(s1[0].image.data != s2[0].image.data);
}

TEST_CASE("zero artifact strength makes the source irrelevant") {
  auto c = small_config();
  c.artifact_strength = 0.0;
  for (auto label : {ClassLabel::SyntheticA, ClassLabel::SyntheticB, ClassLabel::SyntheticUnknown}) {
    auto s0 = render_synthetic(c, label, 0, 1234);
    auto s1 = render_synthetic(c, label, 1, 1234);
    CHECK(s0.image.data == s1.image.data);
  }
  c.artifact_strength = 1.0;
  auto s0 = render_synthetic(c, ClassLabel::SyntheticA, 0, 1234);
  auto s1 = render_synthetic(c, ClassLabel::SyntheticA, 1, 1234);
  CHECK(s0.image.data != s1.image.data);
  // Artifacts never touch the foreground.
  for (int y = 0; y < c.image_size; ++y)
    for (int x = 0; x < c.image_size; ++x)
      if (s0.mask.at(y, x)) CHECK(s0.image.at(y, x, 0) == s1.image.at(y, x, 0));
}

TEST_CASE("emitted masks equal an independent ellipse raster") {
  auto c = small_config();
  for (const auto& s : synth_samples(c)) {
    CHECK(dice(s.mask, rasterize(s.ellipse, c.image_size)) == 1.0);
    CHECK(s.mask.count() > 0);
  }
}

TEST_CASE("training sources follow the configured bias") {
  auto c = small_config();
  c.counts_a = {200, 1};
  c.counts_b = {200, 1};
  c.source_bias = 1.0;
  for (const auto& s : synth_samples(c)) {
    if (s.split != Split::train) continue;
    CHECK(s.source == (s.label == ClassLabel::SyntheticA ? 0 : 1));
  }
}

TEST_CASE("synthetic config validation") {
  auto c = small_config();
  c.counts_unknown.train = 1;
  CHECK_THROWS_AS(c.validate(), Error);
  c = small_config();
  c.counts_a.test = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = small_config();
  c.artifact_strength = -1;
  CHECK_THROWS_AS(c.validate(), Error);
}
