#include <doctest.h>

#include <cmath>
#include <random>

#include "randgan/error.hpp"
#include "randgan/image_io.hpp"
#include "randgan/manifest.hpp"
#include "randgan/preprocess.hpp"
#include "test_util.hpp"

using namespace randgan;

namespace {

ColorImage rgb(int h, int w, std::vector<float> data) {
  ColorImage c;
  c.height = h;
  c.width = w;
  c.channels = 3;
  c.data = std::move(data);
  return c;
}

}  // namespace

TEST_CASE("to_grayscale") {
  SUBCASE("equal channels are a fixed point") {
    ColorImage c = rgb(1, 3, {10, 10, 10, 77, 77, 77, 200, 200, 200});
    Image g = to_grayscale(c);
    CHECK(g.at(0, 0) == doctest::Approx(10).epsilon(1e-6));
    CHECK(g.at(0, 1) == doctest::Approx(77).epsilon(1e-6));
    CHECK(g.at(0, 2) == doctest::Approx(200).epsilon(1e-6));
  }
  SUBCASE("white stays white") {
    CHECK(to_grayscale(rgb(1, 1, {255, 255, 255})).at(0, 0) == doctest::Approx(255.0));
  }
  SUBCASE("matches a scalar dot product") {
    std::mt19937 rng(3);
    std::uniform_int_distribution<int> byte(0, 255);
    std::vector<float> data;
    for (int i = 0; i < 3 * 25; ++i) data.push_back(static_cast<float>(byte(rng)));
    data[0] = 100, data[1] = 200, data[2] = 50;
    Image g = to_grayscale(rgb(5, 5, data));
    CHECK(g.at(0, 0) == doctest::Approx(153.0));
    for (int i = 0; i < 25; ++i) {
      const double expect = data[3 * i] * 0.299 + data[3 * i + 1] * 0.587 + data[3 * i + 2] * 0.114;
      CHECK(g.pixels()[i] == doctest::Approx(expect).epsilon(1e-6));
    }
  }
  SUBCASE("rejects two-channel input") {
    ColorImage c;
    c.height = c.width = 1;
    c.channels = 2;
    c.data = {1, 2};
    CHECK_THROWS_AS(to_grayscale(c), Error);
  }
}

TEST_CASE("resize") {
  SUBCASE("identity size is bitwise identical") {
    std::mt19937 rng(1);
    std::uniform_real_distribution<float> u(-1, 1);
    Image img(128, 128, ValueRange::symmetric());
    for (auto& v : img.pixels()) v = u(rng);
    CHECK(resize(img, 128) == img);
  }
  SUBCASE("constant image stays constant") {
    Image img(13, 7, ValueRange::unit(), 0.37f);
    for (int size : {1, 5, 64, 128}) {
      Image r = resize(img, size);
      CHECK(r.height() == size);
      for (float v : r.pixels()) CHECK(v == doctest::Approx(0.37f));
    }
  }
  SUBCASE("4x4 checkerboard to 2x2 averages each block") {
    Image img(4, 4, ValueRange::unit());
    for (int y = 0; y < 4; ++y)
      for (int x = 0; x < 4; ++x) img.at(y, x) = static_cast<float>((x + y) % 2);
    Image r = resize(img, 2);
    for (float v : r.pixels()) CHECK(v == doctest::Approx(0.5));
  }
  SUBCASE("4x4 ramp to 2x2, hand-computed bilinear") {
    Image img(4, 4, ValueRange{0, 15});
    for (int y = 0; y < 4; ++y)
      for (int x = 0; x < 4; ++x) img.at(y, x) = static_cast<float>(4 * y + x);
    // Output centres sit at source (0.5, 0.5), (0.5, 2.5), ... so each value is
    // the mean of a 2x2 block: (0+1+4+5)/4 = 2.5 etc.
    Image r = resize(img, 2);
    CHECK(r.at(0, 0) == doctest::Approx(2.5));
    CHECK(r.at(0, 1) == doctest::Approx(4.5));
    CHECK(r.at(1, 0) == doctest::Approx(10.5));
    CHECK(r.at(1, 1) == doctest::Approx(12.5));
  }
  SUBCASE("non-positive size") {
    Image img(4, 4, ValueRange::unit());
    CHECK_THROWS_AS(resize(img, 0), Error);
    CHECK_THROWS_AS(resize(img, -3), Error);
  }
}

TEST_CASE("normalize") {
  Image img(1, 3, ValueRange::byte(), std::vector<float>{0.0f, 127.5f, 255.0f});
  Image n = normalize(img, ValueRange::symmetric());
  CHECK(n.at(0, 0) == -1.0f);
  CHECK(n.at(0, 1) == doctest::Approx(0.0).epsilon(1e-7));
  CHECK(n.at(0, 2) == 1.0f);
  CHECK(n.range() == ValueRange::symmetric());

  SUBCASE("degenerate source range maps to the target midpoint") {
    Image d(2, 2, ValueRange{3, 3}, 3.0f);
    Image sym = normalize(d, ValueRange::symmetric());
    Image unit = normalize(d, ValueRange::unit());
    for (float v : sym.pixels()) CHECK(v == 0.0f);
    for (float v : unit.pixels()) CHECK(v == 0.5f);
  }
  SUBCASE("normalize then denormalize is the identity") {
    std::mt19937 rng(11);
    std::uniform_real_distribution<float> u(0, 255);
    for (int trial = 0; trial < 50; ++trial) {
      Image x(8, 8, ValueRange::byte());
      for (auto& v : x.pixels()) v = u(rng);
      Image back = normalize(normalize(x, ValueRange::symmetric()), ValueRange::byte());
      for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(back.pixels()[i] - x.pixels()[i]) / 255.0 <= 1e-6);
      Image unit(8, 8, ValueRange::unit());
      for (auto& v : unit.pixels()) v = u(rng) / 255.0f;
      Image back2 = normalize(normalize(unit, ValueRange::symmetric()), ValueRange::unit());
      for (std::size_t i = 0; i < unit.size(); ++i) CHECK(std::abs(back2.pixels()[i] - unit.pixels()[i]) <= 1e-6);
    }
  }
}

TEST_CASE("apply_mask") {
  Image img(4, 4, ValueRange::symmetric(), 0.25f);
  SUBCASE("full mask keeps the image") { CHECK(apply_mask(img, BinaryMask(4, 4, 1)) == img); }
  SUBCASE("empty mask gives the background") {
    Image out = apply_mask(img, BinaryMask(4, 4, 0));
    for (float v : out.pixels()) CHECK(v == -1.0f);
  }
  SUBCASE("half mask, per-pixel select") {
    BinaryMask m(4, 4);
    for (int y = 0; y < 4; ++y)
      for (int x = 0; x < 2; ++x) m.at(y, x) = 1;
    Image out = apply_mask(img, m);
    for (int y = 0; y < 4; ++y)
      for (int x = 0; x < 4; ++x) CHECK(out.at(y, x) == (m.at(y, x) ? 0.25f : -1.0f));
  }
  SUBCASE("idempotent") {
    std::mt19937 rng(5);
    std::uniform_real_distribution<float> u(-1, 1);
    std::bernoulli_distribution b(0.5);
    for (int t = 0; t < 20; ++t) {
      Image x(6, 9, ValueRange::symmetric());
      for (auto& v : x.pixels()) v = u(rng);
      BinaryMask m(6, 9);
      for (int y = 0; y < 6; ++y)
        for (int xx = 0; xx < 9; ++xx) m.at(y, xx) = b(rng);
      Image once = apply_mask(x, m);
      CHECK(apply_mask(once, m) == once);
    }
  }
  SUBCASE("shape mismatch") { CHECK_THROWS_AS(apply_mask(img, BinaryMask(4, 5, 1)), Error); }
}

TEST_CASE("preprocess chain emits 128x128 tensors in [-1,1]") {
  std::mt19937 rng(2024);
  std::uniform_int_distribution<int> dim(1, 300);
  std::uniform_int_distribution<int> byte(0, 255);
  for (int t = 0; t < 50; ++t) {
    ColorImage c = rgb(dim(rng), dim(rng), {});
    c.channels = t % 2 ? 3 : 1;
    c.data.resize(static_cast<std::size_t>(c.height) * c.width * c.channels);
    for (auto& v : c.data) v = static_cast<float>(byte(rng));
    Image out = preprocess(c, PreprocessConfig{});
    CHECK(out.height() == 128);
    CHECK(out.width() == 128);
    CHECK(out.within_range());
    CHECK(out.range() == ValueRange::symmetric());
  }
  SUBCASE("segmentation profile") {
    ColorImage c = rgb(300, 200, std::vector<float>(300 * 200 * 3, 90.0f));
    Image out = preprocess(c, PreprocessConfig{256, ValueRange::unit()});
    CHECK(out.height() == 256);
    CHECK(out.within_range());
  }
  SUBCASE("mask applied at the target resolution") {
    ColorImage c = rgb(64, 64, std::vector<float>(64 * 64 * 3, 255.0f));
    BinaryMask m(256, 256);
    for (int y = 0; y < 256; ++y)
      for (int x = 0; x < 128; ++x) m.at(y, x) = 1;
    Image out = preprocess(c, PreprocessConfig{}, &m);
    CHECK(out.at(10, 10) == 1.0f);
    CHECK(out.at(10, 100) == -1.0f);
  }
  SUBCASE("invalid config") {
    PreprocessConfig bad;
    bad.output_range = ValueRange{0, 2};
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = PreprocessConfig{};
    bad.target_size = 0;
    CHECK_THROWS_AS(bad.validate(), Error);
  }
}

TEST_CASE("manifest parsing") {
  LoadOptions loose{.verify_paths = false};
  SUBCASE("single row") {
    auto m = parse_manifest("img1.png,Normal,train,src0\n", "/data", loose);
    REQUIRE(m.records.size() == 1);
    CHECK(m.records[0].label == ClassLabel::Normal);
    CHECK(m.records[0].split == Split::train);
    CHECK(m.records[0].source == "src0");
    CHECK(m.records[0].path == std::filesystem::path("/data/img1.png"));
  }
  SUBCASE("comments and blank lines are skipped") {
    auto m = parse_manifest("# header\n\na.png,Pneumonia,test,x\n", "", loose);
    CHECK(m.records.size() == 1);
  }
  SUBCASE("unknown class in train is rejected") {
    CHECK_THROWS_WITH_AS(parse_manifest("img2.png,Covid,train,src0\n", "", loose),
                         doctest::Contains("unknown-class-in-train"), Error);
  }
  SUBCASE("malformed row reports its line") {
    CHECK_THROWS_WITH_AS(parse_manifest("a.png,Normal,train,s\nb.png,Normal\n", "", loose),
                         doctest::Contains("line 2"), Error);
  }
  SUBCASE("unknown label token") {
    CHECK_THROWS_WITH_AS(parse_manifest("a.png,Flu,test,s\n", "", loose), doctest::Contains("unknown label"), Error);
  }
  SUBCASE("missing image file") {
    CHECK_THROWS_WITH_AS(parse_manifest("nope.png,Normal,test,s\n", "/nonexistent", {}),
                         doctest::Contains("not found"), Error);
  }
  SUBCASE("missing manifest file") { CHECK_THROWS_AS(load_manifest("/nonexistent/manifest.csv"), Error); }
}

TEST_CASE("COVIDx-sized manifest reproduces the published class table") {
  std::string text;
  auto add = [&](const char* label, const char* split, int n) {
    for (int i = 0; i < n; ++i) text += std::string(label) + std::to_string(i) + ".png," + label + "," + split + ",s\n";
  };
  add("Normal", "train", 7493);
  add("Pneumonia", "train", 4986);
  add("Normal", "test", 573);
  add("Pneumonia", "test", 573);
  add("COVID19", "test", 573);
  auto m = parse_manifest(text, "", {.verify_paths = false});
  CHECK(m.count(ClassLabel::Normal, Split::train) == 7493);
  CHECK(m.count(ClassLabel::Pneumonia, Split::train) == 4986);
  CHECK(m.count(ClassLabel::COVID19, Split::train) == 0);
  for (auto l : {ClassLabel::Normal, ClassLabel::Pneumonia, ClassLabel::COVID19}) CHECK(m.count(l, Split::test) == 573);

  auto split = build_split(m, ClassLabel::COVID19);
  CHECK(split.train.size() == 7493 + 4986);
  CHECK(split.test.size() == 3 * 573);
  CHECK(split.test_counts.at(ClassLabel::COVID19) == 573);
  for (const auto& r : split.train) CHECK(r.label != ClassLabel::COVID19);
}

TEST_CASE("build_split") {
  LoadOptions loose{.verify_paths = false};
  SUBCASE("no unknown rows") {
    auto m = parse_manifest("a.png,Normal,train,s\nb.png,Normal,test,s\n", "", loose);
    CHECK_THROWS_AS(build_split(m, ClassLabel::COVID19), Error);
  }
  SUBCASE("minimal passthrough") {
    auto m = parse_manifest("a.png,Normal,train,s\nb.png,COVID19,test,s\n", "", loose);
    auto s = build_split(m, ClassLabel::COVID19);
    REQUIRE(s.train.size() == 1);
    REQUIRE(s.test.size() == 1);
    CHECK(s.train[0] == m.records[0]);
    CHECK(s.test[0] == m.records[1]);
  }
  SUBCASE("a known class designated unknown is dropped from train") {
    auto m = parse_manifest("a.png,Normal,train,s\nb.png,Pneumonia,train,s\nc.png,Pneumonia,test,s\n", "", loose);
    auto s = build_split(m, ClassLabel::Pneumonia);
    REQUIRE(s.train.size() == 1);
    CHECK(s.train[0].label == ClassLabel::Normal);
  }
  SUBCASE("never leaks the unknown label, random manifests") {
    std::mt19937 rng(9);
    const ClassLabel labels[] = {ClassLabel::Normal, ClassLabel::Pneumonia, ClassLabel::COVID19};
    for (int t = 0; t < 30; ++t) {
      std::string text;
      for (int i = 0; i < 40; ++i) {
        ClassLabel l = labels[rng() % 3];
        bool train = l != ClassLabel::COVID19 && rng() % 2;
        text += "x" + std::to_string(i) + ".png," + std::string(to_string(l)) + (train ? ",train" : ",test") + ",s\n";
      }
      text += "u.png,COVID19,test,s\n";
      auto m = parse_manifest(text, "", loose);
      for (ClassLabel unknown : labels) {
        if (m.count(unknown) == 0) continue;
        auto s = build_split(m, unknown);
        for (const auto& r : s.train) CHECK(r.label != unknown);
      }
    }
  }
}

TEST_CASE("file formats") {
  auto dir = scratch_dir("io");
  SUBCASE("tensor file round trip and header") {
    Image img(3, 5, ValueRange::symmetric());
    for (std::size_t i = 0; i < img.size(); ++i) img.pixels()[i] = -1.0f + 0.1f * static_cast<float>(i);
    write_tensor_file(dir / "t.bin", img);
    CHECK(read_tensor_file(dir / "t.bin") == img);
    CHECK(slurp(dir / "t.bin").rfind("3 5 -1 1\n", 0) == 0);
  }
  SUBCASE("grayscale PNG round trip") {
    Image img(4, 6, ValueRange::byte());
    for (std::size_t i = 0; i < img.size(); ++i) img.pixels()[i] = static_cast<float>(i * 10);
    write_png(dir / "g.png", img);
    ColorImage back = read_png(dir / "g.png");
    CHECK(back.channels == 1);
    CHECK(back.data == std::vector<float>(img.pixels().begin(), img.pixels().end()));
  }
  SUBCASE("RGB PNG reads as three channels") {
    ColorImage c = rgb(2, 2, {255, 0, 0, 0, 255, 0, 0, 0, 255, 10, 20, 30});
    write_rgb_png(dir / "c.png", c);
    ColorImage back = read_png(dir / "c.png");
    CHECK(back.channels == 3);
    CHECK(back.data == c.data);
  }
  SUBCASE("mask PNG uses 0/255") {
    BinaryMask m(3, 3, std::vector<std::uint8_t>{1, 0, 1, 0, 1, 0, 1, 1, 0});
    write_mask_png(dir / "m.png", m);
    CHECK(read_png(dir / "m.png").data[0] == 255.0f);
    CHECK(read_mask_png(dir / "m.png") == m);
  }
  SUBCASE("truncated tensor file") {
    write_file_atomic(dir / "bad.bin", "2 2 0 1\nabc");
    CHECK_THROWS_AS(read_tensor_file(dir / "bad.bin"), Error);
  }
}
