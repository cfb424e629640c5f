#include "randgan/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include "randgan/error.hpp"

namespace randgan {

namespace {

struct PngImage {
  png_image image{};
  PngImage() {
    image.version = PNG_IMAGE_VERSION;
  }
  ~PngImage() { png_image_free(&image); }
  PngImage(const PngImage&) = delete;
  PngImage& operator=(const PngImage&) = delete;
};

std::vector<unsigned char> encode_png(int height, int width, std::uint32_t format,
                                      const std::vector<unsigned char>& bytes) {
  PngImage png;
  png.image.width = static_cast<png_uint_32>(width);
  png.image.height = static_cast<png_uint_32>(height);
  png.image.format = format;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&png.image, nullptr, &size, 0, bytes.data(), 0, nullptr))
    throw Error(std::string("png encode failed: ") + png.image.message);
  std::vector<unsigned char> out(size);
  if (!png_image_write_to_memory(&png.image, out.data(), &size, 0, bytes.data(), 0, nullptr))
    throw Error(std::string("png encode failed: ") + png.image.message);
  out.resize(size);
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) {
      std::filesystem::remove(tmp);
      throw Error("write failed: " + tmp.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

ColorImage read_png(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  PngImage png;
  if (!png_image_begin_read_from_memory(&png.image, bytes.data(), bytes.size()))
    throw Error("cannot decode png " + path.string() + ": " + png.image.message);
  const bool color = (png.image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  png.image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const int channels = color ? 3 : 1;
  std::vector<unsigned char> buf(PNG_IMAGE_SIZE(png.image));
  if (!png_image_finish_read(&png.image, nullptr, buf.data(), 0, nullptr))
    throw Error("cannot decode png " + path.string() + ": " + png.image.message);
  ColorImage out;
  out.height = static_cast<int>(png.image.height);
  out.width = static_cast<int>(png.image.width);
  out.channels = channels;
  out.range = ValueRange::byte();
  out.data.assign(buf.begin(), buf.end());
  return out;
}

void write_png(const std::filesystem::path& path, const Image& img) {
  const ValueRange r = img.range();
  std::vector<unsigned char> bytes(img.size());
  auto px = img.pixels();
  for (std::size_t i = 0; i < px.size(); ++i) {
    double t = r.width() == 0.0 ? 0.0 : (px[i] - r.lo) / r.width();
    bytes[i] = static_cast<unsigned char>(std::lround(std::clamp(t, 0.0, 1.0) * 255.0));
  }
  auto png = encode_png(img.height(), img.width(), PNG_FORMAT_GRAY, bytes);
  write_file_atomic(path, std::string_view(reinterpret_cast<const char*>(png.data()), png.size()));
}

void write_rgb_png(const std::filesystem::path& path, const ColorImage& img) {
  if (img.channels != 3 && img.channels != 1) throw Error("write_rgb_png: need 1 or 3 channels");
  std::vector<unsigned char> bytes(img.data.size());
  for (std::size_t i = 0; i < bytes.size(); ++i)
    bytes[i] = static_cast<unsigned char>(std::lround(std::clamp<double>(img.data[i], 0.0, 255.0)));
  auto png = encode_png(img.height, img.width, img.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY, bytes);
  write_file_atomic(path, std::string_view(reinterpret_cast<const char*>(png.data()), png.size()));
}

BinaryMask read_mask_png(const std::filesystem::path& path) {
  ColorImage img = read_png(path);
  std::vector<std::uint8_t> values(static_cast<std::size_t>(img.height) * img.width);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      values[static_cast<std::size_t>(y) * img.width + x] = img.at(y, x, 0) >= 128.0f ? 1 : 0;
  return BinaryMask(img.height, img.width, std::move(values));
}

void write_mask_png(const std::filesystem::path& path, const BinaryMask& mask) {
  std::vector<unsigned char> bytes(mask.size());
  auto v = mask.values();
  for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = v[i] ? 255 : 0;
  auto png = encode_png(mask.height(), mask.width(), PNG_FORMAT_GRAY, bytes);
  write_file_atomic(path, std::string_view(reinterpret_cast<const char*>(png.data()), png.size()));
}

void write_tensor_file(const std::filesystem::path& path, const Image& img) {
  static_assert(std::endian::native == std::endian::little, "tensor files are little-endian");
  std::ostringstream header;
  header.precision(17);
  header << img.height() << ' ' << img.width() << ' ' << img.range().lo << ' ' << img.range().hi << '\n';
  std::string contents = header.str();
  const std::size_t offset = contents.size();
  contents.resize(offset + img.size() * sizeof(float));
  std::memcpy(contents.data() + offset, img.pixels().data(), img.size() * sizeof(float));
  write_file_atomic(path, contents);
}

Image read_tensor_file(const std::filesystem::path& path) {
  const std::string contents = read_file(path);
  const std::size_t nl = contents.find('\n');
  if (nl == std::string::npos) throw Error("tensor file " + path.string() + ": missing header");
  std::istringstream header(contents.substr(0, nl));
  int h = 0, w = 0;
  double lo = 0, hi = 0;
  if (!(header >> h >> w >> lo >> hi) || h <= 0 || w <= 0)
    throw Error("tensor file " + path.string() + ": malformed header");
  const std::size_t n = static_cast<std::size_t>(h) * w;
  if (contents.size() - nl - 1 != n * sizeof(float))
    throw Error("tensor file " + path.string() + ": payload size does not match header");
  std::vector<float> px(n);
  std::memcpy(px.data(), contents.data() + nl + 1, n * sizeof(float));
  return Image(h, w, ValueRange{lo, hi}, std::move(px));
}

}  // namespace randgan
