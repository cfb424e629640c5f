#include "randgan/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "randgan/error.hpp"
#include "randgan/image_io.hpp"
#include "randgan/rng.hpp"

namespace randgan {

namespace {

constexpr char kMagic[4] = {'R', 'G', 'P', 'B'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::string& s) : s_(s) {}
  template <typename T>
  T get() {
    T v;
    need(sizeof(T));
    std::memcpy(&v, s_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  const char* take(std::size_t n) {
    need(n);
    const char* p = s_.data() + pos_;
    pos_ += n;
    return p;
  }
  bool done() const { return pos_ == s_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > s_.size()) throw Error("checkpoint blob truncated");
  }
  const std::string& s_;
  std::size_t pos_ = 0;
};

std::string read_all(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("cannot open " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path with_ext(std::filesystem::path stem, const char* ext) {
  stem += ext;
  return stem;
}

}  // namespace

std::string encode_tensor_blob(const TensorMap& tensors) {
  std::string out(kMagic, 4);
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    auto c = t.detach().contiguous();
    std::uint8_t dtype;
    if (c.scalar_type() == torch::kFloat32) dtype = 0;
    else if (c.scalar_type() == torch::kFloat64) dtype = 1;
    else throw Error("checkpoint: unsupported dtype for " + name);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put<std::uint32_t>(out, static_cast<std::uint32_t>(c.dim()));
    for (auto d : c.sizes()) put<std::int64_t>(out, d);
    put<std::uint8_t>(out, dtype);
    out.append(static_cast<const char*>(c.data_ptr()), c.numel() * c.element_size());
  }
  return out;
}

TensorMap decode_tensor_blob(const std::string& bytes) {
  Reader r(bytes);
  if (std::memcmp(r.take(4), kMagic, 4) != 0) throw Error("checkpoint: bad magic");
  if (r.get<std::uint32_t>() != kVersion) throw Error("checkpoint: unsupported version");
  const auto count = r.get<std::uint32_t>();
  TensorMap out;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = r.get<std::uint32_t>();
    std::string name(r.take(len), len);
    const auto ndim = r.get<std::uint32_t>();
    std::vector<int64_t> dims(ndim);
    for (auto& d : dims) d = r.get<std::int64_t>();
    const auto dtype = r.get<std::uint8_t>();
    if (dtype > 1) throw Error("checkpoint: unknown dtype tag for " + name);
    auto t = torch::empty(dims, dtype == 0 ? torch::kFloat32 : torch::kFloat64);
    const std::size_t n = t.numel() * t.element_size();
    std::memcpy(t.data_ptr(), r.take(n), n);
    out.emplace(std::move(name), std::move(t));
  }
  if (!r.done()) throw Error("checkpoint: trailing bytes");
  return out;
}

void collect_state(const torch::nn::Module& module, const std::string& prefix, TensorMap& out) {
  for (const auto& p : module.named_parameters(true)) out[prefix + p.key()] = p.value().detach().clone();
  for (const auto& b : module.named_buffers(true)) out[prefix + b.key()] = b.value().detach().clone();
}

void restore_state(torch::nn::Module& module, const std::string& prefix, const TensorMap& in) {
  torch::NoGradGuard guard;
  auto copy_into = [&](const std::string& key, torch::Tensor& dst) {
    auto it = in.find(prefix + key);
    if (it == in.end()) throw Error("checkpoint: missing tensor " + prefix + key);
    if (it->second.sizes() != dst.sizes()) throw Error("checkpoint: shape mismatch for " + prefix + key);
    dst.copy_(it->second);
  };
  for (auto& p : module.named_parameters(true)) copy_into(p.key(), p.value());
  for (auto& b : module.named_buffers(true)) copy_into(b.key(), b.value());
}

void save_checkpoint(const std::filesystem::path& stem, const TensorMap& tensors, nlohmann::json metadata) {
  const std::string blob = encode_tensor_blob(tensors);
  char hash[17];
  std::snprintf(hash, sizeof(hash), "%016llx", static_cast<unsigned long long>(fnv1a(blob.data(), blob.size())));
  metadata["blob_fnv1a"] = hash;
  write_file_atomic(with_ext(stem, ".bin"), blob);
  write_file_atomic(with_ext(stem, ".json"), metadata.dump(2) + "\n");
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& stem) {
  LoadedCheckpoint out;
  const std::string blob = read_all(with_ext(stem, ".bin"));
  try {
    out.metadata = nlohmann::json::parse(read_all(with_ext(stem, ".json")));
  } catch (const nlohmann::json::exception& e) {
    throw Error("checkpoint metadata " + with_ext(stem, ".json").string() + ": " + e.what());
  }
  char hash[17];
  std::snprintf(hash, sizeof(hash), "%016llx", static_cast<unsigned long long>(fnv1a(blob.data(), blob.size())));
  if (out.metadata.value("blob_fnv1a", std::string()) != hash)
    throw Error("checkpoint " + stem.string() + ": blob hash does not match metadata");
  out.tensors = decode_tensor_blob(blob);
  return out;
}

}  // namespace randgan
