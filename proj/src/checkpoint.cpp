#include "fsdd/checkpoint.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

#include "fsdd/error.hpp"
#include "fsdd/text_format.hpp"

namespace fsdd {
namespace {

constexpr char kMagic[8] = {'F', 'S', 'D', 'D', 'C', 'K', 'P', 'T'};

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
void put(std::string& out, T value) {
  auto bits = std::bit_cast<std::array<char, sizeof(T)>>(value);
  if constexpr (std::endian::native == std::endian::big) std::reverse(bits.begin(), bits.end());
  out.append(bits.data(), bits.size());
}

void put_u32(std::string& out, std::size_t value) {
  if (value > std::numeric_limits<std::uint32_t>::max()) {
    throw ValidationError("checkpoint field exceeds 32 bits");
  }
  put(out, static_cast<std::uint32_t>(value));
}

void put_string(std::string& out, const std::string& s) {
  put_u32(out, s.size());
  out += s;
}

void put_group(std::string& out, const std::string& name, const ParameterStore& store) {
  put_string(out, name);
  put_u32(out, store.size());
  for (const auto& e : store.entries()) {
    put_string(out, e.name);
    put_u32(out, static_cast<std::size_t>(e.value.rows()));
    put_u32(out, static_cast<std::size_t>(e.value.cols()));
    for (Eigen::Index i = 0; i < e.value.size(); ++i) put(out, e.value.data()[i]);
  }
}

class Reader {
 public:
  Reader(const std::string& bytes, const std::string& source) : bytes_(bytes), source_(source) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    std::array<char, sizeof(T)> bits;
    std::memcpy(bits.data(), bytes_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bits.begin(), bits.end());
    pos_ += sizeof(T);
    return std::bit_cast<T>(bits);
  }

  int get_int(const char* what) {
    const auto v = get<std::uint32_t>();
    if (v > static_cast<std::uint32_t>(std::numeric_limits<int>::max())) fail(std::string(what) + " out of range");
    return static_cast<int>(v);
  }

  std::string get_string() {
    const auto n = get<std::uint32_t>();
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) fail("truncated at byte " + std::to_string(pos_));
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw ValidationError("checkpoint '" + source_ + "': " + what);
  }

  bool done() const { return pos_ == bytes_.size(); }
  std::size_t pos() const { return pos_; }

 private:
  const std::string& bytes_;
  const std::string& source_;
  std::size_t pos_ = 0;
};

ParameterStore read_group(Reader& in, const std::string& expected_name, const ParameterStore& layout) {
  const auto name = in.get_string();
  if (name != expected_name) in.fail("expected group '" + expected_name + "', found '" + name + "'");
  const auto count = in.get<std::uint32_t>();
  if (count != layout.size()) {
    in.fail("group '" + name + "' has " + std::to_string(count) + " tensors, config implies " +
            std::to_string(layout.size()));
  }
  ParameterStore out;
  for (const auto& expected : layout.entries()) {
    const auto tensor = in.get_string();
    const auto rows = in.get<std::uint32_t>();
    const auto cols = in.get<std::uint32_t>();
    if (tensor != expected.name || rows != expected.value.rows() || cols != expected.value.cols()) {
      in.fail("tensor '" + name + "/" + tensor + "' (" + std::to_string(rows) + "x" + std::to_string(cols) +
              ") does not match expected '" + expected.name + "' (" + std::to_string(expected.value.rows()) +
              "x" + std::to_string(expected.value.cols()) + ")");
    }
    Matrix value(rows, cols);
    in.need(static_cast<std::size_t>(value.size()) * sizeof(double));
    for (Eigen::Index i = 0; i < value.size(); ++i) value.data()[i] = in.get<double>();
    out.add(tensor, std::move(value));
  }
  return out;
}

}  // namespace

Checkpoint Checkpoint::from_model(const Denoiser& model) {
  Checkpoint c;
  c.config = model.config();
  c.params = model.params();
  c.ema = model.params();
  c.adam_m = model.params().zeros_like();
  c.adam_v = model.params().zeros_like();
  return c;
}

std::string encode_checkpoint(const Checkpoint& ckpt) {
  const auto layout = Denoiser::layout(ckpt.config);
  for (const auto* store : {&ckpt.params, &ckpt.ema, &ckpt.adam_m, &ckpt.adam_v}) {
    if (!store->same_layout(layout)) throw ValidationError("checkpoint tensors do not match its config");
  }
  std::string out(kMagic, sizeof(kMagic));
  put(out, kCheckpointVersion);
  const auto& c = ckpt.config;
  for (int v : {c.codebook_size, c.target_sum, c.num_classes, c.embed_dim, c.num_layers, c.num_heads}) {
    put_u32(out, static_cast<std::size_t>(v));
  }
  put(out, c.label_drop_prob);
  put(out, ckpt.step);
  put_u32(out, 4);
  put_group(out, "params", ckpt.params);
  put_group(out, "ema", ckpt.ema);
  put_group(out, "adam.m", ckpt.adam_m);
  put_group(out, "adam.v", ckpt.adam_v);
  return out;
}

Checkpoint decode_checkpoint(const std::string& bytes, const std::string& source) {
  Reader in(bytes, source);
  in.need(sizeof(kMagic));
  if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) in.fail("not a checkpoint (bad magic)");
  for (std::size_t i = 0; i < sizeof(kMagic); ++i) in.get<char>();
  const auto version = in.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    in.fail("unsupported format version " + std::to_string(version));
  }
  Checkpoint ckpt;
  auto& c = ckpt.config;
  c.codebook_size = in.get_int("C");
  c.target_sum = in.get_int("M");
  c.num_classes = in.get_int("num_classes");
  c.embed_dim = in.get_int("embed_dim");
  c.num_layers = in.get_int("num_layers");
  c.num_heads = in.get_int("num_heads");
  c.label_drop_prob = in.get<double>();
  try {
    c.validate();
  } catch (const ValidationError& e) {
    in.fail(e.what());
  }
  ckpt.step = in.get<std::uint64_t>();
  const auto groups = in.get<std::uint32_t>();
  if (groups != 4) in.fail("expected 4 tensor groups, found " + std::to_string(groups));
  const auto layout = Denoiser::layout(c);
  ckpt.params = read_group(in, "params", layout);
  ckpt.ema = read_group(in, "ema", layout);
  ckpt.adam_m = read_group(in, "adam.m", layout);
  ckpt.adam_v = read_group(in, "adam.v", layout);
  if (!in.done()) in.fail("trailing bytes after offset " + std::to_string(in.pos()));
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  write_file_atomically(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path.string() + "'");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed for '" + path.string() + "'");
  return decode_checkpoint(bytes, path.string());
}

}  // namespace fsdd
