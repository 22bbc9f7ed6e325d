#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "fsdd/checkpoint.hpp"
#include "fsdd/error.hpp"

namespace fsdd {
namespace {

DenoiserConfig small_config() {
  DenoiserConfig c;
  c.codebook_size = 5;
  c.target_sum = 6;
  c.num_classes = 2;
  c.embed_dim = 16;
  c.num_layers = 2;
  c.num_heads = 4;
  c.label_drop_prob = 0.15;
  return c;
}

Checkpoint sample_checkpoint() {
  auto c = Checkpoint::from_model(Denoiser::initialize(small_config(), 9));
  c.step = 123;
  c.adam_v.entries()[0].value(0, 0) = 0.25;
  c.ema.entries()[1].value(0, 1) = -1.5e-300;
  return c;
}

TEST(Checkpoint, EncodeDecodeEncodeIsByteIdentical) {
  const auto ckpt = sample_checkpoint();
  const std::string bytes = encode_checkpoint(ckpt);
  const auto back = decode_checkpoint(bytes, "mem");
  EXPECT_EQ(back.config, ckpt.config);
  EXPECT_EQ(back.step, 123u);
  EXPECT_EQ(back.params, ckpt.params);
  EXPECT_EQ(back.ema, ckpt.ema);
  EXPECT_EQ(back.adam_m, ckpt.adam_m);
  EXPECT_EQ(back.adam_v, ckpt.adam_v);
  EXPECT_EQ(encode_checkpoint(back), bytes);
}

TEST(Checkpoint, HeaderLayout) {
  const std::string bytes = encode_checkpoint(sample_checkpoint());
  EXPECT_EQ(bytes.substr(0, 8), "FSDDCKPT");
  EXPECT_EQ(static_cast<unsigned char>(bytes[8]), 1u);  // little-endian version 1
  EXPECT_EQ(bytes[9], 0);
  EXPECT_EQ(static_cast<unsigned char>(bytes[12]), 5u);  // C
  EXPECT_EQ(static_cast<unsigned char>(bytes[16]), 6u);  // M
}

TEST(Checkpoint, LoadedModelReproducesLogits) {
  const auto dir = std::filesystem::temp_directory_path() / "fsdd_ckpt_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "model.ckpt";
  const auto ckpt = sample_checkpoint();
  save_checkpoint(path, ckpt);
  const auto loaded = load_checkpoint(path);
  const std::vector<int> probe{2, 0, 1, 3, 0};
  EXPECT_EQ(loaded.live_model().forward(probe, 0.3, 1).grid, ckpt.live_model().forward(probe, 0.3, 1).grid);
  save_checkpoint(dir / "again.ckpt", loaded);
  std::ifstream a(path, std::ios::binary), b(dir / "again.ckpt", std::ios::binary);
  const std::string sa((std::istreambuf_iterator<char>(a)), {}), sb((std::istreambuf_iterator<char>(b)), {});
  EXPECT_EQ(sa, sb);
  EXPECT_FALSE(std::filesystem::exists(dir / "model.ckpt.tmp"));
  std::filesystem::remove_all(dir);
}

TEST(Checkpoint, RejectsCorruption) {
  const std::string bytes = encode_checkpoint(sample_checkpoint());
  EXPECT_THROW(decode_checkpoint("NOTACKPT" + bytes.substr(8), "x"), ValidationError);
  EXPECT_THROW(decode_checkpoint(bytes.substr(0, bytes.size() - 3), "x"), ValidationError);
  EXPECT_THROW(decode_checkpoint(bytes + "z", "x"), ValidationError);
  std::string wrong_version = bytes;
  wrong_version[8] = 2;
  EXPECT_THROW(decode_checkpoint(wrong_version, "x"), ValidationError);
  std::string bad_heads = bytes;
  bad_heads[32] = 3;  // num_heads no longer divides embed_dim
  EXPECT_THROW(decode_checkpoint(bad_heads, "x"), ValidationError);
}

TEST(Checkpoint, MissingFileIsIoError) {
  EXPECT_THROW(load_checkpoint("/nonexistent/dir/model.ckpt"), IoError);
  EXPECT_THROW(save_checkpoint("/nonexistent/dir/model.ckpt", sample_checkpoint()), IoError);
}

}  // namespace
}  // namespace fsdd
