#include <gtest/gtest.h>

#include <cstring>
#include <fstream>
#include <iterator>

#include "msdc/errors.hpp"
#include "msdc/io.hpp"
#include "support.hpp"

using namespace msdc;
using msdc::testing::TempDir;

namespace {

std::vector<std::uint8_t> slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const std::filesystem::path& p, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::vector<std::uint8_t> pgm_bytes(std::size_t w, std::size_t h, std::uint64_t seed) {
  const std::string header = "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  std::vector<std::uint8_t> b(header.begin(), header.end());
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < w * h; ++i) b.push_back(static_cast<std::uint8_t>(rng() & 0xff));
  return b;
}

bool bit_equal(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() && std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST(Pgm, ByteExactRoundTrip) {
  TempDir dir;
  for (std::uint64_t s = 0; s < 4; ++s) {
    const auto bytes = pgm_bytes(7 + s, 5 + 2 * s, s);
    spit(dir / "in.pgm", bytes);
    write_pgm(dir / "out.pgm", read_pgm(dir / "in.pgm"));
    EXPECT_EQ(slurp(dir / "out.pgm"), bytes);
  }
}

TEST(Pgm, CommentsAndSixteenBit) {
  TempDir dir;
  const std::string text = "P5\n# made by hand\n2 1\n# another\n65535\n";
  std::vector<std::uint8_t> b(text.begin(), text.end());
  for (std::uint8_t v : {0x12, 0x34, 0xff, 0xff}) b.push_back(v);
  spit(dir / "c.pgm", b);
  const GrayImage img = read_pgm(dir / "c.pgm");
  EXPECT_EQ(img.width, 2u);
  EXPECT_EQ(img.height, 1u);
  EXPECT_EQ(img.maxval, 65535u);
  EXPECT_EQ(img.pixels[0], 0x1234);
  EXPECT_EQ(img.pixels[1], 0xffff);
  EXPECT_DOUBLE_EQ(to_unit_tensor(img)[1], 1.0);
}

TEST(Pgm, Rejections) {
  TempDir dir;
  EXPECT_THROW(read_pgm(dir / "missing.pgm"), IngestError);
  const std::string ascii = "P2\n2 2\n255\n0 1 2 3\n";
  spit(dir / "a.pgm", std::vector<std::uint8_t>(ascii.begin(), ascii.end()));
  EXPECT_THROW(read_pgm(dir / "a.pgm"), IngestError);
  auto bytes = pgm_bytes(4, 4, 1);
  bytes.resize(bytes.size() - 3);
  spit(dir / "t.pgm", bytes);
  EXPECT_THROW(read_pgm(dir / "t.pgm"), IngestError);
}

TEST(Pgm, UnitTensorConversions) {
  GrayImage img;
  img.width = 3;
  img.height = 1;
  img.pixels = {0, 128, 255};
  const Tensor t = to_unit_tensor(img);
  EXPECT_EQ(t.shape(), (Shape{1, 1, 1, 3}));
  EXPECT_DOUBLE_EQ(t[1], 128.0 / 255.0);
  EXPECT_EQ(from_unit_tensor(t).pixels, img.pixels);
  const GrayImage clamped = from_unit_tensor(Tensor(Shape{1, 1, 1, 3}, {-0.5, 0.5, 2.0}));
  EXPECT_EQ(clamped.pixels, (std::vector<std::uint16_t>{0, 128, 255}));
}

TEST(Measurement, RoundTripAndLayout) {
  TempDir dir;
  Matrix y(3, 4);
  for (int i = 0; i < 12; ++i) y(i / 4, i % 4) = 0.1 * i - 0.37;
  write_measurement(dir / "y.msdy", y, 9);
  const auto bytes = slurp(dir / "y.msdy");
  ASSERT_EQ(bytes.size(), 16u + 12u * 8u);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "MSDY");
  EXPECT_EQ(bytes[4], 3);
  EXPECT_EQ(bytes[8], 4);
  EXPECT_EQ(bytes[12], 9);
  double second;
  std::memcpy(&second, bytes.data() + 24, 8);
  EXPECT_EQ(second, y(0, 1));
  const MeasurementFile back = read_measurement(dir / "y.msdy");
  EXPECT_EQ(back.image_side, 9u);
  EXPECT_EQ(back.y, y);
}

TEST(Measurement, Rejections) {
  TempDir dir;
  write_measurement(dir / "y.msdy", Matrix::Ones(2, 2), 4);
  auto bytes = slurp(dir / "y.msdy");
  bytes.pop_back();
  spit(dir / "short.msdy", bytes);
  EXPECT_THROW(read_measurement(dir / "short.msdy"), IngestError);
  bytes = slurp(dir / "y.msdy");
  bytes[0] = 'X';
  spit(dir / "magic.msdy", bytes);
  EXPECT_THROW(read_measurement(dir / "magic.msdy"), IngestError);
}

namespace {

BlockConfig small() {
  BlockConfig c;
  c.channels = 8;
  c.cardinality = 2;
  c.se_reduction = 2;
  return c;
}

}  // namespace

TEST(Checkpoint, BitExactRoundTrip) {
  TempDir dir;
  const Model m = Model::init(16, 0.3, small(), 5);
  save_checkpoint(dir / "m.ckpt", m);
  const Model back = load_checkpoint(dir / "m.ckpt");
  EXPECT_EQ(back.stp.n, m.stp.n);
  EXPECT_EQ(back.stp.m, m.stp.m);
  EXPECT_EQ(back.block.config.channels, 8u);
  const auto a = m.named_tensors();
  const auto b = back.named_tensors();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].first, b[i].first);
    EXPECT_TRUE(bit_equal(*a[i].second, *b[i].second)) << a[i].first;
  }
  save_checkpoint(dir / "again.ckpt", back);
  EXPECT_EQ(slurp(dir / "m.ckpt"), slurp(dir / "again.ckpt"));
}

TEST(Checkpoint, Header) {
  const Model m = Model::init(16, 0.3, small(), 5);
  const auto bytes = serialize_checkpoint(m);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "MSDC");
  std::uint32_t words[6];
  std::memcpy(words, bytes.data() + 4, sizeof(words));
  EXPECT_EQ(words[0], kCheckpointVersion);
  EXPECT_EQ(words[1], 16u);
  EXPECT_EQ(words[2], m.stp.m);
  EXPECT_EQ(words[3], 8u);
  EXPECT_EQ(words[4], 2u);
  EXPECT_EQ(words[5], 2u);
}

TEST(Checkpoint, Rejections) {
  const Model m = Model::init(16, 0.3, small(), 5);
  auto bytes = serialize_checkpoint(m);

  auto version = bytes;
  version[4] = 7;
  EXPECT_THROW(deserialize_checkpoint(version), ConfigError);

  auto magic = bytes;
  magic[1] = 'X';
  EXPECT_THROW(deserialize_checkpoint(magic), IngestError);

  auto truncated = bytes;
  truncated.resize(truncated.size() - 8);
  EXPECT_THROW(deserialize_checkpoint(truncated), IngestError);

  auto trailing = bytes;
  trailing.push_back(0);
  EXPECT_THROW(deserialize_checkpoint(trailing), ConfigError);

  // First blob starts after magic, version, five extents and the count; its
  // shape follows the name.
  std::uint32_t name_len;
  std::memcpy(&name_len, bytes.data() + 32, 4);
  auto shape = bytes;
  shape[36 + name_len] += 1;
  EXPECT_THROW(deserialize_checkpoint(shape), ConfigError);

  auto name = bytes;
  name[36] = '!';
  EXPECT_THROW(deserialize_checkpoint(name), ConfigError);

  auto extents = bytes;
  extents[12] = 200;
  EXPECT_THROW(deserialize_checkpoint(extents), ConfigError);
}

TEST(Config, ParsesAndRejectsUnknownKeys) {
  TempDir dir;
  {
    std::ofstream out(dir / "run.cfg");
    out << "# comment\nratio = 0.25\n\n  seed=7   # trailing\nmask = 1010101\n";
  }
  const auto cfg = read_config(dir / "run.cfg", {"ratio", "seed", "mask", "lr"});
  EXPECT_EQ(cfg.size(), 3u);
  EXPECT_EQ(cfg.at("ratio"), "0.25");
  EXPECT_EQ(cfg.at("seed"), "7");
  EXPECT_EQ(cfg.at("mask"), "1010101");
  EXPECT_THROW(read_config(dir / "run.cfg", {"ratio", "seed"}), ConfigError);
  {
    std::ofstream out(dir / "bad.cfg");
    out << "ratio 0.25\n";
  }
  EXPECT_THROW(read_config(dir / "bad.cfg", {"ratio"}), ConfigError);
  EXPECT_THROW(read_config(dir / "none.cfg", {"ratio"}), ConfigError);
}
