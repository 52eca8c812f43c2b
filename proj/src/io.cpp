#include "msdc/io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include "msdc/errors.hpp"

namespace msdc {

namespace {

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestError("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IngestError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IngestError("write failed for " + path.string());
}

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double d) {
    const auto v = std::bit_cast<std::uint64_t>(d);
    for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void raw(std::string_view s) { bytes.insert(bytes.end(), s.begin(), s.end()); }

  std::vector<std::uint8_t> bytes;
};

class Reader {
 public:
  Reader(const std::vector<std::uint8_t>& b, std::string what) : bytes_(b), what_(std::move(what)) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }
  double f64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_++]) << (8 * i);
    return std::bit_cast<double>(v);
  }
  std::string raw(std::size_t n) {
    need(n);
    std::string s(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_),
                  bytes_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw IngestError(what_ + ": truncated file");
  }
  const std::vector<std::uint8_t>& bytes_;
  std::string what_;
  std::size_t pos_ = 0;
};

// Next whitespace-delimited PGM header token, skipping '#' comments.
std::string header_token(const std::vector<std::uint8_t>& b, std::size_t& pos) {
  while (pos < b.size()) {
    if (b[pos] == '#') {
      while (pos < b.size() && b[pos] != '\n') ++pos;
    } else if (std::isspace(b[pos])) {
      ++pos;
    } else {
      break;
    }
  }
  std::string tok;
  while (pos < b.size() && !std::isspace(b[pos]) && b[pos] != '#') tok.push_back(static_cast<char>(b[pos++]));
  return tok;
}

std::size_t parse_size(const std::string& tok, const std::string& what) {
  if (tok.empty() || !std::all_of(tok.begin(), tok.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
    throw IngestError(what + ": malformed PGM header");
  }
  return std::stoul(tok);
}

}  // namespace

GrayImage read_pgm(const std::filesystem::path& path) {
  const auto b = read_bytes(path);
  const std::string what = path.string();
  std::size_t pos = 0;
  if (header_token(b, pos) != "P5") throw IngestError(what + ": not a binary PGM (P5)");
  GrayImage img;
  img.width = parse_size(header_token(b, pos), what);
  img.height = parse_size(header_token(b, pos), what);
  const std::size_t maxval = parse_size(header_token(b, pos), what);
  if (maxval == 0 || maxval > 65535) throw IngestError(what + ": invalid maxval");
  img.maxval = static_cast<std::uint32_t>(maxval);
  if (pos >= b.size() || !std::isspace(b[pos])) throw IngestError(what + ": malformed PGM header");
  ++pos;  // single whitespace before the raster
  const std::size_t count = img.width * img.height;
  const std::size_t bpp = maxval < 256 ? 1 : 2;
  if (b.size() - pos < count * bpp) throw IngestError(what + ": truncated raster");
  img.pixels.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    img.pixels[i] = bpp == 1 ? b[pos + i]
                             : static_cast<std::uint16_t>((b[pos + 2 * i] << 8) | b[pos + 2 * i + 1]);
  }
  return img;
}

void write_pgm(const std::filesystem::path& path, const GrayImage& image) {
  if (image.pixels.size() != image.width * image.height) throw ShapeError("pgm raster size mismatch");
  Writer w;
  w.raw("P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n" +
        std::to_string(image.maxval) + "\n");
  for (std::uint16_t p : image.pixels) {
    if (image.maxval < 256) {
      w.bytes.push_back(static_cast<std::uint8_t>(p));
    } else {
      w.bytes.push_back(static_cast<std::uint8_t>(p >> 8));
      w.bytes.push_back(static_cast<std::uint8_t>(p & 0xff));
    }
  }
  write_bytes(path, w.bytes);
}

Tensor to_unit_tensor(const GrayImage& image) {
  Tensor t(Shape{1, 1, image.height, image.width});
  const double inv = 1.0 / static_cast<double>(image.maxval);
  for (std::size_t i = 0; i < image.pixels.size(); ++i) t[i] = image.pixels[i] * inv;
  return t;
}

GrayImage from_unit_tensor(const Tensor& t) {
  const Shape& s = t.shape();
  if (s.n != 1 || s.c != 1) throw ShapeError("from_unit_tensor expects a single-plane image");
  GrayImage img;
  img.width = s.w;
  img.height = s.h;
  img.maxval = 255;
  img.pixels.resize(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double v = std::isfinite(t[i]) ? std::clamp(t[i], 0.0, 1.0) : 0.0;
    img.pixels[i] = static_cast<std::uint16_t>(std::lround(v * 255.0));
  }
  return img;
}

void write_measurement(const std::filesystem::path& path, const Matrix& y, std::uint32_t image_side) {
  Writer w;
  w.raw("MSDY");
  w.u32(static_cast<std::uint32_t>(y.rows()));
  w.u32(static_cast<std::uint32_t>(y.cols()));
  w.u32(image_side);
  for (Eigen::Index r = 0; r < y.rows(); ++r)
    for (Eigen::Index c = 0; c < y.cols(); ++c) w.f64(y(r, c));
  write_bytes(path, w.bytes);
}

MeasurementFile read_measurement(const std::filesystem::path& path) {
  const auto bytes = read_bytes(path);
  Reader r(bytes, path.string());
  if (r.raw(4) != "MSDY") throw IngestError(path.string() + ": not a measurement file");
  const std::uint32_t rows = r.u32();
  const std::uint32_t cols = r.u32();
  MeasurementFile out;
  out.image_side = r.u32();
  if (r.remaining() != static_cast<std::size_t>(rows) * cols * 8) {
    throw IngestError(path.string() + ": payload does not match the header extents");
  }
  out.y.resize(rows, cols);
  for (std::uint32_t i = 0; i < rows; ++i)
    for (std::uint32_t j = 0; j < cols; ++j) out.y(i, j) = r.f64();
  return out;
}

std::vector<std::uint8_t> serialize_checkpoint(const Model& model) {
  model.validate();
  const BlockConfig& c = model.block.config;
  Writer w;
  w.raw("MSDC");
  w.u32(kCheckpointVersion);
  for (std::size_t v : {model.stp.n, model.stp.m, c.channels, c.cardinality, c.se_reduction}) {
    w.u32(static_cast<std::uint32_t>(v));
  }
  const auto named = model.named_tensors();
  w.u32(static_cast<std::uint32_t>(named.size()));
  for (const auto& [name, t] : named) {
    w.u32(static_cast<std::uint32_t>(name.size()));
    w.raw(name);
    const Shape& s = t->shape();
    for (std::size_t e : {s.n, s.c, s.h, s.w}) w.u32(static_cast<std::uint32_t>(e));
    for (double v : t->data()) w.f64(v);
  }
  return w.bytes;
}

Model deserialize_checkpoint(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes, "checkpoint");
  if (r.raw(4) != "MSDC") throw IngestError("checkpoint: bad magic");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw ConfigError("checkpoint: unsupported format version " + std::to_string(version));
  }
  const std::size_t n = r.u32(), m = r.u32();
  BlockConfig config;
  config.channels = r.u32();
  config.cardinality = r.u32();
  config.se_reduction = r.u32();
  config.validate();
  if (m == 0 || m > n) throw ConfigError("checkpoint: invalid sampler extents");

  Model model;
  model.stp.n = n;
  model.stp.m = m;
  model.stp.phi1 = Tensor::matrix(m, n);
  model.stp.phi2 = Tensor::matrix(m, n);
  model.stp.rec1 = Tensor::matrix(n, m);
  model.stp.rec2 = Tensor::matrix(n, m);
  model.block = IstaBlockParams::init(config, 0, 1.0);

  auto named = model.named_tensors();
  std::set<std::string> seen;
  const std::uint32_t count = r.u32();
  if (count != named.size()) {
    throw ConfigError("checkpoint: expected " + std::to_string(named.size()) + " tensors, found " +
                      std::to_string(count));
  }
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = r.raw(r.u32());
    const Shape s{r.u32(), r.u32(), r.u32(), r.u32()};
    auto it = std::find_if(named.begin(), named.end(), [&](const auto& e) { return e.first == name; });
    if (it == named.end() || !seen.insert(name).second) {
      throw ConfigError("checkpoint: unexpected tensor '" + name + "'");
    }
    if (!(s == it->second->shape())) {
      throw ConfigError("checkpoint: tensor '" + name + "' has shape " + s.str() + ", expected " +
                        it->second->shape().str());
    }
    std::vector<double> data(s.size());
    for (double& v : data) v = r.f64();
    *it->second = Tensor(s, std::move(data));
    it->second->set_requires_grad(true);
  }
  if (!r.done()) throw ConfigError("checkpoint: trailing bytes");
  return model;
}

void save_checkpoint(const std::filesystem::path& path, const Model& model) {
  write_bytes(path, serialize_checkpoint(model));
}

Model load_checkpoint(const std::filesystem::path& path) { return deserialize_checkpoint(read_bytes(path)); }

std::map<std::string, std::string> read_config(const std::filesystem::path& path,
                                               const std::vector<std::string>& allowed) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::map<std::string, std::string> out;
  std::string line;
  int lineno = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
    out[key] = value;
  }
  return out;
}

}  // namespace msdc
