#include "msdc/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include "msdc/errors.hpp"

namespace msdc {

const char* split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

std::vector<const ImageRecord*> Dataset::subset(Split s) const {
  std::vector<const ImageRecord*> out;
  for (const auto& r : records)
    if (r.split == s) out.push_back(&r);
  return out;
}

std::size_t Dataset::count(Split s) const {
  return static_cast<std::size_t>(
      std::count_if(records.begin(), records.end(), [s](const ImageRecord& r) { return r.split == s; }));
}

GrayImage center_crop(const GrayImage& img, std::size_t n) {
  if (img.width < n || img.height < n) throw ShapeError("image smaller than the crop size");
  const std::size_t ox = (img.width - n) / 2, oy = (img.height - n) / 2;
  GrayImage out;
  out.width = out.height = n;
  out.maxval = img.maxval;
  out.pixels.resize(n * n);
  for (std::size_t y = 0; y < n; ++y)
    for (std::size_t x = 0; x < n; ++x) out.pixels[y * n + x] = img.pixels[(y + oy) * img.width + x + ox];
  return out;
}

SplitCounts split_counts(std::size_t count, const SplitFractions& f) {
  if (f.train < 0 || f.val < 0 || f.test < 0 || f.train + f.val + f.test > 1.0 + 1e-9) {
    throw ArgumentError("split fractions must be non-negative and sum to at most 1");
  }
  SplitCounts c;
  const double total = static_cast<double>(count);
  // The small epsilon absorbs representation error such as 0.7 * 10 = 6.999...
  c.train = static_cast<std::size_t>(std::floor(f.train * total + 1e-9));
  c.val = static_cast<std::size_t>(std::floor(f.val * total + 1e-9));
  c.train = std::min(c.train, count);
  c.val = std::min(c.val, count - c.train);
  c.test = count - c.train - c.val;
  return c;
}

Dataset ingest(const std::filesystem::path& dir, std::size_t n, const SplitFractions& fractions,
               std::uint64_t seed) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw IngestError("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".pgm") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());

  Dataset ds;
  ds.side = n;
  for (const auto& path : files) {
    try {
      const GrayImage img = read_pgm(path);
      if (img.width < n || img.height < n) {
        ds.warnings.push_back("skipping " + path.string() + ": smaller than " + std::to_string(n) + "x" +
                              std::to_string(n));
        continue;
      }
      ImageRecord rec;
      rec.id = path.stem().string();
      rec.path = path;
      rec.image = to_unit_tensor(center_crop(img, n));
      ds.records.push_back(std::move(rec));
    } catch (const IngestError& e) {
      ds.warnings.push_back(std::string("skipping unreadable file: ") + e.what());
    }
  }
  if (ds.records.empty()) throw IngestError("no usable PGM images in " + dir.string());

  std::vector<std::size_t> order(ds.records.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const SplitCounts counts = split_counts(ds.records.size(), fractions);
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    Split s = Split::Test;
    if (rank < counts.train) {
      s = Split::Train;
    } else if (rank < counts.train + counts.val) {
      s = Split::Val;
    }
    ds.records[order[rank]].split = s;
  }
  return ds;
}

Dataset make_dataset(const std::vector<Tensor>& images, Split split) {
  Dataset ds;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const Shape& s = images[i].shape();
    if (s.n != 1 || s.c != 1 || s.h != s.w) throw ShapeError("dataset images must be square single planes");
    if (i == 0) ds.side = s.h;
    if (s.h != ds.side) throw ShapeError("dataset images must share one side length");
    ImageRecord rec;
    char buf[32];
    std::snprintf(buf, sizeof buf, "img%04zu", i);
    rec.id = buf;
    rec.image = images[i];
    rec.split = split;
    ds.records.push_back(std::move(rec));
  }
  return ds;
}

SyntheticKind parse_synthetic_kind(const std::string& s) {
  if (s == "sparse-spikes") return SyntheticKind::SparseSpikes;
  if (s == "piecewise") return SyntheticKind::Piecewise;
  if (s == "gaussian-blobs") return SyntheticKind::GaussianBlobs;
  throw ArgumentError("unknown synthetic kind '" + s + "'");
}

namespace {

const char* kind_name(SyntheticKind k) {
  switch (k) {
    case SyntheticKind::SparseSpikes: return "sparse-spikes";
    case SyntheticKind::Piecewise: return "piecewise";
    case SyntheticKind::GaussianBlobs: return "gaussian-blobs";
  }
  return "?";
}

std::uint16_t quantize(double v) {
  return static_cast<std::uint16_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace

GrayImage generate_synthetic(SyntheticKind kind, std::size_t n, std::uint64_t seed, std::size_t spikes) {
  if (n < 16) throw ArgumentError("synthetic images need n >= 16");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  GrayImage img;
  img.width = img.height = n;
  img.pixels.assign(n * n, 0);
  const double dn = static_cast<double>(n);

  switch (kind) {
    case SyntheticKind::SparseSpikes: {
      if (spikes > n * n) throw ArgumentError("more spikes than pixels");
      std::vector<std::size_t> idx(n * n);
      std::iota(idx.begin(), idx.end(), 0);
      // Partial Fisher-Yates for k distinct positions.
      for (std::size_t i = 0; i < spikes; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
        std::swap(idx[i], idx[pick(rng)]);
        img.pixels[idx[i]] = static_cast<std::uint16_t>(64 + (rng() % 192));
      }
      break;
    }
    case SyntheticKind::Piecewise: {
      std::vector<double> canvas(n * n, 0.15 + 0.5 * unit(rng));
      const int shapes = 3 + static_cast<int>(rng() % 5);
      for (int s = 0; s < shapes; ++s) {
        const double level = unit(rng);
        const double cx = unit(rng) * dn, cy = unit(rng) * dn;
        const double rx = (0.1 + 0.3 * unit(rng)) * dn, ry = (0.1 + 0.3 * unit(rng)) * dn;
        const bool ellipse = unit(rng) < 0.5;
        for (std::size_t y = 0; y < n; ++y)
          for (std::size_t x = 0; x < n; ++x) {
            const double dx = (static_cast<double>(x) - cx) / rx, dy = (static_cast<double>(y) - cy) / ry;
            const bool inside = ellipse ? dx * dx + dy * dy <= 1.0 : std::abs(dx) <= 1.0 && std::abs(dy) <= 1.0;
            if (inside) canvas[y * n + x] = level;
          }
      }
      for (std::size_t i = 0; i < canvas.size(); ++i) img.pixels[i] = quantize(canvas[i]);
      break;
    }
    case SyntheticKind::GaussianBlobs: {
      std::vector<double> canvas(n * n, 0.0);
      const int blobs = 3 + static_cast<int>(rng() % 6);
      for (int b = 0; b < blobs; ++b) {
        const double amp = 0.3 + 0.7 * unit(rng);
        const double cx = unit(rng) * dn, cy = unit(rng) * dn;
        const double sg = (0.03 + 0.12 * unit(rng)) * dn;
        for (std::size_t y = 0; y < n; ++y)
          for (std::size_t x = 0; x < n; ++x) {
            const double dx = static_cast<double>(x) - cx, dy = static_cast<double>(y) - cy;
            canvas[y * n + x] += amp * std::exp(-(dx * dx + dy * dy) / (2.0 * sg * sg));
          }
      }
      for (std::size_t i = 0; i < canvas.size(); ++i) img.pixels[i] = quantize(canvas[i]);
      break;
    }
  }
  return img;
}

std::vector<std::filesystem::path> write_synthetic_set(SyntheticKind kind, std::size_t n, std::size_t count,
                                                       std::uint64_t seed, const std::filesystem::path& out_dir,
                                                       std::size_t spikes) {
  std::filesystem::create_directories(out_dir);
  std::vector<std::filesystem::path> paths;
  std::mt19937_64 seeds(seed);
  for (std::size_t i = 0; i < count; ++i) {
    char name[64];
    std::snprintf(name, sizeof name, "%s_%04zu.pgm", kind_name(kind), i);
    const auto path = out_dir / name;
    write_pgm(path, generate_synthetic(kind, n, seeds(), spikes));
    paths.push_back(path);
  }
  return paths;
}

}  // namespace msdc
