#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "msdc/io.hpp"
#include "msdc/tensor.hpp"

namespace msdc {

enum class Split { Train, Val, Test };
const char* split_name(Split s);

struct ImageRecord {
  std::string id;  // file stem
  std::filesystem::path path;
  Tensor image;    // [1, 1, n, n] in [0, 1]
  Split split = Split::Train;
};

struct SplitFractions {
  double train = 0.7;
  double val = 0.15;
  double test = 0.15;
};

struct Dataset {
  std::size_t side = 0;
  std::vector<ImageRecord> records;
  std::vector<std::string> warnings;

  std::vector<const ImageRecord*> subset(Split s) const;
  std::size_t count(Split s) const;
};

// Centered n x n crop; odd margins leave the extra pixel on the right/bottom.
GrayImage center_crop(const GrayImage& img, std::size_t n);

// Split sizes: train and val are floor(fraction * count), test takes the rest.
struct SplitCounts {
  std::size_t train = 0, val = 0, test = 0;
};
SplitCounts split_counts(std::size_t count, const SplitFractions& f);

// Loads every *.pgm under `dir` (sorted by name), center-crops to n x n and
// assigns splits by a seeded shuffle. Unreadable or undersized files are
// skipped with a warning; no usable image raises IngestError.
Dataset ingest(const std::filesystem::path& dir, std::size_t n, const SplitFractions& fractions,
               std::uint64_t seed);

// In-memory dataset, every record in `split`.
Dataset make_dataset(const std::vector<Tensor>& images, Split split = Split::Train);

enum class SyntheticKind { SparseSpikes, Piecewise, GaussianBlobs };
SyntheticKind parse_synthetic_kind(const std::string& s);

// Deterministic n x n 8-bit test image. `spikes` is the nonzero count for SparseSpikes.
GrayImage generate_synthetic(SyntheticKind kind, std::size_t n, std::uint64_t seed,
                             std::size_t spikes = 5);
// Writes `count` images named <kind>_<index>.pgm; returns their paths.
std::vector<std::filesystem::path> write_synthetic_set(SyntheticKind kind, std::size_t n,
                                                       std::size_t count, std::uint64_t seed,
                                                       const std::filesystem::path& out_dir,
                                                       std::size_t spikes = 5);

}  // namespace msdc
