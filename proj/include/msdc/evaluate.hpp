#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "msdc/dataset.hpp"
#include "msdc/deq.hpp"
#include "msdc/model.hpp"

namespace msdc {

enum class Reconstructor { Deq, Initial };

struct EvalConfig {
  SolverConfig solver{50, 1e-5, 5, 1.0, 1e-4};
  BranchMask mask = kAllBranches;
  Reconstructor method = Reconstructor::Deq;
};

struct MetricsRecord {
  std::string image_id;
  double cs_ratio = 0.0;
  BranchMask mask = kAllBranches;
  double psnr_db = 0.0;
  double ssim = 0.0;
  int iterations = 0;
  double seconds = 0.0;
};

struct Aggregate {
  double cs_ratio = 0.0;
  BranchMask mask = kAllBranches;
  std::size_t count = 0;
  double psnr_db = 0.0;
  double ssim = 0.0;
  double iterations = 0.0;
};

struct RatioModel {
  double cs_ratio;
  const Model* model;
};

struct EvalReport {
  std::vector<MetricsRecord> records;
  std::vector<Aggregate> aggregates;
};

// Means grouped by (cs_ratio, mask) in first-appearance order.
std::vector<Aggregate> aggregate(const std::vector<MetricsRecord>& records);

// Reconstructs every image with each model. A model whose sampler does not
// match its ratio or the image side raises ConfigError.
EvalReport evaluate(const std::vector<RatioModel>& models, const std::vector<const ImageRecord*>& images,
                    const EvalConfig& cfg);
EvalReport evaluate(const std::vector<RatioModel>& models, const Dataset& data, const EvalConfig& cfg);

// One evaluate pass per mask.
EvalReport ablate(const RatioModel& model, const std::vector<const ImageRecord*>& images,
                  const std::vector<BranchMask>& masks, const EvalConfig& cfg);
// Parses 7-character bit strings; throws ArgumentError on bad length.
std::vector<BranchMask> parse_masks(const std::vector<std::string>& bits);

// The all / none / single-branch set.
std::vector<BranchMask> single_branch_masks();

void write_metrics_csv(std::ostream& os, const std::vector<MetricsRecord>& records);
std::vector<MetricsRecord> read_metrics_csv(std::istream& is);

// Rows are methods, columns CS ratios, cells "PSNR/SSIM".
struct MethodRow {
  std::string label;
  std::vector<Aggregate> by_ratio;
};
std::string format_ratio_table(const std::vector<MethodRow>& rows);

enum class Framing { Connected, Disconnected };
// Connected: "All", "None" or enabled branches joined by '+'.
// Disconnected: "None", "All" or disabled branches joined by '+'.
std::string mask_label(const BranchMask& mask, Framing framing);
// Columns are masks, rows SSIM and PSNR.
std::string format_ablation_table(const std::vector<Aggregate>& aggregates, Framing framing);

}  // namespace msdc
