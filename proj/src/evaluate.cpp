#include "msdc/evaluate.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "msdc/errors.hpp"
#include "msdc/metrics.hpp"
#include "msdc/stp.hpp"

namespace msdc {

std::vector<Aggregate> aggregate(const std::vector<MetricsRecord>& records) {
  std::vector<Aggregate> out;
  for (const auto& r : records) {
    auto it = std::find_if(out.begin(), out.end(), [&](const Aggregate& a) {
      return a.cs_ratio == r.cs_ratio && a.mask == r.mask;
    });
    if (it == out.end()) {
      out.push_back(Aggregate{r.cs_ratio, r.mask, 0, 0.0, 0.0, 0.0});
      it = out.end() - 1;
    }
    it->count += 1;
    it->psnr_db += r.psnr_db;
    it->ssim += r.ssim;
    it->iterations += r.iterations;
  }
  for (auto& a : out) {
    const double k = static_cast<double>(a.count);
    a.psnr_db /= k;
    a.ssim /= k;
    a.iterations /= k;
  }
  return out;
}

EvalReport evaluate(const std::vector<RatioModel>& models, const std::vector<const ImageRecord*>& images,
                    const EvalConfig& cfg) {
  cfg.solver.validate();
  EvalReport report;
  for (const auto& [ratio, model] : models) {
    if (model == nullptr) throw ConfigError("missing model");
    if (!(ratio > 0.0 && ratio <= 1.0)) throw ConfigError("cs ratio must lie in (0, 1]");
    const std::size_t n = model->stp.n;
    if (model->stp.m != size_for_ratio(n, ratio)) {
      throw ConfigError("model has m = " + std::to_string(model->stp.m) + " but ratio " +
                        std::to_string(ratio) + " needs m = " + std::to_string(size_for_ratio(n, ratio)));
    }
    for (const ImageRecord* img : images) {
      const Shape& s = img->image.shape();
      if (s.h != n || s.w != n) {
        throw ConfigError("image " + img->id + " is " + s.str() + ", model side is " + std::to_string(n));
      }
      const auto t0 = std::chrono::steady_clock::now();
      const Tensor y = measure(*model, img->image);
      Tensor recon;
      int iters = 0;
      if (cfg.method == Reconstructor::Initial) {
        recon = initial_reconstruct(*model, y);
      } else {
        Reconstruction r = reconstruct_deq(*model, y, cfg.solver, cfg.mask);
        recon = std::move(r.image);
        iters = r.solve.iterations;
      }
      const auto t1 = std::chrono::steady_clock::now();
      MetricsRecord rec;
      rec.image_id = img->id;
      rec.cs_ratio = ratio;
      rec.mask = cfg.mask;
      rec.psnr_db = psnr(recon, img->image);
      rec.ssim = ssim(recon, img->image);
      rec.iterations = iters;
      rec.seconds = std::chrono::duration<double>(t1 - t0).count();
      report.records.push_back(std::move(rec));
    }
  }
  report.aggregates = aggregate(report.records);
  return report;
}

EvalReport evaluate(const std::vector<RatioModel>& models, const Dataset& data, const EvalConfig& cfg) {
  std::vector<const ImageRecord*> images;
  for (const auto& r : data.records) images.push_back(&r);
  return evaluate(models, images, cfg);
}

EvalReport ablate(const RatioModel& model, const std::vector<const ImageRecord*>& images,
                  const std::vector<BranchMask>& masks, const EvalConfig& cfg) {
  EvalReport report;
  for (const BranchMask& mask : masks) {
    EvalConfig c = cfg;
    c.mask = mask;
    EvalReport part = evaluate({model}, images, c);
    report.records.insert(report.records.end(), part.records.begin(), part.records.end());
  }
  report.aggregates = aggregate(report.records);
  return report;
}

std::vector<BranchMask> parse_masks(const std::vector<std::string>& bits) {
  std::vector<BranchMask> out;
  out.reserve(bits.size());
  for (const auto& b : bits) out.push_back(parse_mask(b));
  return out;
}

std::vector<BranchMask> single_branch_masks() {
  std::vector<BranchMask> out{kAllBranches, kNoBranches};
  for (std::size_t i = 0; i < kBranches; ++i) {
    BranchMask m{};
    m[i] = true;
    out.push_back(m);
  }
  return out;
}

void write_metrics_csv(std::ostream& os, const std::vector<MetricsRecord>& records) {
  os << "image_id,cs_ratio,mask,psnr_db,ssim,iters,seconds\n";
  char buf[256];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof buf, "%s,%.17g,%s,%.17g,%.17g,%d,%.6f\n", r.image_id.c_str(), r.cs_ratio,
                  mask_string(r.mask).c_str(), r.psnr_db, r.ssim, r.iterations, r.seconds);
    os << buf;
  }
}

std::vector<MetricsRecord> read_metrics_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != "image_id,cs_ratio,mask,psnr_db,ssim,iters,seconds") {
    throw IngestError("metrics CSV header mismatch");
  }
  std::vector<MetricsRecord> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 7) throw IngestError("metrics CSV row has " + std::to_string(f.size()) + " fields");
    MetricsRecord r;
    try {
      r.image_id = f[0];
      r.cs_ratio = std::stod(f[1]);
      r.mask = parse_mask(f[2]);
      r.psnr_db = std::stod(f[3]);
      r.ssim = std::stod(f[4]);
      r.iterations = std::stoi(f[5]);
      r.seconds = std::stod(f[6]);
    } catch (const std::exception& e) {
      throw IngestError(std::string("bad metrics CSV row: ") + e.what());
    }
    out.push_back(std::move(r));
  }
  return out;
}

namespace {

std::string ratio_label(double ratio) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g%%", ratio * 100.0);
  return buf;
}

std::string pad(const std::string& s, std::size_t w) {
  return s.size() >= w ? s : s + std::string(w - s.size(), ' ');
}

std::string join_branches(const BranchMask& mask, bool state) {
  std::string out;
  for (std::size_t i = 0; i < kBranches; ++i) {
    if (mask[i] != state) continue;
    if (!out.empty()) out += '+';
    out += std::to_string(i + 1);
  }
  return out;
}

}  // namespace

std::string format_ratio_table(const std::vector<MethodRow>& rows) {
  std::vector<double> ratios;
  for (const auto& row : rows)
    for (const auto& a : row.by_ratio)
      if (std::find(ratios.begin(), ratios.end(), a.cs_ratio) == ratios.end()) ratios.push_back(a.cs_ratio);
  std::sort(ratios.begin(), ratios.end());

  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> header{"CS ratio"};
  for (double r : ratios) header.push_back(ratio_label(r));
  cells.push_back(header);
  for (const auto& row : rows) {
    std::vector<std::string> line{row.label};
    for (double r : ratios) {
      auto it = std::find_if(row.by_ratio.begin(), row.by_ratio.end(),
                             [r](const Aggregate& a) { return a.cs_ratio == r; });
      if (it == row.by_ratio.end()) {
        line.push_back("-");
      } else {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.2f/%.4f", it->psnr_db, it->ssim);
        line.push_back(buf);
      }
    }
    cells.push_back(line);
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& line : cells)
    for (std::size_t j = 0; j < line.size(); ++j) width[j] = std::max(width[j], line[j].size());
  std::ostringstream os;
  os << "Mean PSNR (dB)/SSIM\n";
  for (const auto& line : cells) {
    for (std::size_t j = 0; j < line.size(); ++j) os << pad(line[j], width[j] + 2);
    os << '\n';
  }
  return os.str();
}

std::string mask_label(const BranchMask& mask, Framing framing) {
  const bool all = mask == kAllBranches, none = mask == kNoBranches;
  if (framing == Framing::Connected) {
    if (all) return "All";
    if (none) return "None";
    return join_branches(mask, true);
  }
  if (all) return "None";
  if (none) return "All";
  return join_branches(mask, false);
}

std::string format_ablation_table(const std::vector<Aggregate>& aggregates, Framing framing) {
  std::vector<std::string> head{framing == Framing::Connected ? "Connected branch" : "Disconnected branch"};
  std::vector<std::string> ssim_row{"SSIM"}, psnr_row{"PSNR"};
  char buf[32];
  for (const auto& a : aggregates) {
    head.push_back(mask_label(a.mask, framing));
    std::snprintf(buf, sizeof buf, "%.4f", a.ssim);
    ssim_row.push_back(buf);
    std::snprintf(buf, sizeof buf, "%.2f", a.psnr_db);
    psnr_row.push_back(buf);
  }
  std::vector<std::size_t> width(head.size());
  for (std::size_t j = 0; j < head.size(); ++j) {
    width[j] = std::max({head[j].size(), ssim_row[j].size(), psnr_row[j].size()});
  }
  std::ostringstream os;
  for (const auto* row : {&head, &ssim_row, &psnr_row}) {
    for (std::size_t j = 0; j < row->size(); ++j) os << pad((*row)[j], width[j] + 2);
    os << '\n';
  }
  return os.str();
}

}  // namespace msdc
