#include "msdc/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "msdc/dataset.hpp"
#include "msdc/errors.hpp"
#include "msdc/evaluate.hpp"
#include "msdc/io.hpp"
#include "msdc/ista.hpp"
#include "msdc/metrics.hpp"
#include "msdc/model.hpp"
#include "msdc/training.hpp"

namespace msdc {

namespace {

using Clock = std::chrono::steady_clock;

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

Model load_model(const std::string& path) {
  try {
    return load_checkpoint(path);
  } catch (const ConfigError& e) {
    throw IngestError(e.what());
  }
}

struct SolverFlags {
  int max_iter = 50;
  double tol = 1e-5;
  int memory = 5;
  double beta = 1.0;
  std::string mask = "1111111";

  void add(CLI::App* app) {
    app->add_option("--max-iter", max_iter, "solver iteration cap")->capture_default_str();
    app->add_option("--tol", tol, "relative residual tolerance")->capture_default_str();
    app->add_option("--memory", memory, "Anderson memory")->capture_default_str();
    app->add_option("--beta", beta, "Anderson mixing")->capture_default_str();
    app->add_option("--mask", mask, "7-character branch mask")->capture_default_str();
  }
  SolverConfig solver() const {
    SolverConfig c;
    c.max_iter = max_iter;
    c.tol = tol;
    c.anderson_memory = memory;
    c.beta = beta;
    c.validate();
    return c;
  }
};

Split parse_split(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  throw ArgumentError("unknown split '" + s + "'");
}

std::vector<const ImageRecord*> select(const Dataset& d, const std::string& split) {
  if (split == "all") {
    std::vector<const ImageRecord*> out;
    for (const ImageRecord& r : d.records) out.push_back(&r);
    return out;
  }
  return d.subset(parse_split(split));
}

void write_csv_file(const std::string& path, const std::vector<MetricsRecord>& records) {
  std::ofstream os(path);
  if (!os) throw IngestError("cannot write " + path);
  write_metrics_csv(os, records);
}

// ---------------------------------------------------------------- sample

struct SampleCmd {
  std::string image, checkpoint, init = "gaussian", out;
  double ratio = 0.25;
  std::uint64_t seed = 0;

  void add(CLI::App* app) {
    app->add_option("--image", image, "input PGM")->required();
    app->add_option("--ratio", ratio, "CS ratio for a seeded sampler")->capture_default_str();
    app->add_option("--checkpoint", checkpoint, "trained model");
    app->add_option("--seed", seed, "sampler seed")->capture_default_str();
    app->add_option("--init", init, "seeded sampler kind")->check(CLI::IsMember({"gaussian", "identity"}));
    app->add_option("--out", out, "measurement file")->required();
  }

  int run(std::ostream& out_s) const {
    const GrayImage img = read_pgm(image);
    if (img.width != img.height) {
      throw ShapeError(std::to_string(img.width) + "x" + std::to_string(img.height) + " image is not square");
    }
    StpOperator op;
    if (!checkpoint.empty()) {
      op = load_model(checkpoint).stp;
      if (op.n != img.width) {
        throw ShapeError("image side " + std::to_string(img.width) + " does not match checkpoint side " +
                         std::to_string(op.n));
      }
    } else if (init == "identity") {
      op = StpOperator::identity(img.width);
    } else {
      op = Model::init(img.width, ratio, BlockConfig{}, seed).stp;
    }
    const Matrix y = measure(to_matrix(to_unit_tensor(img)), op);
    write_measurement(out, y, static_cast<std::uint32_t>(op.n));
    out_s << "measurement " << y.rows() << "x" << y.cols() << " from " << op.n << "x" << op.n
          << " ratio=" << fmt("%.6f", op.cs_ratio()) << "\n";
    return kExitOk;
  }
};

// ---------------------------------------------------------------- reconstruct

struct ReconstructCmd {
  std::string measurement, checkpoint, init = "gaussian", solver = "deq", out;
  std::uint64_t seed = 0;
  double lambda = 0.01;
  SolverFlags flags;

  void add(CLI::App* app) {
    app->add_option("--measurement", measurement, "MSDY file")->required();
    app->add_option("--checkpoint", checkpoint, "trained model");
    app->add_option("--seed", seed, "seeded model when no checkpoint is given")->capture_default_str();
    app->add_option("--init", init, "seeded sampler kind")->check(CLI::IsMember({"gaussian", "identity"}));
    app->add_option("--solver", solver, "deq | ista-classic | initial")
        ->check(CLI::IsMember({"deq", "ista-classic", "initial"}))
        ->capture_default_str();
    app->add_option("--lambda", lambda, "l1 weight for ista-classic")->capture_default_str();
    flags.add(app);
    app->add_option("--out", out, "output PGM")->required();
  }

  int run(std::ostream& os) const {
    const MeasurementFile mf = read_measurement(measurement);
    const std::size_t n = mf.image_side;
    if (mf.y.rows() != mf.y.cols()) throw ShapeError("measurement is not square");
    const auto m = static_cast<std::size_t>(mf.y.rows());
    Model model;
    if (!checkpoint.empty()) {
      model = load_model(checkpoint);
    } else if (init == "identity") {
      model = Model::identity(n, BlockConfig{}, seed);
    } else {
      const double ratio = static_cast<double>(m * m) / static_cast<double>(n * n);
      model = Model::init(n, ratio, BlockConfig{}, seed);
    }
    if (model.stp.n != n || model.stp.m != m) {
      throw ShapeError("measurement " + std::to_string(m) + "x" + std::to_string(m) + " of a " +
                       std::to_string(n) + "-pixel image does not fit the model (" + std::to_string(model.stp.m) +
                       " from " + std::to_string(model.stp.n) + ")");
    }
    const Tensor y = to_tensor(mf.y);
    const auto t0 = Clock::now();
    Tensor image;
    if (solver == "initial") {
      image = initial_reconstruct(model, y);
      os << "solver=initial iterations=0 converged=true\n";
    } else if (solver == "ista-classic") {
      SparseProblem p{SensingOperator::from_stp(model.stp), vec_columns(mf.y), lambda, 1.0};
      p.rho = 1.0 / lipschitz_bound(p.phi);
      const IstaResult r = ista_solve(p, OrthoTransform::dct2d(n), flags.max_iter, flags.tol);
      image = to_tensor(unvec_columns(r.x, static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)));
      os << "solver=ista-classic iterations=" << r.iterations
         << " objective=" << fmt("%.6e", r.objective_trace.back())
         << " converged=" << (r.converged ? "true" : "false") << "\n";
    } else {
      const Reconstruction r = reconstruct_deq(model, y, flags.solver(), parse_mask(flags.mask));
      image = r.image;
      os << "solver=deq mask=" << flags.mask << " iterations=" << r.solve.iterations
         << " residual=" << fmt("%.6e", r.solve.residual_norm)
         << " converged=" << (r.solve.converged ? "true" : "false");
      if (r.diverged) os << " diverged=true";
      os << "\nresidual_trace=";
      for (std::size_t i = 0; i < r.solve.residual_trace.size(); ++i) {
        os << (i ? "," : "") << fmt("%.6e", r.solve.residual_trace[i]);
      }
      os << "\n";
    }
    os << "time=" << fmt("%.3f", seconds_since(t0)) << "s\n";
    write_pgm(out, from_unit_tensor(image));
    return kExitOk;
  }
};

// ---------------------------------------------------------------- train

struct TrainCmd {
  std::string data_dir, out_checkpoint, log, mask = "1111111", adjoint_fallback = "neumann";
  double ratio = 0.0;
  SplitFractions fractions;
  TrainConfig cfg;
  BlockConfig block;
  double forward_tol = cfg.forward.tol, backward_tol = cfg.backward.tol;
  int forward_iters = cfg.forward.max_iter, backward_iters = cfg.backward.max_iter;
  int memory = cfg.forward.anderson_memory;

  void add(CLI::App* app) {
    app->add_option("--data-dir", data_dir, "directory of PGM images")->required();
    app->add_option("--ratio", ratio, "CS ratio")->required();
    app->add_option("--out-checkpoint", out_checkpoint, "trained model path")->required();
    app->add_option("--log", log, "per-epoch CSV log");
    app->add_option("--val-fraction", fractions.val, "validation share of the images")->capture_default_str();
    app->add_option("--test-fraction", fractions.test, "held-out share of the images")->capture_default_str();
    app->add_option("--seed", cfg.seed, "split, shuffle and init seed")->capture_default_str();
    app->add_option("--lr", cfg.lr, "Adam learning rate")->capture_default_str();
    app->add_option("--batch", cfg.batch, "minibatch size")->capture_default_str();
    app->add_option("--epochs", cfg.epochs, "epoch count")->capture_default_str();
    app->add_option("--steps", cfg.steps, "exact step budget (overrides epochs)")->capture_default_str();
    app->add_option("--gamma-sym", cfg.gamma_sym, "symmetry loss weight")->capture_default_str();
    app->add_option("--gamma-init", cfg.gamma_init, "initial reconstruction loss weight")->capture_default_str();
    app->add_option("--image-side", cfg.image_side, "crop side n")->capture_default_str();
    app->add_option("--channels", block.channels, "feature channels C")->capture_default_str();
    app->add_option("--cardinality", block.cardinality, "ResNeXt groups")->capture_default_str();
    app->add_option("--se-reduction", block.se_reduction, "SE reduction")->capture_default_str();
    app->add_option("--head-gain", block.head_gain, "initial head kernel scale, 0 = start from the IRB")
        ->capture_default_str();
    app->add_option("--forward-max-iter", forward_iters, "training forward solve cap")->capture_default_str();
    app->add_option("--forward-tol", forward_tol, "training forward tolerance")->capture_default_str();
    app->add_option("--backward-max-iter", backward_iters, "adjoint solve cap")->capture_default_str();
    app->add_option("--backward-tol", backward_tol, "adjoint tolerance")->capture_default_str();
    app->add_option("--adjoint-fallback", adjoint_fallback, "gradient when the adjoint solve stalls")
        ->check(CLI::IsMember({"neumann", "jacobian-free"}))
        ->capture_default_str();
    app->add_option("--grad-clip", cfg.grad_clip, "global gradient norm cap, 0 = off")->capture_default_str();
    app->add_option("--memory", memory, "Anderson memory")->capture_default_str();
    app->add_option("--mask", mask, "7-character branch mask")->capture_default_str();
  }

  int run(std::ostream& os, std::ostream& err) {
    cfg.cs_ratio = ratio;
    cfg.adjoint_fallback =
        adjoint_fallback == "jacobian-free" ? AdjointFallback::JacobianFree : AdjointFallback::Neumann;
    cfg.mask = parse_mask(mask);
    cfg.forward.max_iter = forward_iters;
    cfg.forward.tol = forward_tol;
    cfg.forward.anderson_memory = memory;
    cfg.backward.max_iter = backward_iters;
    cfg.backward.tol = backward_tol;
    cfg.backward.anderson_memory = memory;
    cfg.validate();
    block.validate();

    if (fractions.val < 0.0 || fractions.test < 0.0 || fractions.val + fractions.test > 1.0) {
      throw ArgumentError("split fractions must be non-negative and sum to at most 1");
    }
    fractions.train = 1.0 - fractions.val - fractions.test;
    const Dataset data = ingest(data_dir, cfg.image_side, fractions, cfg.seed);
    for (const std::string& w : data.warnings) err << "warning: " << w << "\n";
    if (data.count(Split::Train) == 0) throw IngestError("no training images in " + data_dir);
    os << "images train=" << data.count(Split::Train) << " val=" << data.count(Split::Val)
       << " test=" << data.count(Split::Test) << "\n";

    std::ofstream log_os;
    if (!log.empty()) {
      log_os.open(log);
      if (!log_os) throw IngestError("cannot write " + log);
      log_os << "epoch,steps,loss,sym_hmse,psnr,psnr_init,aborted\n";
    }
    const auto t0 = Clock::now();
    const TrainResult r = train(
        Model::init(cfg.image_side, cfg.cs_ratio, block, cfg.seed), data, cfg, {},
        [&](const EpochLog& e, const Model&) {
          os << "epoch " << e.epoch << " steps=" << e.steps << " loss=" << fmt("%.6e", e.loss)
             << " sym=" << fmt("%.6e", e.sym_hmse) << " psnr=" << fmt("%.3f", e.psnr)
             << " psnr_init=" << fmt("%.3f", e.psnr_init) << (e.aborted ? " aborted" : "") << "\n";
          if (log_os.is_open()) {
            log_os << e.epoch << "," << e.steps << "," << fmt("%.17g", e.loss) << "," << fmt("%.17g", e.sym_hmse)
                   << "," << fmt("%.17g", e.psnr) << "," << fmt("%.17g", e.psnr_init) << ","
                   << (e.aborted ? 1 : 0) << "\n";
          }
        });
    for (const std::string& d : r.diagnostics) err << "diagnostic: " << d << "\n";
    save_checkpoint(out_checkpoint, r.model);
    os << "trained " << r.steps.size() << " steps in " << fmt("%.1f", seconds_since(t0)) << "s -> "
       << out_checkpoint << "\n";
    return kExitOk;
  }
};

// ---------------------------------------------------------------- eval / ablate

struct EvalFlags {
  std::string data_dir, out_csv, split = "test", solver = "deq";
  std::uint64_t seed = 0;
  SolverFlags flags;

  void add(CLI::App* app) {
    app->add_option("--data-dir", data_dir, "directory of PGM images")->required();
    app->add_option("--out-csv", out_csv, "per-image metrics CSV");
    app->add_option("--split", split, "train | val | test | all")
        ->check(CLI::IsMember({"train", "val", "test", "all"}))
        ->capture_default_str();
    app->add_option("--seed", seed, "split seed")->capture_default_str();
    app->add_option("--solver", solver, "deq | initial")->check(CLI::IsMember({"deq", "initial"}))->capture_default_str();
    flags.add(app);
  }
  EvalConfig config() const {
    EvalConfig c;
    c.solver = flags.solver();
    c.mask = parse_mask(flags.mask);
    c.method = solver == "initial" ? Reconstructor::Initial : Reconstructor::Deq;
    return c;
  }
  Dataset load(std::size_t side, std::ostream& err) const {
    Dataset d = ingest(data_dir, side, SplitFractions{}, seed);
    for (const std::string& w : d.warnings) err << "warning: " << w << "\n";
    return d;
  }
};

struct EvalCmd {
  std::vector<std::string> checkpoints;
  EvalFlags common;

  void add(CLI::App* app) {
    app->add_option("--checkpoints", checkpoints, "ratio=path pairs")->required();
    common.add(app);
  }

  int run(std::ostream& os, std::ostream& err) const {
    std::vector<Model> models;
    std::vector<double> ratios;
    models.reserve(checkpoints.size());
    for (const std::string& entry : checkpoints) {
      const auto eq = entry.find('=');
      if (eq == std::string::npos) throw ArgumentError("--checkpoints expects ratio=path, got '" + entry + "'");
      try {
        ratios.push_back(std::stod(entry.substr(0, eq)));
      } catch (const std::exception&) {
        throw ArgumentError("bad ratio in '" + entry + "'");
      }
      models.push_back(load_model(entry.substr(eq + 1)));
      if (models.back().stp.n != models.front().stp.n) throw ConfigError("checkpoints disagree on the image side");
    }
    std::vector<RatioModel> rm;
    for (std::size_t i = 0; i < models.size(); ++i) rm.push_back({ratios[i], &models[i]});

    const Dataset data = common.load(models.front().stp.n, err);
    const auto images = select(data, common.split);
    if (images.empty()) throw IngestError("split '" + common.split + "' is empty");
    const EvalReport rep = evaluate(rm, images, common.config());
    if (!common.out_csv.empty()) write_csv_file(common.out_csv, rep.records);
    os << format_ratio_table({MethodRow{common.solver == "initial" ? "Initial" : "DEQ", rep.aggregates}});
    return kExitOk;
  }
};

struct AblateCmd {
  std::string checkpoint, framing = "connected";
  std::vector<std::string> masks;
  EvalFlags common;

  void add(CLI::App* app) {
    app->add_option("--checkpoint", checkpoint, "trained model")->required();
    app->add_option("--masks", masks, "7-character masks (default: all, none, single branches)");
    app->add_option("--framing", framing, "connected | disconnected")
        ->check(CLI::IsMember({"connected", "disconnected"}))
        ->capture_default_str();
    common.add(app);
  }

  int run(std::ostream& os, std::ostream& err) const {
    const Model model = load_model(checkpoint);
    const std::vector<BranchMask> set = masks.empty() ? single_branch_masks() : parse_masks(masks);
    const Dataset data = common.load(model.stp.n, err);
    const auto images = select(data, common.split);
    if (images.empty()) throw IngestError("split '" + common.split + "' is empty");
    const EvalReport rep = ablate(RatioModel{model.stp.cs_ratio(), &model}, images, set, common.config());
    if (!common.out_csv.empty()) write_csv_file(common.out_csv, rep.records);
    os << format_ablation_table(rep.aggregates, framing == "connected" ? Framing::Connected : Framing::Disconnected);
    return kExitOk;
  }
};

// ---------------------------------------------------------------- gen-synthetic

struct GenCmd {
  std::string kind, out_dir;
  std::size_t n = 64, count = 10, spikes = 5;
  std::uint64_t seed = 0;

  void add(CLI::App* app) {
    app->add_option("--kind", kind, "sparse-spikes | piecewise | gaussian-blobs")->required();
    app->add_option("--n", n, "image side")->capture_default_str();
    app->add_option("--count", count, "number of images")->capture_default_str();
    app->add_option("--spikes", spikes, "nonzero pixels for sparse-spikes")->capture_default_str();
    app->add_option("--seed", seed, "generator seed")->capture_default_str();
    app->add_option("--out-dir", out_dir, "output directory")->required();
  }

  int run(std::ostream& os) const {
    std::filesystem::create_directories(out_dir);
    const auto paths = write_synthetic_set(parse_synthetic_kind(kind), n, count, seed, out_dir, spikes);
    os << "wrote " << paths.size() << " images to " << out_dir << "\n";
    return kExitOk;
  }
};

// Appends "--key value" for every config entry that the command line does not set.
std::vector<std::string> merge_config(const std::vector<std::string>& args, CLI::App* sub) {
  std::string path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (path.empty()) return args;

  std::vector<std::string> allowed;
  for (const CLI::Option* opt : sub->get_options()) {
    const std::string name = opt->get_single_name();
    if (!name.empty() && name != "help" && name != "config") allowed.push_back(name);
  }
  const auto entries = read_config(path, allowed);
  std::vector<std::string> merged = args;
  for (const auto& [key, value] : entries) {
    const std::string flag = "--" + key;
    const bool given = std::any_of(args.begin() + 1, args.end(), [&](const std::string& a) {
      return a == flag || a.rfind(flag + "=", 0) == 0;
    });
    if (given) continue;
    merged.push_back(flag);
    std::istringstream words(value);
    for (std::string w; words >> w;) merged.push_back(w);
  }
  return merged;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Compressive sensing reconstruction with a multi-scale dilated equilibrium network", "msdc"};
  app.require_subcommand(1);

  SampleCmd sample;
  ReconstructCmd reconstruct;
  TrainCmd train_cmd;
  EvalCmd eval;
  AblateCmd ablate_cmd;
  GenCmd gen;
  std::string config;

  struct Entry {
    CLI::App* app;
    std::function<int()> run;
  };
  std::vector<Entry> commands;
  auto add = [&](const char* name, const char* help, auto& cmd, std::function<int()> run) {
    CLI::App* sub = app.add_subcommand(name, help);
    cmd.add(sub);
    sub->add_option("--config", config, "key = value file; flags override");
    commands.push_back({sub, std::move(run)});
  };
  add("sample", "measure an image", sample, [&] { return sample.run(out); });
  add("reconstruct", "recover an image from a measurement", reconstruct, [&] { return reconstruct.run(out); });
  add("train", "train sampler and block", train_cmd, [&] { return train_cmd.run(out, err); });
  add("eval", "PSNR/SSIM per CS ratio", eval, [&] { return eval.run(out, err); });
  add("ablate", "PSNR/SSIM per branch mask", ablate_cmd, [&] { return ablate_cmd.run(out, err); });
  add("gen-synthetic", "write synthetic test images", gen, [&] { return gen.run(out); });

  try {
    std::vector<std::string> merged = args;
    if (!args.empty()) {
      for (const Entry& e : commands) {
        if (e.app->get_name() == args[0]) merged = merge_config(args, e.app);
      }
    }
    std::reverse(merged.begin(), merged.end());
    app.parse(merged);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    for (const Entry& e : commands) {
      if (e.app->parsed()) return e.run();
    }
    return kExitUsage;
  } catch (const ShapeError& e) {
    err << "dimension error: " << e.what() << "\n";
    return kExitDimension;
  } catch (const IngestError& e) {
    err << "ingest error: " << e.what() << "\n";
    return kExitIngest;
  } catch (const ArgumentError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace msdc
