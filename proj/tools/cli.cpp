#include "cli.hpp"

#include <CLI11.hpp>

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "kneeflex/augment.hpp"
#include "kneeflex/checkpoint.hpp"
#include "kneeflex/dataset.hpp"
#include "kneeflex/error.hpp"
#include "kneeflex/goniometry.hpp"
#include "kneeflex/log.hpp"
#include "kneeflex/parallel.hpp"
#include "kneeflex/scenegen.hpp"
#include "kneeflex/trainer.hpp"

namespace kneeflex::cli {

namespace {

namespace fs = std::filesystem;

constexpr const char* kCheckpointFile = "checkpoint.eva";
constexpr const char* kHistoryFile = "history.csv";
constexpr const char* kPredictionsFile = "predictions.csv";
constexpr const char* kReportFile = "report.csv";
constexpr const char* kReportMetaFile = "report_meta.txt";

struct Globals {
  std::uint64_t seed = 0;
  std::string out = "kneeflex-out";
  bool quiet = false;
  int threads = 1;
};

struct GenerateArgs {
  int n = 1;
  double flex_min = 0.0;
  double flex_max = kMaxKneeFlexionDeg;
  double max_offset = 10.0;
  bool both_legs = false;
  std::string skin = "original";
};

struct ValidationArgs {
  int single = 25;
  int varied = 425;
  std::string real;
};

struct TrainArgs {
  std::string data;
  int scenario = 1;
  int epochs = 50;
  int batch = 32;
  float lr = 0.001f;
  float dropout = 0.5f;
  std::string backgrounds;
  double bg_sigma = 2.0;
  ValidationArgs val;
};

struct EvalArgs {
  std::string ckpt;
  std::string data;
  int batch = 32;
};

struct PredictArgs {
  std::string ckpt;
  std::vector<std::string> images;
  bool annotate = false;
};

struct AngleArgs {
  std::string points;
};

struct ExperimentArgs {
  std::vector<int> scenarios = {1, 2, 3, 4, 5, 6, 7, 8};
  int n = 3000;
  bool single_leg = false;
  std::string skin = "varied";
  int epochs = 50;
  int batch = 32;
  float lr = 0.001f;
  float dropout = 0.5f;
  std::string backgrounds;
  double bg_sigma = 2.0;
  ValidationArgs val;
};

SkinMode parse_skin(const std::string& s) { return s == "varied" ? SkinMode::Varied : SkinMode::Original; }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + path.string());
  f << text;
  if (!f) throw IoError("write failed: " + path.string());
}

void make_out_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::array<double, 6> parse_points(const std::string& text) {
  std::array<double, 6> v{};
  std::size_t pos = 0;
  for (int i = 0; i < 6; ++i) {
    const std::size_t comma = text.find(',', pos);
    if ((i < 5) != (comma != std::string::npos)) throw ConfigError("--points needs exactly six comma-separated numbers");
    const std::string field = text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    char* end = nullptr;
    errno = 0;
    v[static_cast<std::size_t>(i)] = std::strtod(field.c_str(), &end);
    if (field.empty() || end != field.c_str() + field.size() || errno != 0 || !std::isfinite(v[static_cast<std::size_t>(i)]))
      throw ConfigError("--points: not a number: '" + field + "'");
    pos = comma + 1;
  }
  return v;
}

ValidationSpec validation_spec(const ValidationArgs& a, int scenario) {
  ValidationSpec spec;
  spec.synth_single = a.single;
  spec.synth_varied = a.varied;
  if (!a.real.empty()) spec.real_dir = a.real;
  spec.scenario = scenario;
  return spec;
}

void require_backgrounds(int scenario, const std::string& dir) {
  if (Scenario::from_id(scenario).background && dir.empty())
    throw ConfigError("scenario " + std::to_string(scenario) + " needs --backgrounds");
}

void add_validation_flags(CLI::App* cmd, ValidationArgs& v) {
  cmd->add_option("--val-single", v.single, "Synthetic validation samples, one leg, original skin")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--val-varied", v.varied, "Synthetic validation samples, both legs, varied skin")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--val-real", v.real, "Directory of real labeled photos (labels.csv + N.png)")->capture_default_str();
}

// --- subcommands ------------------------------------------------------------

int do_generate(const Globals& g, const GenerateArgs& a, std::ostream& out) {
  GenerateConfig cfg;
  cfg.n_samples = a.n;
  cfg.flexion_range = {a.flex_min, a.flex_max};
  cfg.max_offset_deg = a.max_offset;
  cfg.both_legs = a.both_legs;
  cfg.skin_mode = parse_skin(a.skin);
  cfg.seed = g.seed;
  cfg.threads = g.threads;
  cfg.validate();
  generate_dataset(cfg, g.out);
  out << "wrote " << a.n << " samples to " << g.out << "\n";
  return kExitOk;
}

int do_train(const Globals& g, const TrainArgs& a, std::ostream& out) {
  TrainConfig tc;
  tc.scenario = a.scenario;
  tc.epochs = a.epochs;
  tc.batch_size = a.batch;
  tc.seed = g.seed;
  tc.lr = a.lr;
  tc.dropout_rate = a.dropout;
  tc.threads = g.threads;
  tc.validate();
  require_backgrounds(a.scenario, a.backgrounds);

  const auto dataset = load_dataset(a.data);
  std::optional<BackgroundPool> pool;
  if (!a.backgrounds.empty()) pool = prepare_backgrounds(a.backgrounds, a.bg_sigma);
  const BackgroundPool* bg = pool ? &*pool : nullptr;
  const auto validation = build_validation(validation_spec(a.val, a.scenario), g.seed, bg, g.threads);
  log::info("training on " + std::to_string(dataset.size()) + " samples, validating on " +
            std::to_string(validation.size()));

  const auto result = train(dataset, validation, tc, bg, [](const EpochStats& e) {
    log::info("epoch " + std::to_string(e.epoch) + " train " + fmt("%.4f", e.train_loss) + " val " +
              fmt("%.4f", e.val_loss));
  });

  const fs::path dir = g.out;
  make_out_dir(dir);
  save_checkpoint(result.best,
                  {static_cast<std::uint32_t>(result.best_epoch), static_cast<std::uint8_t>(a.scenario), g.seed},
                  dir / kCheckpointFile);
  write_text(dir / kHistoryFile, format_history_csv(result.history));
  out << "best epoch " << result.best_epoch << ", min train loss " << fmt("%.6f", result.min_train_loss())
      << ", min val loss " << fmt("%.6f", result.min_val_loss()) << "\n";
  return kExitOk;
}

int do_eval(const Globals& g, const EvalArgs& a, std::ostream& out) {
  auto ckpt = load_checkpoint(a.ckpt);
  ckpt.network.set_threads(g.threads);
  const auto samples = load_dataset(a.data);
  const auto r = evaluate(ckpt.network, samples, a.batch);
  out << "samples " << samples.size() << "\n";
  out << "mean_loss " << fmt("%.6f", r.mean_loss) << "\n";
  out << "thigh_error " << fmt("%.6f", r.per_point_error[0]) << "\n";
  out << "knee_error " << fmt("%.6f", r.per_point_error[1]) << "\n";
  out << "leg_error " << fmt("%.6f", r.per_point_error[2]) << "\n";
  return kExitOk;
}

int do_predict(const Globals& g, const PredictArgs& a, std::ostream& out) {
  auto ckpt = load_checkpoint(a.ckpt);
  ckpt.network.set_threads(g.threads);
  const fs::path dir = g.out;
  std::string csv = std::string(kPredictionsHeader) + "\n";
  std::vector<std::pair<fs::path, ImageRGBA>> annotated;
  for (const auto& path : a.images) {
    const ImageRGBA img = read_image(path);
    const KeypointLabel k = predict(ckpt.network, img);
    std::string row = fs::path(path).stem().string();
    for (double v : k.flat()) row += "," + fmt("%.3f", v);
    double angle = std::nan("");
    try {
      angle = flexion_angle(k);
    } catch (const DomainError&) {
      log::warn("degenerate prediction for " + path);
    }
    row += "," + fmt("%.2f", angle) + "\n";
    csv += row;
    if (a.annotate) {
      const ImageRGBA frame = img.is_frame() ? img : resize(img, kFrameWidth, kFrameHeight);
      annotated.emplace_back(dir / (fs::path(path).stem().string() + "_annotated.png"), annotate(frame, k));
    }
  }
  make_out_dir(dir);
  write_text(dir / kPredictionsFile, csv);
  for (const auto& [p, img] : annotated) write_png(p, img);
  out << csv;
  return kExitOk;
}

int do_angle(const AngleArgs& a, std::ostream& out) {
  const auto v = parse_points(a.points);
  out << fmt("%.2f", flexion_angle(KeypointLabel::from_flat(v))) << "\n";
  return kExitOk;
}

int do_experiment(const Globals& g, const ExperimentArgs& a, std::ostream& out) {
  ExperimentConfig cfg;
  cfg.scenarios = a.scenarios;
  cfg.training_set.n_samples = a.n;
  cfg.training_set.both_legs = !a.single_leg;
  cfg.training_set.skin_mode = parse_skin(a.skin);
  cfg.training_set.seed = g.seed;
  cfg.training_set.threads = g.threads;
  cfg.training_set.validate();
  cfg.train.epochs = a.epochs;
  cfg.train.batch_size = a.batch;
  cfg.train.seed = g.seed;
  cfg.train.lr = a.lr;
  cfg.train.dropout_rate = a.dropout;
  cfg.train.threads = g.threads;
  cfg.train.validate();
  for (int s : a.scenarios) require_backgrounds(s, a.backgrounds);
  cfg.validation = validation_spec(a.val, 1);
  if (!a.backgrounds.empty()) cfg.backgrounds_dir = a.backgrounds;
  cfg.background_sigma = a.bg_sigma;

  const auto report = run_experiments(cfg, [](const EpochStats& e) {
    log::info("  epoch " + std::to_string(e.epoch) + " train " + fmt("%.4f", e.train_loss) + " val " +
              fmt("%.4f", e.val_loss));
  });

  const fs::path dir = g.out;
  make_out_dir(dir);
  const std::string csv = format_report_csv(report);
  write_text(dir / kReportFile, csv);
  std::string meta = "validation_size=" + std::to_string(report.validation_size) + "\n" +
                     "real_subset=" + (report.real_subset ? "yes" : "no") + "\n" +
                     "training_samples=" + std::to_string(a.n) + "\n";
  for (const auto& f : report.failures) meta += "failure=" + f + "\n";
  write_text(dir / kReportMetaFile, meta);
  for (const auto& row : report.rows)
    write_text(dir / ("history_scenario" + std::to_string(row.scenario) + ".csv"), format_history_csv(row.history));
  out << csv;
  return report.failures.empty() ? kExitOk : kExitRuntime;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Synthetic knee-flexion data, Eva keypoint CNN training, and goniometry"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", "kneeflex 0.1.0");

  Globals g;
  g.threads = default_threads();
  app.add_option("--seed", g.seed, "Master seed for every random draw")->capture_default_str();
  app.add_option("--out", g.out, "Output directory")->capture_default_str();
  app.add_flag("--quiet", g.quiet, "Suppress progress messages on stderr");
  app.add_option("--threads", g.threads, "Worker threads (GONIO_THREADS is the fallback)")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);

  GenerateArgs ga;
  auto* gen = app.add_subcommand("generate", "Render a labeled synthetic dataset into --out");
  gen->add_option("--n", ga.n, "Number of samples")->capture_default_str()->check(CLI::PositiveNumber);
  gen->add_option("--flex-min", ga.flex_min, "Lowest knee flexion in degrees")->capture_default_str();
  gen->add_option("--flex-max", ga.flex_max, "Highest knee flexion in degrees")->capture_default_str();
  gen->add_option("--max-offset", ga.max_offset, "Largest camera yaw/pitch offset in degrees")->capture_default_str();
  gen->add_flag("--both-legs", ga.both_legs, "Render the resting second leg")->capture_default_str();
  gen->add_option("--skin", ga.skin, "Skin texture mode")
      ->capture_default_str()
      ->check(CLI::IsMember({"original", "varied"}));

  TrainArgs ta;
  auto* tr = app.add_subcommand("train", "Train Eva on a dataset; writes checkpoint.eva and history.csv");
  tr->add_option("--data", ta.data, "Dataset directory (labels.csv + N.png)")->required();
  tr->add_option("--scenario", ta.scenario, "Augmentation scenario 1..8")->capture_default_str()->check(CLI::Range(1, 8));
  tr->add_option("--epochs", ta.epochs, "Training epochs")->capture_default_str()->check(CLI::PositiveNumber);
  tr->add_option("--batch", ta.batch, "Mini-batch size")->capture_default_str()->check(CLI::PositiveNumber);
  tr->add_option("--lr", ta.lr, "RMSProp learning rate")->capture_default_str();
  tr->add_option("--dropout", ta.dropout, "Dropout rate before the dense layers")->capture_default_str();
  tr->add_option("--backgrounds", ta.backgrounds, "Background image directory (scenarios 4, 8)")->capture_default_str();
  tr->add_option("--bg-sigma", ta.bg_sigma, "Background blur sigma in pixels")->capture_default_str();
  add_validation_flags(tr, ta.val);

  EvalArgs ea;
  auto* ev = app.add_subcommand("eval", "Report the mean loss of a checkpoint on a dataset");
  ev->add_option("--ckpt", ea.ckpt, "Checkpoint file")->required();
  ev->add_option("--data", ea.data, "Dataset directory (labels.csv + N.png)")->required();
  ev->add_option("--batch", ea.batch, "Inference batch size")->capture_default_str()->check(CLI::PositiveNumber);

  PredictArgs pa;
  auto* pr = app.add_subcommand("predict", "Predict keypoints and flexion angle; writes predictions.csv");
  pr->add_option("--ckpt", pa.ckpt, "Checkpoint file")->required();
  pr->add_option("--image", pa.images, "Input image (PNG or JPEG); repeatable")->required();
  pr->add_flag("--annotate", pa.annotate, "Also write <name>_annotated.png with the keypoint polyline")
      ->capture_default_str();

  AngleArgs aa;
  auto* an = app.add_subcommand("angle", "Print the flexion angle of three keypoints");
  an->add_option("--points", aa.points, "thigh_x,thigh_y,knee_x,knee_y,leg_x,leg_y")->required();

  ExperimentArgs xa;
  auto* ex = app.add_subcommand("experiment", "Train one Eva per scenario; writes report.csv");
  ex->add_option("--scenarios", xa.scenarios, "Comma-separated scenario ids")
      ->delimiter(',')
      ->capture_default_str()
      ->check(CLI::Range(1, 8));
  ex->add_option("--n", xa.n, "Generated training samples")->capture_default_str()->check(CLI::PositiveNumber);
  ex->add_flag("--single-leg", xa.single_leg, "Training set without the resting second leg")->capture_default_str();
  ex->add_option("--skin", xa.skin, "Training-set skin mode")
      ->capture_default_str()
      ->check(CLI::IsMember({"original", "varied"}));
  ex->add_option("--epochs", xa.epochs, "Training epochs per scenario")->capture_default_str()->check(CLI::PositiveNumber);
  ex->add_option("--batch", xa.batch, "Mini-batch size")->capture_default_str()->check(CLI::PositiveNumber);
  ex->add_option("--lr", xa.lr, "RMSProp learning rate")->capture_default_str();
  ex->add_option("--dropout", xa.dropout, "Dropout rate before the dense layers")->capture_default_str();
  ex->add_option("--backgrounds", xa.backgrounds, "Background image directory (scenarios 4, 8)")->capture_default_str();
  ex->add_option("--bg-sigma", xa.bg_sigma, "Background blur sigma in pixels")->capture_default_str();
  add_validation_flags(ex, xa.val);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  log::set_quiet(g.quiet);
  try {
    if (*gen) return do_generate(g, ga, out);
    if (*tr) return do_train(g, ta, out);
    if (*ev) return do_eval(g, ea, out);
    if (*pr) return do_predict(g, pa, out);
    if (*an) return do_angle(aa, out);
    if (*ex) return do_experiment(g, xa, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace kneeflex::cli
