#include "cli.h"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "dgnet/checkpoint.h"
#include "dgnet/dataset.h"
#include "dgnet/error.h"
#include "dgnet/metrics.h"
#include "dgnet/model.h"
#include "dgnet/pgm.h"
#include "dgnet/run_config.h"
#include "dgnet/speckle.h"
#include "dgnet/trainer.h"

namespace dgnet::cli {

namespace fs = std::filesystem;

namespace {

// Flag values are kept as text and routed through RunConfig::set so a flag
// and the matching config-file key validate identically.
struct Overrides {
  std::string config_path;
  std::map<std::string, std::string> values;
  bool alternating = false;

  void add(CLI::App* app, const std::string& flag, const std::string& key,
           const std::string& help) {
    app->add_option_function<std::string>(
        flag, [this, key](const std::string& v) { values[key] = v; }, help);
  }

  RunConfig resolve(RunConfig base) const {
    if (!config_path.empty()) base = load_run_config(config_path, base);
    for (const auto& [key, value] : values) base.set(key, value);
    if (alternating) base.train.alternating = true;
    base.validate();
    return base;
  }
};

fs::path manifest_of(const std::string& data) {
  const fs::path p(data);
  return fs::is_directory(p) ? p / "manifest.tsv" : p;
}

std::string stem_of(const std::string& rel) { return fs::path(rel).stem().string(); }

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw IoError("write failed: " + path.string());
}

// scale.NNNNN entries of a synth meta.txt, keyed by image stem.
std::map<std::string, double> read_scales(const fs::path& meta_path) {
  std::map<std::string, double> scales;
  std::ifstream in(meta_path);
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("scale.", 0) != 0) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    try {
      scales[line.substr(6, eq - 6)] = std::stod(line.substr(eq + 1));
    } catch (const std::exception&) {
      throw IoError(meta_path.string() + ": malformed line '" + line + "'");
    }
  }
  return scales;
}

int cmd_synth(const RunConfig& rc, const std::string& out_dir, std::ostream& out) {
  const fs::path manifest = synth_dataset(rc.scene, rc.count, out_dir);
  out << manifest.string() << "\n";
  return kExitOk;
}

int cmd_train(RunConfig rc, const std::string& data, const std::string& model_path,
              std::ostream& out) {
  rc.train.checkpoint_path = model_path;
  const auto dataset = load_dataset(manifest_of(data), rc.model.input_size);
  if (dataset.empty()) throw ValidationError("train: dataset " + data + " is empty");
  train(dataset, rc.model, rc.train, [&out](const CurveRecord& r) {
    char line[160];
    std::snprintf(line, sizeof(line), "epoch %lld loss %.6f kl %.6f nll %.6f\n",
                  static_cast<long long>(r.epoch), r.loss, r.kl, r.nll);
    out << line << std::flush;
  });
  return kExitOk;
}

int cmd_segment(const RunConfig& rc, const std::string& model_path, const std::string& data,
                const std::string& out_dir, std::ostream& out) {
  DgNet model = load_checkpoint(model_path);
  const fs::path manifest = manifest_of(data);
  const auto entries = read_manifest(manifest);
  const fs::path root = manifest.parent_path();
  for (const ManifestEntry& e : entries) {
    const Image image = load_image(root / e.image, model.config().input_size);
    const Segmentation seg = segment(model, image, rc.threshold);
    const std::string mask_rel = e.mask.empty() ? "masks/" + stem_of(e.image) + ".pgm" : e.mask;
    const fs::path mask_path = fs::path(out_dir) / mask_rel;
    const fs::path prob_path = fs::path(out_dir) / "probs" / (stem_of(e.image) + ".pgm");
    ensure_dir(mask_path.parent_path());
    ensure_dir(prob_path.parent_path());
    write_pgm(seg.mask, mask_path, 8);
    write_pgm(seg.prob, prob_path, 16);
  }
  out << "segmented " << entries.size() << " images into " << out_dir << "\n";
  return kExitOk;
}

int cmd_eval(const std::string& data, const std::string& pred_dir, const std::string& out_dir,
             std::ostream& out) {
  const fs::path manifest = manifest_of(data);
  const auto entries = read_manifest(manifest);
  if (entries.empty()) throw ValidationError("eval: dataset " + data + " is empty");
  const fs::path root = manifest.parent_path();
  std::vector<Image> gts, preds;
  std::vector<std::string> names;
  for (const ManifestEntry& e : entries) {
    if (e.mask.empty()) throw IoError(manifest.string() + ": no mask listed for " + e.image);
    Image gt = threshold(read_pgm(root / e.mask), 0.5f);
    Image pred = threshold(read_pgm(fs::path(pred_dir) / e.mask), 0.5f);
    pred = resize_nearest(pred, gt.height, gt.width);
    gts.push_back(std::move(gt));
    preds.push_back(std::move(pred));
    names.push_back(stem_of(e.mask));
  }
  std::vector<MaskPair> pairs;
  for (std::size_t i = 0; i < gts.size(); ++i) pairs.push_back({names[i], &gts[i], &preds[i]});
  const BatchReport report = batch_eval(pairs);

  std::ostringstream report_csv, summary_csv;
  write_report_csv(report, report_csv);
  write_summary_csv(report, summary_csv);
  if (out_dir.empty()) {
    out << report_csv.str() << "\n" << summary_csv.str() << "\n";
  } else {
    ensure_dir(out_dir);
    write_text(fs::path(out_dir) / "report.csv", report_csv.str());
    write_text(fs::path(out_dir) / "summary.csv", summary_csv.str());
  }
  const MetricsReport& p = report.pooled;
  char line[256];
  std::snprintf(line, sizeof(line),
                "pooled accuracy %.6f precision %.6f recall %.6f f1 %.6f iou %.6f rfr %.6f\n",
                p.accuracy, p.precision, p.recall, p.f1, p.iou, p.rfr);
  out << line << format_confusion_matrix(p);
  return kExitOk;
}

int cmd_distfit(const std::string& data, std::ostream& out) {
  const fs::path manifest = manifest_of(data);
  const auto entries = read_manifest(manifest);
  const fs::path root = manifest.parent_path();
  const auto scales = read_scales(root / "meta.txt");
  std::vector<double> oil, background;
  for (const ManifestEntry& e : entries) {
    if (e.mask.empty()) throw IoError(manifest.string() + ": no mask listed for " + e.image);
    const Image image = read_pgm(root / e.image);
    const Image mask = read_pgm(root / e.mask);
    if (mask.height != image.height || mask.width != image.width) {
      throw ValidationError("distfit: mask size differs from image " + e.image);
    }
    const auto it = scales.find(stem_of(e.image));
    const double scale = it == scales.end() ? 1.0 : it->second;
    for (std::int64_t i = 0; i < image.size(); ++i) {
      const double v = image.pixels[i] * scale;
      (mask.pixels[i] >= 0.5f ? oil : background).push_back(v);
    }
  }
  out << "region,pixels,rate,mean_intensity\n";
  char line[160];
  for (const auto& [name, values] : {std::pair{"oil", &oil}, std::pair{"background", &background}}) {
    if (values->empty()) {
      out << name << ",0,nan,nan\n";
      continue;
    }
    const ExponentialModel m = exp_fit_mle(*values);
    std::snprintf(line, sizeof(line), "%s,%zu,%.9g,%.9g\n", name, values->size(), m.rate(),
                  m.mean());
    out << line;
  }
  return kExitOk;
}

int cmd_gradcheck(const RunConfig& rc, std::ostream& out) {
  ModelConfig mc = rc.model;
  mc.input_size = rc.scene.size;
  mc.channels = {4, 8, 8, 16};
  mc.latent_dim = 8;
  mc.validate();
  SceneConfig sc = rc.scene;
  sc.size = mc.input_size;
  const Rng root(rc.train.seed);
  std::vector<SceneSample> scenes;
  for (std::uint64_t i = 0; i < 4; ++i) {
    Rng r = root.split("scene").split(i);
    scenes.push_back(synth_scene(sc, r));
  }
  std::vector<const Image*> images, masks;
  for (const SceneSample& s : scenes) {
    images.push_back(&s.image);
    masks.push_back(&s.mask);
  }
  DgNet model(mc, root.split("init"));
  GradCheckOptions options;
  options.seed = rc.train.seed;
  const GradCheckResult r =
      model_grad_check(model, stack_images(images), stack_images(masks), rc.train.seed, options);
  char line[320];
  std::snprintf(line, sizeof(line),
                "checked %lld entries; max relative error %.6g at %s[%lld] "
                "(analytic %.6g, numeric %.6g)\n",
                static_cast<long long>(r.checked), r.max_rel_error, r.worst_tensor.c_str(),
                static_cast<long long>(r.worst_index), r.worst_analytic, r.worst_numeric);
  out << line;
  const bool ok = r.max_rel_error < 1e-3;
  out << (ok ? "PASS" : "FAIL") << " (tolerance 1e-3)\n";
  return ok ? kExitOk : kExitValidation;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Variational oil-spill segmentation toolkit", "dgnet"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  Overrides ov;
  std::string out_path, data, model_path, pred_dir;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", ov.config_path, "key = value run configuration file");
    ov.add(sub, "--seed", "seed", "Seed for every random stream");
  };
  auto model_flags = [&](CLI::App* sub) {
    ov.add(sub, "--size", "size", "Model input size in pixels");
    ov.add(sub, "--family", "family", "Latent family: exp or gauss");
    ov.add(sub, "--beta", "kl_weight", "KL weight");
  };

  CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic speckle dataset");
  common(synth);
  synth->add_option("--out", out_path, "Output directory")->required();
  ov.add(synth, "--count", "count", "Number of scenes");
  ov.add(synth, "--size", "size", "Scene side in pixels");
  ov.add(synth, "--oil-contrast", "oil_contrast", "Sea mean over oil mean");
  ov.add(synth, "--lookalike-prob", "lookalike_prob", "Probability of a look-alike patch");

  CLI::App* trn = app.add_subcommand("train", "Train a model on a dataset");
  common(trn);
  model_flags(trn);
  trn->add_option("--data", data, "Dataset directory or manifest")->required();
  trn->add_option("--model,--out", model_path, "Checkpoint to write")->required();
  ov.add(trn, "--epochs", "epochs", "Number of epochs");
  ov.add(trn, "--lr", "learning_rate", "Adam learning rate");
  ov.add(trn, "--batch", "batch_size", "Mini-batch size");
  ov.add(trn, "--curve", "curve_path", "Learning-curve CSV to write");
  trn->add_flag("--alternating", ov.alternating, "Alternate KL and likelihood updates");

  CLI::App* seg = app.add_subcommand("segment", "Segment images with a trained model");
  common(seg);
  seg->add_option("--model", model_path, "Checkpoint")->required();
  seg->add_option("--data", data, "Dataset directory or manifest")->required();
  seg->add_option("--out", out_path, "Output directory")->required();
  ov.add(seg, "--threshold", "threshold", "Probability threshold");

  CLI::App* evl = app.add_subcommand("eval", "Score predicted masks against ground truth");
  common(evl);
  evl->add_option("--data", data, "Ground-truth dataset directory or manifest")->required();
  evl->add_option("--pred", pred_dir, "Directory of predicted masks (default: --data)");
  evl->add_option("--out", out_path, "Directory for report.csv and summary.csv");

  CLI::App* fit = app.add_subcommand("distfit", "Fit exponential intensity laws per region");
  common(fit);
  fit->add_option("--data", data, "Dataset directory or manifest")->required();

  CLI::App* gc = app.add_subcommand("gradcheck", "Finite-difference check of model gradients");
  common(gc);
  ov.add(gc, "--family", "family", "Latent family: exp or gauss");
  ov.add(gc, "--beta", "kl_weight", "KL weight");

  const auto& subs = app.get_subcommands({});
  if (!args.empty() && !args[0].starts_with("-") &&
      std::none_of(subs.begin(), subs.end(), [&](const CLI::App* s) { return s->check_name(args[0]); })) {
    err << "error: unknown subcommand '" << args[0] << "'\n\n" << app.help();
    return kExitValidation;
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const CLI::App* failed = app.get_subcommands().empty() ? &app : app.get_subcommands()[0];
    err << failed->help();
    return kExitValidation;
  }

  try {
    if (synth->parsed()) return cmd_synth(ov.resolve({}), out_path, out);
    if (trn->parsed()) return cmd_train(ov.resolve({}), data, model_path, out);
    if (seg->parsed()) return cmd_segment(ov.resolve({}), model_path, data, out_path, out);
    if (evl->parsed()) {
      ov.resolve({});
      return cmd_eval(data, pred_dir.empty() ? data : pred_dir, out_path, out);
    }
    if (fit->parsed()) {
      ov.resolve({});
      return cmd_distfit(data, out);
    }
    if (gc->parsed()) {
      RunConfig base;
      base.scene.size = 16;
      base.model.input_size = 16;
      base.scene.blob_count_range = {1, 1};
      return cmd_gradcheck(ov.resolve(base), out);
    }
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const NumericError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitValidation;
}

}  // namespace dgnet::cli
