#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "jaffnet/checkpoint.hpp"
#include "jaffnet/config.hpp"
#include "jaffnet/data.hpp"
#include "jaffnet/errors.hpp"
#include "jaffnet/evaluate.hpp"
#include "jaffnet/network.hpp"
#include "jaffnet/synth.hpp"
#include "jaffnet/trainer.hpp"

namespace fs = std::filesystem;
using namespace jaffnet;

namespace {

enum ExitCode { kOk = 0, kOther = 1, kConfig = 2, kData = 3, kCheckpoint = 4 };

struct ConfigArgs {
  std::string config_path;
  std::vector<std::string> presets;
  std::vector<std::string> settings;
  std::optional<std::uint64_t> seed;
  std::optional<int> steps;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "key=value config file");
    cmd->add_option("--preset", presets, "named preset, applied after --config");
    cmd->add_option("--set", settings, "key=value override, applied last");
    cmd->add_option("--seed", seed, "training seed");
    cmd->add_option("--steps", steps, "step budget (step-bounded training)");
  }

  RunConfig build() const {
    RunConfig c = config_path.empty() ? RunConfig{} : load_config(config_path);
    for (const auto& p : presets) apply_preset(c, p);
    for (const auto& s : settings) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
      apply_setting(c, s.substr(0, eq), s.substr(eq + 1));
    }
    if (seed) c.training.seed = *seed;
    if (steps) {
      c.training.steps = *steps;
      c.training.epochs = 0;
    }
    c.validate();
    return c;
  }
};

std::vector<fs::path> input_images(const fs::path& input) {
  std::vector<fs::path> files;
  if (fs::is_directory(input)) {
    for (const auto& e : fs::directory_iterator(input)) {
      if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
  } else if (fs::is_regular_file(input)) {
    files.push_back(input);
  }
  if (files.empty()) throw DataError("no input PNG images at " + input.string());
  return files;
}

void print_shape(const char* label, const Tensor<float>& t) { std::printf("  %-10s %s\n", label, t.shape().str().c_str()); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"JAFFNet surface-defect saliency detector"};
  app.require_subcommand(1);

  ConfigArgs train_cfg;
  std::string train_data, train_out, train_resume;
  bool train_quiet = false;
  auto* train = app.add_subcommand("train", "train a model on an images/ + masks/ dataset");
  train_cfg.attach(train);
  train->add_option("--data", train_data, "dataset directory")->required();
  train->add_option("--out", train_out, "output directory")->required();
  train->add_option("--ckpt", train_resume, "resume from this checkpoint");
  train->add_flag("--quiet", train_quiet, "suppress per-step logging");

  std::string infer_ckpt, infer_input, infer_out, infer_config;
  std::optional<int> infer_size;
  auto* infer = app.add_subcommand("infer", "write saliency maps for PNG images");
  infer->add_option("--ckpt", infer_ckpt, "checkpoint")->required();
  infer->add_option("--input", infer_input, "PNG file or directory")->required();
  infer->add_option("--out", infer_out, "output directory")->required();
  infer->add_option("--config", infer_config, "expected config; must match the checkpoint's network");
  infer->add_option("--size", infer_size, "network input size (default: checkpoint infer_size)");

  std::string eval_pred, eval_gt, eval_out;
  bool eval_png = false;
  int eval_threads = 0;
  auto* eval = app.add_subcommand("eval", "score predictions against ground truth");
  eval->add_option("--pred", eval_pred, "prediction PNG directory")->required();
  eval->add_option("--gt", eval_gt, "ground-truth PNG directory")->required();
  eval->add_option("--out", eval_out, "report directory")->required();
  eval->add_flag("--curve-png", eval_png, "also render pr_curve.png");
  eval->add_option("--threads", eval_threads, "worker threads (default: JAFFNET_THREADS or all cores)");

  SynthDatasetOptions synth_opts;
  std::string synth_out, synth_kind = "mixed", synth_background = "mixed";
  auto* synth = app.add_subcommand("synth", "generate a synthetic defect dataset");
  synth->add_option("--out", synth_out, "dataset directory")->required();
  synth->add_option("--n", synth_opts.count, "number of samples");
  synth->add_option("--size", synth_opts.image_size, "image side length");
  synth->add_option("--seed", synth_opts.seed, "base seed; item i uses seed + i");
  synth->add_option("--kind", synth_kind, "scratch, patch, inclusion, none or mixed");
  synth->add_option("--background", synth_background, "flat, grating, blobs or mixed");
  synth->add_option("--contrast", synth_opts.contrast, "defect contrast in (0,1]");
  synth->add_option("--noise", synth_opts.noise_rho, "salt-and-pepper fraction");

  ConfigArgs inspect_cfg;
  std::optional<int> inspect_size;
  std::string inspect_ckpt;
  auto* inspect = app.add_subcommand("inspect", "print parameter count and per-stage shapes");
  inspect_cfg.attach(inspect);
  inspect->add_option("--size", inspect_size, "input size for the shape trace (default: infer_size)");
  inspect->add_option("--ckpt", inspect_ckpt, "describe the network stored in a checkpoint");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kConfig;
  }

  try {
    if (*train) {
      const RunConfig config = train_cfg.build();
      Trainer trainer(config, load_dataset(train_data));
      if (!train_resume.empty()) trainer.resume(load_checkpoint(train_resume));
      const std::int64_t total = planned_steps(config.training, trainer.data().size());
      std::printf("training %zu samples, %lld steps, %.3fM parameters\n", trainer.data().size(),
                  static_cast<long long>(total), trainer.model().count_params() / 1e6);
      const auto result = trainer.run(train_out, [&](std::int64_t step, const LossBreakdown& l) {
        if (!train_quiet && (step % 10 == 0 || step == total)) {
          std::printf("step %lld/%lld loss %.6f\n", static_cast<long long>(step), static_cast<long long>(total), l.total);
          std::fflush(stdout);
        }
      });
      std::printf("wrote %s and %s\n", result.final_checkpoint.c_str(), result.loss_csv.c_str());
    } else if (*infer) {
      const Checkpoint ckpt = load_checkpoint(infer_ckpt);
      if (!infer_config.empty()) require_compatible(ckpt.config, load_config(infer_config));
      JaffNet<float> model(ckpt.config.network, ckpt.config.training.seed);
      restore_model(ckpt, model);
      const int size = infer_size.value_or(ckpt.config.training.infer_size);
      fs::create_directories(infer_out);
      for (const auto& file : input_images(infer_input)) {
        const GrayImage image = to_unit(read_png_gray(file));
        write_png_gray(fs::path(infer_out) / file.filename(), quantize(predict(model, image, size)));
      }
      std::printf("wrote saliency maps to %s\n", infer_out.c_str());
    } else if (*eval) {
      const auto result = evaluate_dataset(eval_pred, eval_gt, EvaluateOptions{eval_threads});
      write_evaluation(eval_out, result, eval_png);
      const auto& r = result.report;
      std::printf("images %d (degenerate %d, skipped %zu)\nmae %.6f\nf_w %.6f\ns_m %.6f\ne_m %.6f\nmax_f %.6f\n",
                  r.images, r.degenerate, result.skipped.size(), r.mae, r.f_w, r.s_m, r.e_m, r.max_f);
      if (!result.skipped.empty()) std::fprintf(stderr, "warning: skipped %zu unreadable pairs\n", result.skipped.size());
    } else if (*synth) {
      if (synth_kind != "mixed") synth_opts.defect_kind = parse_defect_kind(synth_kind);
      if (synth_background != "mixed") synth_opts.background = parse_background(synth_background);
      write_synth_dataset(synth_out, synth_opts);
      std::printf("wrote %d samples to %s\n", synth_opts.count, synth_out.c_str());
    } else if (*inspect) {
      const RunConfig config = inspect_ckpt.empty() ? inspect_cfg.build() : load_checkpoint(inspect_ckpt).config;
      JaffNet<float> model(config.network, config.training.seed);
      const double millions = model.count_params() / 1e6;
      std::printf("parameters %zu (%.2fM; reference %.2fM, ratio %.3f)\n", model.count_params(), millions,
                  kReferenceParamsMillions, millions / kReferenceParamsMillions);
      const int size = inspect_size.value_or(config.training.infer_size);
      NoGradGuard guard;
      const auto trace = model.trace(Var<float>::constant(Tensor<float>(Shape{1, config.network.input_channels, size, size})), Mode::eval);
      std::printf("shapes for a %dx%d input:\n", size, size);
      const char* enc[] = {"E1", "E2", "E3", "E4", "E5"};
      for (int i = 0; i < 5; ++i) print_shape(enc[i], trace.encoder.stages[i].value());
      print_shape(config.network.use_drf ? "DRF" : "context", trace.context.value());
      const char* dec[] = {"D1", "D2", "D3", "D4"};
      for (int i = 0; i < 4; ++i) print_shape(dec[i], trace.decoder[i].value());
      for (int i = 0; i < kSideOutputs; ++i) {
        const std::string label = "S" + std::to_string(i);
        print_shape(label.c_str(), trace.output.side_outputs[i].value());
      }
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfig;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kData;
  } catch (const CheckpointError& e) {
    std::fprintf(stderr, "checkpoint error: %s\n", e.what());
    return kCheckpoint;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kOther;
  }
  return kOk;
}
