// mmgrasp: command-line front end over the pipeline stages.
//
//   mmgrasp synth    --out d/                    synthetic recording + truth
//   mmgrasp detect   --in d/ --out fix.csv       fixation events
//   mmgrasp features --in d/ --out f/            MDWT + visual dataset
//   mmgrasp train    --in f/ --out model.bin
//   mmgrasp predict  --model model.bin --in f/ --out pred.csv
//   mmgrasp eval     --in f/ --out report.json   cross-validated report
//   mmgrasp report   --in report.json --out r/   plotting CSVs
//   mmgrasp run      --out r/                    all of the above
//
// Exit status: 0 ok, 1 invalid input or arguments, 2 I/O failure.

#include "mmgrasp/config.hpp"
#include "mmgrasp/eval.hpp"
#include "mmgrasp/experiment.hpp"
#include "mmgrasp/features.hpp"
#include "mmgrasp/fixation.hpp"
#include "mmgrasp/ingest.hpp"
#include "mmgrasp/krls.hpp"
#include "mmgrasp/parallel.hpp"
#include "mmgrasp/pipeline.hpp"
#include "mmgrasp/report.hpp"
#include "mmgrasp/synth.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace mmgrasp;

namespace {

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::size_t jobs = default_jobs();
  std::string log_level = "info";
};

config::PipelineConfig load(const Globals& g) {
  auto c = g.config_path.empty() ? config::PipelineConfig{} : config::load_config(g.config_path);
  if (g.seed) {
    c.seed = *g.seed;
    c.synth.seed = *g.seed;
  }
  c.validate();
  return c;
}

void make_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir + ": " + ec.message());
}

// Output file next to a directory the caller may not have created yet.
std::string prepare_file(const std::string& path) {
  const auto parent = fs::path(path).parent_path();
  if (!parent.empty()) make_dir(parent.string());
  return path;
}

std::string dataset_path(const std::string& in) {
  return fs::is_directory(in) ? (fs::path(in) / "dataset.bin").string() : in;
}

ingest::SyncedRecording load_dir(const std::string& dir, const config::PipelineConfig& c) {
  const fs::path d(dir);
  auto rec = ingest::load_recording((d / "emg.csv").string(), (d / "gaze.csv").string(), (d / "labels.csv").string(), c.rate);
  pipeline::preprocess(rec, c);
  return rec;
}

void write_recording(const std::string& dir, const synth::SynthResult& s) {
  const fs::path d(dir);
  ingest::write_emg_csv((d / "emg.csv").string(), s.emg);
  ingest::write_gaze_csv((d / "gaze.csv").string(), s.gaze);
  ingest::write_labels_csv((d / "labels.csv").string(), s.labels);
  synth::write_objects_csv((d / "objects.csv").string(), s.bank);
  synth::write_fixation_truth_csv((d / "fixations_truth.csv").string(), s.fixations, s.recording.rate, s.recording.start_time);
}

features::FixationFeatures as_feature_file(const RowMatrix& visual) {
  features::FixationFeatures ff;
  ff.values = visual;
  for (Eigen::Index i = 0; i < visual.rows(); ++i) ff.ids.push_back(i);
  return ff;
}

std::string summary(const experiment::EvalReport& r) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "cue=%s accuracy=%.4f rest_prevalence=%.4f mean_w_emg=%.2f",
                experiment::to_string(r.cue).c_str(), r.accuracy, r.rest_prevalence, r.mean_w_emg());
  return buf;
}

std::vector<experiment::Cue> cues_from(const std::vector<std::string>& flags, const config::PipelineConfig& c) {
  std::vector<std::string> names;
  for (const auto& f : flags) {
    // Accept both repeated --cue and comma lists.
    std::size_t pos = 0;
    while (pos <= f.size()) {
      const auto comma = f.find(',', pos);
      const auto part = f.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
      if (!part.empty()) names.push_back(part);
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
  }
  return pipeline::parse_cues(names.empty() ? c.cues : names);
}

void write_reports(const std::string& out, const std::vector<experiment::EvalReport>& reports) {
  report::save_reports(prepare_file(out), reports);
  for (const auto& r : reports) log_info("eval", summary(r));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multimodal grasp classification pipeline"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config_path, "pipeline config (JSON); defaults apply to missing keys");
  app.add_option("--seed", g.seed, "overrides the config seed");
  app.add_option("--jobs", g.jobs, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--log-level", g.log_level, "debug|info|warn|error")
      ->check(CLI::IsMember({"debug", "info", "warn", "error"}));
  // Later flags win, so a command line can override what a wrapper passes.
  for (const char* name : {"--config", "--seed", "--jobs", "--log-level"}) {
    app.get_option(name)->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  }

  std::string in, out, model_path, grid_path, params_path, fixations_path, visual_path, objects_path;
  std::vector<std::string> cue_flags;
  std::optional<std::size_t> stride;
  bool csv = false;

  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic recording");
  synth_cmd->add_option("--out", out, "output directory")->required();

  auto* detect_cmd = app.add_subcommand("detect", "detect fixations on grasp onsets");
  detect_cmd->add_option("--in", in, "recording directory (emg.csv, gaze.csv, labels.csv)")->required();
  detect_cmd->add_option("--params", params_path, "detector parameters (JSON object)");
  detect_cmd->add_option("--out", out, "fixations CSV")->required();

  auto* features_cmd = app.add_subcommand("features", "build the multicue dataset");
  features_cmd->add_option("--in", in, "recording directory")->required();
  features_cmd->add_option("--fixations", fixations_path, "fixations CSV (default <in>/fixations.csv)");
  features_cmd->add_option("--visual", visual_path, "per-fixation feature file (MMFX); default renders <in>/objects.csv");
  features_cmd->add_option("--objects", objects_path, "object feature table (default <in>/objects.csv)");
  features_cmd->add_option("--stride", stride, "sample stride (default: config test_stride)")->check(CLI::PositiveNumber);
  features_cmd->add_flag("--csv", csv, "also write dataset.csv");
  features_cmd->add_option("--out", out, "output directory")->required();

  auto* train_cmd = app.add_subcommand("train", "grid search and train one KRLS model");
  train_cmd->add_option("--in", in, "dataset file or features directory")->required();
  train_cmd->add_option("--grid", grid_path, "grid (JSON object)");
  train_cmd->add_option("--cue", cue_flags, "emg | cnn | emg+cnn");
  train_cmd->add_option("--out", out, "model file")->required();

  auto* predict_cmd = app.add_subcommand("predict", "classify a dataset with a trained model");
  predict_cmd->add_option("--model", model_path, "model file")->required();
  predict_cmd->add_option("--in", in, "dataset file or features directory")->required();
  predict_cmd->add_option("--out", out, "predictions CSV")->required();

  auto* eval_cmd = app.add_subcommand("eval", "repetition-wise cross-validated evaluation");
  eval_cmd->add_option("--in", in, "dataset file or features directory")->required();
  eval_cmd->add_option("--grid", grid_path, "grid (JSON object)");
  eval_cmd->add_option("--cue", cue_flags, "cues to evaluate (repeat or comma-separate); default: config cues");
  eval_cmd->add_option("--out", out, "report JSON")->required();

  auto* report_cmd = app.add_subcommand("report", "export plotting CSVs from a report");
  report_cmd->add_option("--in", in, "report JSON")->required();
  report_cmd->add_option("--out", out, "output directory")->required();

  auto* run_cmd = app.add_subcommand("run", "synthetic end-to-end run");
  run_cmd->add_option("--cue", cue_flags, "cues to evaluate; default: config cues");
  run_cmd->add_option("--out", out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  using Level = Log::Level;
  Log::threshold() = g.log_level == "debug" ? Level::debug : g.log_level == "warn" ? Level::warn
                                                           : g.log_level == "error" ? Level::error : Level::info;

  try {
    const auto cfg = load(g);

    if (*synth_cmd) {
      make_dir(out);
      const auto s = synth::generate_synthetic(cfg.synth);
      write_recording(out, s);
      log_info("synth", "wrote " + std::to_string(s.recording.size()) + " samples, " +
                            std::to_string(s.fixations.size()) + " planted fixations to " + out);

    } else if (*detect_cmd) {
      auto params = params_path.empty() ? cfg.detector : config::detector_from_json(config::parse_json_file(params_path));
      const auto rec = load_dir(in, cfg);
      const auto events = fixation::detect_fixations(rec, params);
      fixation::write_fixations_csv(prepare_file(out), events, rec.rate, rec.start_time);
      log_info("detect", std::to_string(events.size()) + " fixations");

    } else if (*features_cmd) {
      const fs::path d(in);
      const auto rec = load_dir(in, cfg);
      const auto events = fixation::read_fixations_csv(fixations_path.empty() ? (d / "fixations.csv").string() : fixations_path,
                                                       rec.rate, rec.start_time);
      RowMatrix visual;
      if (!visual_path.empty()) {
        const auto ff = features::load_fixation_features(visual_path);
        visual = features::align_fixation_features(ff, events.size(), Vector::Zero(ff.values.cols()));
      } else {
        const auto bank = synth::read_objects_csv(objects_path.empty() ? (d / "objects.csv").string() : objects_path,
                                                  cfg.synth.visual_noise);
        visual = pipeline::render_visual(bank, events, cfg.seed);
      }
      const auto ds = features::build_dataset(rec, events, visual, cfg.mdwt, stride.value_or(cfg.test_stride), g.jobs);
      make_dir(out);
      const fs::path o(out);
      features::save_dataset((o / "dataset.bin").string(), ds);
      if (visual_path.empty()) features::save_fixation_features((o / "visual.bin").string(), as_feature_file(visual));
      if (csv) features::write_dataset_csv((o / "dataset.csv").string(), ds);
      log_info("features", std::to_string(ds.size()) + " rows, " + std::to_string(ds.emg_dims()) + " EMG dims, " +
                               std::to_string(ds.vis_dims()) + " visual dims");

    } else if (*train_cmd) {
      const auto ds = features::load_dataset(dataset_path(in));
      const auto grid = grid_path.empty() ? cfg.grid : config::grid_from_json(config::parse_json_file(grid_path));
      const auto cues = cues_from(cue_flags.empty() ? std::vector<std::string>{"emg+cnn"} : cue_flags, cfg);
      if (cues.size() != 1 || cues[0] == experiment::Cue::baseline) throw ValidationError("train takes one learned cue");
      const auto train_set = ds.decimate(cfg.train_factor);
      const auto res = eval::grid_search(train_set.decimate(cfg.hyper_factor), experiment::restrict_grid(grid, cues[0]), g.jobs);
      const auto m = krls::fit(train_set, res.best.kernel, res.best.lambda, g.jobs);
      krls::save_model(prepare_file(out), m);
      char buf[200];
      std::snprintf(buf, sizeof buf, "lambda=%g gamma_chi2=%g gamma_rbf=%g w_emg=%.2f inner_acc=%.4f n_train=%zu",
                    res.best.lambda, res.best.kernel.gamma_chi2, res.best.kernel.gamma_rbf, res.best.kernel.w_emg,
                    res.best_score, train_set.size());
      log_info("train", buf);

    } else if (*predict_cmd) {
      const auto m = krls::load_model(model_path);
      const auto ds = features::load_dataset(dataset_path(in));
      const auto p = krls::predict(m, ds, g.jobs);
      std::string s = "t,label,prediction\n";
      for (std::size_t i = 0; i < ds.size(); ++i) {
        io::append_number(s, static_cast<double>(ds.times[i]) / ds.rate);
        s += ',';
        io::append_number(s, static_cast<long long>(ds.labels[i]));
        s += ',';
        io::append_number(s, static_cast<long long>(p.classes[i]));
        s += '\n';
      }
      io::write_file(prepare_file(out), s);
      log_info("predict", "accuracy=" + std::to_string(eval::accuracy(p.classes, ds.labels)));

    } else if (*eval_cmd) {
      const auto ds = features::load_dataset(dataset_path(in));
      auto ecfg = cfg.experiment_config(g.jobs);
      if (!grid_path.empty()) ecfg.grid = config::grid_from_json(config::parse_json_file(grid_path));
      write_reports(out, experiment::run_experiments(ds, cues_from(cue_flags, cfg), ecfg));

    } else if (*report_cmd) {
      const auto reports = report::load_reports(in);
      make_dir(out);
      for (const auto& name : report::write_csvs(out, reports)) log_info("report", "wrote " + name);

    } else if (*run_cmd) {
      const fs::path o(out);
      make_dir((o / "data").string());
      config::save_config((o / "config.json").string(), cfg);
      auto prep = pipeline::prepare_synthetic(cfg, g.jobs);
      write_recording((o / "data").string(), prep.synth);
      const auto& rec = prep.synth.recording;
      fixation::write_fixations_csv((o / "fixations.csv").string(), prep.fixations, rec.rate, rec.start_time);
      features::save_fixation_features((o / "visual.bin").string(), as_feature_file(prep.visual));
      features::save_dataset((o / "dataset.bin").string(), prep.dataset);
      log_info("run", std::to_string(prep.fixations.size()) + " fixations, " + std::to_string(prep.dataset.size()) + " rows");
      const auto reports = experiment::run_experiments(prep.dataset, cues_from(cue_flags, cfg), cfg.experiment_config(g.jobs));
      write_reports((o / "report.json").string(), reports);
      report::write_csvs(out, reports);
    }
  } catch (const IoError& e) {
    Log::write(Level::error, "cli", e.what());
    return 2;
  } catch (const std::exception& e) {
    Log::write(Level::error, "cli", e.what());
    return 1;
  }
  return 0;
}
