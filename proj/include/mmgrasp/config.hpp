#pragma once

// Pipeline configuration as JSON. Every key is optional and defaults to the
// published protocol; unknown keys are rejected so typos do not silently
// fall back to defaults.

#include "mmgrasp/common.hpp"
#include "mmgrasp/eval.hpp"
#include "mmgrasp/experiment.hpp"
#include "mmgrasp/features.hpp"
#include "mmgrasp/fixation.hpp"
#include "mmgrasp/io.hpp"
#include "mmgrasp/synth.hpp"

#include <json.hpp>

#include <algorithm>
#include <set>
#include <type_traits>
#include <string>
#include <vector>

namespace mmgrasp::config {

using json = nlohmann::json;

struct PipelineConfig {
  std::string data_dir = "data";
  std::string out_dir = "out";
  double rate = 2000.0;
  double notch_freq = 0.0;  // 0 disables the powerline notch
  double notch_q = 30.0;
  synth::SynthConfig synth;
  fixation::DetectorParams detector;
  features::MdwtConfig mdwt;
  eval::GridSpec grid;
  std::size_t test_stride = 20;
  std::size_t train_factor = 10;
  std::size_t hyper_factor = 4;
  std::size_t n_reps = 4;
  std::vector<std::string> cues = {"emg", "cnn", "emg+cnn", "baseline"};
  std::vector<std::size_t> k_sweep = {1, 3, 5, 11, 25, 50, 100, 150, 250};
  std::size_t phase_bins = 50;
  std::uint64_t seed = 1;

  void validate() const {
    if (!(rate > 0.0)) throw ValidationError("rate must be positive");
    if (notch_freq < 0.0 || (notch_freq > 0.0 && notch_freq >= rate / 2.0)) throw ValidationError("notch_freq must lie in (0, rate/2) or be 0");
    if (!(notch_q > 0.0)) throw ValidationError("notch_q must be positive");
    if (test_stride == 0) throw ValidationError("test_stride must be >= 1");
    synth.validate();
    detector.validate();
    mdwt.validate();
    experiment_config(1).validate();
    for (const auto& c : cues) (void)experiment::parse_cue(c);
  }

  experiment::ExperimentConfig experiment_config(std::size_t jobs) const {
    experiment::ExperimentConfig e;
    e.grid = grid;
    e.n_reps = n_reps;
    e.train_factor = train_factor;
    e.hyper_factor = hyper_factor;
    e.k_sweep = k_sweep;
    e.phase_bins = phase_bins;
    e.jobs = jobs;
    return e;
  }
};

namespace detail {

template <typename T>
inline constexpr bool is_unsigned_vector = false;
template <typename U>
inline constexpr bool is_unsigned_vector<std::vector<U>> = std::is_unsigned_v<U>;

// Reads keys out of one JSON object and rejects any it did not consume.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ValidationError(where_ + ": expected a JSON object");
  }

  template <typename T>
  void get(const char* key, T& value) {
    used_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    // json converts -2 to a huge size_t without complaint.
    if constexpr (std::is_unsigned_v<T> || is_unsigned_vector<T>) {
      if (has_negative(*it)) throw ValidationError(where_ + "." + key + ": must be nonnegative");
    }
    try {
      value = it->template get<T>();
    } catch (const json::exception& e) {
      throw ValidationError(where_ + "." + key + ": " + e.what());
    }
  }

  const json* sub(const char* key) {
    used_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!used_.count(k)) throw ValidationError(where_ + ": unknown key '" + k + "'");
    }
  }

 private:
  static bool has_negative(const json& v) {
    if (v.is_array()) return std::any_of(v.begin(), v.end(), [](const json& e) { return has_negative(e); });
    return v.is_number() && v.get<double>() < 0.0;
  }

  const json& j_;
  std::string where_;
  std::set<std::string> used_;
};

}  // namespace detail

inline json to_json(const synth::SynthConfig& s) {
  return {{"n_grasps", s.n_grasps},
          {"objects_per_grasp", s.objects_per_grasp},
          {"n_reps", s.n_reps},
          {"rest_duration", s.rest_duration},
          {"grasp_duration", s.grasp_duration},
          {"emg_channels", s.emg_channels},
          {"visual_dim", s.visual_dim},
          {"gaze_noise_px", s.gaze_noise_px},
          {"object_sharing", s.object_sharing},
          {"emg_families", s.emg_families},
          {"emg_rate", s.emg_rate},
          {"gaze_rate", s.gaze_rate},
          {"rest_rms", s.rest_rms},
          {"activation_rms", s.activation_rms},
          {"ar_coefficient", s.ar_coefficient},
          {"ramp", s.ramp},
          {"synergy_spread", s.synergy_spread},
          {"limb_variability", s.limb_variability},
          {"fixation_lead", s.fixation_lead},
          {"release_margin", s.release_margin},
          {"dwell", s.dwell},
          {"min_saccade_px", s.min_saccade_px},
          {"frame_width", s.frame_width},
          {"frame_height", s.frame_height},
          {"scene_jitter_px", s.scene_jitter_px},
          {"min_object_separation_px", s.min_object_separation_px},
          {"visual_scale", s.visual_scale},
          {"visual_noise", s.visual_noise},
          {"artifact_amplitude", s.artifact_amplitude},
          {"artifact_duration", s.artifact_duration},
          {"powerline_amplitude", s.powerline_amplitude},
          {"powerline_freq", s.powerline_freq}};
}

inline synth::SynthConfig synth_from_json(const json& j) {
  synth::SynthConfig s;
  detail::ObjectReader r(j, "synth");
  r.get("n_grasps", s.n_grasps);
  r.get("objects_per_grasp", s.objects_per_grasp);
  r.get("n_reps", s.n_reps);
  r.get("rest_duration", s.rest_duration);
  r.get("grasp_duration", s.grasp_duration);
  r.get("emg_channels", s.emg_channels);
  r.get("visual_dim", s.visual_dim);
  r.get("gaze_noise_px", s.gaze_noise_px);
  r.get("object_sharing", s.object_sharing);
  r.get("emg_families", s.emg_families);
  r.get("emg_rate", s.emg_rate);
  r.get("gaze_rate", s.gaze_rate);
  r.get("rest_rms", s.rest_rms);
  r.get("activation_rms", s.activation_rms);
  r.get("ar_coefficient", s.ar_coefficient);
  r.get("ramp", s.ramp);
  r.get("synergy_spread", s.synergy_spread);
  r.get("limb_variability", s.limb_variability);
  r.get("fixation_lead", s.fixation_lead);
  r.get("release_margin", s.release_margin);
  r.get("dwell", s.dwell);
  r.get("min_saccade_px", s.min_saccade_px);
  r.get("frame_width", s.frame_width);
  r.get("frame_height", s.frame_height);
  r.get("scene_jitter_px", s.scene_jitter_px);
  r.get("min_object_separation_px", s.min_object_separation_px);
  r.get("visual_scale", s.visual_scale);
  r.get("visual_noise", s.visual_noise);
  r.get("artifact_amplitude", s.artifact_amplitude);
  r.get("artifact_duration", s.artifact_duration);
  r.get("powerline_amplitude", s.powerline_amplitude);
  r.get("powerline_freq", s.powerline_freq);
  r.finish();
  return s;
}

inline json to_json(const fixation::DetectorParams& p) {
  return {{"tau_rms", p.tau_rms},
          {"tau_boll", p.tau_boll},
          {"tau_gaze", p.tau_gaze},
          {"eta", p.eta},
          {"percentile", p.percentile},
          {"threshold_update_period", p.threshold_update_period},
          {"volatility_history", p.volatility_history},
          {"sigma_floor", p.sigma_floor}};
}

inline fixation::DetectorParams detector_from_json(const json& j) {
  fixation::DetectorParams p;
  detail::ObjectReader r(j, "detector");
  r.get("tau_rms", p.tau_rms);
  r.get("tau_boll", p.tau_boll);
  r.get("tau_gaze", p.tau_gaze);
  r.get("eta", p.eta);
  r.get("percentile", p.percentile);
  r.get("threshold_update_period", p.threshold_update_period);
  r.get("volatility_history", p.volatility_history);
  r.get("sigma_floor", p.sigma_floor);
  r.finish();
  p.validate();
  return p;
}

inline json to_json(const features::MdwtConfig& m) {
  return {{"window", m.window}, {"wavelet", m.wavelet}, {"levels", m.levels}, {"padding", m.padding}};
}

inline features::MdwtConfig mdwt_from_json(const json& j) {
  features::MdwtConfig m;
  detail::ObjectReader r(j, "mdwt");
  r.get("window", m.window);
  r.get("wavelet", m.wavelet);
  r.get("levels", m.levels);
  r.get("padding", m.padding);
  r.finish();
  m.validate();
  return m;
}

inline json to_json(const eval::GridSpec& g) {
  return {{"lambdas", g.lambdas}, {"gammas_chi2", g.gammas_chi2}, {"gammas_rbf", g.gammas_rbf}, {"w_emg", g.w_emg}};
}

inline eval::GridSpec grid_from_json(const json& j) {
  eval::GridSpec g;
  detail::ObjectReader r(j, "grid");
  r.get("lambdas", g.lambdas);
  r.get("gammas_chi2", g.gammas_chi2);
  r.get("gammas_rbf", g.gammas_rbf);
  r.get("w_emg", g.w_emg);
  r.finish();
  g.validate();
  return g;
}

inline json to_json(const PipelineConfig& c) {
  return {{"data_dir", c.data_dir},
          {"out_dir", c.out_dir},
          {"rate", c.rate},
          {"notch_freq", c.notch_freq},
          {"notch_q", c.notch_q},
          {"synth", to_json(c.synth)},
          {"detector", to_json(c.detector)},
          {"mdwt", to_json(c.mdwt)},
          {"grid", to_json(c.grid)},
          {"test_stride", c.test_stride},
          {"train_factor", c.train_factor},
          {"hyper_factor", c.hyper_factor},
          {"n_reps", c.n_reps},
          {"cues", c.cues},
          {"k_sweep", c.k_sweep},
          {"phase_bins", c.phase_bins},
          {"seed", c.seed}};
}

inline PipelineConfig pipeline_from_json(const json& j) {
  PipelineConfig c;
  detail::ObjectReader r(j, "config");
  r.get("data_dir", c.data_dir);
  r.get("out_dir", c.out_dir);
  r.get("rate", c.rate);
  r.get("notch_freq", c.notch_freq);
  r.get("notch_q", c.notch_q);
  if (const auto* s = r.sub("synth")) c.synth = synth_from_json(*s);
  if (const auto* s = r.sub("detector")) c.detector = detector_from_json(*s);
  if (const auto* s = r.sub("mdwt")) c.mdwt = mdwt_from_json(*s);
  if (const auto* s = r.sub("grid")) c.grid = grid_from_json(*s);
  r.get("test_stride", c.test_stride);
  r.get("train_factor", c.train_factor);
  r.get("hyper_factor", c.hyper_factor);
  r.get("n_reps", c.n_reps);
  r.get("cues", c.cues);
  r.get("k_sweep", c.k_sweep);
  r.get("phase_bins", c.phase_bins);
  r.get("seed", c.seed);
  r.finish();
  // One seed drives the generator and the rendered visual features.
  c.synth.seed = c.seed;
  c.validate();
  return c;
}

inline json parse_json_file(const std::string& path) {
  const std::string text = io::read_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(path, 0, e.what());
  }
}

inline PipelineConfig load_config(const std::string& path) { return pipeline_from_json(parse_json_file(path)); }

inline void save_config(const std::string& path, const PipelineConfig& c) { io::write_file(path, to_json(c).dump(2) + "\n"); }

inline bool operator==(const PipelineConfig& a, const PipelineConfig& b) { return to_json(a) == to_json(b); }

}  // namespace mmgrasp::config
