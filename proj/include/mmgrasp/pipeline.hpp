#pragma once

// Glue shared by the CLI, the sample and the acceptance harness:
// preprocessing, visual features for detected fixations, dataset assembly.

#include "mmgrasp/config.hpp"
#include "mmgrasp/experiment.hpp"
#include "mmgrasp/features.hpp"
#include "mmgrasp/fixation.hpp"
#include "mmgrasp/ingest.hpp"
#include "mmgrasp/synth.hpp"

#include <array>
#include <vector>

namespace mmgrasp::pipeline {

inline void preprocess(ingest::SyncedRecording& rec, const config::PipelineConfig& cfg) {
  if (cfg.notch_freq > 0.0) rec.emg = ingest::notch_filter(rec.emg, cfg.notch_freq, rec.rate, cfg.notch_q);
}

inline std::vector<std::array<double, 2>> centroids(const std::vector<fixation::FixationEvent>& events) {
  std::vector<std::array<double, 2>> pts;
  pts.reserve(events.size());
  for (const auto& e : events) pts.push_back(e.centroid);
  return pts;
}

// Synthetic stand-in for the patch network: each detected fixation gets the
// features of the object nearest to its centroid.
inline RowMatrix render_visual(const synth::ObjectFeatureBank& bank, const std::vector<fixation::FixationEvent>& events,
                               std::uint64_t seed) {
  return bank.render(centroids(events), seed);
}

inline std::vector<experiment::Cue> parse_cues(const std::vector<std::string>& names) {
  std::vector<experiment::Cue> cues;
  for (const auto& n : names) cues.push_back(experiment::parse_cue(n));
  return cues;
}

struct Prepared {
  synth::SynthResult synth;
  std::vector<fixation::FixationEvent> fixations;
  RowMatrix visual;  // one row per fixation
  features::MulticueDataset dataset;
};

// Synthetic recording through detection, rendering and MDWT at test_stride.
inline Prepared prepare_synthetic(const config::PipelineConfig& cfg, std::size_t jobs = 1) {
  cfg.validate();
  Prepared p;
  p.synth = synth::generate_synthetic(cfg.synth);
  auto& rec = p.synth.recording;
  preprocess(rec, cfg);
  p.fixations = fixation::detect_fixations(rec, cfg.detector);
  p.visual = render_visual(p.synth.bank, p.fixations, cfg.seed);
  p.dataset = features::build_dataset(rec, p.fixations, p.visual, cfg.mdwt, cfg.test_stride, jobs);
  return p;
}

inline std::vector<experiment::EvalReport> evaluate(const features::MulticueDataset& ds,
                                                    const config::PipelineConfig& cfg, std::size_t jobs = 1) {
  return experiment::run_experiments(ds, parse_cues(cfg.cues), cfg.experiment_config(jobs));
}

}  // namespace mmgrasp::pipeline
