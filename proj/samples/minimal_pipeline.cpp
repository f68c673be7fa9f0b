// Smallest end-to-end run: a four-grasp synthetic session, fixation
// detection, MDWT + visual features, and cross-validated KRLS on each cue.
// Finishes in seconds; `mmgrasp run` does the full-size version.

#include "mmgrasp/pipeline.hpp"

#include <cstdio>

using namespace mmgrasp;

int main() {
  config::PipelineConfig cfg;
  cfg.synth.n_grasps = 4;
  cfg.synth.objects_per_grasp = 1;
  cfg.synth.object_sharing = {{0}, {1}, {2}, {3}};
  cfg.synth.emg_families = {0, 0, 1, 1};
  cfg.test_stride = 100;
  cfg.train_factor = 2;
  cfg.hyper_factor = 2;
  cfg.grid.lambdas = {0x1p-8, 0x1p-4};
  cfg.grid.gammas_chi2 = {0x1p-10};
  cfg.grid.gammas_rbf = {0x1p-16};
  cfg.grid.w_emg = {0.0, 0.5, 1.0};
  cfg.k_sweep = {1, 5, 25};

  const auto prep = pipeline::prepare_synthetic(cfg);
  std::printf("%zu samples, %zu fixations detected (%zu planted), %zu dataset rows\n", prep.synth.recording.size(),
              prep.fixations.size(), prep.synth.fixations.size(), prep.dataset.size());

  for (const auto& r : pipeline::evaluate(prep.dataset, cfg)) {
    std::printf("%-9s accuracy %.3f  mean w_emg %.2f  MER(k=25) %.3f\n", experiment::to_string(r.cue).c_str(), r.accuracy,
                r.mean_w_emg(), r.sweep.back().mer);
  }
  return 0;
}
