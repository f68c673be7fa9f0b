#pragma once

// Outer repetition-wise evaluation of one or more cues on a dataset built at
// the test stride: per fold, grid search on the decimated training
// repetitions, KRLS on the training stride, prediction of the held-out
// repetition at full test stride, then metrics.

#include "mmgrasp/common.hpp"
#include "mmgrasp/eval.hpp"
#include "mmgrasp/features.hpp"
#include "mmgrasp/kernels.hpp"
#include "mmgrasp/krls.hpp"

#include <map>
#include <string>
#include <vector>

namespace mmgrasp::experiment {

enum class Cue { emg, cnn, emg_cnn, baseline };

inline std::string to_string(Cue c) {
  switch (c) {
    case Cue::emg: return "emg";
    case Cue::cnn: return "cnn";
    case Cue::emg_cnn: return "emg+cnn";
    case Cue::baseline: return "baseline";
  }
  return "?";
}

inline Cue parse_cue(const std::string& s) {
  for (Cue c : {Cue::emg, Cue::cnn, Cue::emg_cnn, Cue::baseline}) {
    if (s == to_string(c)) return c;
  }
  throw ValidationError("unknown cue '" + s + "' (expected emg, cnn, emg+cnn or baseline)");
}

// The weight axis a cue is allowed to search.
inline eval::GridSpec restrict_grid(eval::GridSpec grid, Cue cue) {
  if (cue == Cue::emg) grid.w_emg = {1.0};
  if (cue == Cue::cnn) grid.w_emg = {0.0};
  return grid;
}

struct ExperimentConfig {
  eval::GridSpec grid;
  std::size_t n_reps = 4;
  std::size_t train_factor = 10;  // training stride = test stride * train_factor
  std::size_t hyper_factor = 4;   // grid-search stride = training stride * hyper_factor
  std::vector<std::size_t> k_sweep = {1, 3, 5, 11, 25, 50, 100, 150, 250};
  std::size_t phase_bins = 50;
  std::size_t jobs = 1;
  std::size_t predict_block = 2048;

  void validate() const {
    grid.validate();
    if (n_reps < 2) throw ValidationError("n_reps must be >= 2");
    if (train_factor == 0 || hyper_factor == 0) throw ValidationError("subsampling factors must be >= 1");
    for (std::size_t k : k_sweep) {
      if (k == 0) throw ValidationError("majority-vote k must be >= 1");
    }
    if (phase_bins == 0) throw ValidationError("phase_bins must be >= 1");
    if (predict_block == 0) throw ValidationError("predict_block must be >= 1");
  }
};

struct FoldReport {
  int test_repetition = 0;
  eval::GridPoint chosen;
  double inner_score = 0.0;
  double accuracy = 0.0;
  std::vector<ClassId> predictions;  // test rows, in dataset order
  std::vector<ClassId> truth;
};

struct SweepPoint {
  std::size_t k = 1;
  double mer = 0.0;                    // mean over folds
  std::optional<double> delay;         // seconds, pooled over matched segments
  std::size_t missed = 0;              // summed over folds
};

struct EvalReport {
  Cue cue = Cue::baseline;
  std::vector<ClassId> classes;
  std::size_t test_stride = 1;
  double rate = 0.0;
  double accuracy = 0.0;  // mean over folds
  Matrix confusion;       // counts summed over folds
  std::vector<FoldReport> folds;
  std::vector<SweepPoint> sweep;
  std::vector<double> phase_error;
  double rest_prevalence = 0.0;  // mean over folds, like accuracy

  double mean_w_emg() const {
    double s = 0.0;
    for (const auto& f : folds) s += f.chosen.kernel.w_emg;
    return folds.empty() ? 0.0 : s / static_cast<double>(folds.size());
  }
};

namespace detail {

inline std::vector<std::size_t> rows_with_rep(const features::MulticueDataset& ds, int rep, bool equal) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const int r = ds.repetitions[i];
    if (r >= 0 && ((r == rep) == equal)) idx.push_back(i);
  }
  return idx;
}

}  // namespace detail

// Fills the sequence metrics of a report from its per-fold predictions.
inline void summarize(EvalReport& rep, const ExperimentConfig& cfg) {
  const double seq_rate = rep.rate / static_cast<double>(rep.test_stride);
  rep.confusion = Matrix::Zero(static_cast<Eigen::Index>(rep.classes.size()), static_cast<Eigen::Index>(rep.classes.size()));
  eval::PhaseCurve curve(cfg.phase_bins);
  double acc = 0.0;
  double prevalence = 0.0;
  rep.sweep.clear();
  for (std::size_t k : cfg.k_sweep) rep.sweep.push_back({k, 0.0, std::nullopt, 0});
  std::vector<double> delay_sum(cfg.k_sweep.size(), 0.0);
  std::vector<std::size_t> delay_n(cfg.k_sweep.size(), 0);
  for (auto& f : rep.folds) {
    f.accuracy = eval::accuracy(f.predictions, f.truth);
    acc += f.accuracy;
    rep.confusion += eval::confusion(f.predictions, f.truth, rep.classes);
    std::size_t rest = 0;
    for (ClassId c : f.truth) rest += c == kRestClass ? 1 : 0;
    prevalence += static_cast<double>(rest) / static_cast<double>(f.truth.size());
    std::vector<std::size_t> rows(f.truth.size());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    eval::accumulate_phase_error(curve, f.predictions, f.truth, rows, eval::phase_segments(f.truth));
    for (std::size_t s = 0; s < cfg.k_sweep.size(); ++s) {
      const auto smoothed = eval::majority_vote(f.predictions, cfg.k_sweep[s]);
      rep.sweep[s].mer += eval::movement_error_rate(smoothed, f.truth) / static_cast<double>(rep.folds.size());
      const auto d = eval::prediction_delay(smoothed, f.truth, seq_rate);
      if (d.mean) {
        delay_sum[s] += *d.mean * static_cast<double>(d.matched);
        delay_n[s] += d.matched;
      }
      rep.sweep[s].missed += d.missed;
    }
  }
  for (std::size_t s = 0; s < cfg.k_sweep.size(); ++s) {
    if (delay_n[s] > 0) rep.sweep[s].delay = delay_sum[s] / static_cast<double>(delay_n[s]);
  }
  rep.accuracy = rep.folds.empty() ? 0.0 : acc / static_cast<double>(rep.folds.size());
  rep.rest_prevalence = rep.folds.empty() ? 0.0 : prevalence / static_cast<double>(rep.folds.size());
  rep.phase_error = curve.mean();
}

// Evaluates every cue in `cues` with shared inner-CV and prediction passes.
inline std::vector<EvalReport> run_experiments(const features::MulticueDataset& ds, const std::vector<Cue>& cues,
                                               const ExperimentConfig& cfg) {
  cfg.validate();
  ds.validate();
  const auto folds = eval::cv_splits(ds, cfg.n_reps);
  const auto reps = eval::repetitions_of(ds);

  std::vector<Cue> learned;
  for (Cue c : cues) {
    if (c != Cue::baseline) learned.push_back(c);
  }

  // Inner CV on the hyperparameter stride. Training on all reps but {o, i}
  // serves outer fold o (validating on i) and outer fold i (validating on o).
  std::map<std::pair<int, int>, std::size_t> pair_task;
  std::vector<std::vector<int>> tasks;
  std::optional<eval::InnerCv> inner;
  features::MulticueDataset train_all;
  features::MulticueDataset hyper;  // outlives `inner`, which refers to it
  if (!learned.empty()) {
    train_all = ds.decimate(cfg.train_factor);
    hyper = train_all.decimate(cfg.hyper_factor);
    eval::GridSpec union_grid = cfg.grid;
    std::vector<double> ws;
    for (Cue c : learned) {
      for (double w : restrict_grid(cfg.grid, c).w_emg) {
        if (std::find(ws.begin(), ws.end(), w) == ws.end()) ws.push_back(w);
      }
    }
    union_grid.w_emg = ws;
    for (std::size_t a = 0; a < reps.size(); ++a) {
      for (std::size_t b = a + 1; b < reps.size(); ++b) {
        pair_task[{reps[a], reps[b]}] = tasks.size();
        tasks.push_back({reps[a], reps[b]});
      }
    }
    log_info("experiment", "grid search: " + std::to_string(hyper.size()) + " rows, " + std::to_string(union_grid.size()) +
                               " points, " + std::to_string(tasks.size()) + " inner trainings per point");
    inner.emplace(hyper, union_grid, cfg.jobs);
    inner->run(tasks);
  }

  std::vector<EvalReport> reports;
  for (Cue c : cues) {
    EvalReport r;
    r.cue = c;
    r.classes = ds.classes;
    r.test_stride = ds.stride;
    r.rate = ds.rate;
    reports.push_back(std::move(r));
  }

  for (const auto& fold : folds) {
    const int o = fold.test_repetition;
    const auto test = ds.subset(fold.test);
    std::vector<krls::TrainedModel> models;
    std::vector<std::size_t> model_report;
    features::MulticueDataset train;
    kernels::Distances train_d;  // shared by every cue's Gram matrix
    if (!learned.empty()) {
      train = train_all.subset(detail::rows_with_rep(train_all, o, false));
      train_d = kernels::distances(train, train, cfg.jobs);
    }

    for (std::size_t ci = 0; ci < cues.size(); ++ci) {
      FoldReport fr;
      fr.test_repetition = o;
      fr.truth = test.labels;
      if (cues[ci] == Cue::baseline) {
        fr.predictions.assign(test.size(), kRestClass);
        reports[ci].folds.push_back(std::move(fr));
        continue;
      }
      const auto allowed = restrict_grid(cfg.grid, cues[ci]).w_emg;
      std::vector<eval::GridPoint> pts;
      std::vector<double> scores;
      for (std::size_t p = 0; p < inner->points().size(); ++p) {
        const auto& pt = inner->points()[p];
        if (std::find(allowed.begin(), allowed.end(), pt.kernel.w_emg) == allowed.end()) continue;
        double s = 0.0;
        std::size_t n = 0;
        for (int i : reps) {
          if (i == o) continue;
          const auto key = std::make_pair(std::min(o, i), std::max(o, i));
          const std::size_t slot = i < o ? 0 : 1;
          s += inner->accuracy(pair_task.at(key), p, slot);
          ++n;
        }
        pts.push_back(pt);
        scores.push_back(s / static_cast<double>(n));
      }
      const auto best = eval::select_best(std::move(pts), std::move(scores));
      fr.chosen = best.best;
      fr.inner_score = best.best_score;
      log_info("experiment", "fold " + std::to_string(o) + " cue " + to_string(cues[ci]) + ": lambda=" +
                                 std::to_string(best.best.lambda) + " w_emg=" + std::to_string(best.best.kernel.w_emg) +
                                 " inner_acc=" + std::to_string(best.best_score));
      auto m = krls::train(kernels::kernel_from_distances(train_d, best.best.kernel), train.labels, train.classes,
                           best.best.lambda);
      m.kernel = best.best.kernel;
      m.train = train;
      models.push_back(std::move(m));
      model_report.push_back(ci);
      reports[ci].folds.push_back(std::move(fr));
    }

    // One distance pass over the test rows feeds every model of this fold.
    if (!models.empty()) {
      std::vector<Matrix> scores(models.size());
      for (auto& s : scores) s.resize(static_cast<Eigen::Index>(test.size()), static_cast<Eigen::Index>(ds.classes.size()));
      bool need_chi2 = false;
      bool need_sq = false;
      for (const auto& m : models) {
        need_chi2 = need_chi2 || m.kernel.w_emg > 0.0;
        need_sq = need_sq || m.kernel.w_cnn > 0.0;
      }
      for (std::size_t lo = 0; lo < test.size(); lo += cfg.predict_block) {
        const std::size_t hi = std::min(lo + cfg.predict_block, test.size());
        const auto d = kernels::distances(test, lo, hi, train, cfg.jobs, need_chi2, need_sq);
        for (std::size_t m = 0; m < models.size(); ++m) {
          scores[m].middleRows(static_cast<Eigen::Index>(lo), static_cast<Eigen::Index>(hi - lo)) =
              kernels::kernel_from_distances(d, models[m].kernel) * models[m].alpha;
        }
      }
      for (std::size_t m = 0; m < models.size(); ++m) {
        auto& fr = reports[model_report[m]].folds.back();
        for (std::size_t k : krls::argmax_rows(scores[m])) fr.predictions.push_back(ds.classes[k]);
      }
    }
    log_info("experiment", "fold " + std::to_string(o) + " done");
  }

  for (auto& r : reports) summarize(r, cfg);
  return reports;
}

inline EvalReport run_experiment(const features::MulticueDataset& ds, Cue cue, const ExperimentConfig& cfg) {
  return run_experiments(ds, {cue}, cfg).front();
}

}  // namespace mmgrasp::experiment
