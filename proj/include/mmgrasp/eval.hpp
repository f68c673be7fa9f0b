#pragma once

// Repetition-wise cross-validation, the hyperparameter grid search, and the
// sequence metrics (accuracy, majority vote, MER, delay, phase curve,
// confusion).

#include "mmgrasp/common.hpp"
#include "mmgrasp/features.hpp"
#include "mmgrasp/kernels.hpp"
#include "mmgrasp/krls.hpp"
#include "mmgrasp/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <tuple>
#include <vector>

namespace mmgrasp::eval {

// ------------------------------------------------------------------ folds

struct Fold {
  int test_repetition = 0;
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Distinct repetition ids >= 0, sorted. Rows with id -1 belong to no fold.
inline std::vector<int> repetitions_of(const features::MulticueDataset& ds) {
  std::set<int> reps;
  for (int r : ds.repetitions) {
    if (r >= 0) reps.insert(r);
  }
  return {reps.begin(), reps.end()};
}

// Fold i holds out the i-th repetition and trains on the others.
inline std::vector<Fold> cv_splits(const features::MulticueDataset& ds, std::size_t n_reps) {
  if (n_reps < 2) throw ValidationError("cross-validation needs at least two repetitions");
  const auto reps = repetitions_of(ds);
  if (reps.size() != n_reps) {
    throw DataError("expected " + std::to_string(n_reps) + " repetitions, found " + std::to_string(reps.size()));
  }
  std::map<ClassId, std::set<int>> seen;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (ds.repetitions[i] >= 0 && ds.labels[i] != kRestClass) seen[ds.labels[i]].insert(ds.repetitions[i]);
  }
  for (const auto& [cls, rs] : seen) {
    if (rs.size() != n_reps) throw DataError("movement " + std::to_string(cls) + " is missing a repetition");
  }
  std::vector<Fold> folds;
  for (int r : reps) {
    Fold f;
    f.test_repetition = r;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      if (ds.repetitions[i] < 0) continue;
      (ds.repetitions[i] == r ? f.test : f.train).push_back(i);
    }
    folds.push_back(std::move(f));
  }
  return folds;
}

// ------------------------------------------------------------ grid search

inline std::vector<double> powers_of_two(int lo, int hi, int step) {
  std::vector<double> v;
  for (int e = lo; e <= hi; e += step) v.push_back(std::ldexp(1.0, e));
  return v;
}

struct GridSpec {
  std::vector<double> lambdas = powers_of_two(-14, -4, 2);
  std::vector<double> gammas_chi2 = powers_of_two(-14, -8, 2);
  std::vector<double> gammas_rbf = powers_of_two(-20, -14, 2);
  std::vector<double> w_emg = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};  // w_cnn = 1 - w_emg

  std::size_t size() const { return lambdas.size() * gammas_chi2.size() * gammas_rbf.size() * w_emg.size(); }

  void validate() const {
    if (size() == 0) throw ValidationError("grid is empty");
    for (double l : lambdas) {
      if (!(l > 0.0)) throw ValidationError("grid lambdas must be positive");
    }
    for (double w : w_emg) {
      kernels::KernelConfig{gammas_chi2.front(), gammas_rbf.front(), w, 1.0 - w}.validate();
    }
    for (double g : gammas_chi2) kernels::KernelConfig{g, 1.0, 1.0, 0.0}.validate();
    for (double g : gammas_rbf) kernels::KernelConfig{1.0, g, 0.0, 1.0}.validate();
  }

  bool operator==(const GridSpec&) const = default;
};

struct GridPoint {
  kernels::KernelConfig kernel;
  double lambda = 1.0;
};

// Larger lambda, then smaller gamma_chi2, smaller gamma_rbf, larger w_emg.
inline bool preferred_on_tie(const GridPoint& a, const GridPoint& b) {
  return std::make_tuple(-a.lambda, a.kernel.gamma_chi2, a.kernel.gamma_rbf, -a.kernel.w_emg) <
         std::make_tuple(-b.lambda, b.kernel.gamma_chi2, b.kernel.gamma_rbf, -b.kernel.w_emg);
}

struct GridResult {
  GridPoint best;
  double best_score = 0.0;
  std::vector<GridPoint> points;  // enumeration order: lambda, gamma_chi2, gamma_rbf, w_emg
  std::vector<double> scores;     // mean inner-fold accuracy per point
};

// Inner-CV accuracy table. Each task trains once per (kernel, lambda) on the
// rows whose repetition is not in `held_out`, and scores every held-out
// repetition separately, so callers can reuse one training for several
// validation folds.
class InnerCv {
 public:
  InnerCv(const features::MulticueDataset& ds, const GridSpec& grid, std::size_t jobs) : ds_(ds), grid_(grid), jobs_(jobs) {
    grid.validate();
    d_ = kernels::distances(ds, ds, jobs);
  }

  // accuracy(task, point, rep) for tasks holding out each set in `held_out`.
  void run(const std::vector<std::vector<int>>& held_out) {
    held_out_ = held_out;
    points_.clear();
    for (double l : grid_.lambdas)
      for (double gc : grid_.gammas_chi2)
        for (double gr : grid_.gammas_rbf)
          for (double w : grid_.w_emg) points_.push_back({{gc, gr, w, 1.0 - w}, l});

    // Kernel combos with identical Gram matrices (a zero-weighted cue's gamma
    // is irrelevant) are evaluated once.
    std::map<std::tuple<double, double, double>, std::size_t> combo_of;
    std::vector<kernels::KernelConfig> combos;
    combo_index_.assign(points_.size(), 0);
    for (std::size_t p = 0; p < points_.size(); ++p) {
      const auto& k = points_[p].kernel;
      const auto key = std::make_tuple(k.w_emg > 0.0 ? k.gamma_chi2 : 0.0, k.w_cnn > 0.0 ? k.gamma_rbf : 0.0, k.w_emg);
      auto [it, inserted] = combo_of.emplace(key, combos.size());
      if (inserted) combos.push_back(k);
      combo_index_[p] = it->second;
    }
    n_combos_ = combos.size();

    // acc_[((task * combos + combo) * lambdas + l) * reps + r]
    const std::size_t n_reps = held_out.empty() ? 0 : max_reps();
    acc_.assign(held_out.size() * n_combos_ * grid_.lambdas.size() * n_reps, std::numeric_limits<double>::quiet_NaN());
    parallel_for(held_out.size() * n_combos_, jobs_, [&](std::size_t job) {
      const std::size_t task = job / n_combos_;
      const std::size_t combo = job % n_combos_;
      evaluate(task, combo, combos[combo], n_reps);
    });
  }

  // Mean accuracy of grid point p for task t on each held-out repetition.
  double accuracy(std::size_t task, std::size_t point, std::size_t rep_slot) const {
    const std::size_t l = lambda_index(points_[point].lambda);
    const std::size_t n_reps = max_reps();
    return acc_[((task * n_combos_ + combo_index_[point]) * grid_.lambdas.size() + l) * n_reps + rep_slot];
  }

  const std::vector<GridPoint>& points() const { return points_; }

 private:
  std::size_t max_reps() const {
    std::size_t m = 0;
    for (const auto& h : held_out_) m = std::max(m, h.size());
    return m;
  }

  std::size_t lambda_index(double l) const {
    return static_cast<std::size_t>(std::find(grid_.lambdas.begin(), grid_.lambdas.end(), l) - grid_.lambdas.begin());
  }

  void evaluate(std::size_t task, std::size_t combo, const kernels::KernelConfig& cfg, std::size_t n_reps) {
    const auto& held = held_out_[task];
    std::vector<std::size_t> train;
    std::vector<std::vector<std::size_t>> val(held.size());
    for (std::size_t i = 0; i < ds_.size(); ++i) {
      const int r = ds_.repetitions[i];
      if (r < 0) continue;
      const auto it = std::find(held.begin(), held.end(), r);
      if (it == held.end()) {
        train.push_back(i);
      } else {
        val[static_cast<std::size_t>(it - held.begin())].push_back(i);
      }
    }
    if (train.empty()) throw DataError("inner fold has no training rows");
    auto block = [&](const std::vector<std::size_t>& rows, const std::vector<std::size_t>& cols) {
      const std::vector<Eigen::Index> r(rows.begin(), rows.end());
      const std::vector<Eigen::Index> c(cols.begin(), cols.end());
      if (cfg.w_emg > 0.0 && cfg.w_cnn > 0.0) return kernels::kernel_from_distances(d_.chi2(r, c), d_.sq(r, c), cfg);
      if (cfg.w_emg > 0.0) return kernels::kernel_from_distances(d_.chi2(r, c), Matrix(), cfg);
      return kernels::kernel_from_distances(Matrix(), d_.sq(r, c), cfg);
    };
    const Matrix g = block(train, train);
    std::vector<ClassId> labels;
    for (std::size_t i : train) labels.push_back(ds_.labels[i]);
    const Matrix y = krls::one_hot(labels, ds_.classes);
    std::vector<Matrix> g_val;
    for (const auto& v : val) g_val.push_back(block(v, train));
    for (std::size_t l = 0; l < grid_.lambdas.size(); ++l) {
      const Matrix alpha = krls::solve_regularized(g, y, grid_.lambdas[l]);
      for (std::size_t r = 0; r < val.size(); ++r) {
        if (val[r].empty()) continue;
        const auto cls = krls::argmax_rows(g_val[r] * alpha);
        std::size_t hit = 0;
        for (std::size_t i = 0; i < cls.size(); ++i) hit += ds_.classes[cls[i]] == ds_.labels[val[r][i]] ? 1 : 0;
        acc_[((task * n_combos_ + combo) * grid_.lambdas.size() + l) * n_reps + r] =
            static_cast<double>(hit) / static_cast<double>(cls.size());
      }
    }
  }

  const features::MulticueDataset& ds_;
  GridSpec grid_;
  std::size_t jobs_;
  kernels::Distances d_;
  std::vector<std::vector<int>> held_out_;
  std::vector<GridPoint> points_;
  std::vector<std::size_t> combo_index_;
  std::size_t n_combos_ = 0;
  std::vector<double> acc_;
};

// Picks the best point from per-point scores with the documented tie-break.
inline GridResult select_best(std::vector<GridPoint> points, std::vector<double> scores) {
  GridResult res;
  std::size_t best = 0;
  for (std::size_t p = 1; p < points.size(); ++p) {
    if (scores[p] > scores[best] || (scores[p] == scores[best] && preferred_on_tie(points[p], points[best]))) best = p;
  }
  res.best = points[best];
  res.best_score = scores[best];
  res.points = std::move(points);
  res.scores = std::move(scores);
  return res;
}

// Inner CV over the repetitions present in `train`: each repetition is held
// out once; a point's score is the mean held-out accuracy.
inline GridResult grid_search(const features::MulticueDataset& train, const GridSpec& grid, std::size_t jobs = 1) {
  const auto reps = repetitions_of(train);
  if (reps.size() < 2) throw DataError("grid search needs at least two repetitions in the training set");
  InnerCv cv(train, grid, jobs);
  std::vector<std::vector<int>> tasks;
  for (int r : reps) tasks.push_back({r});
  cv.run(tasks);
  std::vector<double> scores(cv.points().size(), 0.0);
  for (std::size_t p = 0; p < scores.size(); ++p) {
    double s = 0.0;
    for (std::size_t t = 0; t < tasks.size(); ++t) s += cv.accuracy(t, p, 0);
    scores[p] = s / static_cast<double>(tasks.size());
  }
  return select_best(cv.points(), std::move(scores));
}

// ---------------------------------------------------------------- metrics

inline void require_same_length(std::size_t a, std::size_t b) {
  if (a != b) throw DataError("prediction and truth lengths differ");
}

inline double accuracy(const std::vector<ClassId>& preds, const std::vector<ClassId>& truth) {
  require_same_length(preds.size(), truth.size());
  if (preds.empty()) throw DataError("accuracy of an empty sequence");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) hit += preds[i] == truth[i] ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(preds.size());
}

// Causal mode over the last min(k, t+1) predictions; a tie for the mode keeps
// the previous output.
inline std::vector<ClassId> majority_vote(const std::vector<ClassId>& preds, std::size_t k) {
  if (k == 0) throw ValidationError("majority vote window must be >= 1");
  std::vector<ClassId> out(preds.size());
  std::map<ClassId, std::size_t> counts;
  for (std::size_t t = 0; t < preds.size(); ++t) {
    ++counts[preds[t]];
    if (t >= k) {
      auto it = counts.find(preds[t - k]);
      if (--it->second == 0) counts.erase(it);
    }
    if (t == 0) {
      out[t] = preds[t];
      continue;
    }
    std::size_t top = 0;
    std::size_t n_top = 0;
    ClassId mode = out[t - 1];
    for (const auto& [c, n] : counts) {
      if (n > top) {
        top = n;
        n_top = 1;
        mode = c;
      } else if (n == top) {
        ++n_top;
      }
    }
    out[t] = n_top == 1 ? mode : out[t - 1];
  }
  return out;
}

template <typename T>
std::vector<T> run_length_encode(const std::vector<T>& v) {
  std::vector<T> out;
  for (const auto& x : v) {
    if (out.empty() || out.back() != x) out.push_back(x);
  }
  return out;
}

template <typename T>
std::size_t levenshtein(const std::vector<T>& a, const std::vector<T>& b) {
  std::vector<std::size_t> prev(b.size() + 1);
  std::vector<std::size_t> cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

// Edit distance between the collapsed movement strings over the length of
// the true string.
inline double movement_error_rate(const std::vector<ClassId>& preds, const std::vector<ClassId>& truth) {
  require_same_length(preds.size(), truth.size());
  if (truth.empty()) throw DataError("movement error rate of an empty sequence");
  const auto p = run_length_encode(preds);
  const auto t = run_length_encode(truth);
  return static_cast<double>(levenshtein(t, p)) / static_cast<double>(t.size());
}

struct DelayResult {
  std::optional<double> mean;  // seconds; empty if no segment was ever matched
  std::size_t matched = 0;
  std::size_t missed = 0;
};

// For each change of the true label, the time until the prediction first
// equals the new label within that segment.
inline DelayResult prediction_delay(const std::vector<ClassId>& preds, const std::vector<ClassId>& truth, double rate) {
  require_same_length(preds.size(), truth.size());
  if (!(rate > 0.0)) throw ValidationError("rate must be positive");
  DelayResult r;
  double total = 0.0;
  std::size_t t0 = 1;
  while (t0 < truth.size()) {
    if (truth[t0] == truth[t0 - 1]) {
      ++t0;
      continue;
    }
    std::size_t end = t0;
    while (end < truth.size() && truth[end] == truth[t0]) ++end;
    std::size_t t1 = t0;
    while (t1 < end && preds[t1] != truth[t0]) ++t1;
    if (t1 < end) {
      total += static_cast<double>(t1 - t0) / rate;
      ++r.matched;
    } else {
      ++r.missed;
    }
    t0 = end;
  }
  if (r.matched > 0) r.mean = total / static_cast<double>(r.matched);
  return r;
}

// A rest phase [rest_begin, grasp_begin) followed by its grasp
// [grasp_begin, grasp_end), in the same coordinates as the `times` passed to
// phase_normalized_error.
struct PhaseSegment {
  std::size_t rest_begin = 0;
  std::size_t grasp_begin = 0;
  std::size_t grasp_end = 0;

  bool operator==(const PhaseSegment&) const = default;
};

// Rest runs immediately followed by a movement run.
inline std::vector<PhaseSegment> phase_segments(const std::vector<ClassId>& labels) {
  std::vector<PhaseSegment> out;
  std::size_t i = 0;
  while (i < labels.size()) {
    std::size_t j = i;
    while (j < labels.size() && labels[j] == labels[i]) ++j;
    if (labels[i] == kRestClass && j < labels.size()) {
      std::size_t k = j;
      while (k < labels.size() && labels[k] == labels[j]) ++k;
      out.push_back({i, j, k});
    }
    i = j;
  }
  return out;
}

// Per-bin error sums and segment counts, so curves can be pooled across folds.
struct PhaseCurve {
  std::vector<double> error_sum;
  std::vector<std::size_t> segments;

  explicit PhaseCurve(std::size_t bins = 50) : error_sum(bins, 0.0), segments(bins, 0) {}

  std::vector<double> mean() const {
    std::vector<double> out(error_sum.size(), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t b = 0; b < out.size(); ++b) {
      if (segments[b] > 0) out[b] = error_sum[b] / static_cast<double>(segments[b]);
    }
    return out;
  }

  // Bin b spans [-1 + 2b/B, -1 + 2(b+1)/B).
  double bin_center(std::size_t b) const {
    return -1.0 + (2.0 * static_cast<double>(b) + 1.0) / static_cast<double>(error_sum.size());
  }
};

// Accumulates one curve: rest mapped to [-1, 0), its grasp to [0, 1); each
// segment contributes its misclassification fraction to every bin it hits.
inline void accumulate_phase_error(PhaseCurve& curve, const std::vector<ClassId>& preds,
                                   const std::vector<ClassId>& truth, const std::vector<std::size_t>& times,
                                   const std::vector<PhaseSegment>& segments) {
  require_same_length(preds.size(), truth.size());
  require_same_length(preds.size(), times.size());
  const std::size_t bins = curve.error_sum.size();
  std::vector<double> err(bins);
  std::vector<std::size_t> cnt(bins);
  for (const auto& s : segments) {
    if (s.grasp_begin <= s.rest_begin || s.grasp_end <= s.grasp_begin) {
      log_warn("eval", "skipping phase segment with a zero-duration phase");
      continue;
    }
    std::fill(err.begin(), err.end(), 0.0);
    std::fill(cnt.begin(), cnt.end(), 0);
    const auto row = static_cast<std::size_t>(std::lower_bound(times.begin(), times.end(), s.rest_begin) - times.begin());
    for (std::size_t i = row; i < times.size() && times[i] < s.grasp_end; ++i) {
      const std::size_t t = times[i];
      const double u = t < s.grasp_begin
                           ? -1.0 + static_cast<double>(t - s.rest_begin) / static_cast<double>(s.grasp_begin - s.rest_begin)
                           : static_cast<double>(t - s.grasp_begin) / static_cast<double>(s.grasp_end - s.grasp_begin);
      auto b = static_cast<std::size_t>(std::floor((u + 1.0) / 2.0 * static_cast<double>(bins)));
      b = std::min(b, bins - 1);
      err[b] += preds[i] != truth[i] ? 1.0 : 0.0;
      ++cnt[b];
    }
    for (std::size_t b = 0; b < bins; ++b) {
      if (cnt[b] == 0) continue;
      curve.error_sum[b] += err[b] / static_cast<double>(cnt[b]);
      ++curve.segments[b];
    }
  }
}

// Segments index into `times` order; times must be increasing.
inline std::vector<double> phase_normalized_error(const std::vector<ClassId>& preds, const std::vector<ClassId>& truth,
                                                  const std::vector<std::size_t>& times,
                                                  const std::vector<PhaseSegment>& segments, std::size_t bins = 50) {
  if (bins == 0) throw ValidationError("phase curve needs at least one bin");
  PhaseCurve c(bins);
  accumulate_phase_error(c, preds, truth, times, segments);
  return c.mean();
}

// Sample-index convenience: times are 0..T-1.
inline std::vector<double> phase_normalized_error(const std::vector<ClassId>& preds, const std::vector<ClassId>& truth,
                                                  const std::vector<PhaseSegment>& segments, std::size_t bins = 50) {
  std::vector<std::size_t> times(preds.size());
  for (std::size_t i = 0; i < times.size(); ++i) times[i] = i;
  return phase_normalized_error(preds, truth, times, segments, bins);
}

// Counts with rows = true class, columns = predicted class.
inline Matrix confusion(const std::vector<ClassId>& preds, const std::vector<ClassId>& truth,
                        const std::vector<ClassId>& classes) {
  require_same_length(preds.size(), truth.size());
  Matrix cm = Matrix::Zero(static_cast<Eigen::Index>(classes.size()), static_cast<Eigen::Index>(classes.size()));
  auto index = [&](ClassId c) {
    const auto it = std::lower_bound(classes.begin(), classes.end(), c);
    if (it == classes.end() || *it != c) throw DataError("class " + std::to_string(c) + " not in class list");
    return it - classes.begin();
  };
  for (std::size_t i = 0; i < preds.size(); ++i) cm(index(truth[i]), index(preds[i])) += 1.0;
  return cm;
}

// Rows scaled to sum to one; all-zero rows stay zero.
inline Matrix row_normalize(const Matrix& cm) {
  Matrix out = cm;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double s = out.row(i).sum();
    if (s > 0.0) out.row(i) /= s;
  }
  return out;
}

inline Matrix confusion_delta(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw DataError("confusion matrices differ in shape");
  return row_normalize(a) - row_normalize(b);
}

}  // namespace mmgrasp::eval
