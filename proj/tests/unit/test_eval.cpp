#include "mmgrasp/eval.hpp"

#include <gtest/gtest.h>

#include <random>
#include <set>

using namespace mmgrasp;
using namespace mmgrasp::eval;

namespace {

using Seq = std::vector<ClassId>;

// Repeats each (label, length) pair.
Seq runs(std::initializer_list<std::pair<ClassId, std::size_t>> parts) {
  Seq s;
  for (const auto& [c, n] : parts) s.insert(s.end(), n, c);
  return s;
}

features::MulticueDataset labelled(const Seq& labels, const std::vector<int>& reps) {
  features::MulticueDataset ds;
  ds.emg = RowMatrix::Ones(static_cast<Eigen::Index>(labels.size()), 2);
  ds.vis = RowMatrix::Zero(static_cast<Eigen::Index>(labels.size()), 1);
  ds.labels = labels;
  ds.repetitions = reps;
  ds.trials = reps;
  for (std::size_t i = 0; i < labels.size(); ++i) ds.times.push_back(i);
  std::set<ClassId> c(labels.begin(), labels.end());
  ds.classes.assign(c.begin(), c.end());
  ds.rate = 2000.0;
  return ds;
}

}  // namespace

TEST(CvSplits, FourRepsFourDisjointFolds) {
  Seq labels;
  std::vector<int> reps;
  for (int r = 0; r < 4; ++r) {
    for (ClassId c : {0, 1, 2}) {
      labels.insert(labels.end(), 5, c);
      reps.insert(reps.end(), 5, r);
    }
  }
  labels.insert(labels.end(), 3, 0);  // trailing rows outside any trial
  reps.insert(reps.end(), 3, -1);
  const auto ds = labelled(labels, reps);
  const auto folds = cv_splits(ds, 4);
  ASSERT_EQ(folds.size(), 4u);
  std::set<std::size_t> all_test;
  for (const auto& f : folds) {
    for (std::size_t i : f.test) {
      EXPECT_TRUE(all_test.insert(i).second);
      EXPECT_EQ(ds.repetitions[i], f.test_repetition);
      EXPECT_EQ(std::find(f.train.begin(), f.train.end(), i), f.train.end());
    }
    EXPECT_EQ(f.train.size() + f.test.size(), labels.size() - 3);
  }
  EXPECT_EQ(all_test.size(), labels.size() - 3);  // every row that belongs to a repetition
}

TEST(CvSplits, Errors) {
  EXPECT_THROW(cv_splits(labelled({0, 1}, {0, 0}), 1), ValidationError);
  EXPECT_THROW(cv_splits(labelled({0, 1}, {0, 0}), 2), DataError);
  // Movement 2 lacks repetition 1.
  EXPECT_THROW(cv_splits(labelled({1, 2, 1, 0}, {0, 0, 1, 1}), 2), DataError);
}

TEST(Grid, DefaultSizeAndSingleton) {
  GridSpec g;
  EXPECT_EQ(g.size(), 6u * 4u * 4u * 11u);
  EXPECT_EQ(g.size(), 1056u);
  GridSpec empty;
  empty.lambdas.clear();
  EXPECT_THROW(empty.validate(), ValidationError);
  GridSpec bad;
  bad.w_emg = {1.5};
  EXPECT_THROW(bad.validate(), ValidationError);
}

TEST(Grid, TieBreakPrefersRegularization) {
  const GridPoint a{{0x1p-10, 0x1p-16, 0.5, 0.5}, 0x1p-6};
  const GridPoint b{{0x1p-10, 0x1p-16, 0.5, 0.5}, 0x1p-8};
  EXPECT_TRUE(preferred_on_tie(a, b));
  const GridPoint c{{0x1p-12, 0x1p-16, 0.5, 0.5}, 0x1p-8};
  EXPECT_TRUE(preferred_on_tie(c, b));
  const GridPoint d{{0x1p-12, 0x1p-18, 0.5, 0.5}, 0x1p-8};
  EXPECT_TRUE(preferred_on_tie(d, c));
  const auto best = select_best({b, a, c}, {0.7, 0.7, 0.6});
  EXPECT_EQ(best.best.lambda, a.lambda);
  EXPECT_EQ(best.best_score, 0.7);
}

TEST(MajorityVote, Examples) {
  const Seq p{0, 0, 1, 0, 0};
  EXPECT_EQ(majority_vote(p, 3), (Seq{0, 0, 0, 0, 0}));
  EXPECT_EQ(majority_vote(p, 1), p);
  const Seq c(20, 4);
  for (std::size_t k : {1, 2, 7, 50}) EXPECT_EQ(majority_vote(c, k), c);
  EXPECT_THROW(majority_vote(p, 0), ValidationError);
  // Tie keeps the previous output: window {0,1} after output 0.
  EXPECT_EQ(majority_vote({0, 1, 1}, 2), (Seq{0, 0, 1}));
  EXPECT_EQ(majority_vote({}, 3), Seq{});
}

TEST(MajorityVote, OutputComesFromWindowOrPrevious) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> u(0, 4);
  for (std::size_t k : {1, 2, 3, 5, 11, 25}) {
    Seq p(300);
    for (auto& v : p) v = u(rng);
    const auto out = majority_vote(p, k);
    for (std::size_t t = 1; t < p.size(); ++t) {
      const std::size_t lo = t + 1 >= k ? t + 1 - k : 0;
      const bool in_window = std::find(p.begin() + static_cast<std::ptrdiff_t>(lo), p.begin() + static_cast<std::ptrdiff_t>(t + 1), out[t]) !=
                             p.begin() + static_cast<std::ptrdiff_t>(t + 1);
      EXPECT_TRUE(in_window || out[t] == out[t - 1]);
    }
  }
}

TEST(MajorityVote, PerfectPredictionsOnlyLag) {
  // A causal mode cannot switch before the new label holds a strict majority,
  // so smoothing the truth delays every change by floor(k/2) samples and
  // changes nothing else.
  const auto truth = runs({{0, 300}, {3, 450}, {0, 310}, {7, 400}, {0, 290}});
  for (std::size_t k : {1, 3, 5, 11, 25, 50, 100, 150, 250}) {
    const auto smoothed = majority_vote(truth, k);
    EXPECT_EQ(movement_error_rate(smoothed, truth), 0.0) << k;
    const auto d = prediction_delay(smoothed, truth, 1.0);
    EXPECT_EQ(*d.mean, static_cast<double>(k / 2)) << k;
    EXPECT_EQ(d.missed, 0u);
    EXPECT_DOUBLE_EQ(accuracy(smoothed, truth), 1.0 - 4.0 * static_cast<double>(k / 2) / static_cast<double>(truth.size()));
  }
  const Seq flat(500, 3);
  for (std::size_t k : {1, 50, 250}) EXPECT_EQ(accuracy(majority_vote(flat, k), flat), 1.0);
}

TEST(Accuracy, Examples) {
  EXPECT_EQ(accuracy({1, 2, 3}, {1, 2, 3}), 1.0);
  EXPECT_EQ(accuracy({0, 0}, {1, 1}), 0.0);
  EXPECT_EQ(accuracy({1, 0, 1, 0}, {1, 1, 1, 1}), 0.5);
  EXPECT_THROW(accuracy({1}, {1, 2}), DataError);
  EXPECT_THROW(accuracy({}, {}), DataError);
}

TEST(Mer, Examples) {
  const auto truth = runs({{0, 10}, {1, 10}, {0, 10}});
  EXPECT_EQ(movement_error_rate(truth, truth), 0.0);
  const auto pred = runs({{0, 10}, {1, 5}, {2, 5}, {0, 10}});
  EXPECT_DOUBLE_EQ(movement_error_rate(pred, truth), 1.0 / 3.0);
  EXPECT_THROW(movement_error_rate({}, {}), DataError);
  EXPECT_THROW(movement_error_rate({1}, {1, 1}), DataError);
  EXPECT_EQ(levenshtein(Seq{1, 2, 3}, Seq{1, 3}), 1u);
  EXPECT_EQ(levenshtein(Seq{}, Seq{1, 3}), 2u);
  EXPECT_EQ(run_length_encode(Seq{1, 1, 2, 2, 1}), (Seq{1, 2, 1}));
}

TEST(Mer, ShiftInvariance) {
  const auto truth = runs({{0, 50}, {2, 60}, {0, 50}, {5, 60}, {0, 40}});
  for (std::size_t d : {1, 5, 20, 39}) {
    Seq shifted(truth.size());
    for (std::size_t i = 0; i < truth.size(); ++i) shifted[i] = i < d ? truth[0] : truth[i - d];
    EXPECT_EQ(movement_error_rate(shifted, truth), 0.0) << d;
    const auto r = prediction_delay(shifted, truth, 100.0);
    ASSERT_TRUE(r.mean.has_value());
    EXPECT_NEAR(*r.mean, static_cast<double>(d) / 100.0, 1e-12);
    EXPECT_EQ(r.matched, 4u);
  }
}

TEST(Delay, Examples) {
  const auto truth = runs({{0, 100}, {1, 100}});
  const auto r0 = prediction_delay(truth, truth, 100.0);
  EXPECT_EQ(*r0.mean, 0.0);
  EXPECT_EQ(r0.missed, 0u);
  const auto pred = runs({{0, 110}, {1, 90}});
  const auto r1 = prediction_delay(pred, truth, 100.0);
  EXPECT_NEAR(*r1.mean, 0.1, 1e-12);
  EXPECT_EQ(r1.matched, 1u);
  const auto never = runs({{0, 200}});
  const auto r2 = prediction_delay(never, truth, 100.0);
  EXPECT_FALSE(r2.mean.has_value());
  EXPECT_EQ(r2.missed, 1u);
  const auto flat = prediction_delay(never, never, 100.0);
  EXPECT_FALSE(flat.mean.has_value());
  EXPECT_EQ(flat.matched + flat.missed, 0u);
  EXPECT_THROW(prediction_delay(never, truth, 0.0), ValidationError);
}

TEST(PhaseError, PerfectAllWrongAndOnsetOnly) {
  // Rest 100 samples then grasp 200, repeated.
  const auto truth = runs({{0, 100}, {1, 200}, {0, 100}, {2, 200}});
  const auto segs = phase_segments(truth);
  ASSERT_EQ(segs.size(), 2u);
  EXPECT_EQ(segs[0], (PhaseSegment{0, 100, 300}));
  EXPECT_EQ(segs[1], (PhaseSegment{300, 400, 600}));

  for (double v : phase_normalized_error(truth, truth, segs, 50)) EXPECT_EQ(v, 0.0);
  Seq wrong(truth.size(), 9);
  for (double v : phase_normalized_error(wrong, truth, segs, 50)) EXPECT_EQ(v, 1.0);

  // Errors in the first 10% of each grasp: the grasp spans bins 25..49, so
  // they fill bins 25 and 26 and half of bin 27.
  Seq onset = truth;
  for (const auto& s : segs) {
    for (std::size_t t = s.grasp_begin; t < s.grasp_begin + (s.grasp_end - s.grasp_begin) / 10; ++t) onset[t] = 0;
  }
  const auto curve = phase_normalized_error(onset, truth, segs, 50);
  for (std::size_t b = 0; b < 50; ++b) EXPECT_EQ(curve[b], b == 25 || b == 26 ? 1.0 : (b == 27 ? 0.5 : 0.0)) << b;
  EXPECT_NEAR(PhaseCurve(50).bin_center(25), 0.02, 1e-15);
}

TEST(PhaseError, StridedTimesAndZeroDurationSkip) {
  const auto full = runs({{0, 100}, {1, 200}});
  std::vector<std::size_t> times;
  Seq truth;
  for (std::size_t t = 0; t < full.size(); t += 10) {
    times.push_back(t);
    truth.push_back(full[t]);
  }
  const auto segs = phase_segments(full);
  const auto curve = phase_normalized_error(truth, truth, times, segs, 10);
  for (double v : curve) EXPECT_EQ(v, 0.0);
  const std::vector<PhaseSegment> degenerate{{100, 100, 300}};
  for (double v : phase_normalized_error(truth, truth, times, degenerate, 10)) EXPECT_TRUE(std::isnan(v));
}

TEST(Confusion, TraceAndDelta) {
  const Seq truth{0, 0, 1, 1, 1, 2};
  const Seq pred{0, 1, 1, 1, 0, 2};
  const Matrix cm = confusion(pred, truth, {0, 1, 2});
  EXPECT_EQ(cm(0, 0), 1.0);
  EXPECT_EQ(cm(0, 1), 1.0);
  EXPECT_EQ(cm(1, 0), 1.0);
  EXPECT_EQ(cm(1, 1), 2.0);
  EXPECT_EQ(cm.trace() / cm.sum(), accuracy(pred, truth));
  EXPECT_EQ(cm.row(1).sum(), 3.0);  // class sample count
  EXPECT_THROW(confusion({5}, {0}, {0, 1}), DataError);

  Matrix a(2, 2);
  a << 3, 1, 0, 2;
  Matrix b(2, 2);
  b << 1, 1, 1, 3;
  Matrix expect(2, 2);
  expect << 0.25, -0.25, -0.25, 0.25;
  EXPECT_LE((confusion_delta(a, b) - expect).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_TRUE(confusion_delta(a, a).isZero(0.0));
  EXPECT_LE(confusion_delta(a, b).rowwise().sum().cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_THROW(confusion_delta(a, Matrix::Zero(3, 3)), DataError);
}
