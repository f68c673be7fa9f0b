// Randomized sweeps over the module invariants.

#include "mmgrasp/eval.hpp"
#include "mmgrasp/features.hpp"
#include "mmgrasp/ingest.hpp"
#include "mmgrasp/kernels.hpp"
#include "mmgrasp/krls.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace mmgrasp;

namespace {

ingest::EmgStream random_emg(std::mt19937_64& rng, double rate, double t0, std::size_t n, int ch) {
  std::normal_distribution<double> g(0.0, 1e-4);
  ingest::EmgStream e;
  e.samples.resize(static_cast<Eigen::Index>(n), ch);
  for (std::size_t i = 0; i < n; ++i) {
    e.timestamps.push_back(t0 + static_cast<double>(i) / rate);
    for (int c = 0; c < ch; ++c) e.samples(static_cast<Eigen::Index>(i), c) = g(rng);
  }
  return e;
}

ingest::GazeStream random_gaze(std::mt19937_64& rng, double rate, double t0, std::size_t n) {
  std::uniform_real_distribution<double> px(0.0, 1000.0);
  std::bernoulli_distribution ok(0.9);
  ingest::GazeStream g;
  g.points.resize(static_cast<Eigen::Index>(n), 2);
  for (std::size_t i = 0; i < n; ++i) {
    g.timestamps.push_back(t0 + static_cast<double>(i) / rate);
    g.points(static_cast<Eigen::Index>(i), 0) = px(rng);
    g.points(static_cast<Eigen::Index>(i), 1) = px(rng);
    g.valid.push_back(ok(rng) ? 1 : 0);
  }
  return g;
}

TEST(IngestProperties, LengthsAgreeAcrossRatePairs) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> emg_rate(500.0, 4000.0);
  std::uniform_real_distribution<double> gaze_rate(20.0, 250.0);
  std::uniform_real_distribution<double> offset(0.0, 0.05);
  for (int trial = 0; trial < 30; ++trial) {
    const double er = emg_rate(rng);
    const double gr = gaze_rate(rng);
    const auto emg = random_emg(rng, er, offset(rng), static_cast<std::size_t>(er * 1.5), 3);
    const auto gaze = random_gaze(rng, gr, offset(rng), static_cast<std::size_t>(gr * 1.5));
    const double out_rate = trial % 2 ? er : 1000.0;
    const auto rec = ingest::synchronize(emg, gaze, {{0.3, 0.8, 2, 0, 0}}, out_rate);
    ASSERT_NO_THROW(rec.validate());
    EXPECT_EQ(static_cast<std::size_t>(rec.emg.rows()), rec.size());
    EXPECT_EQ(static_cast<std::size_t>(rec.gaze.rows()), rec.size());
    EXPECT_EQ(rec.gaze_valid.size(), rec.size());
    EXPECT_EQ(rec.trial_ids.size(), rec.size());
    EXPECT_EQ(rec.repetition_ids.size(), rec.size());
  }
}

TEST(IngestProperties, SynchronizeIsIdempotent) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const double rate = 500.0 * (1 + trial % 4);
    const auto emg = random_emg(rng, rate, 0.0, static_cast<std::size_t>(rate), 2);
    const auto gaze = random_gaze(rng, rate, 0.0, static_cast<std::size_t>(rate));
    const auto once = ingest::synchronize(emg, gaze, {{0.1, 0.5, 1, 0, 0}, {0.5, 0.7, 0, 0, 0}}, rate);
    ingest::EmgStream e;
    ingest::GazeStream g;
    std::vector<ingest::LabelInterval> l;
    ingest::to_streams(once, e, g, l);
    EXPECT_EQ(ingest::synchronize(e, g, l, rate), once);
  }
}

TEST(IngestProperties, NotchIsLinear) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> coef(-3.0, 3.0);
  for (int trial = 0; trial < 10; ++trial) {
    const double rate = trial % 2 ? 2000.0 : 1000.0;
    const double f0 = trial % 3 ? 50.0 : 60.0;
    RowMatrix x(1500, 2);
    RowMatrix y(1500, 2);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      x.data()[i] = g(rng);
      y.data()[i] = g(rng);
    }
    const double a = coef(rng);
    const double b = coef(rng);
    const RowMatrix lhs = ingest::notch_filter(a * x + b * y, f0, rate);
    const RowMatrix rhs = a * ingest::notch_filter(x, f0, rate) + b * ingest::notch_filter(y, f0, rate);
    EXPECT_LE((lhs - rhs).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(FeatureProperties, MdwtNonnegativeAndHomogeneous) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> scale(0.0, 20.0);
  const char* wavelets[] = {"db1", "db4", "db7", "db10"};
  for (int trial = 0; trial < 40; ++trial) {
    features::MdwtConfig cfg;
    cfg.wavelet = wavelets[trial % 4];
    cfg.levels = 1 + trial % 4;
    RowMatrix w(100 + 37 * (trial % 9), 1 + trial % 5);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = g(rng);
    const double c = trial == 0 ? 0.0 : scale(rng);
    const auto f = features::mdwt(w, cfg);
    const auto fc = features::mdwt(c * w, cfg);
    ASSERT_EQ(f.size(), fc.size());
    for (std::size_t i = 0; i < f.size(); ++i) {
      EXPECT_GE(f[i], 0.0);
      EXPECT_NEAR(fc[i], c * f[i], 1e-9 * std::max(1.0, c * f[i]));
    }
  }
}

features::MulticueDataset random_dataset(std::mt19937_64& rng, std::size_t n, int classes) {
  std::uniform_real_distribution<double> u(0.0, 2.0);
  features::MulticueDataset d;
  d.emg.resize(static_cast<Eigen::Index>(n), 6);
  d.vis.resize(static_cast<Eigen::Index>(n), 4);
  for (Eigen::Index i = 0; i < d.emg.size(); ++i) d.emg.data()[i] = u(rng);
  for (Eigen::Index i = 0; i < d.vis.size(); ++i) d.vis.data()[i] = u(rng) - 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    d.labels.push_back(static_cast<ClassId>(i % static_cast<std::size_t>(classes)));
    d.times.push_back(i);
    d.repetitions.push_back(static_cast<int>(i % 2));
    d.trials.push_back(0);
  }
  for (int c = 0; c < classes; ++c) d.classes.push_back(c);
  return d;
}

TEST(KernelProperties, SymmetricBoundedUnitDiagonal) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> w(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const auto d = random_dataset(rng, 30, 3);
    const double we = trial == 0 ? 1.0 : trial == 1 ? 0.0 : w(rng);
    const kernels::KernelConfig cfg{0.5, 0.3, we, 1.0 - we};
    for (std::size_t i = 0; i < d.size(); ++i) {
      const auto a = kernels::sample(d, i);
      EXPECT_DOUBLE_EQ(kernels::k_multicue(a, a, cfg), 1.0);
      for (std::size_t j = 0; j < d.size(); ++j) {
        const auto b = kernels::sample(d, j);
        const double k = kernels::k_multicue(a, b, cfg);
        EXPECT_EQ(k, kernels::k_multicue(b, a, cfg));
        EXPECT_GE(k, 0.0);
        EXPECT_LE(k, 1.0);
      }
    }
  }
}

TEST(KrlsProperties, ResidualBound) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> lam(-12.0, 2.0);
  for (int trial = 0; trial < 10; ++trial) {
    const auto d = random_dataset(rng, 20 + 15 * static_cast<std::size_t>(trial), 4);
    const double l = std::exp2(lam(rng));
    const kernels::KernelConfig cfg{0.4, 0.7, 0.5, 0.5};
    const Matrix g = kernels::gram(d, d, cfg);
    const auto m = krls::train(g, d.labels, d.classes, l);
    const Matrix y = krls::one_hot(d.labels, d.classes);
    const Matrix r = (g + l * Matrix::Identity(g.rows(), g.cols())) * m.alpha - y;
    EXPECT_LE(r.cwiseAbs().maxCoeff(), 1e-8);
  }
}

std::vector<ClassId> step_sequence(std::mt19937_64& rng, std::size_t segments, std::size_t& n) {
  std::uniform_int_distribution<int> len(5, 30);
  std::vector<ClassId> t;
  for (std::size_t s = 0; s < segments; ++s) t.insert(t.end(), static_cast<std::size_t>(len(rng)), s % 2 ? 1 + static_cast<ClassId>(s % 5) : 0);
  n = t.size();
  return t;
}

TEST(MetricProperties, DelayGrowsByShift) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    std::size_t n = 0;
    const auto truth = step_sequence(rng, 8, n);
    // Predictions lag the truth by s samples; every segment is >= 5 long so
    // shifts up to 4 keep each segment matched.
    for (std::size_t s = 0; s <= 4; ++s) {
      std::vector<ClassId> pred(n);
      for (std::size_t i = 0; i < n; ++i) pred[i] = truth[i < s ? 0 : i - s];
      const auto d = eval::prediction_delay(pred, truth, 100.0);
      ASSERT_TRUE(d.mean.has_value());
      EXPECT_NEAR(*d.mean, static_cast<double>(s) / 100.0, 1e-12);
      EXPECT_EQ(d.missed, 0u);
      EXPECT_EQ(eval::movement_error_rate(pred, truth), 0.0);
    }
  }
}

TEST(MetricProperties, ConfusionTraceIsAccuracy) {
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<int> c(0, 4);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<ClassId> p(300);
    std::vector<ClassId> t(300);
    for (std::size_t i = 0; i < p.size(); ++i) {
      t[i] = c(rng);
      p[i] = i % 3 ? t[i] : c(rng);
    }
    const auto cm = eval::confusion(p, t, {0, 1, 2, 3, 4});
    EXPECT_DOUBLE_EQ(cm.trace() / cm.sum(), eval::accuracy(p, t));
    for (Eigen::Index k = 0; k < cm.rows(); ++k) {
      EXPECT_EQ(cm.row(k).sum(), static_cast<double>(std::count(t.begin(), t.end(), static_cast<ClassId>(k))));
    }
  }
}

TEST(MetricProperties, MajorityVoteStaysInWindow) {
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<int> c(0, 3);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<ClassId> p(400);
    for (auto& x : p) x = c(rng);
    EXPECT_EQ(eval::majority_vote(p, 1), p);
    for (std::size_t k : {2, 5, 11, 50}) {
      const auto v = eval::majority_vote(p, k);
      for (std::size_t t = 0; t < p.size(); ++t) {
        const auto lo = p.begin() + static_cast<std::ptrdiff_t>(t + 1 - std::min(k, t + 1));
        const bool in_window = std::find(lo, p.begin() + static_cast<std::ptrdiff_t>(t + 1), v[t]) != p.begin() + static_cast<std::ptrdiff_t>(t + 1);
        EXPECT_TRUE(in_window || (t > 0 && v[t] == v[t - 1]));
      }
    }
  }
}

}  // namespace
