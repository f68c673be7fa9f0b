#pragma once

// Kernel regularized least squares, one-vs-all through one-hot targets:
// (G + lambda I) alpha = Y, scores = G_test alpha, class = argmax.

#include "mmgrasp/common.hpp"
#include "mmgrasp/features.hpp"
#include "mmgrasp/io.hpp"
#include "mmgrasp/kernels.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <vector>

namespace mmgrasp::krls {

// Y[i][k] = 1 iff labels[i] == classes[k].
inline Matrix one_hot(const std::vector<ClassId>& labels, const std::vector<ClassId>& classes) {
  Matrix y = Matrix::Zero(static_cast<Eigen::Index>(labels.size()), static_cast<Eigen::Index>(classes.size()));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto it = std::lower_bound(classes.begin(), classes.end(), labels[i]);
    if (it == classes.end() || *it != labels[i]) throw DataError("label " + std::to_string(labels[i]) + " not in class list");
    y(static_cast<Eigen::Index>(i), it - classes.begin()) = 1.0;
  }
  return y;
}

// Solves (G + lambda I) X = Y by Cholesky; G is read from its lower triangle
// and taken by value so callers can move a large Gram matrix in.
inline Matrix solve_regularized(Matrix a, const Matrix& y, double lambda) {
  if (!(lambda > 0.0)) throw ValidationError("lambda must be positive");
  if (a.rows() != a.cols() || a.rows() != y.rows()) throw DataError("Gram and target shapes disagree");
  a.diagonal().array() += lambda;
  Eigen::LLT<Eigen::Ref<Matrix>> llt(a);
  if (llt.info() != Eigen::Success) throw DataError("Cholesky factorization of G + lambda I failed");
  Matrix x = llt.solve(y);
  if (!x.allFinite()) throw DataError("KRLS solve produced non-finite coefficients");
  return x;
}

// Index of the largest entry per row; ties go to the lowest index.
inline std::vector<std::size_t> argmax_rows(const Matrix& scores) {
  std::vector<std::size_t> out(static_cast<std::size_t>(scores.rows()), 0);
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < scores.cols(); ++k) {
      if (scores(i, k) > scores(i, best)) best = k;
    }
    out[static_cast<std::size_t>(i)] = static_cast<std::size_t>(best);
  }
  return out;
}

struct Prediction {
  Matrix scores;                 // [M x K]
  std::vector<ClassId> classes;  // [M]
};

struct TrainedModel {
  Matrix alpha;                   // [N x K]
  std::vector<ClassId> classes;   // K sorted class ids
  kernels::KernelConfig kernel;
  double lambda = 1.0;
  features::MulticueDataset train;  // empty when trained from a bare Gram matrix

  Prediction predict_gram(const Matrix& g_test) const {
    if (g_test.cols() != alpha.rows()) throw DataError("test Gram has " + std::to_string(g_test.cols()) + " columns, model has " + std::to_string(alpha.rows()) + " training samples");
    Prediction p;
    p.scores = g_test * alpha;
    for (std::size_t k : argmax_rows(p.scores)) p.classes.push_back(classes[k]);
    return p;
  }
};

inline TrainedModel train(Matrix g, const std::vector<ClassId>& labels, const std::vector<ClassId>& classes,
                          double lambda) {
  if (classes.empty()) throw DataError("class list is empty");
  TrainedModel m;
  m.classes = classes;
  m.lambda = lambda;
  m.alpha = solve_regularized(std::move(g), one_hot(labels, classes), lambda);
  return m;
}

// Trains on a dataset with the given kernel; the model keeps the training set.
inline TrainedModel fit(const features::MulticueDataset& train_set, const kernels::KernelConfig& cfg, double lambda,
                        std::size_t jobs = 1) {
  auto m = train(kernels::gram(train_set, train_set, cfg, jobs), train_set.labels, train_set.classes, lambda);
  m.kernel = cfg;
  m.train = train_set;
  return m;
}

// Kernel-expansion prediction in row blocks so the test Gram never has to
// exist in full.
inline Prediction predict(const TrainedModel& m, const features::MulticueDataset& test, std::size_t jobs = 1,
                          std::size_t block = 2048) {
  if (m.train.size() != static_cast<std::size_t>(m.alpha.rows())) throw DataError("model carries no training set");
  kernels::check_compatible(test, m.train);
  Prediction out;
  out.scores.resize(static_cast<Eigen::Index>(test.size()), m.alpha.cols());
  for (std::size_t lo = 0; lo < test.size(); lo += block) {
    const std::size_t hi = std::min(lo + block, test.size());
    const auto d = kernels::distances(test, lo, hi, m.train, jobs, m.kernel.w_emg > 0.0, m.kernel.w_cnn > 0.0);
    out.scores.middleRows(static_cast<Eigen::Index>(lo), static_cast<Eigen::Index>(hi - lo)) =
        kernels::kernel_from_distances(d, m.kernel) * m.alpha;
  }
  for (std::size_t k : argmax_rows(out.scores)) out.classes.push_back(m.classes[k]);
  return out;
}

// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Model file: magic "MMKM", u32 version, kernel config, lambda, classes,
// alpha (row-major), training-set hash, then the embedded training set.
inline void save_model(const std::string& path, const TrainedModel& m) {
  const std::string train_bytes = features::encode_dataset(m.train);
  io::BinaryWriter w;
  w.put_bytes("MMKM");
  w.put<std::uint32_t>(1);
  for (double v : {m.kernel.gamma_chi2, m.kernel.gamma_rbf, m.kernel.w_emg, m.kernel.w_cnn, m.lambda}) w.put<double>(v);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(m.classes.size()));
  w.put_array<ClassId>(m.classes);
  w.put<std::uint64_t>(static_cast<std::uint64_t>(m.alpha.rows()));
  const RowMatrix alpha = m.alpha;
  w.put_array<double>({alpha.data(), static_cast<std::size_t>(alpha.size())});
  w.put<std::uint64_t>(fnv1a(train_bytes));
  w.put_bytes(train_bytes);
  io::write_file(path, w.data());
}

inline TrainedModel load_model(const std::string& path) {
  auto r = io::BinaryReader::open(path);
  r.expect_magic("MMKM");
  if (const auto v = r.get<std::uint32_t>(); v != 1) throw DataError(path + ": unsupported model version " + std::to_string(v));
  TrainedModel m;
  m.kernel.gamma_chi2 = r.get<double>();
  m.kernel.gamma_rbf = r.get<double>();
  m.kernel.w_emg = r.get<double>();
  m.kernel.w_cnn = r.get<double>();
  m.lambda = r.get<double>();
  m.kernel.validate();
  const auto k = r.get<std::uint32_t>();
  if (k == 0 || k > 1'000'000) throw DataError(path + ": implausible class count");
  m.classes.resize(k);
  r.get_array<ClassId>(m.classes);
  const auto n = r.get<std::uint64_t>();
  if (n > (std::uint64_t{1} << 24)) throw DataError(path + ": implausible training size");
  RowMatrix alpha(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
  r.get_array<double>({alpha.data(), static_cast<std::size_t>(alpha.size())});
  m.alpha = alpha;
  const auto hash = r.get<std::uint64_t>();
  m.train = features::decode_dataset(r);
  if (!r.at_end()) throw DataError(path + ": trailing bytes after model");
  if (fnv1a(features::encode_dataset(m.train)) != hash) throw DataError(path + ": training set hash mismatch");
  if (m.train.size() != n || m.train.classes != m.classes) throw DataError(path + ": training set does not match coefficients");
  return m;
}

}  // namespace mmgrasp::krls
