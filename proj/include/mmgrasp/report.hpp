#pragma once

// EvalReport as JSON and the plotting CSVs derived from it. NaN phase bins
// (no samples) and undefined delays serialize as null.

#include "mmgrasp/eval.hpp"
#include "mmgrasp/experiment.hpp"
#include "mmgrasp/io.hpp"

#include <json.hpp>

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace mmgrasp::report {

using json = nlohmann::json;

inline constexpr int kReportVersion = 1;

namespace detail {

inline json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    rows.push_back(std::move(r));
  }
  return rows;
}

template <typename T>
T field(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end()) throw ValidationError(std::string("report: missing key '") + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("report.") + key + ": " + e.what());
  }
}

}  // namespace detail

inline json to_json(const experiment::EvalReport& r, bool with_predictions = true) {
  json folds = json::array();
  for (const auto& f : r.folds) {
    json jf = {{"test_repetition", f.test_repetition},
               {"accuracy", f.accuracy},
               {"inner_score", f.inner_score},
               {"lambda", f.chosen.lambda},
               {"gamma_chi2", f.chosen.kernel.gamma_chi2},
               {"gamma_rbf", f.chosen.kernel.gamma_rbf},
               {"w_emg", f.chosen.kernel.w_emg},
               {"w_cnn", f.chosen.kernel.w_cnn}};
    if (with_predictions) {
      jf["predictions"] = f.predictions;
      jf["truth"] = f.truth;
    }
    folds.push_back(std::move(jf));
  }
  json sweep = json::array();
  for (const auto& s : r.sweep) {
    sweep.push_back({{"k", s.k}, {"mer", s.mer}, {"delay", s.delay ? json(*s.delay) : json(nullptr)}, {"missed", s.missed}});
  }
  json phase = json::array();
  for (double v : r.phase_error) phase.push_back(detail::number_or_null(v));
  return {{"version", kReportVersion},
          {"cue", experiment::to_string(r.cue)},
          {"classes", r.classes},
          {"test_stride", r.test_stride},
          {"rate", r.rate},
          {"accuracy", r.accuracy},
          {"rest_prevalence", r.rest_prevalence},
          {"mean_w_emg", r.mean_w_emg()},
          {"confusion", detail::matrix_to_json(r.confusion)},
          {"folds", std::move(folds)},
          {"sweep", std::move(sweep)},
          {"phase_error", std::move(phase)}};
}

inline experiment::EvalReport report_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("report: expected a JSON object");
  if (detail::field<int>(j, "version") != kReportVersion) throw ValidationError("report: unsupported version");
  experiment::EvalReport r;
  r.cue = experiment::parse_cue(detail::field<std::string>(j, "cue"));
  r.classes = detail::field<std::vector<ClassId>>(j, "classes");
  r.test_stride = detail::field<std::size_t>(j, "test_stride");
  r.rate = detail::field<double>(j, "rate");
  r.accuracy = detail::field<double>(j, "accuracy");
  r.rest_prevalence = detail::field<double>(j, "rest_prevalence");
  const auto cm = detail::field<std::vector<std::vector<double>>>(j, "confusion");
  const auto k = static_cast<Eigen::Index>(r.classes.size());
  if (static_cast<Eigen::Index>(cm.size()) != k) throw ValidationError("report: confusion shape does not match classes");
  r.confusion.resize(k, k);
  for (Eigen::Index a = 0; a < k; ++a) {
    if (static_cast<Eigen::Index>(cm[static_cast<std::size_t>(a)].size()) != k) throw ValidationError("report: confusion shape does not match classes");
    for (Eigen::Index b = 0; b < k; ++b) r.confusion(a, b) = cm[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
  }
  for (const auto& jf : detail::field<json>(j, "folds")) {
    experiment::FoldReport f;
    f.test_repetition = detail::field<int>(jf, "test_repetition");
    f.accuracy = detail::field<double>(jf, "accuracy");
    f.inner_score = detail::field<double>(jf, "inner_score");
    f.chosen.lambda = detail::field<double>(jf, "lambda");
    f.chosen.kernel.gamma_chi2 = detail::field<double>(jf, "gamma_chi2");
    f.chosen.kernel.gamma_rbf = detail::field<double>(jf, "gamma_rbf");
    f.chosen.kernel.w_emg = detail::field<double>(jf, "w_emg");
    f.chosen.kernel.w_cnn = detail::field<double>(jf, "w_cnn");
    if (jf.contains("predictions")) {
      f.predictions = detail::field<std::vector<ClassId>>(jf, "predictions");
      f.truth = detail::field<std::vector<ClassId>>(jf, "truth");
    }
    r.folds.push_back(std::move(f));
  }
  for (const auto& js : detail::field<json>(j, "sweep")) {
    experiment::SweepPoint s;
    s.k = detail::field<std::size_t>(js, "k");
    s.mer = detail::field<double>(js, "mer");
    if (!js.at("delay").is_null()) s.delay = detail::field<double>(js, "delay");
    s.missed = detail::field<std::size_t>(js, "missed");
    r.sweep.push_back(s);
  }
  for (const auto& v : detail::field<json>(j, "phase_error")) {
    r.phase_error.push_back(v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>());
  }
  return r;
}

// report.json holds an array, one entry per cue.
inline void save_reports(const std::string& path, const std::vector<experiment::EvalReport>& reports,
                         bool with_predictions = true) {
  json a = json::array();
  for (const auto& r : reports) a.push_back(to_json(r, with_predictions));
  io::write_file(path, a.dump() + "\n");
}

inline std::vector<experiment::EvalReport> load_reports(const std::string& path) {
  json j;
  try {
    j = json::parse(io::read_file(path));
  } catch (const json::parse_error& e) {
    throw ParseError(path, 0, e.what());
  }
  if (j.is_object()) j = json::array({j});
  if (!j.is_array()) throw ValidationError("report: expected an array of cue reports");
  std::vector<experiment::EvalReport> out;
  for (const auto& e : j) out.push_back(report_from_json(e));
  return out;
}

// ----------------------------------------------------------------- CSVs

inline std::string accuracy_csv(const std::vector<experiment::EvalReport>& reports) {
  std::string s = "cue,accuracy,rest_prevalence";
  std::size_t n_folds = 0;
  for (const auto& r : reports) n_folds = std::max(n_folds, r.folds.size());
  for (std::size_t f = 0; f < n_folds; ++f) s += ",fold" + std::to_string(f);
  s += '\n';
  for (const auto& r : reports) {
    s += experiment::to_string(r.cue);
    s += ',';
    io::append_number(s, r.accuracy);
    s += ',';
    io::append_number(s, r.rest_prevalence);
    for (std::size_t f = 0; f < n_folds; ++f) {
      s += ',';
      if (f < r.folds.size()) io::append_number(s, r.folds[f].accuracy);
    }
    s += '\n';
  }
  return s;
}

// Per-fold chosen hyperparameters, cue weights included.
inline std::string weights_csv(const std::vector<experiment::EvalReport>& reports) {
  std::string s = "cue,test_repetition,w_emg,w_cnn,lambda,gamma_chi2,gamma_rbf,inner_score\n";
  for (const auto& r : reports) {
    if (r.cue == experiment::Cue::baseline) continue;
    for (const auto& f : r.folds) {
      s += experiment::to_string(r.cue);
      s += ',';
      io::append_number(s, static_cast<long long>(f.test_repetition));
      for (double v : {f.chosen.kernel.w_emg, f.chosen.kernel.w_cnn, f.chosen.lambda, f.chosen.kernel.gamma_chi2,
                       f.chosen.kernel.gamma_rbf, f.inner_score}) {
        s += ',';
        io::append_number(s, v);
      }
      s += '\n';
    }
  }
  return s;
}

// One row per bin, one column per cue; empty cells for bins with no samples.
inline std::string phase_csv(const std::vector<experiment::EvalReport>& reports) {
  std::size_t bins = 0;
  for (const auto& r : reports) bins = std::max(bins, r.phase_error.size());
  std::string s = "bin,center";
  for (const auto& r : reports) s += "," + experiment::to_string(r.cue);
  s += '\n';
  for (std::size_t b = 0; b < bins; ++b) {
    io::append_number(s, static_cast<long long>(b));
    s += ',';
    io::append_number(s, -1.0 + (2.0 * static_cast<double>(b) + 1.0) / static_cast<double>(bins));
    for (const auto& r : reports) {
      s += ',';
      if (b < r.phase_error.size() && std::isfinite(r.phase_error[b])) io::append_number(s, r.phase_error[b]);
    }
    s += '\n';
  }
  return s;
}

inline std::string sweep_csv(const std::vector<experiment::EvalReport>& reports) {
  std::string s = "cue,k,window_s,mer,delay_s,missed\n";
  for (const auto& r : reports) {
    const double dt = static_cast<double>(r.test_stride) / r.rate;
    for (const auto& p : r.sweep) {
      s += experiment::to_string(r.cue);
      s += ',';
      io::append_number(s, static_cast<long long>(p.k));
      s += ',';
      io::append_number(s, static_cast<double>(p.k) * dt);
      s += ',';
      io::append_number(s, p.mer);
      s += ',';
      if (p.delay) io::append_number(s, *p.delay);
      s += ',';
      io::append_number(s, static_cast<long long>(p.missed));
      s += '\n';
    }
  }
  return s;
}

inline std::string matrix_csv(const Matrix& m, const std::vector<ClassId>& classes) {
  std::string s = "class";
  for (ClassId c : classes) s += "," + std::to_string(c);
  s += '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    io::append_number(s, static_cast<long long>(classes[static_cast<std::size_t>(i)]));
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      s += ',';
      io::append_number(s, m(i, j));
    }
    s += '\n';
  }
  return s;
}

inline const experiment::EvalReport* find_cue(const std::vector<experiment::EvalReport>& reports, experiment::Cue cue) {
  for (const auto& r : reports) {
    if (r.cue == cue) return &r;
  }
  return nullptr;
}

// Writes accuracy.csv, weights.csv, phase.csv, sweep.csv and, when both
// emg and emg+cnn are present, confusion_delta.csv (fused minus EMG, row
// normalized). Returns the file names written.
inline std::vector<std::string> write_csvs(const std::string& dir, const std::vector<experiment::EvalReport>& reports) {
  std::vector<std::string> names{"accuracy.csv", "weights.csv", "phase.csv", "sweep.csv"};
  io::write_file(dir + "/accuracy.csv", accuracy_csv(reports));
  io::write_file(dir + "/weights.csv", weights_csv(reports));
  io::write_file(dir + "/phase.csv", phase_csv(reports));
  io::write_file(dir + "/sweep.csv", sweep_csv(reports));
  const auto* emg = find_cue(reports, experiment::Cue::emg);
  const auto* fused = find_cue(reports, experiment::Cue::emg_cnn);
  if (emg && fused && emg->classes == fused->classes) {
    io::write_file(dir + "/confusion_delta.csv", matrix_csv(eval::confusion_delta(fused->confusion, emg->confusion), emg->classes));
    names.push_back("confusion_delta.csv");
  }
  return names;
}

}  // namespace mmgrasp::report
