#pragma once

// EMG-gated fixation detection.
//
// AvgRmsEmg (mean over channels of the trailing-window RMS) is z-scored
// against its own strictly-past window (Bollinger band); samples with
// z >= eta form onset intervals. Gaze volatility is the mean Euclidean
// distance of the trailing gaze window from its centroid. Its threshold is a
// percentile of the trailing volatility history, refreshed periodically. A
// fixation event is emitted for a below-threshold run of volatility at the
// run's first sample that falls inside an onset interval.
//
// detect_fixations() is the batch implementation; OnlineFixationDetector is
// the streaming state machine. Both produce the same events.

#include "mmgrasp/common.hpp"
#include "mmgrasp/ingest.hpp"

#include <algorithm>
#include <array>
#include <deque>
#include <limits>
#include <optional>
#include <span>
#include <vector>

namespace mmgrasp::fixation {

struct DetectorParams {
  double tau_rms = 0.300;
  double tau_boll = 0.300;
  double tau_gaze = 0.300;
  double eta = 2.0;
  double percentile = 0.40;
  double threshold_update_period = 0.5;
  double volatility_history = 10.0;
  double sigma_floor = 1e-9;

  void validate() const {
    for (double v : {tau_rms, tau_boll, tau_gaze, eta, threshold_update_period, volatility_history, sigma_floor}) {
      if (!(v > 0.0)) throw ValidationError("detector parameters must be positive");
    }
    if (!(percentile > 0.0 && percentile < 1.0)) throw ValidationError("percentile must lie in (0, 1)");
  }

  bool operator==(const DetectorParams&) const = default;
};

// Half-open sample range [start, end).
struct OnsetInterval {
  std::size_t start = 0;
  std::size_t end = 0;

  bool operator==(const OnsetInterval&) const = default;
};

struct FixationEvent {
  std::size_t time = 0;
  std::array<double, 2> centroid{};
  double volatility = 0.0;

  bool operator==(const FixationEvent&) const = default;
};

// Mean over channels of the RMS of samples [t - W + 1, t], W = tau_rms * rate.
inline double avg_rms(const RowMatrix& emg, std::size_t t, double tau_rms, double rate) {
  const std::size_t w = window_samples(tau_rms, rate);
  if (t + 1 < w || t >= static_cast<std::size_t>(emg.rows())) throw DataError("avg_rms: window does not fit at t");
  double total = 0.0;
  for (Eigen::Index c = 0; c < emg.cols(); ++c) {
    double sq = 0.0;
    for (std::size_t i = t + 1 - w; i <= t; ++i) {
      const double v = emg(static_cast<Eigen::Index>(i), c);
      sq += v * v;
    }
    total += std::sqrt(sq / static_cast<double>(w));
  }
  return total / static_cast<double>(emg.cols());
}

// (x_t - mean) / max(std, sigma_floor) over the W samples strictly before t.
// Population standard deviation.
inline double bollinger(std::span<const double> series, std::size_t t, double tau_boll, double rate,
                        double sigma_floor) {
  const std::size_t w = window_samples(tau_boll, rate);
  if (t < w || t >= series.size()) throw DataError("bollinger: insufficient history at t");
  double mean = 0.0;
  for (std::size_t i = t - w; i < t; ++i) mean += series[i];
  mean /= static_cast<double>(w);
  double var = 0.0;
  for (std::size_t i = t - w; i < t; ++i) {
    const double d = series[i] - mean;
    var += d * d;
  }
  const double sigma = std::sqrt(var / static_cast<double>(w));
  return (series[t] - mean) / std::max(sigma, sigma_floor);
}

namespace detail {

// b at every index, NaN where the history does not fit.
inline std::vector<double> bollinger_series(std::span<const double> series, const DetectorParams& params,
                                            double rate) {
  const std::size_t w = window_samples(params.tau_boll, rate);
  std::vector<double> out(series.size(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t t = w; t < series.size(); ++t) {
    out[t] = bollinger(series, t, params.tau_boll, rate, params.sigma_floor);
  }
  return out;
}

inline std::vector<OnsetInterval> onsets_from(const std::vector<double>& b, double eta) {
  std::vector<OnsetInterval> out;
  bool open = false;
  for (std::size_t t = 0; t < b.size(); ++t) {
    const bool above = b[t] >= eta;  // false for NaN
    if (above && !open) {
      out.push_back({t, t + 1});
      open = true;
    } else if (above) {
      out.back().end = t + 1;
    } else {
      open = false;
    }
  }
  return out;
}

}  // namespace detail

// Maximal runs of b >= eta, in series indices.
inline std::vector<OnsetInterval> detect_onsets(std::span<const double> series, const DetectorParams& params,
                                                double rate) {
  params.validate();
  return detail::onsets_from(detail::bollinger_series(series, params, rate), params.eta);
}

namespace detail {

struct GazeRun {
  double x = 0.0;
  double y = 0.0;
  std::size_t count = 0;
};

struct WindowStats {
  std::array<double, 2> centroid{};
  double volatility = 0.0;
};

// Centroid and mean distance of a window described as runs of repeated
// points, visited oldest to newest by `visit(fn)`.
template <typename Visit>
WindowStats run_window_stats(Visit&& visit, std::size_t window) {
  double sx = 0.0;
  double sy = 0.0;
  std::size_t runs = 0;
  visit([&](double x, double y, std::size_t n) {
    sx += static_cast<double>(n) * x;
    sy += static_cast<double>(n) * y;
    ++runs;
  });
  WindowStats s;
  if (runs == 1) {
    // Coincident points: exact zero, not the rounding residue of n * x / n.
    visit([&](double x, double y, std::size_t) { s.centroid = {x, y}; });
    return s;
  }
  const double w = static_cast<double>(window);
  s.centroid = {sx / w, sy / w};
  double dist = 0.0;
  visit([&](double x, double y, std::size_t n) {
    dist += static_cast<double>(n) * std::hypot(x - s.centroid[0], y - s.centroid[1]);
  });
  s.volatility = dist / w;
  return s;
}

// Linear-interpolated percentile (p in (0,1)) of a nonempty sample.
inline double percentile(std::vector<double> values, double p) {
  const double pos = p * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(lo), values.end());
  const double a = values[lo];
  if (lo + 1 >= values.size()) return a;
  const double b = *std::min_element(values.begin() + static_cast<std::ptrdiff_t>(lo) + 1, values.end());
  return a + (pos - static_cast<double>(lo)) * (b - a);
}

struct Windows {
  std::size_t rms;
  std::size_t boll;
  std::size_t gaze;
  std::size_t history;
  std::size_t period;

  Windows(const DetectorParams& p, double rate)
      : rms(window_samples(p.tau_rms, rate)),
        boll(window_samples(p.tau_boll, rate)),
        gaze(window_samples(p.tau_gaze, rate)),
        history(window_samples(p.volatility_history, rate)),
        period(window_samples(p.threshold_update_period, rate)) {}

  // Threshold refreshes happen at multiples of `period` once a full history
  // window lies behind the sample.
  bool is_tick(std::size_t t) const { return t > 0 && t % period == 0 && t >= history; }
};

// Trailing mean-over-channels RMS, fed one EMG row at a time. Sliding sums
// of squares are re-summed exactly once per window to bound drift. Both
// detectors use this so their AvgRmsEmg values are bit-identical.
class RmsTracker {
 public:
  RmsTracker(std::size_t window, std::size_t channels)
      : w_(window), channels_(channels), squares_(window * channels, 0.0), sums_(channels, 0.0) {}

  std::optional<double> push(const double* row) {
    const std::size_t slot = t_ % w_;
    for (std::size_t c = 0; c < channels_; ++c) {
      const double sq = row[c] * row[c];
      auto& cell = squares_[slot * channels_ + c];
      sums_[c] += sq - cell;
      cell = sq;
    }
    if (slot == w_ - 1) {
      for (std::size_t c = 0; c < channels_; ++c) {
        double s = 0.0;
        for (std::size_t k = 0; k < w_; ++k) s += squares_[k * channels_ + c];
        sums_[c] = s;
      }
    }
    ++t_;
    if (t_ < w_) return std::nullopt;
    double r = 0.0;
    for (std::size_t c = 0; c < channels_; ++c) r += std::sqrt(std::max(sums_[c], 0.0) / static_cast<double>(w_));
    return r / static_cast<double>(channels_);
  }

 private:
  std::size_t w_;
  std::size_t channels_;
  std::size_t t_ = 0;
  std::vector<double> squares_;
  std::vector<double> sums_;
};

// Run/emission state shared by both detectors.
struct RunState {
  bool in_run = false;
  bool emitted = false;

  // Returns true when an event should be emitted at this sample.
  bool step(bool defined, bool below, bool in_onset) {
    if (!defined) return false;
    if (!below) {
      in_run = false;
      return false;
    }
    if (!in_run) {
      in_run = true;
      emitted = false;
    }
    if (!emitted && in_onset) {
      emitted = true;
      return true;
    }
    return false;
  }
};

}  // namespace detail

// Mean Euclidean distance of gaze samples [t - W + 1, t] from their centroid.
// Returns nullopt if any sample in the window is flagged invalid.
inline std::optional<double> gaze_volatility(const RowMatrix& gaze, std::size_t t, double tau_gaze, double rate,
                                             std::span<const std::uint8_t> valid = {}) {
  const std::size_t w = window_samples(tau_gaze, rate);
  if (t + 1 < w || t >= static_cast<std::size_t>(gaze.rows())) throw DataError("gaze_volatility: window does not fit at t");
  if (!valid.empty()) {
    for (std::size_t i = t + 1 - w; i <= t; ++i) {
      if (!valid[i]) return std::nullopt;
    }
  }
  bool coincident = true;
  for (std::size_t i = t + 1 - w; i < t && coincident; ++i) {
    coincident = gaze(static_cast<Eigen::Index>(i), 0) == gaze(static_cast<Eigen::Index>(t), 0) &&
                 gaze(static_cast<Eigen::Index>(i), 1) == gaze(static_cast<Eigen::Index>(t), 1);
  }
  if (coincident) return 0.0;
  double cx = 0.0;
  double cy = 0.0;
  for (std::size_t i = t + 1 - w; i <= t; ++i) {
    cx += gaze(static_cast<Eigen::Index>(i), 0);
    cy += gaze(static_cast<Eigen::Index>(i), 1);
  }
  cx /= static_cast<double>(w);
  cy /= static_cast<double>(w);
  double dist = 0.0;
  for (std::size_t i = t + 1 - w; i <= t; ++i) {
    dist += std::hypot(gaze(static_cast<Eigen::Index>(i), 0) - cx, gaze(static_cast<Eigen::Index>(i), 1) - cy);
  }
  return dist / static_cast<double>(w);
}

// Per-sample intermediate series of a batch detection, NaN where undefined.
struct FixationTrace {
  std::vector<double> avg_rms;
  std::vector<double> bollinger;
  std::vector<double> volatility;
  std::vector<double> threshold;
  std::vector<OnsetInterval> onsets;
};

inline std::vector<FixationEvent> detect_fixations(const ingest::SyncedRecording& rec, const DetectorParams& params,
                                                   FixationTrace* trace = nullptr) {
  params.validate();
  const detail::Windows win(params, rec.rate);
  const std::size_t n = rec.size();
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<FixationEvent> events;
  if (n < win.rms + win.boll) {
    if (trace) *trace = {};
    return events;
  }

  // AvgRmsEmg for t >= W_rms - 1.
  const std::size_t offset = win.rms - 1;
  std::vector<double> rms;
  rms.reserve(n - offset);
  {
    detail::RmsTracker tracker(win.rms, rec.channels());
    for (std::size_t i = 0; i < n; ++i) {
      if (const auto r = tracker.push(rec.emg.data() + static_cast<Eigen::Index>(i) * rec.emg.cols())) rms.push_back(*r);
    }
  }

  std::vector<std::uint8_t> in_onset(n, 0);
  const auto boll = detail::bollinger_series(rms, params, rec.rate);
  const auto onsets = detail::onsets_from(boll, params.eta);
  for (const auto& iv : onsets) {
    for (std::size_t j = iv.start; j < iv.end; ++j) in_onset[j + offset] = 1;
  }

  // Volatility over runs of identical consecutive gaze points.
  std::vector<double> vol(n, nan);
  std::vector<std::array<double, 2>> centroid(n);
  {
    std::vector<detail::GazeRun> runs;
    std::vector<std::size_t> run_start;
    for (std::size_t i = 0; i < n; ++i) {
      const double x = rec.gaze(static_cast<Eigen::Index>(i), 0);
      const double y = rec.gaze(static_cast<Eigen::Index>(i), 1);
      if (!runs.empty() && runs.back().x == x && runs.back().y == y) {
        ++runs.back().count;
      } else {
        runs.push_back({x, y, 1});
        run_start.push_back(i);
      }
    }
    std::size_t invalid_in_window = 0;
    std::size_t first_run = 0;
    std::size_t last_run = 0;
    for (std::size_t t = 0; t < n; ++t) {
      if (!rec.gaze_valid[t]) ++invalid_in_window;
      if (t >= win.gaze && !rec.gaze_valid[t - win.gaze]) --invalid_in_window;
      while (last_run + 1 < runs.size() && run_start[last_run + 1] <= t) ++last_run;
      if (t + 1 < win.gaze) continue;
      const std::size_t lo = t + 1 - win.gaze;
      while (run_start[first_run] + runs[first_run].count <= lo) ++first_run;
      if (invalid_in_window > 0) continue;
      auto visit = [&](auto&& fn) {
        for (std::size_t r = first_run; r <= last_run; ++r) {
          const std::size_t a = std::max(run_start[r], lo);
          const std::size_t b = std::min(run_start[r] + runs[r].count, t + 1);
          fn(runs[r].x, runs[r].y, b - a);
        }
      };
      const auto s = detail::run_window_stats(visit, win.gaze);
      vol[t] = s.volatility;
      centroid[t] = s.centroid;
    }
  }

  std::vector<double> thr(n, nan);
  {
    double current = nan;
    for (std::size_t t = 0; t < n; ++t) {
      if (win.is_tick(t)) {
        std::vector<double> hist;
        for (std::size_t i = t - win.history; i < t; ++i) {
          if (!std::isnan(vol[i])) hist.push_back(vol[i]);
        }
        current = hist.empty() ? nan : detail::percentile(std::move(hist), params.percentile);
      }
      thr[t] = current;
    }
  }

  detail::RunState state;
  for (std::size_t t = 0; t < n; ++t) {
    const bool defined = !std::isnan(vol[t]);
    const bool below = defined && !std::isnan(thr[t]) && vol[t] < thr[t];
    if (state.step(defined, below, in_onset[t] != 0)) events.push_back({t, centroid[t], vol[t]});
  }

  if (trace) {
    trace->avg_rms.assign(n, nan);
    trace->bollinger.assign(n, nan);
    for (std::size_t j = 0; j < rms.size(); ++j) {
      trace->avg_rms[j + offset] = rms[j];
      trace->bollinger[j + offset] = boll[j];
    }
    trace->volatility = std::move(vol);
    trace->threshold = std::move(thr);
    trace->onsets.clear();
    for (const auto& iv : onsets) trace->onsets.push_back({iv.start + offset, iv.end + offset});
  }
  return events;
}

// Streaming detector: one push per synchronized sample. Single owner.
class OnlineFixationDetector {
 public:
  OnlineFixationDetector(const DetectorParams& params, double rate, std::size_t channels)
      : params_((params.validate(), params)), win_(params, rate), channels_(channels), rate_(rate),
        rms_(win_.rms, channels) {
    if (channels == 0) throw ValidationError("detector needs at least one EMG channel");
    rms_hist_.reserve(2 * win_.boll);
    valid_ring_.assign(win_.gaze, 1);
  }

  std::optional<FixationEvent> push(std::span<const double> emg_row, double gaze_x, double gaze_y, bool gaze_valid) {
    if (emg_row.size() != channels_) throw DataError("EMG row has wrong channel count");
    const std::size_t t = t_++;

    bool in_onset = false;
    if (const auto r = rms_.push(emg_row.data())) in_onset = bollinger_push(*r);

    // Gaze window as runs of repeated points.
    const std::size_t gslot = t % win_.gaze;
    if (t >= win_.gaze) {
      invalid_ -= valid_ring_[gslot] ? 0 : 1;
      if (--runs_.front().count == 0) runs_.pop_front();
    }
    valid_ring_[gslot] = gaze_valid ? 1 : 0;
    invalid_ += gaze_valid ? 0 : 1;
    if (!runs_.empty() && runs_.back().x == gaze_x && runs_.back().y == gaze_y) {
      ++runs_.back().count;
    } else {
      runs_.push_back({gaze_x, gaze_y, 1});
    }

    std::optional<detail::WindowStats> stats;
    if (t + 1 >= win_.gaze && invalid_ == 0) {
      auto visit = [&](auto&& fn) {
        for (const auto& run : runs_) fn(run.x, run.y, run.count);
      };
      stats = detail::run_window_stats(visit, win_.gaze);
    }

    if (win_.is_tick(t)) {
      while (!history_.empty() && history_.front().first + win_.history < t) history_.pop_front();
      std::vector<double> values;
      values.reserve(history_.size());
      for (const auto& [idx, v] : history_) values.push_back(v);
      threshold_ = values.empty() ? std::nullopt : std::optional<double>(detail::percentile(std::move(values), params_.percentile));
    }
    if (stats) {
      history_.emplace_back(t, stats->volatility);
      while (history_.front().first + win_.history < t) history_.pop_front();
    }

    const bool below = stats && threshold_ && stats->volatility < *threshold_;
    if (state_.step(stats.has_value(), below, in_onset)) {
      return FixationEvent{t, stats->centroid, stats->volatility};
    }
    return std::nullopt;
  }

  std::size_t samples_seen() const { return t_; }

 private:
  // Same two-pass z-score as the batch path, over a history buffer trimmed
  // back to W values whenever it reaches 2W.
  bool bollinger_push(double r) {
    const std::size_t w = win_.boll;
    rms_hist_.push_back(r);
    bool above = false;
    if (rms_hist_.size() > w) {
      above = bollinger(rms_hist_, rms_hist_.size() - 1, params_.tau_boll, rate_, params_.sigma_floor) >= params_.eta;
    }
    if (rms_hist_.size() >= 2 * w) rms_hist_.erase(rms_hist_.begin(), rms_hist_.end() - static_cast<std::ptrdiff_t>(w));
    return above;
  }

  DetectorParams params_;
  detail::Windows win_;
  std::size_t channels_;
  std::size_t t_ = 0;

  double rate_;
  detail::RmsTracker rms_;
  std::vector<double> rms_hist_;

  std::deque<detail::GazeRun> runs_;
  std::vector<std::uint8_t> valid_ring_;
  std::size_t invalid_ = 0;

  std::deque<std::pair<std::size_t, double>> history_;
  std::optional<double> threshold_;
  detail::RunState state_;
};

inline std::vector<FixationEvent> detect_fixations_online(const ingest::SyncedRecording& rec,
                                                          const DetectorParams& params) {
  OnlineFixationDetector det(params, rec.rate, rec.channels());
  std::vector<FixationEvent> events;
  for (std::size_t t = 0; t < rec.size(); ++t) {
    const auto row = static_cast<Eigen::Index>(t);
    const std::span<const double> emg(rec.emg.data() + row * rec.emg.cols(), static_cast<std::size_t>(rec.emg.cols()));
    if (auto ev = det.push(emg, rec.gaze(row, 0), rec.gaze(row, 1), rec.gaze_valid[t] != 0)) events.push_back(*ev);
  }
  return events;
}

// ------------------------------------------------------------ fixation CSV
// Header `t,x,y,volatility`; t in seconds on the recording clock.

inline void write_fixations_csv(const std::string& path, const std::vector<FixationEvent>& events, double rate,
                                double start_time) {
  std::string s = "t,x,y,volatility\n";
  for (const auto& e : events) {
    io::append_number(s, start_time + static_cast<double>(e.time) / rate);
    s += ',';
    io::append_number(s, e.centroid[0]);
    s += ',';
    io::append_number(s, e.centroid[1]);
    s += ',';
    io::append_number(s, e.volatility);
    s += '\n';
  }
  io::write_file(path, s);
}

inline std::vector<FixationEvent> read_fixations_csv(const std::string& path, double rate, double start_time) {
  auto csv = io::CsvReader::open(path);
  std::vector<std::string_view> f;
  if (!csv.next(f) || f.size() != 4 || f[0] != "t" || f[1] != "x" || f[2] != "y" || f[3] != "volatility") {
    csv.fail("expected header 't,x,y,volatility'");
  }
  std::vector<FixationEvent> out;
  while (csv.next(f)) {
    if (f.size() != 4) csv.fail("expected 4 fields");
    const double t = csv.number(f[0], "t");
    const double idx = std::round((t - start_time) * rate);
    if (idx < 0.0) csv.fail("fixation precedes recording start");
    FixationEvent e;
    e.time = static_cast<std::size_t>(idx);
    e.centroid = {csv.number(f[1], "x"), csv.number(f[2], "y")};
    e.volatility = csv.number(f[3], "volatility");
    out.push_back(e);
  }
  return out;
}

}  // namespace mmgrasp::fixation
