#pragma once

// Raw stream types, CSV loaders, timestamp synchronization, powerline notch
// filtering and the SyncedRecording binary container.

#include "mmgrasp/common.hpp"
#include "mmgrasp/io.hpp"

#include <algorithm>
#include <array>
#include <numbers>
#include <string>
#include <vector>

namespace mmgrasp::ingest {

struct EmgStream {
  std::vector<double> timestamps;  // seconds
  RowMatrix samples;               // [T_e x C] volts

  std::size_t channels() const { return static_cast<std::size_t>(samples.cols()); }
};

struct GazeStream {
  std::vector<double> timestamps;    // seconds
  RowMatrix points;                  // [T_g x 2] pixels
  std::vector<std::uint8_t> valid;   // 0/1
};

// Half-open interval [start, end) in seconds.
struct LabelInterval {
  double start = 0.0;
  double end = 0.0;
  ClassId label = kRestClass;
  int trial = -1;
  int repetition = -1;

  bool operator==(const LabelInterval&) const = default;
};

struct SyncedRecording {
  double rate = 2000.0;
  double start_time = 0.0;
  RowMatrix emg;                         // [T x C]
  RowMatrix gaze;                        // [T x 2]
  std::vector<std::uint8_t> gaze_valid;  // [T]
  std::vector<ClassId> labels;           // [T], 0 = rest
  std::vector<int> trial_ids;            // [T], -1 outside any trial
  std::vector<int> repetition_ids;       // [T], -1 outside any trial

  std::size_t size() const { return labels.size(); }
  std::size_t channels() const { return static_cast<std::size_t>(emg.cols()); }
  double time_of(std::size_t index) const { return start_time + static_cast<double>(index) / rate; }

  void validate() const {
    const auto t = size();
    if (!(rate > 0.0)) throw DataError("recording rate must be positive");
    if (static_cast<std::size_t>(emg.rows()) != t || static_cast<std::size_t>(gaze.rows()) != t ||
        gaze_valid.size() != t || trial_ids.size() != t || repetition_ids.size() != t) {
      throw DataError("recording arrays differ in length");
    }
    if (t > 0 && emg.cols() < 1) throw DataError("recording has no EMG channels");
    if (gaze.cols() != 2) throw DataError("gaze must have two columns");
  }

  bool operator==(const SyncedRecording& o) const {
    return rate == o.rate && start_time == o.start_time && same_matrix(emg, o.emg) && same_matrix(gaze, o.gaze) &&
           gaze_valid == o.gaze_valid && labels == o.labels && trial_ids == o.trial_ids &&
           repetition_ids == o.repetition_ids;
  }
};

namespace detail {

inline void require_increasing(const std::vector<double>& t, const char* what) {
  for (std::size_t i = 1; i < t.size(); ++i) {
    if (!(t[i] > t[i - 1])) {
      throw DataError(std::string(what) + " timestamps not strictly increasing at sample " + std::to_string(i));
    }
  }
}

constexpr double kTimeEps = 1e-9;

}  // namespace detail

// ---------------------------------------------------------------- CSV input

inline EmgStream read_emg_csv(const std::string& path) {
  auto csv = io::CsvReader::open(path);
  std::vector<std::string_view> f;
  if (!csv.next(f)) csv.fail("empty file, expected header 't,ch1..chC'");
  if (f.size() < 2 || f[0] != "t") csv.fail("expected header 't,ch1..chC'");
  std::vector<std::string> names(f.begin(), f.end());
  const std::size_t channels = f.size() - 1;

  EmgStream out;
  std::vector<double> values;
  while (csv.next(f)) {
    if (f.size() != channels + 1) {
      csv.fail("expected " + std::to_string(channels + 1) + " fields, got " + std::to_string(f.size()));
    }
    out.timestamps.push_back(csv.number(f[0], names[0]));
    for (std::size_t c = 0; c < channels; ++c) values.push_back(csv.number(f[c + 1], names[c + 1]));
  }
  out.samples = Eigen::Map<RowMatrix>(values.data(), static_cast<Eigen::Index>(out.timestamps.size()),
                                      static_cast<Eigen::Index>(channels));
  detail::require_increasing(out.timestamps, "EMG");
  return out;
}

inline GazeStream read_gaze_csv(const std::string& path) {
  auto csv = io::CsvReader::open(path);
  std::vector<std::string_view> f;
  if (!csv.next(f) || f.size() != 4 || f[0] != "t" || f[1] != "x" || f[2] != "y" || f[3] != "valid") {
    csv.fail("expected header 't,x,y,valid'");
  }
  GazeStream out;
  std::vector<double> pts;
  while (csv.next(f)) {
    if (f.size() != 4) csv.fail("expected 4 fields, got " + std::to_string(f.size()));
    out.timestamps.push_back(csv.number(f[0], "t"));
    const auto valid = csv.integer(f[3], "valid");
    if (valid != 0 && valid != 1) csv.fail("column 'valid' must be 0 or 1");
    out.valid.push_back(static_cast<std::uint8_t>(valid));
    // Invalid samples may carry placeholders; they are never read as points.
    double x = 0.0;
    double y = 0.0;
    if (valid) {
      x = csv.number(f[1], "x");
      y = csv.number(f[2], "y");
    }
    pts.push_back(x);
    pts.push_back(y);
  }
  out.points = Eigen::Map<RowMatrix>(pts.data(), static_cast<Eigen::Index>(out.timestamps.size()), 2);
  detail::require_increasing(out.timestamps, "gaze");
  return out;
}

inline std::vector<LabelInterval> read_labels_csv(const std::string& path) {
  auto csv = io::CsvReader::open(path);
  std::vector<std::string_view> f;
  if (!csv.next(f) || f.size() != 5 || f[0] != "t_start" || f[1] != "t_end" || f[2] != "label" ||
      f[3] != "trial" || f[4] != "repetition") {
    csv.fail("expected header 't_start,t_end,label,trial,repetition'");
  }
  std::vector<LabelInterval> out;
  while (csv.next(f)) {
    if (f.size() != 5) csv.fail("expected 5 fields, got " + std::to_string(f.size()));
    LabelInterval iv;
    iv.start = csv.number(f[0], "t_start");
    iv.end = csv.number(f[1], "t_end");
    iv.label = static_cast<ClassId>(csv.integer(f[2], "label"));
    iv.trial = static_cast<int>(csv.integer(f[3], "trial"));
    iv.repetition = static_cast<int>(csv.integer(f[4], "repetition"));
    if (!(iv.end > iv.start)) csv.fail("interval end must exceed start");
    if (iv.label < 0) csv.fail("label must be nonnegative");
    out.push_back(iv);
  }
  return out;
}

// --------------------------------------------------------------- CSV output

inline void write_emg_csv(const std::string& path, const EmgStream& emg) {
  std::string out = "t";
  for (std::size_t c = 0; c < emg.channels(); ++c) out += ",ch" + std::to_string(c + 1);
  out += '\n';
  out.reserve(emg.timestamps.size() * (emg.channels() + 1) * 22);
  for (std::size_t i = 0; i < emg.timestamps.size(); ++i) {
    io::append_number(out, emg.timestamps[i]);
    for (Eigen::Index c = 0; c < emg.samples.cols(); ++c) {
      out += ',';
      io::append_number(out, emg.samples(static_cast<Eigen::Index>(i), c));
    }
    out += '\n';
  }
  io::write_file(path, out);
}

inline void write_gaze_csv(const std::string& path, const GazeStream& gaze) {
  std::string out = "t,x,y,valid\n";
  for (std::size_t i = 0; i < gaze.timestamps.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    io::append_number(out, gaze.timestamps[i]);
    out += ',';
    io::append_number(out, gaze.points(r, 0));
    out += ',';
    io::append_number(out, gaze.points(r, 1));
    out += gaze.valid[i] ? ",1\n" : ",0\n";
  }
  io::write_file(path, out);
}

inline void write_labels_csv(const std::string& path, const std::vector<LabelInterval>& labels) {
  std::string out = "t_start,t_end,label,trial,repetition\n";
  for (const auto& iv : labels) {
    io::append_number(out, iv.start);
    out += ',';
    io::append_number(out, iv.end);
    out += ',';
    io::append_number(out, static_cast<long long>(iv.label));
    out += ',';
    io::append_number(out, static_cast<long long>(iv.trial));
    out += ',';
    io::append_number(out, static_cast<long long>(iv.repetition));
    out += '\n';
  }
  io::write_file(path, out);
}

// ---------------------------------------------------------- synchronization

// Resamples all modalities onto a common `rate` grid over the intersection of
// the EMG and gaze spans. EMG: nearest timestamp. Gaze: zero-order hold of the
// last sample at or before the grid time; grid points more than 1.5 gaze
// periods past that sample are a gap and flagged invalid.
inline SyncedRecording synchronize(const EmgStream& emg, const GazeStream& gaze,
                                   const std::vector<LabelInterval>& labels, double rate) {
  if (!(rate > 0.0)) throw ValidationError("rate must be positive");
  if (emg.timestamps.empty() || gaze.timestamps.empty()) throw DataError("empty stream");
  if (static_cast<std::size_t>(emg.samples.rows()) != emg.timestamps.size()) throw DataError("EMG shape mismatch");
  if (static_cast<std::size_t>(gaze.points.rows()) != gaze.timestamps.size() ||
      gaze.valid.size() != gaze.timestamps.size() || gaze.points.cols() != 2) {
    throw DataError("gaze shape mismatch");
  }
  if (emg.samples.cols() < 1) throw DataError("EMG needs at least one channel");
  if (!emg.samples.allFinite()) throw DataError("EMG contains non-finite samples");
  detail::require_increasing(emg.timestamps, "EMG");
  detail::require_increasing(gaze.timestamps, "gaze");

  const double start = std::max(emg.timestamps.front(), gaze.timestamps.front());
  const double end = std::min(emg.timestamps.back(), gaze.timestamps.back());
  if (end < start) throw DataError("EMG and gaze streams do not overlap");

  const auto n = static_cast<std::size_t>(std::floor((end - start) * rate + 1e-6)) + 1;

  double hold_limit = 0.0;
  if (gaze.timestamps.size() > 1) {
    std::vector<double> dt(gaze.timestamps.size() - 1);
    for (std::size_t i = 0; i + 1 < gaze.timestamps.size(); ++i) dt[i] = gaze.timestamps[i + 1] - gaze.timestamps[i];
    std::nth_element(dt.begin(), dt.begin() + static_cast<std::ptrdiff_t>(dt.size() / 2), dt.end());
    hold_limit = 1.5 * dt[dt.size() / 2];
  }

  SyncedRecording rec;
  rec.rate = rate;
  rec.start_time = start;
  const auto rows = static_cast<Eigen::Index>(n);
  rec.emg.resize(rows, emg.samples.cols());
  rec.gaze.resize(rows, 2);
  rec.gaze_valid.assign(n, 0);
  rec.labels.assign(n, kRestClass);
  rec.trial_ids.assign(n, -1);
  rec.repetition_ids.assign(n, -1);

  std::size_t ie = 0;
  std::size_t seen = 0;  // gaze samples with timestamp <= current grid time
  std::array<double, 2> last_valid{0.0, 0.0};
  for (std::size_t j = 0; j < n; ++j) {
    const double t = start + static_cast<double>(j) / rate;
    while (ie + 1 < emg.timestamps.size() &&
           std::abs(emg.timestamps[ie + 1] - t) < std::abs(emg.timestamps[ie] - t)) {
      ++ie;
    }
    rec.emg.row(static_cast<Eigen::Index>(j)) = emg.samples.row(static_cast<Eigen::Index>(ie));

    while (seen < gaze.timestamps.size() && gaze.timestamps[seen] <= t + detail::kTimeEps) {
      if (gaze.valid[seen]) {
        last_valid = {gaze.points(static_cast<Eigen::Index>(seen), 0), gaze.points(static_cast<Eigen::Index>(seen), 1)};
      }
      ++seen;
    }
    if (seen > 0) {
      const std::size_t k = seen - 1;
      const bool held = (t - gaze.timestamps[k]) <= hold_limit + detail::kTimeEps;
      rec.gaze_valid[j] = static_cast<std::uint8_t>(held && gaze.valid[k]);
    }
    rec.gaze(static_cast<Eigen::Index>(j), 0) = last_valid[0];
    rec.gaze(static_cast<Eigen::Index>(j), 1) = last_valid[1];
  }

  auto sorted = labels;
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.start < b.start; });
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    const auto& iv = sorted[k];
    if (k > 0 && iv.start < sorted[k - 1].end - detail::kTimeEps) {
      throw DataError("label intervals overlap at t=" + std::to_string(iv.start));
    }
    const double first = std::ceil((iv.start - start) * rate - 1e-6);
    const double last = std::ceil((iv.end - start) * rate - 1e-6);
    const auto lo = static_cast<std::size_t>(std::clamp(first, 0.0, static_cast<double>(n)));
    const auto hi = static_cast<std::size_t>(std::clamp(last, 0.0, static_cast<double>(n)));
    for (std::size_t j = lo; j < hi; ++j) {
      rec.labels[j] = iv.label;
      rec.trial_ids[j] = iv.trial;
      rec.repetition_ids[j] = iv.repetition;
    }
  }
  return rec;
}

// Expands a recording back into raw streams on its own grid.
inline void to_streams(const SyncedRecording& rec, EmgStream& emg, GazeStream& gaze,
                       std::vector<LabelInterval>& labels) {
  const std::size_t n = rec.size();
  emg.timestamps.resize(n);
  for (std::size_t j = 0; j < n; ++j) emg.timestamps[j] = rec.time_of(j);
  emg.samples = rec.emg;
  gaze.timestamps = emg.timestamps;
  gaze.points = rec.gaze;
  gaze.valid = rec.gaze_valid;
  labels.clear();
  std::size_t j = 0;
  while (j < n) {
    std::size_t k = j;
    while (k < n && rec.labels[k] == rec.labels[j] && rec.trial_ids[k] == rec.trial_ids[j] &&
           rec.repetition_ids[k] == rec.repetition_ids[j]) {
      ++k;
    }
    if (!(rec.labels[j] == kRestClass && rec.trial_ids[j] == -1 && rec.repetition_ids[j] == -1)) {
      labels.push_back({rec.time_of(j), rec.time_of(k), rec.labels[j], rec.trial_ids[j], rec.repetition_ids[j]});
    }
    j = k;
  }
}

inline SyncedRecording load_recording(const std::string& emg_path, const std::string& gaze_path,
                                      const std::string& labels_path, double rate = 2000.0) {
  return synchronize(read_emg_csv(emg_path), read_gaze_csv(gaze_path), read_labels_csv(labels_path), rate);
}

// ------------------------------------------------------------- notch filter

// Second-order IIR notch (unit DC gain, zero gain at line_freq), applied
// forward then backward per channel. Each pass starts from the steady-state
// filter state for its first input and runs over an odd-symmetric extension
// long enough for the start-up transient to decay before the data.
inline RowMatrix notch_filter(const RowMatrix& signal, double line_freq, double rate, double q = 30.0) {
  if (!(rate > 0.0)) throw ValidationError("rate must be positive");
  if (!(line_freq > 0.0) || !(line_freq < rate / 2.0)) {
    throw ValidationError("notch frequency must lie in (0, Nyquist)");
  }
  if (!(q > 0.0)) throw ValidationError("notch quality factor must be positive");

  const double w0 = 2.0 * std::numbers::pi * line_freq / rate;
  const double alpha = std::sin(w0) / (2.0 * q);
  const double a0 = 1.0 + alpha;
  const double b0 = 1.0 / a0;
  const double b1 = -2.0 * std::cos(w0) / a0;
  const double b2 = 1.0 / a0;
  const double a1 = -2.0 * std::cos(w0) / a0;
  const double a2 = (1.0 - alpha) / a0;

  // Transposed direct form II steady state for a constant input of 1.
  const double z1_unit = ((b0 + b1 + b2) / (1.0 + a1 + a2)) - b0;
  const double z2_unit = b2 - a2 * ((b0 + b1 + b2) / (1.0 + a1 + a2));

  const auto n = static_cast<std::size_t>(signal.rows());
  RowMatrix out(signal.rows(), signal.cols());
  if (n == 0) return out;

  const double decay = q * rate / (std::numbers::pi * line_freq);
  const std::size_t pad = std::min<std::size_t>(n - 1, static_cast<std::size_t>(std::ceil(6.0 * decay)));

  std::vector<double> ext(n + 2 * pad);
  auto run = [&](std::vector<double>& x) {
    double z1 = z1_unit * x.front();
    double z2 = z2_unit * x.front();
    for (double& v : x) {
      const double in = v;
      const double y = b0 * in + z1;
      z1 = b1 * in - a1 * y + z2;
      z2 = b2 * in - a2 * y;
      v = y;
    }
  };

  for (Eigen::Index c = 0; c < signal.cols(); ++c) {
    const double first = signal(0, c);
    const double last = signal(static_cast<Eigen::Index>(n - 1), c);
    for (std::size_t i = 0; i < pad; ++i) {
      ext[i] = 2.0 * first - signal(static_cast<Eigen::Index>(pad - i), c);
      ext[n + pad + i] = 2.0 * last - signal(static_cast<Eigen::Index>(n - 2 - i), c);
    }
    for (std::size_t i = 0; i < n; ++i) ext[pad + i] = signal(static_cast<Eigen::Index>(i), c);
    run(ext);
    std::reverse(ext.begin(), ext.end());
    run(ext);
    std::reverse(ext.begin(), ext.end());
    for (std::size_t i = 0; i < n; ++i) out(static_cast<Eigen::Index>(i), c) = ext[pad + i];
  }
  return out;
}

// --------------------------------------------------------- binary container
//
// recording.bin layout:
//   char[8]  magic "MMREC\0\0\1"
//   f64      rate
//   f64      start_time
//   u64      T
//   u32      C
//   f64[T*C] emg, row-major
//   f64[T*2] gaze, row-major
//   u8[T]    gaze_valid
//   i32[T]   labels
//   i32[T]   trial_ids
//   i32[T]   repetition_ids

inline constexpr std::string_view kRecordingMagic{"MMREC\0\0\1", 8};

inline void save_recording_bin(const std::string& path, const SyncedRecording& rec) {
  rec.validate();
  io::BinaryWriter w;
  w.put_bytes(kRecordingMagic);
  w.put(rec.rate);
  w.put(rec.start_time);
  w.put(static_cast<std::uint64_t>(rec.size()));
  w.put(static_cast<std::uint32_t>(rec.emg.cols()));
  w.put_array(std::span<const double>(rec.emg.data(), static_cast<std::size_t>(rec.emg.size())));
  w.put_array(std::span<const double>(rec.gaze.data(), static_cast<std::size_t>(rec.gaze.size())));
  w.put_array(std::span<const std::uint8_t>(rec.gaze_valid));
  w.put_array(std::span<const std::int32_t>(rec.labels));
  w.put_array(std::span<const std::int32_t>(rec.trial_ids));
  w.put_array(std::span<const std::int32_t>(rec.repetition_ids));
  io::write_file(path, w.data());
}

inline SyncedRecording load_recording_bin(const std::string& path) {
  auto r = io::BinaryReader::open(path);
  r.expect_magic(kRecordingMagic);
  SyncedRecording rec;
  rec.rate = r.get<double>();
  rec.start_time = r.get<double>();
  const auto n = r.get<std::uint64_t>();
  const auto c = r.get<std::uint32_t>();
  rec.emg.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(c));
  rec.gaze.resize(static_cast<Eigen::Index>(n), 2);
  rec.gaze_valid.resize(n);
  rec.labels.resize(n);
  rec.trial_ids.resize(n);
  rec.repetition_ids.resize(n);
  r.get_array(std::span<double>(rec.emg.data(), static_cast<std::size_t>(rec.emg.size())));
  r.get_array(std::span<double>(rec.gaze.data(), static_cast<std::size_t>(rec.gaze.size())));
  r.get_array(std::span<std::uint8_t>(rec.gaze_valid));
  r.get_array(std::span<std::int32_t>(rec.labels));
  r.get_array(std::span<std::int32_t>(rec.trial_ids));
  r.get_array(std::span<std::int32_t>(rec.repetition_ids));
  if (!r.at_end()) throw DataError(path + ": trailing bytes after recording");
  rec.validate();
  return rec;
}

}  // namespace mmgrasp::ingest
