#pragma once

// EMG window features (marginal DWT) and assembly of per-sample multicue
// datasets from a synchronized recording plus per-fixation visual features.

#include "mmgrasp/common.hpp"
#include "mmgrasp/fixation.hpp"
#include "mmgrasp/ingest.hpp"
#include "mmgrasp/io.hpp"
#include "mmgrasp/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace mmgrasp::features {

// Daubechies decomposition low-pass filters, in the PyWavelets ordering.
inline const std::vector<double>& wavelet_lowpass(const std::string& name) {
  static const std::map<std::string, std::vector<double>> table{
      {"db1", {0.7071067811865476, 0.7071067811865476}},
      {"db2", {-0.12940952255126037, 0.2241438680420134, 0.8365163037378079, 0.48296291314453416}},
      {"db3", {0.03522629188570953, -0.08544127388202666, -0.13501102001025458, 0.45987750211849154, 0.8068915093110925, 0.33267055295008263}},
      {"db4", {-0.010597401785069032, 0.0328830116668852, 0.030841381835560764, -0.18703481171909309, -0.027983769416859854, 0.6308807679298589, 0.7148465705529157, 0.2303778133088965}},
      {"db5", {0.0033357252854737712, -0.012580751999081999, -0.006241490212798274, 0.07757149384004572, -0.032244869584638375, -0.24229488706638203, 0.13842814590132074, 0.7243085284377729, 0.6038292697971896, 0.16010239797419293}},
      {"db6", {-0.0010773010853084796, 0.004777257510945511, 0.0005538422011614961, -0.03158203931748603, 0.027522865530305727, 0.09750160558732304, -0.12976686756726194, -0.22626469396543983, 0.31525035170919763, 0.7511339080210954, 0.49462389039845306, 0.11154074335010947}},
      {"db7", {0.00035371379997452024, -0.0018016407040474908, 0.0004295779729213665, 0.01255099855609984, -0.01657454163066688, -0.03802993693501441, 0.08061260915108308, 0.07130921926683026, -0.22403618499387498, -0.14390600392856498, 0.4697822874051931, 0.7291320908462351, 0.3965393194819173, 0.07785205408500918}},
      {"db8", {-0.00011747678412476953, 0.0006754494064505693, -0.00039174037337694705, -0.004870352993451574, 0.008746094047405777, 0.013981027917398282, -0.044088253930794755, -0.017369301001807547, 0.12874742662047847, 0.0004724845739132828, -0.2840155429615469, -0.015829105256349306, 0.5853546836542067, 0.6756307362972898, 0.31287159091429995, 0.05441584224310401}},
      {"db9", {3.93473203162716e-05, -0.0002519631889427101, 0.00023038576352319597, 0.0018476468830562265, -0.00428150368246343, -0.004723204757751397, 0.022361662123679096, 0.00025094711483145197, -0.06763282906132997, 0.03072568147933338, 0.14854074933810638, -0.09684078322297646, -0.2932737832791749, 0.13319738582500756, 0.6572880780513005, 0.6048231236901112, 0.24383467461259034, 0.038077947363878345}},
      {"db10", {-1.3264202894521244e-05, 9.358867032006959e-05, -0.00011646685512928545, -0.0006858566949597116, 0.001992405295185056, 0.001395351747052901, -0.010733175483330575, 0.0036065535669561697, 0.033212674059341, -0.029457536821875813, -0.07139414716639708, 0.09305736460357235, 0.12736934033579325, -0.19594627437737705, -0.24984642432731538, 0.2811723436605775, 0.6884590394536035, 0.5272011889317256, 0.1881768000776915, 0.026670057900555554}},
  };
  const auto it = table.find(name);
  if (it == table.end()) throw ValidationError("unknown wavelet '" + name + "' (supported: db1..db10)");
  return it->second;
}

// Quadrature mirror of the low-pass filter.
inline std::vector<double> wavelet_highpass(const std::vector<double>& lo) {
  const std::size_t n = lo.size();
  std::vector<double> hi(n);
  for (std::size_t k = 0; k < n; ++k) hi[k] = (k % 2 == 0 ? -1.0 : 1.0) * lo[n - 1 - k];
  return hi;
}

struct MdwtConfig {
  double window = 0.200;
  std::string wavelet = "db7";
  int levels = 3;
  std::string padding = "symmetric";

  void validate() const {
    if (!(window > 0.0)) throw ValidationError("MDWT window must be positive");
    if (levels < 1) throw ValidationError("MDWT levels must be >= 1");
    if (padding != "symmetric") throw ValidationError("only symmetric padding is supported");
    (void)wavelet_lowpass(wavelet);
  }

  std::size_t window_samples(double rate) const { return mmgrasp::window_samples(window, rate); }
  std::size_t dims(std::size_t channels) const { return channels * static_cast<std::size_t>(levels + 1); }

  bool operator==(const MdwtConfig&) const = default;
};

// One analysis step with half-sample symmetric extension; output length
// floor((n + L - 1) / 2) per band, matching pywt.dwt(mode='symmetric').
inline void dwt_step(std::span<const double> x, const std::vector<double>& lo, const std::vector<double>& hi,
                     std::vector<double>& approx, std::vector<double>& detail) {
  const auto n = static_cast<std::ptrdiff_t>(x.size());
  const auto len = static_cast<std::ptrdiff_t>(lo.size());
  const std::size_t out = static_cast<std::size_t>((n + len - 1) / 2);
  approx.assign(out, 0.0);
  detail.assign(out, 0.0);
  auto at = [&](std::ptrdiff_t i) {
    std::ptrdiff_t m = i % (2 * n);
    if (m < 0) m += 2 * n;
    return x[static_cast<std::size_t>(m < n ? m : 2 * n - 1 - m)];
  };
  for (std::size_t i = 0; i < out; ++i) {
    double a = 0.0;
    double d = 0.0;
    const auto base = static_cast<std::ptrdiff_t>(2 * i + 1);
    for (std::ptrdiff_t k = 0; k < len; ++k) {
      const double v = at(base - k);
      a += lo[static_cast<std::size_t>(k)] * v;
      d += hi[static_cast<std::size_t>(k)] * v;
    }
    approx[i] = a;
    detail[i] = d;
  }
}

// Per channel: [sum|cD1|, ..., sum|cD_levels|, sum|cA_levels|]; channels
// concatenated.
inline std::vector<double> mdwt(const RowMatrix& window, const MdwtConfig& cfg) {
  cfg.validate();
  const auto& lo = wavelet_lowpass(cfg.wavelet);
  if (static_cast<std::size_t>(window.rows()) < lo.size()) {
    throw DataError("MDWT window shorter than the wavelet filter");
  }
  const auto hi = wavelet_highpass(lo);
  const auto levels = static_cast<std::size_t>(cfg.levels);
  std::vector<double> out(static_cast<std::size_t>(window.cols()) * (levels + 1));
  std::vector<double> signal;
  std::vector<double> approx;
  std::vector<double> detail;
  auto abs_sum = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double e : v) s += std::abs(e);
    return s;
  };
  for (Eigen::Index c = 0; c < window.cols(); ++c) {
    signal.resize(static_cast<std::size_t>(window.rows()));
    for (Eigen::Index i = 0; i < window.rows(); ++i) signal[static_cast<std::size_t>(i)] = window(i, c);
    double* dst = out.data() + static_cast<std::size_t>(c) * (levels + 1);
    for (std::size_t l = 0; l < levels; ++l) {
      dwt_step(signal, lo, hi, approx, detail);
      dst[l] = abs_sum(detail);
      signal.swap(approx);
    }
    dst[levels] = abs_sum(signal);
  }
  return out;
}

// ------------------------------------------------------------- visual cue

// Row t carries the feature of the latest fixation at or before t; rows
// before the first fixation carry `fallback`.
inline RowMatrix propagate_visual(const std::vector<std::size_t>& fixation_times, const RowMatrix& fixation_features,
                                  std::size_t length, const Vector& fallback) {
  if (static_cast<std::size_t>(fixation_features.rows()) != fixation_times.size()) {
    throw DataError("one visual feature row per fixation required");
  }
  if (fixation_features.rows() > 0 && fixation_features.cols() != fallback.size()) {
    throw DataError("fallback visual feature has wrong dimension");
  }
  if (!std::is_sorted(fixation_times.begin(), fixation_times.end())) throw DataError("fixation times must be sorted");
  if (!fixation_times.empty() && fixation_times.back() >= length) throw DataError("fixation time outside recording");
  RowMatrix out(static_cast<Eigen::Index>(length), fallback.size());
  std::size_t next = 0;
  for (std::size_t t = 0; t < length; ++t) {
    while (next < fixation_times.size() && fixation_times[next] <= t) ++next;
    const auto row = static_cast<Eigen::Index>(t);
    if (next == 0) {
      out.row(row) = fallback.transpose();
    } else {
      out.row(row) = fixation_features.row(static_cast<Eigen::Index>(next - 1));
    }
  }
  return out;
}

// ---------------------------------------------------------------- dataset

struct MulticueDataset {
  RowMatrix emg;                    // [N x C*(levels+1)], nonnegative
  RowMatrix vis;                    // [N x visual_dim]
  std::vector<ClassId> labels;      // [N]
  std::vector<std::size_t> times;   // [N] sample index in the recording
  std::vector<int> repetitions;     // [N], -1 outside any trial
  std::vector<int> trials;          // [N], -1 outside any trial
  std::vector<ClassId> classes;     // sorted distinct class ids
  std::size_t stride = 1;           // samples between consecutive rows
  double rate = 0.0;

  std::size_t size() const { return labels.size(); }
  std::size_t emg_dims() const { return static_cast<std::size_t>(emg.cols()); }
  std::size_t vis_dims() const { return static_cast<std::size_t>(vis.cols()); }

  void validate() const {
    const std::size_t n = size();
    if (static_cast<std::size_t>(emg.rows()) != n || static_cast<std::size_t>(vis.rows()) != n || times.size() != n ||
        repetitions.size() != n || trials.size() != n) {
      throw DataError("dataset arrays differ in length");
    }
    if (!emg.allFinite() || !vis.allFinite()) throw DataError("dataset features must be finite");
    if (n > 0 && emg.minCoeff() < 0.0) throw DataError("EMG features must be nonnegative");
    if (!std::is_sorted(classes.begin(), classes.end()) ||
        std::adjacent_find(classes.begin(), classes.end()) != classes.end()) {
      throw DataError("class list must be sorted and distinct");
    }
    for (ClassId c : labels) {
      if (!std::binary_search(classes.begin(), classes.end(), c)) throw DataError("label absent from class list");
    }
  }

  // Rows at the given indices; class list and metadata are kept.
  MulticueDataset subset(const std::vector<std::size_t>& idx) const {
    MulticueDataset out;
    out.emg.resize(static_cast<Eigen::Index>(idx.size()), emg.cols());
    out.vis.resize(static_cast<Eigen::Index>(idx.size()), vis.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      if (idx[i] >= size()) throw DataError("subset index out of range");
      out.emg.row(static_cast<Eigen::Index>(i)) = emg.row(static_cast<Eigen::Index>(idx[i]));
      out.vis.row(static_cast<Eigen::Index>(i)) = vis.row(static_cast<Eigen::Index>(idx[i]));
      out.labels.push_back(labels[idx[i]]);
      out.times.push_back(times[idx[i]]);
      out.repetitions.push_back(repetitions[idx[i]]);
      out.trials.push_back(trials[idx[i]]);
    }
    out.classes = classes;
    out.stride = stride;
    out.rate = rate;
    return out;
  }

  // Keeps every `factor`-th row on the stride grid (times divisible by
  // stride * factor).
  MulticueDataset decimate(std::size_t factor) const {
    if (factor == 0) throw ValidationError("decimation factor must be >= 1");
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < size(); ++i) {
      if (times[i] % (stride * factor) == 0) idx.push_back(i);
    }
    auto out = subset(idx);
    out.stride = stride * factor;
    return out;
  }

  bool operator==(const MulticueDataset& o) const {
    return same_matrix(emg, o.emg) && same_matrix(vis, o.vis) && labels == o.labels && times == o.times && repetitions == o.repetitions &&
           trials == o.trials && classes == o.classes && stride == o.stride && rate == o.rate;
  }
};

// All class ids that appear in the recording's labels, sorted.
inline std::vector<ClassId> recording_classes(const ingest::SyncedRecording& rec) {
  std::vector<ClassId> c(rec.labels.begin(), rec.labels.end());
  std::sort(c.begin(), c.end());
  c.erase(std::unique(c.begin(), c.end()), c.end());
  return c;
}

// One row per sample t with t % stride == 0 whose trailing EMG window fits;
// the label is the label at the window end. Visual features follow the
// latest fixation at or before t (zero vector before the first).
inline MulticueDataset build_dataset(const ingest::SyncedRecording& rec,
                                     const std::vector<fixation::FixationEvent>& fixations,
                                     const RowMatrix& fixation_features, const MdwtConfig& cfg, std::size_t stride,
                                     std::size_t jobs = 1) {
  cfg.validate();
  if (stride == 0) throw ValidationError("stride must be >= 1");
  if (static_cast<std::size_t>(fixation_features.rows()) != fixations.size()) {
    throw DataError("one visual feature row per fixation required");
  }
  for (std::size_t i = 1; i < fixations.size(); ++i) {
    if (fixations[i].time < fixations[i - 1].time) throw DataError("fixation times must be sorted");
  }
  const std::size_t w = cfg.window_samples(rec.rate);
  if (rec.size() < w) throw DataError("recording shorter than one MDWT window");

  std::vector<std::size_t> times;
  const std::size_t first = ((w - 1 + stride - 1) / stride) * stride;
  for (std::size_t t = first; t < rec.size(); t += stride) times.push_back(t);

  MulticueDataset ds;
  ds.stride = stride;
  ds.rate = rec.rate;
  ds.classes = recording_classes(rec);
  const auto n = static_cast<Eigen::Index>(times.size());
  ds.emg.resize(n, static_cast<Eigen::Index>(cfg.dims(rec.channels())));
  const Eigen::Index vdim = fixation_features.cols();
  ds.vis = RowMatrix::Zero(n, vdim);

  parallel_for(times.size(), jobs, [&](std::size_t i) {
    const auto start = static_cast<Eigen::Index>(times[i] + 1 - w);
    const RowMatrix window = rec.emg.middleRows(start, static_cast<Eigen::Index>(w));
    const auto f = mdwt(window, cfg);
    ds.emg.row(static_cast<Eigen::Index>(i)) = Eigen::Map<const Vector>(f.data(), static_cast<Eigen::Index>(f.size()));
  });

  std::size_t next = 0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    const std::size_t t = times[i];
    while (next < fixations.size() && fixations[next].time <= t) ++next;
    if (next > 0) ds.vis.row(static_cast<Eigen::Index>(i)) = fixation_features.row(static_cast<Eigen::Index>(next - 1));
    ds.labels.push_back(rec.labels[t]);
    ds.times.push_back(t);
    ds.repetitions.push_back(rec.repetition_ids[t]);
    ds.trials.push_back(rec.trial_ids[t]);
  }
  return ds;
}

// ------------------------------------------------------------ containers

inline constexpr std::string_view kDatasetMagic{"MMDS\0\0\0\1", 8};

inline std::string encode_dataset(const MulticueDataset& ds) {
  ds.validate();
  io::BinaryWriter w;
  w.put_bytes(kDatasetMagic);
  w.put<std::uint64_t>(ds.size());
  w.put<std::uint32_t>(static_cast<std::uint32_t>(ds.emg_dims()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(ds.vis_dims()));
  w.put<std::uint64_t>(ds.stride);
  w.put<double>(ds.rate);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(ds.classes.size()));
  w.put_array<ClassId>(ds.classes);
  w.put_array<double>({ds.emg.data(), static_cast<std::size_t>(ds.emg.size())});
  w.put_array<double>({ds.vis.data(), static_cast<std::size_t>(ds.vis.size())});
  w.put_array<ClassId>(ds.labels);
  std::vector<std::uint64_t> t(ds.times.begin(), ds.times.end());
  w.put_array<std::uint64_t>(t);
  w.put_array<int>(ds.repetitions);
  w.put_array<int>(ds.trials);
  return w.data();
}

// Reads one dataset from `r`; the reader may continue past it.
inline MulticueDataset decode_dataset(io::BinaryReader& r) {
  const std::string& path = r.path();
  r.expect_magic(kDatasetMagic);
  MulticueDataset ds;
  const auto n = r.get<std::uint64_t>();
  const auto de = r.get<std::uint32_t>();
  const auto dv = r.get<std::uint32_t>();
  ds.stride = r.get<std::uint64_t>();
  ds.rate = r.get<double>();
  const auto k = r.get<std::uint32_t>();
  if (n > (std::uint64_t{1} << 34) || k > 1'000'000) throw DataError(path + ": implausible dataset header");
  ds.classes.resize(k);
  r.get_array<ClassId>(ds.classes);
  ds.emg.resize(static_cast<Eigen::Index>(n), de);
  ds.vis.resize(static_cast<Eigen::Index>(n), dv);
  r.get_array<double>({ds.emg.data(), static_cast<std::size_t>(ds.emg.size())});
  r.get_array<double>({ds.vis.data(), static_cast<std::size_t>(ds.vis.size())});
  ds.labels.resize(n);
  r.get_array<ClassId>(ds.labels);
  std::vector<std::uint64_t> t(n);
  r.get_array<std::uint64_t>(t);
  ds.times.assign(t.begin(), t.end());
  ds.repetitions.resize(n);
  r.get_array<int>(ds.repetitions);
  ds.trials.resize(n);
  r.get_array<int>(ds.trials);
  ds.validate();
  return ds;
}

inline void save_dataset(const std::string& path, const MulticueDataset& ds) { io::write_file(path, encode_dataset(ds)); }

inline MulticueDataset load_dataset(const std::string& path) {
  auto r = io::BinaryReader::open(path);
  auto ds = decode_dataset(r);
  if (!r.at_end()) throw DataError(path + ": trailing bytes after dataset");
  return ds;
}

// Debug export: `time,label,repetition,trial,emg0..,vis0..`.
inline void write_dataset_csv(const std::string& path, const MulticueDataset& ds) {
  std::string s = "time,label,repetition,trial";
  for (std::size_t j = 0; j < ds.emg_dims(); ++j) s += ",emg" + std::to_string(j);
  for (std::size_t j = 0; j < ds.vis_dims(); ++j) s += ",vis" + std::to_string(j);
  s += '\n';
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    io::append_number(s, static_cast<long long>(ds.times[i]));
    for (long long v : {static_cast<long long>(ds.labels[i]), static_cast<long long>(ds.repetitions[i]),
                        static_cast<long long>(ds.trials[i])}) {
      s += ',';
      io::append_number(s, v);
    }
    for (Eigen::Index j = 0; j < ds.emg.cols(); ++j) {
      s += ',';
      io::append_number(s, ds.emg(row, j));
    }
    for (Eigen::Index j = 0; j < ds.vis.cols(); ++j) {
      s += ',';
      io::append_number(s, ds.vis(row, j));
    }
    s += '\n';
  }
  io::write_file(path, s);
}

// Per-fixation visual feature file, shared with the video feature extractor:
// magic "MMFX", u32 version (1), u64 rows, u32 dim, then per row an i64
// fixation id followed by dim float32 values.
struct FixationFeatures {
  std::vector<std::int64_t> ids;
  RowMatrix values;  // [rows x dim]

  bool operator==(const FixationFeatures& o) const { return ids == o.ids && same_matrix(values, o.values); }
};

inline void save_fixation_features(const std::string& path, const FixationFeatures& ff) {
  if (static_cast<std::size_t>(ff.values.rows()) != ff.ids.size()) throw DataError("one id per feature row required");
  io::BinaryWriter w;
  w.put_bytes("MMFX");
  w.put<std::uint32_t>(1);
  w.put<std::uint64_t>(ff.ids.size());
  w.put<std::uint32_t>(static_cast<std::uint32_t>(ff.values.cols()));
  std::vector<float> row(static_cast<std::size_t>(ff.values.cols()));
  for (std::size_t i = 0; i < ff.ids.size(); ++i) {
    w.put<std::int64_t>(ff.ids[i]);
    for (Eigen::Index j = 0; j < ff.values.cols(); ++j) {
      row[static_cast<std::size_t>(j)] = static_cast<float>(ff.values(static_cast<Eigen::Index>(i), j));
    }
    w.put_array<float>(row);
  }
  io::write_file(path, w.data());
}

inline FixationFeatures load_fixation_features(const std::string& path) {
  auto r = io::BinaryReader::open(path);
  r.expect_magic("MMFX");
  if (const auto v = r.get<std::uint32_t>(); v != 1) throw DataError(path + ": unsupported feature file version " + std::to_string(v));
  const auto n = r.get<std::uint64_t>();
  const auto dim = r.get<std::uint32_t>();
  if (n > (std::uint64_t{1} << 32)) throw DataError(path + ": implausible row count");
  FixationFeatures ff;
  ff.ids.resize(n);
  ff.values.resize(static_cast<Eigen::Index>(n), dim);
  std::vector<float> row(dim);
  for (std::size_t i = 0; i < n; ++i) {
    ff.ids[i] = r.get<std::int64_t>();
    r.get_array<float>(row);
    for (std::size_t j = 0; j < dim; ++j) ff.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = row[j];
  }
  if (!r.at_end()) throw DataError(path + ": trailing bytes after feature rows");
  return ff;
}

// Orders feature rows to match fixation ids 0..n-1. Missing ids (frames the
// extractor skipped) get the fallback row.
inline RowMatrix align_fixation_features(const FixationFeatures& ff, std::size_t n_fixations, const Vector& fallback) {
  RowMatrix out(static_cast<Eigen::Index>(n_fixations), fallback.size());
  for (Eigen::Index i = 0; i < out.rows(); ++i) out.row(i) = fallback.transpose();
  if (ff.ids.empty()) return out;
  if (ff.values.cols() != fallback.size()) throw DataError("feature file dimension does not match");
  std::vector<bool> seen(n_fixations, false);
  for (std::size_t i = 0; i < ff.ids.size(); ++i) {
    const auto id = ff.ids[i];
    if (id < 0 || static_cast<std::size_t>(id) >= n_fixations) throw DataError("feature row for unknown fixation id " + std::to_string(id));
    if (seen[static_cast<std::size_t>(id)]) throw DataError("duplicate feature row for fixation id " + std::to_string(id));
    seen[static_cast<std::size_t>(id)] = true;
    out.row(static_cast<Eigen::Index>(id)) = ff.values.row(static_cast<Eigen::Index>(i));
  }
  return out;
}

}  // namespace mmgrasp::features
