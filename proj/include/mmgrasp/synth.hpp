#pragma once

// Synthetic recordings shaped like the grasp acquisition protocol: every
// (grasp, object, repetition) is a rest segment followed by a grasp segment,
// with EMG driven by class synergies and a gaze trace that lands on the
// grasped object shortly before movement onset and stays there until release.

#include "mmgrasp/common.hpp"
#include "mmgrasp/ingest.hpp"

#include <array>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

namespace mmgrasp::synth {

struct SynthConfig {
  int n_grasps = 10;
  int objects_per_grasp = 3;
  int n_reps = 4;
  std::array<double, 2> rest_duration{3.0, 4.0};   // seconds, [min, max]
  std::array<double, 2> grasp_duration{4.0, 5.0};  // seconds, [min, max]
  int emg_channels = 12;
  int visual_dim = 64;
  double gaze_noise_px = 5.0;
  // grasp index (label - 1) -> object ids. Empty selects the default mapping.
  std::vector<std::vector<int>> object_sharing;
  // grasp index -> EMG family; grasps in one family have similar synergies.
  std::vector<int> emg_families;
  std::uint64_t seed = 1;

  double emg_rate = 2000.0;
  double gaze_rate = 100.0;
  double rest_rms = 0.1;          // baseline noise standard deviation
  double activation_rms = 1.0;    // plateau RMS of a unit synergy channel
  double ar_coefficient = 0.9;
  double ramp = 0.4;              // seconds of trapezoid ramp at both ends
  double synergy_spread = 0.08;   // log-scale spread between grasps of a family
  double limb_variability = 0.2;  // log-scale per-repetition synergy perturbation
  std::array<double, 2> fixation_lead{0.3, 0.6};  // seconds before grasp onset
  double release_margin = 0.3;    // fixation ends up to this long before grasp end
  std::array<double, 2> dwell{0.1, 0.25};  // wandering gaze dwell per target
  double min_saccade_px = 100.0;
  double frame_width = 1920.0;
  double frame_height = 1080.0;
  double scene_jitter_px = 10.0;  // per-trial head-motion offset of the scene
  double min_object_separation_px = 150.0;
  double visual_scale = 32.0;     // per-dimension spread of object feature centers
  double visual_noise = 8.0;      // per-fixation feature noise
  // Low-frequency movement artifact added around grasp onset and release.
  double artifact_amplitude = 0.5;
  double artifact_duration = 0.3;  // seconds, centered on each transition
  double powerline_amplitude = 0.0;
  double powerline_freq = 50.0;

  void validate() const;
  std::size_t n_objects() const;
  std::vector<std::vector<int>> sharing() const;
  std::vector<int> families() const;
};

// Per-object stand-in for deep visual features.
struct ObjectFeatureBank {
  RowMatrix centers;                                // [n_objects x visual_dim]
  std::vector<std::array<double, 2>> positions;     // nominal scene position, pixels
  double noise_scale = 0.0;

  std::size_t nearest(const std::array<double, 2>& point) const {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t o = 0; o < positions.size(); ++o) {
      const double dx = positions[o][0] - point[0];
      const double dy = positions[o][1] - point[1];
      const double d = dx * dx + dy * dy;
      if (d < best_d) {
        best_d = d;
        best = o;
      }
    }
    return best;
  }

  // One feature row per gaze point: the center of the object nearest to the
  // point plus isotropic noise. Deterministic in (seed, row index).
  RowMatrix render(const std::vector<std::array<double, 2>>& points, std::uint64_t seed) const {
    RowMatrix out(static_cast<Eigen::Index>(points.size()), centers.cols());
    for (std::size_t i = 0; i < points.size(); ++i) {
      std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                        static_cast<std::uint32_t>(i), 0x7f1au};
      std::mt19937_64 rng(seq);
      std::normal_distribution<double> noise(0.0, noise_scale);
      const auto o = static_cast<Eigen::Index>(nearest(points[i]));
      for (Eigen::Index d = 0; d < centers.cols(); ++d) out(static_cast<Eigen::Index>(i), d) = centers(o, d) + noise(rng);
    }
    return out;
  }
};

struct PlantedFixation {
  int trial = 0;
  int object = 0;
  ClassId grasp = 0;
  std::size_t start = 0;  // first synced sample on the object
  std::size_t end = 0;    // one past the last synced sample on the object
  std::array<double, 2> position{};
};

struct SynthResult {
  ingest::EmgStream emg;
  ingest::GazeStream gaze;
  std::vector<ingest::LabelInterval> labels;
  ingest::SyncedRecording recording;
  std::vector<PlantedFixation> fixations;
  ObjectFeatureBank bank;
  std::vector<std::vector<int>> object_sharing;
};

// Default grasp/object table: ten grasps, eighteen objects, three objects per
// grasp, with objects reused across grasps.
inline const std::vector<std::string>& default_object_names() {
  static const std::vector<std::string> names{
      "bottle", "can",   "door_handle", "cup",   "key",          "pencil_case",
      "plate",  "book",  "drawer",      "ball",  "light_bulb",   "jam_jar",
      "clothespin", "remote_control", "knife", "fork", "screwdriver", "wrench"};
  return names;
}

inline const std::vector<std::string>& default_grasp_names() {
  static const std::vector<std::string> names{
      "medium_wrap",   "lateral",         "parallel_extension", "tripod_grasp",
      "power_sphere",  "precision_disk",  "prismatic_pinch",    "index_finger_extension",
      "adducted_thumb", "prismatic_four_fingers"};
  return names;
}

inline std::vector<std::vector<int>> default_object_table() {
  return {{0, 1, 2},   {3, 4, 5},    {6, 7, 8},   {0, 3, 8},    {9, 10, 4},
          {11, 10, 9}, {12, 4, 1},   {13, 14, 15}, {16, 13, 17}, {14, 15, 17}};
}

inline std::vector<std::vector<int>> SynthConfig::sharing() const {
  if (!object_sharing.empty()) return object_sharing;
  if (n_grasps == 10 && objects_per_grasp == 3) return default_object_table();
  // Consecutive grasps share one object: grasp g uses g*(k-1) .. g*(k-1)+k-1.
  const int k = objects_per_grasp;
  const int n_obj = std::max(k, n_grasps * std::max(k - 1, 1));
  std::vector<std::vector<int>> table(static_cast<std::size_t>(n_grasps));
  for (int g = 0; g < n_grasps; ++g) {
    for (int j = 0; j < k; ++j) table[static_cast<std::size_t>(g)].push_back((g * std::max(k - 1, 1) + j) % n_obj);
  }
  return table;
}

inline std::vector<int> SynthConfig::families() const {
  if (!emg_families.empty()) return emg_families;
  if (n_grasps == 10) {
    // Pairs of grasps with similar muscle synergies but mostly different objects.
    return {0, 1, 2, 3, 0, 3, 1, 4, 4, 2};
  }
  std::vector<int> f(static_cast<std::size_t>(n_grasps));
  for (int g = 0; g < n_grasps; ++g) f[static_cast<std::size_t>(g)] = g / 2;
  return f;
}

inline std::size_t SynthConfig::n_objects() const {
  int max_id = -1;
  for (const auto& row : sharing()) {
    for (int o : row) max_id = std::max(max_id, o);
  }
  return static_cast<std::size_t>(max_id + 1);
}

inline void SynthConfig::validate() const {
  auto fail = [](const std::string& what) { throw ValidationError("synth config: " + what); };
  if (n_grasps < 1) fail("n_grasps must be >= 1");
  if (objects_per_grasp < 1) fail("objects_per_grasp must be >= 1");
  if (n_reps < 0) fail("n_reps must be >= 0");
  for (const auto* r : {&rest_duration, &grasp_duration, &fixation_lead, &dwell}) {
    if (!((*r)[0] > 0.0) || (*r)[1] < (*r)[0]) fail("duration ranges must be positive with min <= max");
  }
  if (emg_channels < 1) fail("emg_channels must be >= 1");
  if (visual_dim < 1) fail("visual_dim must be >= 1");
  if (!(gaze_noise_px >= 0.0)) fail("gaze_noise_px must be >= 0");
  if (!(emg_rate > 0.0) || !(gaze_rate > 0.0)) fail("rates must be positive");
  const double ratio = emg_rate / gaze_rate;
  if (std::abs(ratio - std::round(ratio)) > 1e-9 || ratio < 1.0) fail("emg_rate must be an integer multiple of gaze_rate");
  if (!(rest_rms > 0.0) || !(activation_rms > 0.0)) fail("EMG amplitudes must be positive");
  if (!(ar_coefficient >= 0.0 && ar_coefficient < 1.0)) fail("ar_coefficient must lie in [0, 1)");
  if (!(ramp > 0.0)) fail("ramp must be positive");
  if (release_margin < 0.0) fail("release_margin must be >= 0");
  if (artifact_amplitude < 0.0) fail("artifact_amplitude must be >= 0");
  if (!(artifact_duration > 0.0)) fail("artifact_duration must be positive");
  if (fixation_lead[1] >= rest_duration[0]) fail("fixation lead must be shorter than the rest segment");
  if (2.0 * ramp + release_margin >= grasp_duration[0]) fail("ramps and release margin must fit inside a grasp");
  const auto table = sharing();
  if (table.size() != static_cast<std::size_t>(n_grasps)) fail("object_sharing must list every grasp");
  for (const auto& row : table) {
    if (row.empty()) fail("every grasp must map to at least one object");
    for (int o : row) {
      if (o < 0) fail("object ids must be nonnegative");
    }
  }
  const auto fam = families();
  if (fam.size() != static_cast<std::size_t>(n_grasps)) fail("emg_families must list every grasp");
  for (int f : fam) {
    if (f < 0) fail("family ids must be nonnegative");
  }
}

namespace detail {

inline std::mt19937_64 derived_rng(std::uint64_t seed, std::uint32_t stream, std::uint32_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), stream, index};
  return std::mt19937_64(seq);
}

struct TrialPlan {
  ClassId grasp = 0;
  int object = 0;
  int repetition = 0;
  std::size_t start = 0;        // gaze-sample units
  std::size_t grasp_start = 0;
  std::size_t end = 0;
  std::size_t fix_start = 0;
  std::size_t fix_end = 0;
  std::array<double, 2> scene_offset{};
};

}  // namespace detail

inline SynthResult generate_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  SynthResult out;
  out.object_sharing = cfg.sharing();
  const auto n_obj = cfg.n_objects();
  const auto channels = static_cast<Eigen::Index>(cfg.emg_channels);
  const auto ratio = static_cast<std::size_t>(std::llround(cfg.emg_rate / cfg.gaze_rate));

  // Scene layout and object features.
  auto scene_rng = detail::derived_rng(cfg.seed, 1, 0);
  {
    std::uniform_real_distribution<double> ux(150.0, cfg.frame_width - 150.0);
    std::uniform_real_distribution<double> uy(300.0, cfg.frame_height - 100.0);
    double separation = cfg.min_object_separation_px;
    while (out.bank.positions.size() < n_obj) {
      bool placed = false;
      for (int attempt = 0; attempt < 2000 && !placed; ++attempt) {
        const std::array<double, 2> p{ux(scene_rng), uy(scene_rng)};
        bool ok = true;
        for (const auto& q : out.bank.positions) {
          if (std::hypot(p[0] - q[0], p[1] - q[1]) < separation) {
            ok = false;
            break;
          }
        }
        if (ok) {
          out.bank.positions.push_back(p);
          placed = true;
        }
      }
      if (!placed) separation *= 0.9;
    }
    std::normal_distribution<double> center(0.0, cfg.visual_scale);
    out.bank.centers.resize(static_cast<Eigen::Index>(n_obj), cfg.visual_dim);
    for (Eigen::Index o = 0; o < out.bank.centers.rows(); ++o) {
      for (Eigen::Index d = 0; d < out.bank.centers.cols(); ++d) out.bank.centers(o, d) = center(scene_rng);
    }
    out.bank.noise_scale = cfg.visual_noise;
  }

  // Class synergies: family prototype modulated per grasp.
  const auto families = cfg.families();
  auto syn_rng = detail::derived_rng(cfg.seed, 2, 0);
  const int n_fam = *std::max_element(families.begin(), families.end()) + 1;
  std::vector<Vector> prototypes(static_cast<std::size_t>(n_fam));
  {
    std::uniform_real_distribution<double> u(0.2, 1.0);
    for (auto& p : prototypes) {
      p.resize(channels);
      for (Eigen::Index c = 0; c < channels; ++c) p[c] = u(syn_rng);
      p /= std::sqrt(p.squaredNorm() / static_cast<double>(channels));
    }
  }
  std::vector<Vector> synergies(static_cast<std::size_t>(cfg.n_grasps));
  {
    std::normal_distribution<double> z(0.0, 1.0);
    for (int g = 0; g < cfg.n_grasps; ++g) {
      auto& s = synergies[static_cast<std::size_t>(g)];
      s = prototypes[static_cast<std::size_t>(families[static_cast<std::size_t>(g)])];
      for (Eigen::Index c = 0; c < channels; ++c) s[c] *= std::exp(cfg.synergy_spread * z(syn_rng));
    }
  }

  // Timeline in gaze-sample units.
  std::vector<detail::TrialPlan> plan;
  auto time_rng = detail::derived_rng(cfg.seed, 3, 0);
  auto draw_samples = [&](const std::array<double, 2>& range) {
    std::uniform_real_distribution<double> u(range[0], range[1]);
    return static_cast<std::size_t>(std::llround(u(time_rng) * cfg.gaze_rate));
  };
  std::size_t cursor = 0;
  for (int g = 0; g < cfg.n_grasps; ++g) {
    for (int o : out.object_sharing[static_cast<std::size_t>(g)]) {
      for (int r = 0; r < cfg.n_reps; ++r) {
        detail::TrialPlan t;
        t.grasp = g + 1;
        t.object = o;
        t.repetition = r;
        t.start = cursor;
        t.grasp_start = t.start + draw_samples(cfg.rest_duration);
        t.end = t.grasp_start + draw_samples(cfg.grasp_duration);
        t.fix_start = t.grasp_start - draw_samples(cfg.fixation_lead);
        const std::size_t margin = cfg.release_margin > 0.0 ? draw_samples({0.0, cfg.release_margin}) : 0;
        t.fix_end = t.end - std::min(margin, t.end - t.grasp_start - 1);
        std::normal_distribution<double> jitter(0.0, cfg.scene_jitter_px);
        t.scene_offset = {jitter(time_rng), jitter(time_rng)};
        cursor = t.end;
        plan.push_back(t);
      }
    }
  }

  const std::size_t n_gaze = cursor;
  const std::size_t n_emg = n_gaze * ratio;
  out.emg.samples.setZero(static_cast<Eigen::Index>(n_emg), channels);
  out.emg.timestamps.resize(n_emg);
  for (std::size_t i = 0; i < n_emg; ++i) out.emg.timestamps[i] = static_cast<double>(i) / cfg.emg_rate;
  // One closing gaze sample so the gaze span covers the last EMG sample.
  const std::size_t gaze_rows = n_gaze == 0 ? 0 : n_gaze + 1;
  out.gaze.points.setZero(static_cast<Eigen::Index>(gaze_rows), 2);
  out.gaze.timestamps.resize(gaze_rows);
  out.gaze.valid.assign(gaze_rows, 1);
  for (std::size_t k = 0; k < gaze_rows; ++k) out.gaze.timestamps[k] = static_cast<double>(k) / cfg.gaze_rate;

  for (std::size_t ti = 0; ti < plan.size(); ++ti) {
    const auto& t = plan[ti];
    auto rng = detail::derived_rng(cfg.seed, 4, static_cast<std::uint32_t>(ti));
    std::normal_distribution<double> z(0.0, 1.0);

    // EMG: baseline noise everywhere, rectified AR(1) activity under a
    // trapezoidal envelope during the grasp.
    Vector synergy = synergies[static_cast<std::size_t>(t.grasp - 1)];
    for (Eigen::Index c = 0; c < channels; ++c) synergy[c] *= std::exp(cfg.limb_variability * z(rng));
    const std::size_t e0 = t.start * ratio;
    const std::size_t eg = t.grasp_start * ratio;
    const std::size_t e1 = t.end * ratio;
    const double ramp = cfg.ramp * cfg.emg_rate;
    const double innovation = std::sqrt(1.0 - cfg.ar_coefficient * cfg.ar_coefficient);
    std::vector<double> ar(static_cast<std::size_t>(channels));
    for (auto& a : ar) a = z(rng);
    for (std::size_t i = e0; i < e1; ++i) {
      double env = 0.0;
      if (i >= eg) {
        const double pos = static_cast<double>(i - eg);
        const double len = static_cast<double>(e1 - eg);
        env = std::min({1.0, (pos + 1.0) / ramp, (len - pos) / ramp});
      }
      for (Eigen::Index c = 0; c < channels; ++c) {
        auto& a = ar[static_cast<std::size_t>(c)];
        a = cfg.ar_coefficient * a + innovation * z(rng);
        double v = cfg.rest_rms * z(rng);
        if (env > 0.0) v += cfg.activation_rms * synergy[c] * env * std::abs(a);
        out.emg.samples(static_cast<Eigen::Index>(i), c) = v;
      }
    }

    // Artifact: Hann-windowed, strongly low-passed noise per channel centered
    // on the onset and on the release.
    if (cfg.artifact_amplitude > 0.0) {
      auto art_rng = detail::derived_rng(cfg.seed, 6, static_cast<std::uint32_t>(ti));
      std::normal_distribution<double> za(0.0, 1.0);
      const auto half = static_cast<std::ptrdiff_t>(std::llround(cfg.artifact_duration * cfg.emg_rate / 2.0));
      const double lp = std::exp(-2.0 * std::numbers::pi * 10.0 / cfg.emg_rate);  // ~10 Hz pole
      for (const std::size_t centre : {eg, e1}) {
        for (Eigen::Index c = 0; c < channels; ++c) {
          double state = 0.0;
          const double gain = cfg.artifact_amplitude * std::sqrt((1.0 + lp) / (1.0 - lp));
          for (std::ptrdiff_t k = -half; k < half; ++k) {
            state = lp * state + (1.0 - lp) * za(art_rng);
            const auto i = static_cast<std::ptrdiff_t>(centre) + k;
            if (i < static_cast<std::ptrdiff_t>(e0) || i >= static_cast<std::ptrdiff_t>(n_emg)) continue;
            const double w = 0.5 - 0.5 * std::cos(std::numbers::pi * static_cast<double>(k + half) / static_cast<double>(half));
            out.emg.samples(static_cast<Eigen::Index>(i), c) += gain * w * state;
          }
        }
      }
    }

    // Gaze: saccades among scene targets with short dwells, one planted
    // fixation on the grasped object.
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::uniform_real_distribution<double> ux(0.0, cfg.frame_width);
    std::uniform_real_distribution<double> uy(0.0, cfg.frame_height);
    std::uniform_int_distribution<std::size_t> pick_obj(0, n_obj - 1);
    const auto& obj_pos = out.bank.positions[static_cast<std::size_t>(t.object)];
    const std::array<double, 2> fix_point{obj_pos[0] + t.scene_offset[0], obj_pos[1] + t.scene_offset[1]};
    std::array<double, 2> target = fix_point;
    std::size_t dwell_left = 0;
    auto next_target = [&] {
      for (int attempt = 0; attempt < 100; ++attempt) {
        std::array<double, 2> c;
        if (u01(rng) < 0.5) {
          const auto& p = out.bank.positions[pick_obj(rng)];
          c = {p[0] + t.scene_offset[0], p[1] + t.scene_offset[1]};
        } else {
          c = {ux(rng), uy(rng)};
        }
        if (std::hypot(c[0] - target[0], c[1] - target[1]) >= cfg.min_saccade_px &&
            std::hypot(c[0] - fix_point[0], c[1] - fix_point[1]) >= cfg.min_saccade_px) {
          target = c;
          break;
        }
      }
      std::uniform_real_distribution<double> ud(cfg.dwell[0], cfg.dwell[1]);
      dwell_left = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(ud(rng) * cfg.gaze_rate)));
    };
    std::normal_distribution<double> jitter(0.0, cfg.gaze_noise_px);
    for (std::size_t k = t.start; k < t.end; ++k) {
      const bool planted = k >= t.fix_start && k < t.fix_end;
      std::array<double, 2> base;
      if (planted) {
        base = fix_point;
        target = fix_point;
        dwell_left = 0;
      } else {
        if (dwell_left == 0) next_target();
        --dwell_left;
        base = target;
      }
      out.gaze.points(static_cast<Eigen::Index>(k), 0) = base[0] + jitter(rng);
      out.gaze.points(static_cast<Eigen::Index>(k), 1) = base[1] + jitter(rng);
    }

    PlantedFixation pf;
    pf.trial = static_cast<int>(ti);
    pf.object = t.object;
    pf.grasp = t.grasp;
    pf.start = t.fix_start * ratio;
    pf.end = t.fix_end * ratio;
    pf.position = fix_point;
    out.fixations.push_back(pf);

    out.labels.push_back({static_cast<double>(e0) / cfg.emg_rate, static_cast<double>(eg) / cfg.emg_rate,
                          kRestClass, static_cast<int>(ti), t.repetition});
    out.labels.push_back({static_cast<double>(eg) / cfg.emg_rate, static_cast<double>(e1) / cfg.emg_rate,
                          t.grasp, static_cast<int>(ti), t.repetition});
  }
  if (gaze_rows > 0) out.gaze.points.row(static_cast<Eigen::Index>(n_gaze)) = out.gaze.points.row(static_cast<Eigen::Index>(n_gaze - 1));

  if (cfg.powerline_amplitude > 0.0) {
    auto pl_rng = detail::derived_rng(cfg.seed, 5, 0);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    for (Eigen::Index c = 0; c < channels; ++c) {
      const double phi = phase(pl_rng);
      for (std::size_t i = 0; i < n_emg; ++i) {
        out.emg.samples(static_cast<Eigen::Index>(i), c) +=
            cfg.powerline_amplitude * std::sin(2.0 * std::numbers::pi * cfg.powerline_freq * out.emg.timestamps[i] + phi);
      }
    }
  }

  if (n_emg == 0) {
    out.recording.rate = cfg.emg_rate;
    out.recording.emg.resize(0, channels);
    out.recording.gaze.resize(0, 2);
  } else {
    out.recording = ingest::synchronize(out.emg, out.gaze, out.labels, cfg.emg_rate);
  }
  return out;
}

// ------------------------------------------------------------------- files

inline void write_objects_csv(const std::string& path, const ObjectFeatureBank& bank) {
  std::string s = "object,x,y";
  for (Eigen::Index d = 0; d < bank.centers.cols(); ++d) s += ",f" + std::to_string(d);
  s += '\n';
  for (Eigen::Index o = 0; o < bank.centers.rows(); ++o) {
    io::append_number(s, static_cast<long long>(o));
    s += ',';
    io::append_number(s, bank.positions[static_cast<std::size_t>(o)][0]);
    s += ',';
    io::append_number(s, bank.positions[static_cast<std::size_t>(o)][1]);
    for (Eigen::Index d = 0; d < bank.centers.cols(); ++d) {
      s += ',';
      io::append_number(s, bank.centers(o, d));
    }
    s += '\n';
  }
  io::write_file(path, s);
}

inline ObjectFeatureBank read_objects_csv(const std::string& path, double noise_scale) {
  auto csv = io::CsvReader::open(path);
  std::vector<std::string_view> f;
  if (!csv.next(f) || f.size() < 4 || f[0] != "object" || f[1] != "x" || f[2] != "y") {
    csv.fail("expected header 'object,x,y,f0..'");
  }
  const std::size_t dim = f.size() - 3;
  ObjectFeatureBank bank;
  bank.noise_scale = noise_scale;
  std::vector<double> values;
  while (csv.next(f)) {
    if (f.size() != dim + 3) csv.fail("expected " + std::to_string(dim + 3) + " fields");
    if (csv.integer(f[0], "object") != static_cast<long long>(bank.positions.size())) csv.fail("object ids must be 0..n-1 in order");
    bank.positions.push_back({csv.number(f[1], "x"), csv.number(f[2], "y")});
    for (std::size_t d = 0; d < dim; ++d) values.push_back(csv.number(f[d + 3], "feature"));
  }
  bank.centers = Eigen::Map<RowMatrix>(values.data(), static_cast<Eigen::Index>(bank.positions.size()),
                                       static_cast<Eigen::Index>(dim));
  return bank;
}

inline void write_fixation_truth_csv(const std::string& path, const std::vector<PlantedFixation>& truth,
                                     double rate, double start_time) {
  std::string s = "trial,object,grasp,t_start,t_end,x,y\n";
  for (const auto& p : truth) {
    io::append_number(s, static_cast<long long>(p.trial));
    s += ',';
    io::append_number(s, static_cast<long long>(p.object));
    s += ',';
    io::append_number(s, static_cast<long long>(p.grasp));
    s += ',';
    io::append_number(s, start_time + static_cast<double>(p.start) / rate);
    s += ',';
    io::append_number(s, start_time + static_cast<double>(p.end) / rate);
    s += ',';
    io::append_number(s, p.position[0]);
    s += ',';
    io::append_number(s, p.position[1]);
    s += '\n';
  }
  io::write_file(path, s);
}

}  // namespace mmgrasp::synth
