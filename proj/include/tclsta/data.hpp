#pragma once

// Synthetic two-stream video generation plus on-disk formats. Each video is a
// sequence of activation grids per stream: Gaussian noise everywhere, with a
// class-specific channel pattern planted in a contiguous frame window and a
// rectangular cell block. The motion stream carries the frame-to-frame
// difference of the planted pattern at the same locations, so it only sees
// signal where the pattern changes over time.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "tclsta/bytes.hpp"
#include "tclsta/error.hpp"
#include "tclsta/rng.hpp"
#include "tclsta/spatial.hpp"

namespace tclsta {

struct SyntheticConfig {
  std::size_t num_classes = 5;
  std::size_t train_per_class = 40;
  std::size_t val_per_class = 0;
  std::size_t test_per_class = 20;
  std::size_t frames = 8;
  std::size_t grid_rows = 4;
  std::size_t grid_cols = 4;
  std::size_t channels = 16;
  std::size_t signal_frames = 3;  // length of the planted frame window
  std::size_t block_rows = 2;     // planted cell block
  std::size_t block_cols = 2;
  double signal_amplitude = 1.0;
  double noise_sigma = 0.25;  // amplitude / sigma is the signal-to-noise ratio
  std::uint64_t seed = 1;

  void validate() const {
    if (num_classes == 0) fail("bad-config", "need at least one class");
    if (train_per_class == 0 && test_per_class == 0 && val_per_class == 0)
      fail("bad-config", "no videos requested");
    if (frames == 0 || grid_rows == 0 || grid_cols == 0 || channels == 0)
      fail("bad-config", "video dimensions must be positive");
    if (signal_frames == 0 || signal_frames > frames)
      fail("bad-config", "signal window must fit inside the frame count");
    if (block_rows == 0 || block_rows > grid_rows || block_cols == 0 || block_cols > grid_cols)
      fail("bad-config", "planted cell block must fit inside the grid");
    if (signal_amplitude < 0.0 || noise_sigma < 0.0)
      fail("bad-config", "amplitude and noise sigma must be non-negative");
  }
};

struct VideoSample {
  int id = 0;
  int label = 0;
  std::vector<ActivationGrid> static_frames;
  std::vector<ActivationGrid> motion_frames;
  std::vector<int> planted_frames;  // indices of the signal window
  std::vector<int> planted_cells;   // row-major cell indices of the signal block
};

struct Dataset {
  std::vector<VideoSample> train, val, test;
};

namespace detail {

// deterministic per-class channel pattern with entries +/-1
inline std::vector<double> class_pattern(const SyntheticConfig& cfg, std::size_t cls) {
  Rng rng(derive_seed(cfg.seed, 0x70000000ULL + cls));
  std::vector<double> p(cfg.channels);
  for (double& v : p) v = (rng.next() & 1) ? 1.0 : -1.0;
  return p;
}

// signal envelope over the planted window: half sine, so the motion stream
// (its discrete difference) is non-zero throughout the window
inline double envelope(std::size_t pos_in_window, std::size_t window) {
  return std::sin(3.141592653589793238463 * static_cast<double>(pos_in_window + 1) /
                  static_cast<double>(window + 1));
}

inline VideoSample generate_video(const SyntheticConfig& cfg, int id, int label,
                                  std::uint64_t video_seed,
                                  const std::vector<double>& pattern) {
  Rng rng(video_seed);
  VideoSample v;
  v.id = id;
  v.label = label;

  const std::size_t window_start = rng.index(cfg.frames - cfg.signal_frames + 1);
  const std::size_t block_r0 = rng.index(cfg.grid_rows - cfg.block_rows + 1);
  const std::size_t block_c0 = rng.index(cfg.grid_cols - cfg.block_cols + 1);
  for (std::size_t u = 0; u < cfg.signal_frames; ++u)
    v.planted_frames.push_back(static_cast<int>(window_start + u));
  for (std::size_t r = 0; r < cfg.block_rows; ++r)
    for (std::size_t c = 0; c < cfg.block_cols; ++c)
      v.planted_cells.push_back(static_cast<int>((block_r0 + r) * cfg.grid_cols + (block_c0 + c)));

  auto blank = [&] {
    ActivationGrid g;
    g.rows = cfg.grid_rows;
    g.cols = cfg.grid_cols;
    g.channels = cfg.channels;
    g.values.assign(cfg.grid_rows * cfg.grid_cols * cfg.channels, 0.0);
    return g;
  };
  auto noise_frames = [&] {
    std::vector<ActivationGrid> frames;
    frames.reserve(cfg.frames);
    for (std::size_t t = 0; t < cfg.frames; ++t) {
      ActivationGrid g = blank();
      for (double& x : g.values) x = rng.gaussian(cfg.noise_sigma);
      frames.push_back(std::move(g));
    }
    return frames;
  };
  v.static_frames = noise_frames();
  v.motion_frames = noise_frames();

  for (std::size_t u = 0; u < cfg.signal_frames; ++u) {
    const std::size_t t = window_start + u;
    const double env = envelope(u, cfg.signal_frames);
    const double prev_env = u == 0 ? 0.0 : envelope(u - 1, cfg.signal_frames);
    for (int cell : v.planted_cells) {
      const std::size_t base = static_cast<std::size_t>(cell) * cfg.channels;
      for (std::size_t ch = 0; ch < cfg.channels; ++ch) {
        v.static_frames[t].values[base + ch] += cfg.signal_amplitude * env * pattern[ch];
        v.motion_frames[t].values[base + ch] += cfg.signal_amplitude * (env - prev_env) * pattern[ch];
      }
    }
  }
  return v;
}

}  // namespace detail

inline Dataset generate_synthetic(const SyntheticConfig& cfg) {
  cfg.validate();
  std::vector<std::vector<double>> patterns;
  patterns.reserve(cfg.num_classes);
  for (std::size_t c = 0; c < cfg.num_classes; ++c) patterns.push_back(detail::class_pattern(cfg, c));

  Dataset data;
  int next_id = 0;
  auto fill_split = [&](std::vector<VideoSample>& split, std::size_t per_class) {
    for (std::size_t c = 0; c < cfg.num_classes; ++c)
      for (std::size_t i = 0; i < per_class; ++i) {
        const std::uint64_t vid_seed = derive_seed(cfg.seed, 0x100000ULL + static_cast<std::uint64_t>(next_id));
        split.push_back(detail::generate_video(cfg, next_id, static_cast<int>(c), vid_seed, patterns[c]));
        ++next_id;
      }
  };
  fill_split(data.train, cfg.train_per_class);
  fill_split(data.val, cfg.val_per_class);
  fill_split(data.test, cfg.test_per_class);
  return data;
}

// ---------------------------------------------------------------------------
// binary video format
//
// magic "FVS1", then little-endian: version u32, label u32, frames u32,
// rows u32, cols u32, channels u32, the static frames then the motion frames
// as row-major f32, planted-frame count u32 + indices u32, planted-cell
// count u32 + indices u32.

inline constexpr std::uint32_t kVideoFormatVersion = 1;

inline std::string encode_fvs(const VideoSample& v) {
  std::string bytes = "FVS1";
  detail::put_u32(bytes, kVideoFormatVersion);
  detail::put_u32(bytes, static_cast<std::uint32_t>(v.label));
  const std::size_t frames = v.static_frames.size();
  if (frames == 0 || v.motion_frames.size() != frames)
    fail("shape-mismatch", "video needs matching static and motion frame counts");
  const ActivationGrid& first = v.static_frames[0];
  detail::put_u32(bytes, static_cast<std::uint32_t>(frames));
  detail::put_u32(bytes, static_cast<std::uint32_t>(first.rows));
  detail::put_u32(bytes, static_cast<std::uint32_t>(first.cols));
  detail::put_u32(bytes, static_cast<std::uint32_t>(first.channels));
  auto put_frames = [&](const std::vector<ActivationGrid>& fs) {
    for (const ActivationGrid& g : fs) {
      if (g.rows != first.rows || g.cols != first.cols || g.channels != first.channels)
        fail("shape-mismatch", "inconsistent frame dimensions inside one video");
      for (double x : g.values) detail::put_f32(bytes, static_cast<float>(x));
    }
  };
  put_frames(v.static_frames);
  put_frames(v.motion_frames);
  detail::put_u32(bytes, static_cast<std::uint32_t>(v.planted_frames.size()));
  for (int idx : v.planted_frames) detail::put_u32(bytes, static_cast<std::uint32_t>(idx));
  detail::put_u32(bytes, static_cast<std::uint32_t>(v.planted_cells.size()));
  for (int idx : v.planted_cells) detail::put_u32(bytes, static_cast<std::uint32_t>(idx));
  return bytes;
}

inline void write_fvs(const std::string& path, const VideoSample& v) {
  detail::write_file_bytes(path, encode_fvs(v));
}

inline VideoSample read_fvs(const std::string& path) {
  const std::string bytes = detail::read_file_bytes(path);
  if (bytes.size() < 4 || bytes.compare(0, 4, "FVS1") != 0)
    fail("corrupt-file", path + ": bad magic");
  detail::ByteReader r{bytes, 4, path};
  const std::uint32_t version = r.u32();
  if (version != kVideoFormatVersion)
    fail("unsupported-version", path + ": version " + std::to_string(version));
  VideoSample v;
  v.label = static_cast<int>(r.u32());
  const std::uint32_t frames = r.u32();
  const std::uint32_t rows = r.u32();
  const std::uint32_t cols = r.u32();
  const std::uint32_t channels = r.u32();
  if (frames == 0 || rows == 0 || cols == 0 || channels == 0)
    fail("corrupt-file", path + ": empty video dimensions");
  auto get_frames = [&](std::vector<ActivationGrid>& out) {
    out.reserve(frames);
    for (std::uint32_t t = 0; t < frames; ++t) {
      ActivationGrid g;
      g.rows = rows;
      g.cols = cols;
      g.channels = channels;
      g.values.resize(static_cast<std::size_t>(rows) * cols * channels);
      for (double& x : g.values) x = static_cast<double>(r.f32());
      out.push_back(std::move(g));
    }
  };
  get_frames(v.static_frames);
  get_frames(v.motion_frames);
  const std::uint32_t planted_frames = r.u32();
  for (std::uint32_t i = 0; i < planted_frames; ++i)
    v.planted_frames.push_back(static_cast<int>(r.u32()));
  const std::uint32_t planted_cells = r.u32();
  for (std::uint32_t i = 0; i < planted_cells; ++i)
    v.planted_cells.push_back(static_cast<int>(r.u32()));
  if (r.pos != bytes.size()) fail("corrupt-file", path + ": trailing bytes");
  return v;
}

// ---------------------------------------------------------------------------
// manifest: JSON with train/val/test lists of {id, label, path}

struct ManifestEntry {
  int id = 0;
  int label = 0;
  std::string path;
};

struct Manifest {
  std::vector<ManifestEntry> train, val, test;
};

inline void write_manifest(const std::string& path, const Manifest& manifest) {
  nlohmann::json doc;
  auto encode = [](const std::vector<ManifestEntry>& entries) {
    std::vector<ManifestEntry> sorted = entries;
    std::sort(sorted.begin(), sorted.end(),
              [](const ManifestEntry& a, const ManifestEntry& b) { return a.id < b.id; });
    nlohmann::json list = nlohmann::json::array();
    for (const ManifestEntry& e : sorted)
      list.push_back({{"id", e.id}, {"label", e.label}, {"path", e.path}});
    return list;
  };
  doc["train"] = encode(manifest.train);
  doc["val"] = encode(manifest.val);
  doc["test"] = encode(manifest.test);
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail("file-not-found", path + ": cannot open for writing");
  out << doc.dump(2) << "\n";
}

inline Manifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("manifest-not-found", path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    fail("corrupt-file", path + ": " + e.what());
  }
  Manifest manifest;
  std::unordered_set<int> seen;
  auto decode = [&](const char* key, std::vector<ManifestEntry>& out) {
    if (!doc.contains(key)) return;
    if (!doc[key].is_array()) fail("corrupt-file", path + ": '" + key + "' is not a list");
    for (const auto& item : doc[key]) {
      if (!item.contains("id") || !item.contains("label") || !item.contains("path"))
        fail("corrupt-file", path + ": entry missing id/label/path");
      ManifestEntry e;
      e.id = item["id"].get<int>();
      e.label = item["label"].get<int>();
      e.path = item["path"].get<std::string>();
      if (!seen.insert(e.id).second)
        fail("duplicate-id", path + ": video id " + std::to_string(e.id) + " listed twice");
      out.push_back(std::move(e));
    }
    std::sort(out.begin(), out.end(),
              [](const ManifestEntry& a, const ManifestEntry& b) { return a.id < b.id; });
  };
  decode("train", manifest.train);
  decode("val", manifest.val);
  decode("test", manifest.test);
  return manifest;
}

// Writes every video next to the manifest and returns the manifest path.
inline std::string write_dataset(const std::string& dir, const Dataset& data) {
  std::filesystem::create_directories(std::filesystem::path(dir) / "videos");
  Manifest manifest;
  auto dump_split = [&](const std::vector<VideoSample>& split, std::vector<ManifestEntry>& entries) {
    for (const VideoSample& v : split) {
      char name[32];
      std::snprintf(name, sizeof(name), "videos/v%04d.fvs", v.id);
      write_fvs((std::filesystem::path(dir) / name).string(), v);
      entries.push_back({v.id, v.label, name});
    }
  };
  dump_split(data.train, manifest.train);
  dump_split(data.val, manifest.val);
  dump_split(data.test, manifest.test);
  const std::string manifest_path = (std::filesystem::path(dir) / "manifest.json").string();
  write_manifest(manifest_path, manifest);
  return manifest_path;
}

// Loads a dataset from a manifest; video paths resolve relative to the
// manifest's directory.
inline Dataset load_dataset(const std::string& manifest_path) {
  Manifest manifest = read_manifest(manifest_path);
  const std::filesystem::path base = std::filesystem::path(manifest_path).parent_path();
  Dataset data;
  auto load_split = [&](const std::vector<ManifestEntry>& entries, std::vector<VideoSample>& out) {
    for (const ManifestEntry& e : entries) {
      std::filesystem::path p(e.path);
      VideoSample v = read_fvs(p.is_absolute() ? p.string() : (base / p).string());
      if (v.label != e.label)
        fail("corrupt-file", e.path + ": stored label " + std::to_string(v.label) +
                                 " disagrees with manifest label " + std::to_string(e.label));
      v.id = e.id;
      out.push_back(std::move(v));
    }
  };
  load_split(manifest.train, data.train);
  load_split(manifest.val, data.val);
  load_split(manifest.test, data.test);
  return data;
}

}  // namespace tclsta
