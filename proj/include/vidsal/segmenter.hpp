#pragma once

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "vidsal/feature_io.hpp"
#include "vidsal/types.hpp"

namespace vidsal {

enum class SegmentMode { AdaptiveMomentum, AdaptiveFramewise, FixedMomentum, FixedFramewise, FixedWindow };

inline const char* to_string(SegmentMode m) noexcept {
  switch (m) {
    case SegmentMode::AdaptiveMomentum: return "adaptive-mmt";
    case SegmentMode::AdaptiveFramewise: return "adaptive";
    case SegmentMode::FixedMomentum: return "fixed-mmt";
    case SegmentMode::FixedFramewise: return "fixed";
    case SegmentMode::FixedWindow: return "window";
  }
  return "?";
}

struct SegmenterConfig {
  SegmentMode mode = SegmentMode::AdaptiveMomentum;
  double beta = 1.0;        // adaptive threshold scaling
  double tau_fixed = 0.3;   // fixed-threshold modes
  std::size_t window = 10;  // FixedWindow mode
};

/// Consecutive-frame cosine differences D(i) = 1 - <x_i, x_{i+1}>, their
/// mean/population-std, and the adaptive threshold mu + beta * sigma.
struct DifferenceProfile {
  std::vector<double> diffs;  // length T-1
  double mean = 0.0;
  double stddev = 0.0;
  double tau_adaptive = 0.0;
};

/// 1-based inclusive frame range.
struct FrameRange {
  std::size_t start = 0;
  std::size_t end = 0;

  bool operator==(const FrameRange&) const = default;
  std::size_t length() const { return end - start + 1; }
};

/// Ordered, contiguous, non-overlapping segments covering frames 1..T, with
/// one representation vector (the exact mean of member frames) per segment.
struct SegmentPartition {
  std::vector<FrameRange> segments;
  std::vector<std::vector<double>> representations;

  std::size_t count() const { return segments.size(); }
};

inline DifferenceProfile frame_differences(const FrameFeatures& features, double beta = 1.0) {
  const std::size_t t = features.frame_count();
  if (t < 2) raise(ErrorCode::TooShort, "need at least 2 frames, got " + std::to_string(t));
  if (!std::isfinite(beta)) raise(ErrorCode::InvalidArgument, "beta must be finite");

  DifferenceProfile profile;
  profile.diffs.resize(t - 1);
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < t; ++i) {
    profile.diffs[i] = 1.0 - dot(features.frame(i), features.frame(i + 1));
    sum += profile.diffs[i];
  }
  profile.mean = sum / static_cast<double>(t - 1);
  double sq = 0.0;
  for (double d : profile.diffs) sq += (d - profile.mean) * (d - profile.mean);
  profile.stddev = std::sqrt(sq / static_cast<double>(t - 1));
  profile.tau_adaptive = profile.mean + beta * profile.stddev;
  return profile;
}

namespace detail {

inline std::vector<double> mean_of_rows(const FrameFeatures& f, const FrameRange& r) {
  std::vector<double> mean(f.dim, 0.0);
  for (std::size_t i = r.start; i <= r.end; ++i) {
    std::span<const float> row = f.frame(i - 1);
    for (std::size_t j = 0; j < f.dim; ++j) mean[j] += static_cast<double>(row[j]);
  }
  const double inv = 1.0 / static_cast<double>(r.length());
  for (double& x : mean) x *= inv;
  return mean;
}

inline void finalize_representations(const FrameFeatures& f, SegmentPartition& p) {
  p.representations.reserve(p.segments.size());
  for (const FrameRange& r : p.segments) p.representations.push_back(mean_of_rows(f, r));
}

}  // namespace detail

/// One step of the momentum loop, recorded for inspection: the frame handled
/// (1-based), the difference against the running segment feature, whether a
/// boundary opened, and the running mean after the step.
struct MomentumStep {
  std::size_t frame = 0;
  double dprime = 0.0;
  bool boundary = false;
  std::vector<double> running_mean;
};

/// Momentum-accumulation segmentation. The running segment feature starts at
/// frame 1; each incoming frame is compared against it via
/// D'(i) = 1 - <z_cur, x_{i+1}> (z_cur is NOT renormalized, so its norm
/// shrinks below 1 as frames are averaged in). A boundary opens only when
/// D'(i) exceeds the threshold strictly; otherwise the frame is absorbed and
/// z_cur moves to (|S| * z_cur + x) / (|S| + 1).
inline SegmentPartition segment_momentum(const FrameFeatures& features, double threshold,
                                         std::vector<MomentumStep>* trace = nullptr) {
  const std::size_t t = features.frame_count();
  if (t == 0) raise(ErrorCode::TooShort, "empty feature sequence");
  if (!std::isfinite(threshold)) raise(ErrorCode::InvalidArgument, "threshold must be finite");

  SegmentPartition out;
  std::size_t seg_start = 1;
  std::size_t seg_len = 1;
  std::vector<double> z_cur(features.dim);
  {
    std::span<const float> first = features.frame(0);
    for (std::size_t j = 0; j < features.dim; ++j) z_cur[j] = static_cast<double>(first[j]);
  }

  for (std::size_t incoming = 2; incoming <= t; ++incoming) {
    std::span<const float> x = features.frame(incoming - 1);
    const double dprime = 1.0 - dot(std::span<const double>(z_cur), x);
    const bool boundary = dprime > threshold;
    if (boundary) {
      out.segments.push_back({seg_start, incoming - 1});
      seg_start = incoming;
      seg_len = 1;
      for (std::size_t j = 0; j < features.dim; ++j) z_cur[j] = static_cast<double>(x[j]);
    } else {
      const double count = static_cast<double>(seg_len);
      for (std::size_t j = 0; j < features.dim; ++j)
        z_cur[j] = (count * z_cur[j] + static_cast<double>(x[j])) / (count + 1.0);
      ++seg_len;
    }
    if (trace) trace->push_back({incoming, dprime, boundary, z_cur});
  }
  out.segments.push_back({seg_start, t});
  detail::finalize_representations(features, out);
  return out;
}

/// Frame-wise segmentation: a boundary after every i whose consecutive
/// difference D(i) strictly exceeds the threshold.
inline SegmentPartition segment_framewise(const FrameFeatures& features, double threshold) {
  const std::size_t t = features.frame_count();
  if (t == 0) raise(ErrorCode::TooShort, "empty feature sequence");
  if (!std::isfinite(threshold)) raise(ErrorCode::InvalidArgument, "threshold must be finite");

  SegmentPartition out;
  std::size_t seg_start = 1;
  if (t >= 2) {
    for (std::size_t i = 0; i + 1 < t; ++i) {
      const double diff = 1.0 - dot(features.frame(i), features.frame(i + 1));
      if (diff > threshold) {
        out.segments.push_back({seg_start, i + 1});
        seg_start = i + 2;
      }
    }
  }
  out.segments.push_back({seg_start, t});
  detail::finalize_representations(features, out);
  return out;
}

/// Consecutive chunks of exactly `window` frames; the final chunk absorbs the
/// remainder and may be shorter.
inline SegmentPartition segment_fixed_window(const FrameFeatures& features, std::size_t window) {
  const std::size_t t = features.frame_count();
  if (t == 0) raise(ErrorCode::TooShort, "empty feature sequence");
  if (window == 0) raise(ErrorCode::InvalidArgument, "window must be >= 1");

  SegmentPartition out;
  for (std::size_t start = 1; start <= t; start += window) {
    out.segments.push_back({start, std::min(start + window - 1, t)});
  }
  detail::finalize_representations(features, out);
  return out;
}

/// Threshold the dispatcher would use: tau_adaptive for adaptive modes,
/// tau_fixed for fixed-threshold modes, nothing for FixedWindow.
inline std::optional<double> segmentation_threshold(const FrameFeatures& features,
                                                    const SegmenterConfig& config) {
  switch (config.mode) {
    case SegmentMode::AdaptiveMomentum:
    case SegmentMode::AdaptiveFramewise:
      return frame_differences(features, config.beta).tau_adaptive;
    case SegmentMode::FixedMomentum:
    case SegmentMode::FixedFramewise:
      return config.tau_fixed;
    case SegmentMode::FixedWindow:
      return std::nullopt;
  }
  return std::nullopt;
}

inline SegmentPartition segment(const FrameFeatures& features, const SegmenterConfig& config) {
  switch (config.mode) {
    case SegmentMode::AdaptiveMomentum:
      return segment_momentum(features, frame_differences(features, config.beta).tau_adaptive);
    case SegmentMode::AdaptiveFramewise:
      return segment_framewise(features, frame_differences(features, config.beta).tau_adaptive);
    case SegmentMode::FixedMomentum:
      return segment_momentum(features, config.tau_fixed);
    case SegmentMode::FixedFramewise:
      return segment_framewise(features, config.tau_fixed);
    case SegmentMode::FixedWindow:
      return segment_fixed_window(features, config.window);
  }
  raise(ErrorCode::InvalidArgument, "unknown segmentation mode");
}

/// Checks the partition contract: ordered, contiguous, non-overlapping
/// ranges covering 1..frame_count exactly.
inline void validate_partition_ranges(std::span<const FrameRange> ranges, std::size_t frame_count) {
  if (ranges.empty()) raise(ErrorCode::InvalidArgument, "partition has no segments");
  if (ranges.front().start != 1)
    raise(ErrorCode::InvalidArgument, "partition must start at frame 1");
  for (std::size_t m = 0; m < ranges.size(); ++m) {
    if (ranges[m].start > ranges[m].end)
      raise(ErrorCode::InvalidArgument, "segment " + std::to_string(m) + " has start > end");
    if (m + 1 < ranges.size() && ranges[m + 1].start != ranges[m].end + 1)
      raise(ErrorCode::InvalidArgument, "segments are not contiguous at index " + std::to_string(m));
  }
  if (ranges.back().end != frame_count)
    raise(ErrorCode::InvalidArgument, "partition must end at frame " + std::to_string(frame_count));
}

/// One line of the segment JSONL output:
///   {"video_id", "mode", "tau_effective", "segments": [{"start", "end"}, ...]}
struct SegmentRecord {
  std::string video_id;
  std::string mode;
  std::optional<double> tau_effective;
  std::vector<FrameRange> segments;
};

inline void save_segments(std::span<const SegmentRecord> records,
                          const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) raise(ErrorCode::IoFailure, "cannot open " + path.string() + " for writing");
  for (const SegmentRecord& rec : records) {
    nlohmann::ordered_json j;
    j["video_id"] = rec.video_id;
    j["mode"] = rec.mode;
    if (rec.tau_effective) j["tau_effective"] = *rec.tau_effective;
    else j["tau_effective"] = nullptr;
    nlohmann::ordered_json segs = nlohmann::ordered_json::array();
    for (const FrameRange& r : rec.segments) segs.push_back({{"start", r.start}, {"end", r.end}});
    j["segments"] = std::move(segs);
    out << j.dump() << "\n";
  }
  if (!out) raise(ErrorCode::IoFailure, "short write to " + path.string());
}

inline std::vector<SegmentRecord> load_segments(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorCode::IoFailure, "cannot open " + path.string());
  std::vector<SegmentRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    nlohmann::json j = detail::parse_json_line(line, where);
    SegmentRecord rec;
    try {
      rec.video_id = j.at("video_id").get<std::string>();
      rec.mode = j.value("mode", std::string{});
      if (j.contains("tau_effective") && !j.at("tau_effective").is_null())
        rec.tau_effective = j.at("tau_effective").get<double>();
      for (const auto& js : j.at("segments"))
        rec.segments.push_back({js.at("start").get<std::size_t>(), js.at("end").get<std::size_t>()});
    } catch (const nlohmann::json::exception& ex) {
      raise(ErrorCode::MalformedRecord, where + ": " + ex.what());
    }
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace vidsal
