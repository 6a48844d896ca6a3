#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <vector>

#include "json.hpp"
#include "vidsal/error.hpp"
#include "vidsal/rng.hpp"
#include "vidsal/types.hpp"

namespace vidsal {

enum class WeightDesign { SigmoidCenter, HardBinary, Gaussian, StartSkew, EndSkew, RandomSkew };

inline const char* to_string(WeightDesign d) noexcept {
  switch (d) {
    case WeightDesign::SigmoidCenter: return "sigmoid";
    case WeightDesign::HardBinary: return "binary";
    case WeightDesign::Gaussian: return "gaussian";
    case WeightDesign::StartSkew: return "start";
    case WeightDesign::EndSkew: return "end";
    case WeightDesign::RandomSkew: return "random";
  }
  return "?";
}

struct ReweightConfig {
  double alpha = 10.0;  // sigmoid sharpness
  WeightDesign design = WeightDesign::SigmoidCenter;
  std::uint64_t rng_seed = 0;  // consulted by RandomSkew only
};

/// Per-frame importance weights, one per frame, each in [0, 1].
struct SaliencyWeights {
  std::vector<double> weights;
};

inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

namespace detail {

// Center-anchored product of a rising and a falling sigmoid over the
// normalized interval [lo, hi]; peaks at the interval midpoint.
inline double sigmoid_band(double pos, double lo, double hi, double sharpness) {
  return logistic(sharpness * (pos - lo)) * logistic(sharpness * (hi - pos));
}

// Weight of one event at normalized position pos, for any design. Skew
// variants move the peak anchor to the event start/end/a random in-event
// point and shrink the band to half the event width at doubled sharpness,
// so the designs differ only in where the mass peaks.
inline double design_weight(WeightDesign design, double pos, double start_norm, double end_norm,
                            double alpha, double random_anchor) {
  switch (design) {
    case WeightDesign::SigmoidCenter:
      return sigmoid_band(pos, start_norm, end_norm, alpha);
    case WeightDesign::HardBinary:
      return (pos >= start_norm && pos <= end_norm) ? 1.0 : 0.0;
    case WeightDesign::Gaussian: {
      const double center = 0.5 * (start_norm + end_norm);
      const double sigma = 0.25 * (end_norm - start_norm);
      const double z = (pos - center) / sigma;
      return std::exp(-0.5 * z * z);
    }
    case WeightDesign::StartSkew:
    case WeightDesign::EndSkew:
    case WeightDesign::RandomSkew: {
      const double half_width = 0.5 * (end_norm - start_norm);
      double anchor = random_anchor;
      if (design == WeightDesign::StartSkew) anchor = start_norm;
      if (design == WeightDesign::EndSkew) anchor = end_norm;
      return sigmoid_band(pos, anchor - 0.5 * half_width, anchor + 0.5 * half_width, 2.0 * alpha);
    }
  }
  return 0.0;
}

// RandomSkew anchors are keyed by (seed, video_id, event index) so runs are
// reproducible and order-independent across videos.
inline double random_anchor(const EventSet& events, std::size_t event_index,
                            std::uint64_t rng_seed, double start_norm, double end_norm) {
  const std::uint64_t key =
      mix_seed(mix_seed(rng_seed, fnv1a64(events.video_id)), static_cast<std::uint64_t>(event_index));
  SplitMix64 g(key);
  return start_norm + g.uniform01() * (end_norm - start_norm);
}

}  // namespace detail

/// Sigmoid-center weight of event `event_index` (0-based) at frame
/// `frame` (1-based): the product of a rising sigmoid anchored at the
/// normalized event start and a falling one anchored at the end.
inline double event_weight(const FrameFeatures& features, const EventSet& events,
                           std::size_t event_index, std::size_t frame,
                           const ReweightConfig& config) {
  if (config.design != WeightDesign::SigmoidCenter)
    raise(ErrorCode::InvalidArgument, "event_weight is defined for the sigmoid-center design");
  const std::size_t t = features.frame_count();
  if (frame < 1 || frame > t)
    raise(ErrorCode::IndexOutOfRange, "frame " + std::to_string(frame) + " outside 1.." + std::to_string(t));
  if (event_index >= events.events.size())
    raise(ErrorCode::IndexOutOfRange, "event index " + std::to_string(event_index));

  const Event& e = events.events[event_index];
  const double pos = static_cast<double>(frame) / static_cast<double>(t);
  return detail::sigmoid_band(pos, e.start_sec / events.duration_sec,
                              e.end_sec / events.duration_sec, config.alpha);
}

/// Elementwise max across the per-event weight rows.
inline SaliencyWeights combine_weights(const std::vector<std::vector<double>>& per_event) {
  if (per_event.empty()) raise(ErrorCode::EmptyEventSet, "no per-event weight rows");
  SaliencyWeights out;
  out.weights = per_event.front();
  for (std::size_t n = 1; n < per_event.size(); ++n) {
    if (per_event[n].size() != out.weights.size())
      raise(ErrorCode::LengthMismatch, "per-event weight rows differ in length");
    for (std::size_t i = 0; i < out.weights.size(); ++i)
      out.weights[i] = std::max(out.weights[i], per_event[n][i]);
  }
  return out;
}

/// Full per-frame weight vector for the configured design, combined across
/// events by elementwise max. Frames are at normalized positions i/T,
/// i = 1..T; timestamps are normalized by the video duration.
inline SaliencyWeights compute_weights(const FrameFeatures& features, const EventSet& events,
                                       const ReweightConfig& config) {
  if (events.events.empty()) raise(ErrorCode::EmptyEventSet, "video " + events.video_id);
  if (!(config.alpha > 0.0)) raise(ErrorCode::InvalidArgument, "alpha must be positive");
  for (const Event& e : events.events) {
    if (!(e.start_sec < e.end_sec))
      raise(ErrorCode::InvalidTimestamp, "event with start >= end in video " + events.video_id);
  }

  const std::size_t t = features.frame_count();
  std::vector<std::vector<double>> rows;
  rows.reserve(events.events.size());
  for (std::size_t n = 0; n < events.events.size(); ++n) {
    const Event& e = events.events[n];
    const double start_norm = e.start_sec / events.duration_sec;
    const double end_norm = e.end_sec / events.duration_sec;
    double anchor = 0.0;
    if (config.design == WeightDesign::RandomSkew)
      anchor = detail::random_anchor(events, n, config.rng_seed, start_norm, end_norm);

    std::vector<double> row(t);
    for (std::size_t i = 1; i <= t; ++i) {
      const double pos = static_cast<double>(i) / static_cast<double>(t);
      row[i - 1] = detail::design_weight(config.design, pos, start_norm, end_norm, config.alpha, anchor);
    }
    rows.push_back(std::move(row));
  }
  return combine_weights(rows);
}

/// Scales frame i by W(i). The result is deliberately not renormalized:
/// the magnitude carries the saliency signal.
inline FrameFeatures apply_weights(const FrameFeatures& features, const SaliencyWeights& weights) {
  if (weights.weights.size() != features.frame_count())
    raise(ErrorCode::LengthMismatch, std::to_string(weights.weights.size()) + " weights for " +
                                         std::to_string(features.frame_count()) + " frames");
  FrameFeatures out = features;
  for (std::size_t i = 0; i < out.frame_count(); ++i) {
    const double w = weights.weights[i];
    for (float& x : out.frame(i)) x = static_cast<float>(static_cast<double>(x) * w);
  }
  return out;
}

/// One line of the weights JSONL output:
///   {"video_id", "design", "alpha", "seed", "weights": [...]}
struct WeightsRecord {
  std::string video_id;
  std::string design;
  double alpha = 10.0;
  std::uint64_t seed = 0;
  std::vector<double> weights;
};

inline void save_weights(std::span<const WeightsRecord> records,
                         const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) raise(ErrorCode::IoFailure, "cannot open " + path.string() + " for writing");
  for (const WeightsRecord& rec : records) {
    nlohmann::ordered_json j;
    j["video_id"] = rec.video_id;
    j["design"] = rec.design;
    j["alpha"] = rec.alpha;
    j["seed"] = rec.seed;
    j["weights"] = rec.weights;
    out << j.dump() << "\n";
  }
  if (!out) raise(ErrorCode::IoFailure, "short write to " + path.string());
}

}  // namespace vidsal
