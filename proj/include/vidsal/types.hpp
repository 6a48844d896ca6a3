#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vidsal/error.hpp"
#include "vidsal/vecmath.hpp"

namespace vidsal {

/// Per-frame feature sequence for one video. Vectors are stored row-major as
/// float32 and are unit L2-normalized after loading. Frame indices in the
/// public APIs are 1-based (frame i of T sits at normalized position i/T);
/// frame() takes the 0-based row.
struct FrameFeatures {
  std::string video_id;
  double duration_sec = 0.0;  // video length in seconds
  std::size_t dim = 0;
  std::vector<float> data;  // frame_count() x dim
  std::optional<std::string> fps_note;

  std::size_t frame_count() const { return dim == 0 ? 0 : data.size() / dim; }

  std::span<const float> frame(std::size_t row) const {
    return {data.data() + row * dim, dim};
  }
  std::span<float> frame(std::size_t row) { return {data.data() + row * dim, dim}; }
};

struct Event {
  double start_sec = 0.0;
  double end_sec = 0.0;
  std::string caption;
};

/// Ground-truth events for one video, sorted by start time after loading.
struct EventSet {
  std::string video_id;
  double duration_sec = 0.0;
  std::vector<Event> events;
};

/// Caption embeddings plus texts, queryable by cosine similarity. Embeddings
/// are unit-normalized at load; norms are cached for cosine denominators.
struct CaptionDatastore {
  std::size_t dim = 0;
  std::vector<std::string> caption_ids;
  std::vector<std::string> texts;
  std::vector<float> embeddings;  // size() x dim
  std::vector<double> norms;

  std::size_t size() const { return caption_ids.size(); }

  std::span<const float> embedding(std::size_t row) const {
    return {embeddings.data() + row * dim, dim};
  }
};

inline void validate_frame_features(const FrameFeatures& f) {
  if (f.dim == 0) raise(ErrorCode::DimensionMismatch, "feature dimension must be >= 1");
  if (f.data.empty() || f.data.size() % f.dim != 0)
    raise(ErrorCode::DimensionMismatch, "feature payload is not a T x D grid");
  if (f.duration_sec <= 0.0)
    raise(ErrorCode::InvalidArgument, "duration_sec must be positive");
  if (!all_finite(std::span<const float>(f.data)))
    raise(ErrorCode::NonFiniteValue, "feature payload contains non-finite values");
}

inline void validate_event_set(const EventSet& s) {
  if (s.events.empty()) raise(ErrorCode::EmptyEventSet, "video " + s.video_id + " has no events");
  for (const Event& e : s.events) {
    if (!(e.start_sec >= 0.0 && e.start_sec < e.end_sec && e.end_sec <= s.duration_sec))
      raise(ErrorCode::InvalidTimestamp,
            "video " + s.video_id + ": event [" + std::to_string(e.start_sec) + ", " +
                std::to_string(e.end_sec) + "] outside [0, " + std::to_string(s.duration_sec) + "]");
  }
}

}  // namespace vidsal
