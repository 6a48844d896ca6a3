#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "json.hpp"
#include "vidsal/types.hpp"

namespace vidsal {

// SV4F tensor file, little-endian:
//   magic   "SV4F"   4 bytes
//   version u32      currently 1
//   rows    u32      frame count T (or entry count for datastores)
//   cols    u32      dimension D
//   payload rows*cols float32, row-major
// Video metadata (video_id, duration_sec, fps_note) lives in a JSON sidecar
// at "<path>.json" so the tensor payload stays bit-exact and byte-addressable.
inline constexpr char kSv4fMagic[4] = {'S', 'V', '4', 'F'};
inline constexpr std::uint32_t kSv4fVersion = 1;
inline constexpr std::size_t kSv4fHeaderBytes = 16;

static_assert(std::endian::native == std::endian::little,
              "SV4F I/O assumes a little-endian host");

namespace detail {

struct Sv4fTensor {
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<float> data;
};

inline Sv4fTensor read_sv4f(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorCode::IoFailure, "cannot open " + path.string());

  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kSv4fMagic, 4) != 0)
    raise(ErrorCode::MalformedHeader, path.string() + " does not start with SV4F magic");

  std::uint32_t version = 0, rows = 0, cols = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  in.read(reinterpret_cast<char*>(&rows), sizeof(rows));
  in.read(reinterpret_cast<char*>(&cols), sizeof(cols));
  if (!in) raise(ErrorCode::MalformedHeader, path.string() + ": truncated header");
  if (version != kSv4fVersion)
    raise(ErrorCode::MalformedHeader,
          path.string() + ": unsupported version " + std::to_string(version));
  if (rows == 0 || cols == 0)
    raise(ErrorCode::MalformedHeader, path.string() + ": empty tensor (rows and cols must be >= 1)");

  Sv4fTensor t{rows, cols, {}};
  t.data.resize(static_cast<std::size_t>(rows) * cols);
  in.read(reinterpret_cast<char*>(t.data.data()),
          static_cast<std::streamsize>(t.data.size() * sizeof(float)));
  if (!in || in.gcount() != static_cast<std::streamsize>(t.data.size() * sizeof(float)))
    raise(ErrorCode::IoFailure, path.string() + ": truncated payload");
  if (in.peek() != std::ifstream::traits_type::eof())
    raise(ErrorCode::MalformedHeader, path.string() + ": trailing bytes after payload");
  return t;
}

inline void write_sv4f(std::uint32_t rows, std::uint32_t cols, std::span<const float> data,
                       const std::filesystem::path& path) {
  if (static_cast<std::size_t>(rows) * cols != data.size())
    raise(ErrorCode::DimensionMismatch, "payload size does not match rows*cols");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(ErrorCode::IoFailure, "cannot open " + path.string() + " for writing");
  out.write(kSv4fMagic, 4);
  out.write(reinterpret_cast<const char*>(&kSv4fVersion), sizeof(kSv4fVersion));
  out.write(reinterpret_cast<const char*>(&rows), sizeof(rows));
  out.write(reinterpret_cast<const char*>(&cols), sizeof(cols));
  out.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(float)));
  if (!out) raise(ErrorCode::IoFailure, "short write to " + path.string());
}

inline std::filesystem::path sidecar_path(const std::filesystem::path& tensor_path) {
  return std::filesystem::path(tensor_path.string() + ".json");
}

inline nlohmann::json parse_json_line(const std::string& line, const std::string& where) {
  nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object())
    raise(ErrorCode::MalformedRecord, where + ": not a JSON object");
  return j;
}

}  // namespace detail

/// Renormalizes every row to unit L2 norm. Rows already within `tol` of unit
/// norm are left bit-identical so that save/load round trips are exact.
inline void enforce_unit_norms(std::vector<float>& data, std::size_t dim, double tol = 1e-4) {
  const std::size_t rows = data.size() / dim;
  for (std::size_t r = 0; r < rows; ++r) {
    std::span<float> row(data.data() + r * dim, dim);
    if (!all_finite(std::span<const float>(row)))
      raise(ErrorCode::NonFiniteValue, "row " + std::to_string(r) + " contains non-finite values");
    const double norm = l2_norm(std::span<const float>(row));
    if (norm < 1e-8)
      raise(ErrorCode::ZeroVector, "row " + std::to_string(r) + " has near-zero norm");
    if (std::abs(norm - 1.0) > tol) {
      for (float& x : row) x = static_cast<float>(static_cast<double>(x) / norm);
    }
  }
}

/// Loads a frame-feature file. Vectors come back unit-normalized; metadata is
/// taken from the sidecar when present, otherwise video_id defaults to the
/// file stem and duration to T seconds (1 fps reading of the frame grid).
inline FrameFeatures load_features(const std::filesystem::path& path,
                                   std::size_t expected_dim = 0) {
  detail::Sv4fTensor t = detail::read_sv4f(path);
  if (expected_dim != 0 && t.cols != expected_dim)
    raise(ErrorCode::DimensionMismatch, path.string() + ": dimension " + std::to_string(t.cols) +
                                            ", expected " + std::to_string(expected_dim));

  FrameFeatures f;
  f.dim = t.cols;
  f.data = std::move(t.data);
  f.video_id = path.stem().string();
  f.duration_sec = static_cast<double>(t.rows);

  const std::filesystem::path side = detail::sidecar_path(path);
  if (std::filesystem::exists(side)) {
    std::ifstream in(side);
    if (!in) raise(ErrorCode::IoFailure, "cannot open " + side.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object())
      raise(ErrorCode::MalformedRecord, side.string() + ": invalid sidecar JSON");
    if (j.contains("video_id")) f.video_id = j.at("video_id").get<std::string>();
    if (j.contains("duration_sec")) f.duration_sec = j.at("duration_sec").get<double>();
    if (j.contains("fps_note") && !j.at("fps_note").is_null())
      f.fps_note = j.at("fps_note").get<std::string>();
  }
  if (f.duration_sec <= 0.0)
    raise(ErrorCode::MalformedRecord, path.string() + ": non-positive duration_sec");

  enforce_unit_norms(f.data, f.dim);
  return f;
}

inline void save_features(const FrameFeatures& f, const std::filesystem::path& path) {
  validate_frame_features(f);  // norms are not checked: weighted sequences are saveable
  detail::write_sv4f(static_cast<std::uint32_t>(f.frame_count()),
                     static_cast<std::uint32_t>(f.dim), f.data, path);

  nlohmann::ordered_json meta;
  meta["video_id"] = f.video_id;
  meta["duration_sec"] = f.duration_sec;
  if (f.fps_note) meta["fps_note"] = *f.fps_note;
  std::ofstream side(detail::sidecar_path(path), std::ios::trunc);
  if (!side) raise(ErrorCode::IoFailure, "cannot write sidecar for " + path.string());
  side << meta.dump() << "\n";
  if (!side) raise(ErrorCode::IoFailure, "short write to sidecar for " + path.string());
}

/// Annotation JSONL, one video per line:
///   {"video_id": ..., "duration_sec": ..., "events": [{"start_sec", "end_sec", "caption"}, ...]}
inline std::vector<EventSet> load_annotations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorCode::IoFailure, "cannot open " + path.string());

  std::vector<EventSet> result;
  std::unordered_set<std::string> seen_ids;
  std::string line;
  std::size_t line_no = 0;
  for (; std::getline(in, line); ) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    nlohmann::json j = detail::parse_json_line(line, where);

    EventSet set;
    try {
      set.video_id = j.at("video_id").get<std::string>();
      set.duration_sec = j.at("duration_sec").get<double>();
      for (const auto& je : j.at("events")) {
        Event e;
        e.start_sec = je.at("start_sec").get<double>();
        e.end_sec = je.at("end_sec").get<double>();
        e.caption = je.value("caption", std::string{});
        set.events.push_back(std::move(e));
      }
    } catch (const nlohmann::json::exception& ex) {
      raise(ErrorCode::MalformedRecord, where + ": " + ex.what());
    }
    if (set.duration_sec <= 0.0)
      raise(ErrorCode::MalformedRecord, where + ": non-positive duration_sec");
    if (set.events.empty())
      raise(ErrorCode::MalformedRecord, where + ": annotated video has no events");
    validate_event_set(set);
    std::stable_sort(set.events.begin(), set.events.end(),
                     [](const Event& a, const Event& b) { return a.start_sec < b.start_sec; });
    if (!seen_ids.insert(set.video_id).second)
      raise(ErrorCode::MalformedRecord, where + ": duplicate video_id " + set.video_id);
    result.push_back(std::move(set));
  }
  return result;
}

inline void save_annotations(std::span<const EventSet> sets, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) raise(ErrorCode::IoFailure, "cannot open " + path.string() + " for writing");
  for (const EventSet& s : sets) {
    nlohmann::ordered_json j;
    j["video_id"] = s.video_id;
    j["duration_sec"] = s.duration_sec;
    nlohmann::ordered_json events = nlohmann::ordered_json::array();
    for (const Event& e : s.events) {
      events.push_back({{"start_sec", e.start_sec}, {"end_sec", e.end_sec}, {"caption", e.caption}});
    }
    j["events"] = std::move(events);
    out << j.dump() << "\n";
  }
  if (!out) raise(ErrorCode::IoFailure, "short write to " + path.string());
}

/// Loads a caption datastore from an SV4F embedding tensor plus a caption
/// JSONL ({"caption_id", "text"} per line, aligned 1:1 with tensor rows).
/// subset_fraction in (0, 1] keeps the first ceil(fraction * N) entries in
/// file order.
inline CaptionDatastore load_datastore(const std::filesystem::path& embeddings_path,
                                       const std::filesystem::path& captions_path,
                                       double subset_fraction = 1.0,
                                       std::size_t expected_dim = 0) {
  if (!(subset_fraction > 0.0 && subset_fraction <= 1.0))
    raise(ErrorCode::InvalidArgument, "subset_fraction must be in (0, 1]");

  detail::Sv4fTensor t = detail::read_sv4f(embeddings_path);
  if (expected_dim != 0 && t.cols != expected_dim)
    raise(ErrorCode::DimensionMismatch, embeddings_path.string() + ": dimension " +
                                            std::to_string(t.cols) + ", expected " +
                                            std::to_string(expected_dim));

  std::ifstream in(captions_path);
  if (!in) raise(ErrorCode::IoFailure, "cannot open " + captions_path.string());

  CaptionDatastore store;
  store.dim = t.cols;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = captions_path.string() + ":" + std::to_string(line_no);
    nlohmann::json j = detail::parse_json_line(line, where);
    try {
      store.caption_ids.push_back(j.at("caption_id").get<std::string>());
      store.texts.push_back(j.at("text").get<std::string>());
    } catch (const nlohmann::json::exception& ex) {
      raise(ErrorCode::MalformedRecord, where + ": " + ex.what());
    }
  }
  if (store.caption_ids.size() != t.rows)
    raise(ErrorCode::CountMismatch, std::to_string(t.rows) + " embedding rows vs " +
                                        std::to_string(store.caption_ids.size()) +
                                        " caption records");

  const std::size_t keep = static_cast<std::size_t>(
      std::ceil(subset_fraction * static_cast<double>(t.rows)));
  store.caption_ids.resize(keep);
  store.texts.resize(keep);
  t.data.resize(keep * store.dim);
  store.embeddings = std::move(t.data);

  std::unordered_set<std::string> seen;
  seen.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) {
    if (!seen.insert(store.caption_ids[i]).second)
      raise(ErrorCode::MalformedRecord, "duplicate caption_id " + store.caption_ids[i]);
  }

  enforce_unit_norms(store.embeddings, store.dim);
  store.norms.resize(keep);
  for (std::size_t i = 0; i < keep; ++i) store.norms[i] = l2_norm(store.embedding(i));
  return store;
}

inline void save_datastore(const CaptionDatastore& store,
                           const std::filesystem::path& embeddings_path,
                           const std::filesystem::path& captions_path) {
  detail::write_sv4f(static_cast<std::uint32_t>(store.size()),
                     static_cast<std::uint32_t>(store.dim), store.embeddings, embeddings_path);
  std::ofstream out(captions_path, std::ios::trunc);
  if (!out) raise(ErrorCode::IoFailure, "cannot open " + captions_path.string() + " for writing");
  for (std::size_t i = 0; i < store.size(); ++i) {
    nlohmann::ordered_json j;
    j["caption_id"] = store.caption_ids[i];
    j["text"] = store.texts[i];
    out << j.dump() << "\n";
  }
  if (!out) raise(ErrorCode::IoFailure, "short write to " + captions_path.string());
}

}  // namespace vidsal
