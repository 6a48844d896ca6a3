#pragma once

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <limits>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "vidsal/feature_io.hpp"
#include "vidsal/segmenter.hpp"
#include "vidsal/types.hpp"

namespace vidsal {

enum class SegmentRepr { MeanPool, MaxPool, KeyFrame };

inline const char* to_string(SegmentRepr r) noexcept {
  switch (r) {
    case SegmentRepr::MeanPool: return "mean";
    case SegmentRepr::MaxPool: return "max";
    case SegmentRepr::KeyFrame: return "keyframe";
  }
  return "?";
}

struct RetrievalConfig {
  std::size_t k = 10;
  SegmentRepr repr = SegmentRepr::MeanPool;
};

namespace detail {

// Four-lane accumulation so the store scan does not serialize on a single
// floating-point add chain.
inline double score_dot(std::span<const double> q, std::span<const float> row) {
  double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
  std::size_t i = 0;
  const std::size_t n4 = q.size() & ~std::size_t{3};
  for (; i < n4; i += 4) {
    a0 += q[i] * static_cast<double>(row[i]);
    a1 += q[i + 1] * static_cast<double>(row[i + 1]);
    a2 += q[i + 2] * static_cast<double>(row[i + 2]);
    a3 += q[i + 3] * static_cast<double>(row[i + 3]);
  }
  for (; i < q.size(); ++i) a0 += q[i] * static_cast<double>(row[i]);
  return (a0 + a1) + (a2 + a3);
}

}  // namespace detail

struct ScoredCaption {
  std::size_t index = 0;  // row in the datastore
  std::string caption_id;
  double score = 0.0;  // cosine similarity
};

/// Ranked captions plus the guidance vector (mean of the k retrieved
/// embeddings) for one segment.
struct SegmentRetrieval {
  std::vector<ScoredCaption> captions;
  std::vector<double> guidance;
};

struct RetrievalResult {
  std::vector<SegmentRetrieval> segments;
};

/// Builds one query vector per segment. MeanPool is the segment frame mean
/// (identical to the partition representation); MaxPool the elementwise max;
/// KeyFrame the member frame most cosine-similar to the segment mean, ties
/// resolved to the earliest frame.
inline std::vector<std::vector<double>> segment_representation(const FrameFeatures& features,
                                                               const SegmentPartition& partition,
                                                               SegmentRepr repr) {
  std::vector<std::vector<double>> out;
  out.reserve(partition.count());
  for (const FrameRange& r : partition.segments) {
    switch (repr) {
      case SegmentRepr::MeanPool:
        out.push_back(detail::mean_of_rows(features, r));
        break;
      case SegmentRepr::MaxPool: {
        std::vector<double> m(features.dim, -std::numeric_limits<double>::infinity());
        for (std::size_t i = r.start; i <= r.end; ++i) {
          std::span<const float> row = features.frame(i - 1);
          for (std::size_t j = 0; j < features.dim; ++j)
            m[j] = std::max(m[j], static_cast<double>(row[j]));
        }
        out.push_back(std::move(m));
        break;
      }
      case SegmentRepr::KeyFrame: {
        const std::vector<double> mean = detail::mean_of_rows(features, r);
        const double mean_norm = l2_norm(std::span<const double>(mean));
        std::size_t best = r.start;
        double best_score = -std::numeric_limits<double>::infinity();
        for (std::size_t i = r.start; i <= r.end; ++i) {
          std::span<const float> row = features.frame(i - 1);
          const double denom = mean_norm * l2_norm(row);
          const double score = denom > 0.0 ? dot(std::span<const double>(mean), row) / denom : 0.0;
          if (score > best_score) {
            best_score = score;
            best = i;
          }
        }
        std::span<const float> row = features.frame(best - 1);
        out.emplace_back(row.begin(), row.end());
        break;
      }
    }
  }
  return out;
}

/// Exact exhaustive top-k by cosine similarity. Scores are true cosines
/// (query and entry norms divided out); equal scores break ties by ascending
/// caption_id, which makes results reproducible across platforms.
inline std::vector<ScoredCaption> retrieve_topk(std::span<const double> query,
                                                const CaptionDatastore& store, std::size_t k) {
  if (store.size() == 0) raise(ErrorCode::EmptyDatastore, "datastore has no entries");
  if (k == 0) raise(ErrorCode::InvalidArgument, "k must be >= 1");
  if (k > store.size())
    raise(ErrorCode::KTooLarge,
          "k=" + std::to_string(k) + " exceeds datastore size " + std::to_string(store.size()));
  if (query.size() != store.dim)
    raise(ErrorCode::DimensionMismatch, "query dimension " + std::to_string(query.size()) +
                                            " vs datastore " + std::to_string(store.dim));
  if (!all_finite(query)) raise(ErrorCode::NonFiniteValue, "query contains non-finite values");
  const double query_norm = l2_norm(query);
  if (query_norm < 1e-12) raise(ErrorCode::ZeroVector, "query has near-zero norm");

  std::vector<double> scores(store.size());
  for (std::size_t r = 0; r < store.size(); ++r)
    scores[r] = detail::score_dot(query, store.embedding(r)) / (query_norm * store.norms[r]);

  std::vector<std::size_t> order(store.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto better = [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return store.caption_ids[a] < store.caption_ids[b];
  };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    better);

  std::vector<ScoredCaption> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i)
    out.push_back({order[i], store.caption_ids[order[i]], scores[order[i]]});
  return out;
}

/// Retrieves top-k captions for every segment and averages the retrieved
/// embeddings into one guidance vector per segment. Segments are independent;
/// results follow partition order.
inline RetrievalResult retrieve_for_partition(const FrameFeatures& features,
                                              const SegmentPartition& partition,
                                              const CaptionDatastore& store,
                                              const RetrievalConfig& config) {
  if (store.dim != features.dim)
    raise(ErrorCode::DimensionMismatch, "datastore dimension " + std::to_string(store.dim) +
                                            " vs features " + std::to_string(features.dim));
  const std::vector<std::vector<double>> queries =
      segment_representation(features, partition, config.repr);

  RetrievalResult result;
  result.segments.reserve(queries.size());
  for (const std::vector<double>& q : queries) {
    SegmentRetrieval sr;
    sr.captions = retrieve_topk(q, store, config.k);
    sr.guidance.assign(store.dim, 0.0);
    for (const ScoredCaption& c : sr.captions) {
      std::span<const float> emb = store.embedding(c.index);
      for (std::size_t j = 0; j < store.dim; ++j) sr.guidance[j] += static_cast<double>(emb[j]);
    }
    const double inv = 1.0 / static_cast<double>(sr.captions.size());
    for (double& x : sr.guidance) x *= inv;
    result.segments.push_back(std::move(sr));
  }
  return result;
}

/// Wall-time statistics for a batch of queries against one datastore.
/// per_video_ms is the time to answer the whole batch once (the batch is
/// one video's segment queries); with repeats > 1 it is the median batch
/// time and the per-query percentiles pool samples from all passes.
struct SearchBenchStats {
  std::size_t queries = 0;
  std::size_t repeats = 1;
  double mean_ms = 0.0;
  double median_ms = 0.0;
  double p95_ms = 0.0;
  double per_video_ms = 0.0;
};

namespace detail {

// Nearest-rank percentile over an ascending-sorted sample.
inline double percentile(const std::vector<double>& sorted_ascending, double q) {
  if (sorted_ascending.empty()) return 0.0;
  const double rank = std::ceil(q * static_cast<double>(sorted_ascending.size()));
  const std::size_t idx =
      rank < 1.0 ? 0 : std::min(sorted_ascending.size() - 1, static_cast<std::size_t>(rank) - 1);
  return sorted_ascending[idx];
}

}  // namespace detail

/// Appends one video's retrieval records to a JSONL stream and writes the
/// per-segment guidance vectors as one SV4F tensor (row m = segment m, also
/// referenced as "<file>#<m>" from the JSONL lines).
inline void write_retrieval_outputs(std::ostream& jsonl, const std::string& video_id,
                                    const RetrievalResult& result, std::size_t dim,
                                    const std::filesystem::path& guidance_path) {
  const std::string guidance_file = guidance_path.filename().string();
  std::vector<float> guidance;
  guidance.reserve(result.segments.size() * dim);
  for (std::size_t m = 0; m < result.segments.size(); ++m) {
    const SegmentRetrieval& sr = result.segments[m];
    nlohmann::ordered_json j;
    j["video_id"] = video_id;
    j["segment_index"] = m;
    nlohmann::ordered_json caps = nlohmann::ordered_json::array();
    for (const ScoredCaption& c : sr.captions)
      caps.push_back({{"caption_id", c.caption_id}, {"score", c.score}});
    j["captions"] = std::move(caps);
    j["guidance_ref"] = guidance_file + "#" + std::to_string(m);
    jsonl << j.dump() << "\n";
    for (double x : sr.guidance) guidance.push_back(static_cast<float>(x));
  }
  detail::write_sv4f(static_cast<std::uint32_t>(result.segments.size()),
                     static_cast<std::uint32_t>(dim), guidance, guidance_path);
}

inline SearchBenchStats bench_search(const CaptionDatastore& store,
                                     const std::vector<std::vector<double>>& queries,
                                     std::size_t k, std::size_t repeats = 1) {
  if (queries.empty()) raise(ErrorCode::InvalidArgument, "no queries to benchmark");
  if (repeats == 0) repeats = 1;
  using clock = std::chrono::steady_clock;

  std::vector<double> samples;
  samples.reserve(queries.size() * repeats);
  std::vector<double> pass_totals;
  pass_totals.reserve(repeats);
  for (std::size_t rep = 0; rep < repeats; ++rep) {
    double pass_total = 0.0;
    for (const std::vector<double>& q : queries) {
      const auto t0 = clock::now();
      volatile double sink = retrieve_topk(q, store, k).front().score;
      (void)sink;
      const auto t1 = clock::now();
      const double ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
      samples.push_back(ms);
      pass_total += ms;
    }
    pass_totals.push_back(pass_total);
  }

  std::sort(samples.begin(), samples.end());
  std::sort(pass_totals.begin(), pass_totals.end());
  SearchBenchStats stats;
  stats.queries = queries.size();
  stats.repeats = repeats;
  stats.mean_ms = std::accumulate(samples.begin(), samples.end(), 0.0) /
                  static_cast<double>(samples.size());
  stats.median_ms = detail::percentile(samples, 0.5);
  stats.p95_ms = detail::percentile(samples, 0.95);
  stats.per_video_ms = detail::percentile(pass_totals, 0.5);
  return stats;
}

}  // namespace vidsal
