#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "vidsal/feature_io.hpp"
#include "vidsal/rng.hpp"
#include "vidsal/segmenter.hpp"
#include "vidsal/types.hpp"

namespace vidsal {

/// Parameters for seeded test corpora: piecewise-constant scene directions
/// plus noise, annotations whose events coincide with the planted scene
/// boundaries, and a caption store clustered around the scene directions.
struct SynthParams {
  std::size_t videos = 10;
  std::size_t frames = 100;        // T
  std::size_t dim = 64;            // D
  std::size_t scenes_min = 3;
  std::size_t scenes_max = 8;
  double noise = 0.03;             // approximate L2 magnitude of the per-frame perturbation
  std::size_t captions_per_scene = 3;
  std::size_t store_total = 0;     // 0 = videos * scenes * captions_per_scene; else exactly this many
};

struct SynthCorpus {
  SynthParams params;
  std::uint64_t seed = 0;
  std::vector<FrameFeatures> features;
  std::vector<EventSet> annotations;
  std::vector<std::vector<FrameRange>> planted;  // per-video scene ranges (1-based, inclusive)
  CaptionDatastore store;
};

namespace detail {

// Orthonormal basis of `count` directions via Gram-Schmidt over gaussian
// draws; requires count <= dim. Orthogonality makes cross-scene cosine
// differences ~1, so planted boundaries dominate mu + beta * sigma.
inline std::vector<std::vector<double>> orthonormal_directions(std::size_t count, std::size_t dim,
                                                               SplitMix64& rng) {
  std::vector<std::vector<double>> dirs;
  dirs.reserve(count);
  while (dirs.size() < count) {
    std::vector<double> v(dim);
    for (double& x : v) x = rng.gauss();
    for (const std::vector<double>& u : dirs) {
      const double proj = dot(std::span<const double>(v), std::span<const double>(u));
      for (std::size_t j = 0; j < dim; ++j) v[j] -= proj * u[j];
    }
    const double norm = l2_norm(std::span<const double>(v));
    if (norm < 1e-6) continue;  // rare degenerate draw, resample
    for (double& x : v) x /= norm;
    dirs.push_back(std::move(v));
  }
  return dirs;
}

// Splits 1..frames into `scenes` contiguous ranges, each at least 2 frames.
inline std::vector<FrameRange> random_scene_split(std::size_t frames, std::size_t scenes,
                                                  SplitMix64& rng) {
  std::vector<std::size_t> lengths(scenes, 2);
  std::size_t spare = frames - 2 * scenes;
  while (spare > 0) {
    lengths[static_cast<std::size_t>(rng.uniform_int(0, scenes - 1))] += 1;
    --spare;
  }
  std::vector<FrameRange> ranges;
  ranges.reserve(scenes);
  std::size_t start = 1;
  for (std::size_t len : lengths) {
    ranges.push_back({start, start + len - 1});
    start += len;
  }
  return ranges;
}

inline std::vector<float> noisy_unit_vector(const std::vector<double>& dir, double noise,
                                            SplitMix64& rng) {
  const std::size_t dim = dir.size();
  const double comp_sigma = noise / std::sqrt(static_cast<double>(dim));
  std::vector<double> v(dim);
  for (std::size_t j = 0; j < dim; ++j) v[j] = dir[j] + comp_sigma * rng.gauss();
  const double norm = l2_norm(std::span<const double>(v));
  std::vector<float> out(dim);
  for (std::size_t j = 0; j < dim; ++j) out[j] = static_cast<float>(v[j] / norm);
  return out;
}

inline std::string zero_pad(std::size_t value, int width) {
  std::string s = std::to_string(value);
  while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
  return s;
}

}  // namespace detail

inline SynthCorpus make_synthetic_corpus(const SynthParams& params, std::uint64_t seed) {
  if (params.videos == 0 || params.frames == 0 || params.dim == 0 || params.captions_per_scene == 0)
    raise(ErrorCode::InvalidArgument, "corpus sizes must be positive");
  if (params.scenes_min == 0 || params.scenes_min > params.scenes_max)
    raise(ErrorCode::InvalidArgument, "need 1 <= scenes_min <= scenes_max");
  if (params.scenes_max > params.dim)
    raise(ErrorCode::InvalidArgument, "scenes_max must not exceed dim (orthogonal directions)");
  if (params.frames < 2 * params.scenes_max)
    raise(ErrorCode::InvalidArgument, "frames must allow >= 2 frames per scene");

  SynthCorpus corpus;
  corpus.params = params;
  corpus.seed = seed;

  struct SceneDir {
    std::string video_id;
    std::size_t scene = 0;
    const std::vector<double>* dir = nullptr;
  };
  std::vector<std::vector<std::vector<double>>> all_dirs(params.videos);
  std::vector<SceneDir> flat_dirs;

  for (std::size_t v = 0; v < params.videos; ++v) {
    SplitMix64 rng(mix_seed(seed, 0x5eed0000ULL + v));
    const std::string video_id = "vid" + detail::zero_pad(v, 4);
    const std::size_t scenes =
        static_cast<std::size_t>(rng.uniform_int(params.scenes_min, params.scenes_max));

    all_dirs[v] = detail::orthonormal_directions(scenes, params.dim, rng);
    const std::vector<FrameRange> ranges = detail::random_scene_split(params.frames, scenes, rng);

    FrameFeatures f;
    f.video_id = video_id;
    f.duration_sec = static_cast<double>(params.frames);  // 1 fps frame grid
    f.dim = params.dim;
    f.fps_note = "synthetic 1fps";
    f.data.reserve(params.frames * params.dim);
    for (std::size_t s = 0; s < scenes; ++s) {
      for (std::size_t i = ranges[s].start; i <= ranges[s].end; ++i) {
        const std::vector<float> frame = detail::noisy_unit_vector(all_dirs[v][s], params.noise, rng);
        f.data.insert(f.data.end(), frame.begin(), frame.end());
      }
    }

    EventSet set;
    set.video_id = video_id;
    set.duration_sec = f.duration_sec;
    for (std::size_t s = 0; s < scenes; ++s) {
      Event e;
      e.start_sec = static_cast<double>(ranges[s].start - 1);
      e.end_sec = static_cast<double>(ranges[s].end);
      e.caption = "synthetic scene " + std::to_string(s + 1) + " of " + video_id;
      set.events.push_back(std::move(e));
    }

    corpus.features.push_back(std::move(f));
    corpus.annotations.push_back(std::move(set));
    corpus.planted.push_back(ranges);
    for (std::size_t s = 0; s < scenes; ++s)
      flat_dirs.push_back({video_id, s + 1, &all_dirs[v][s]});
  }

  // Caption store clustered around the planted scene directions. With
  // store_total set, entries cycle round-robin over the scene directions
  // until the requested count is reached.
  const std::size_t natural = flat_dirs.size() * params.captions_per_scene;
  const std::size_t total = params.store_total == 0 ? natural : params.store_total;
  SplitMix64 store_rng(mix_seed(seed, 0xca9710115ULL));
  corpus.store.dim = params.dim;
  corpus.store.embeddings.reserve(total * params.dim);
  for (std::size_t e = 0; e < total; ++e) {
    const SceneDir& sd = flat_dirs[e % flat_dirs.size()];
    const std::vector<float> emb = detail::noisy_unit_vector(*sd.dir, params.noise, store_rng);
    corpus.store.embeddings.insert(corpus.store.embeddings.end(), emb.begin(), emb.end());
    corpus.store.caption_ids.push_back("cap" + detail::zero_pad(e, 6));
    corpus.store.texts.push_back("synthetic caption for scene " + std::to_string(sd.scene) +
                                 " of " + sd.video_id);
  }
  corpus.store.norms.resize(total);
  for (std::size_t e = 0; e < total; ++e)
    corpus.store.norms[e] = l2_norm(corpus.store.embedding(e));
  return corpus;
}

/// Writes the corpus layout consumed by the CLI:
///   dir/features/<video_id>.sv4f (+ .json sidecars)
///   dir/annotations.jsonl
///   dir/store/embeddings.sv4f, dir/store/captions.jsonl
///   dir/corpus.json (generation parameters and planted boundaries)
inline void write_synthetic_corpus(const SynthCorpus& corpus, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir / "features", ec);
  fs::create_directories(dir / "store", ec);
  if (ec) raise(ErrorCode::IoFailure, "cannot create corpus directories under " + dir.string());

  for (const FrameFeatures& f : corpus.features)
    save_features(f, dir / "features" / (f.video_id + ".sv4f"));
  save_annotations(corpus.annotations, dir / "annotations.jsonl");
  save_datastore(corpus.store, dir / "store" / "embeddings.sv4f", dir / "store" / "captions.jsonl");

  nlohmann::ordered_json j;
  j["seed"] = corpus.seed;
  j["videos"] = corpus.params.videos;
  j["frames"] = corpus.params.frames;
  j["dim"] = corpus.params.dim;
  j["scenes_min"] = corpus.params.scenes_min;
  j["scenes_max"] = corpus.params.scenes_max;
  j["noise"] = corpus.params.noise;
  j["captions_per_scene"] = corpus.params.captions_per_scene;
  j["store_entries"] = corpus.store.size();
  nlohmann::ordered_json planted = nlohmann::ordered_json::array();
  for (std::size_t v = 0; v < corpus.features.size(); ++v) {
    nlohmann::ordered_json scenes = nlohmann::ordered_json::array();
    for (const FrameRange& r : corpus.planted[v])
      scenes.push_back({{"start", r.start}, {"end", r.end}});
    planted.push_back({{"video_id", corpus.features[v].video_id}, {"scenes", std::move(scenes)}});
  }
  j["planted"] = std::move(planted);

  std::ofstream out(dir / "corpus.json", std::ios::trunc);
  if (!out) raise(ErrorCode::IoFailure, "cannot write corpus.json");
  out << j.dump(2) << "\n";
  if (!out) raise(ErrorCode::IoFailure, "short write to corpus.json");
}

}  // namespace vidsal
