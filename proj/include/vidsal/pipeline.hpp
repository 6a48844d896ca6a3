#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "vidsal/digest.hpp"
#include "vidsal/feature_io.hpp"
#include "vidsal/localization.hpp"
#include "vidsal/retrieval.hpp"
#include "vidsal/saliency.hpp"
#include "vidsal/segmenter.hpp"

namespace vidsal {

struct PipelineConfig {
  std::filesystem::path features_dir;
  std::filesystem::path annotations_path;
  std::filesystem::path store_embeddings_path;
  std::filesystem::path store_captions_path;
  std::filesystem::path out_dir;

  double alpha = 10.0;
  double beta = 1.0;
  std::size_t k = 10;
  WeightDesign design = WeightDesign::SigmoidCenter;
  SegmentMode mode = SegmentMode::AdaptiveMomentum;
  SegmentRepr repr = SegmentRepr::MeanPool;
  double tau_fixed = 0.3;
  std::size_t window = 10;
  double subset_fraction = 1.0;
  std::vector<double> thresholds = default_iou_thresholds();
  std::uint64_t seed = 0;
  unsigned jobs = 0;  // 0 = hardware concurrency; never affects output bytes
};

struct FileDigest {
  std::string path;  // relative to out_dir for outputs
  std::string sha256;
};

struct StageRecord {
  std::string name;
  double wall_ms = 0.0;
  double per_video_ms = 0.0;
  std::vector<FileDigest> outputs;
};

struct RunManifest {
  nlohmann::ordered_json config;
  std::vector<FileDigest> inputs;
  std::vector<StageRecord> stages;
  std::uint64_t created_unix_ms = 0;
};

/// Error raised by a pipeline stage after inputs validated; carries the stage
/// name so callers can map it to the stage-failure exit code.
class StageError : public Error {
 public:
  StageError(std::string stage, const Error& inner)
      : Error(inner.code(), "[" + stage + "] " + inner.what()), stage_(std::move(stage)) {}

  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

/// Runs fn(0..n-1) across `jobs` workers. Results must be written to
/// per-index slots; the call order is unspecified but every index runs
/// exactly once, so output content is independent of scheduling.
template <typename Fn>
inline void parallel_for(std::size_t n, unsigned jobs, Fn&& fn) {
  if (n == 0) return;
  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  jobs = static_cast<unsigned>(std::min<std::size_t>(jobs, n));
  if (jobs <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }

  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> workers;
  workers.reserve(jobs);
  for (unsigned w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      for (;;) {
        if (failed.load(std::memory_order_relaxed)) return;
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
          failed.store(true);
          return;
        }
      }
    });
  }
  for (std::thread& t : workers) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

namespace detail {

inline double elapsed_ms(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

inline nlohmann::ordered_json pipeline_config_json(const PipelineConfig& c) {
  nlohmann::ordered_json j;
  j["alpha"] = c.alpha;
  j["beta"] = c.beta;
  j["k"] = c.k;
  j["design"] = to_string(c.design);
  j["mode"] = to_string(c.mode);
  j["repr"] = to_string(c.repr);
  j["tau_fixed"] = c.tau_fixed;
  j["window"] = c.window;
  j["subset_fraction"] = c.subset_fraction;
  j["thresholds"] = c.thresholds;
  j["seed"] = c.seed;
  return j;
}

}  // namespace detail

inline nlohmann::ordered_json manifest_to_json(const RunManifest& m) {
  nlohmann::ordered_json j;
  j["manifest_version"] = 1;
  j["created_unix_ms"] = m.created_unix_ms;
  j["config"] = m.config;
  nlohmann::ordered_json inputs = nlohmann::ordered_json::array();
  for (const FileDigest& d : m.inputs) inputs.push_back({{"path", d.path}, {"sha256", d.sha256}});
  j["inputs"] = std::move(inputs);
  nlohmann::ordered_json stages = nlohmann::ordered_json::array();
  for (const StageRecord& s : m.stages) {
    nlohmann::ordered_json outputs = nlohmann::ordered_json::array();
    for (const FileDigest& d : s.outputs) outputs.push_back({{"path", d.path}, {"sha256", d.sha256}});
    stages.push_back({{"name", s.name},
                      {"wall_ms", s.wall_ms},
                      {"per_video_ms", s.per_video_ms},
                      {"outputs", std::move(outputs)}});
  }
  j["stages"] = std::move(stages);
  return j;
}

inline void write_manifest(const RunManifest& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) raise(ErrorCode::IoFailure, "cannot write " + path.string());
  out << manifest_to_json(m).dump(2) << "\n";
  if (!out) raise(ErrorCode::IoFailure, "short write to " + path.string());
}

/// Executes reweight -> segment -> retrieve -> eval-loc on one corpus and
/// records every output digest. Reweighting transforms the frame features
/// (a training-side product); segmentation and retrieval run on the raw
/// features; the eval stage scores segment boundaries, mapped back to
/// seconds, against the annotations. Videos are processed concurrently
/// inside each stage without affecting any output byte.
inline RunManifest run_pipeline(const PipelineConfig& config) {
  namespace fs = std::filesystem;
  using clock = std::chrono::steady_clock;

  // Input phase: anything thrown here is an input/config error.
  const std::vector<EventSet> annotations = load_annotations(config.annotations_path);
  if (annotations.empty())
    raise(ErrorCode::MalformedRecord, config.annotations_path.string() + " lists no videos");
  const CaptionDatastore store = load_datastore(
      config.store_embeddings_path, config.store_captions_path, config.subset_fraction);

  std::vector<FrameFeatures> features;
  features.reserve(annotations.size());
  for (const EventSet& set : annotations) {
    const fs::path p = config.features_dir / (set.video_id + ".sv4f");
    FrameFeatures f = load_features(p, store.dim);
    f.video_id = set.video_id;
    f.duration_sec = set.duration_sec;  // annotations are authoritative for timing
    features.push_back(std::move(f));
  }
  const std::size_t n_videos = features.size();

  RunManifest manifest;
  manifest.created_unix_ms = static_cast<std::uint64_t>(
      std::chrono::duration_cast<std::chrono::milliseconds>(
          std::chrono::system_clock::now().time_since_epoch())
          .count());
  manifest.config = detail::pipeline_config_json(config);
  for (const fs::path& p : {config.annotations_path, config.store_embeddings_path,
                            config.store_captions_path}) {
    manifest.inputs.push_back({p.string(), sha256_hex_file(p)});
  }
  for (const EventSet& set : annotations) {
    const fs::path p = config.features_dir / (set.video_id + ".sv4f");
    manifest.inputs.push_back({p.string(), sha256_hex_file(p)});
  }

  std::error_code ec;
  fs::create_directories(config.out_dir, ec);
  if (ec) raise(ErrorCode::IoFailure, "cannot create " + config.out_dir.string());

  const auto record_output = [&](StageRecord& stage, const fs::path& rel) {
    stage.outputs.push_back({rel.generic_string(), sha256_hex_file(config.out_dir / rel)});
  };
  const auto run_stage = [&](const std::string& name, auto&& body) {
    StageRecord stage;
    stage.name = name;
    const auto t0 = clock::now();
    try {
      body(stage);
    } catch (const Error& e) {
      throw StageError(name, e);
    }
    stage.wall_ms = detail::elapsed_ms(t0);
    stage.per_video_ms = stage.wall_ms / static_cast<double>(n_videos);
    manifest.stages.push_back(std::move(stage));
  };

  // Stage 1: saliency reweighting.
  run_stage("reweight", [&](StageRecord& stage) {
    fs::create_directories(config.out_dir / "reweight");
    std::vector<WeightsRecord> records(n_videos);
    std::vector<FrameFeatures> weighted(n_videos);
    parallel_for(n_videos, config.jobs, [&](std::size_t v) {
      const ReweightConfig rc{config.alpha, config.design, config.seed};
      const SaliencyWeights w = compute_weights(features[v], annotations[v], rc);
      weighted[v] = apply_weights(features[v], w);
      records[v] = {features[v].video_id, to_string(config.design), config.alpha, config.seed,
                    w.weights};
    });
    save_weights(records, config.out_dir / "reweight" / "weights.jsonl");
    for (std::size_t v = 0; v < n_videos; ++v)
      save_features(weighted[v],
                    config.out_dir / "reweight" / (features[v].video_id + ".weighted.sv4f"));
    record_output(stage, fs::path("reweight") / "weights.jsonl");
    for (std::size_t v = 0; v < n_videos; ++v) {
      record_output(stage, fs::path("reweight") / (features[v].video_id + ".weighted.sv4f"));
      record_output(stage, fs::path("reweight") / (features[v].video_id + ".weighted.sv4f.json"));
    }
  });

  // Stage 2: adaptive segmentation on the raw features.
  std::vector<SegmentPartition> partitions(n_videos);
  run_stage("segment", [&](StageRecord& stage) {
    fs::create_directories(config.out_dir / "segment");
    const SegmenterConfig sc{config.mode, config.beta, config.tau_fixed, config.window};
    std::vector<SegmentRecord> records(n_videos);
    parallel_for(n_videos, config.jobs, [&](std::size_t v) {
      partitions[v] = segment(features[v], sc);
      records[v] = {features[v].video_id, to_string(config.mode),
                    segmentation_threshold(features[v], sc), partitions[v].segments};
    });
    save_segments(records, config.out_dir / "segment" / "segments.jsonl");
    for (std::size_t v = 0; v < n_videos; ++v) {
      std::vector<float> reps;
      reps.reserve(partitions[v].count() * features[v].dim);
      for (const std::vector<double>& z : partitions[v].representations)
        for (double x : z) reps.push_back(static_cast<float>(x));
      detail::write_sv4f(static_cast<std::uint32_t>(partitions[v].count()),
                         static_cast<std::uint32_t>(features[v].dim), reps,
                         config.out_dir / "segment" / (features[v].video_id + ".segreps.sv4f"));
    }
    record_output(stage, fs::path("segment") / "segments.jsonl");
    for (std::size_t v = 0; v < n_videos; ++v)
      record_output(stage, fs::path("segment") / (features[v].video_id + ".segreps.sv4f"));
  });

  // Stage 3: segment-level caption retrieval.
  run_stage("retrieve", [&](StageRecord& stage) {
    fs::create_directories(config.out_dir / "retrieve");
    const RetrievalConfig rc{config.k, config.repr};
    std::vector<RetrievalResult> results(n_videos);
    parallel_for(n_videos, config.jobs, [&](std::size_t v) {
      results[v] = retrieve_for_partition(features[v], partitions[v], store, rc);
    });
    std::ofstream rout(config.out_dir / "retrieve" / "retrieval.jsonl", std::ios::trunc);
    if (!rout) raise(ErrorCode::IoFailure, "cannot write retrieval.jsonl");
    for (std::size_t v = 0; v < n_videos; ++v) {
      write_retrieval_outputs(rout, features[v].video_id, results[v], store.dim,
                              config.out_dir / "retrieve" / (features[v].video_id + ".guidance.sv4f"));
    }
    rout.close();
    record_output(stage, fs::path("retrieve") / "retrieval.jsonl");
    for (std::size_t v = 0; v < n_videos; ++v)
      record_output(stage, fs::path("retrieve") / (features[v].video_id + ".guidance.sv4f"));
  });

  // Stage 4: localization evaluation of the segment boundaries.
  run_stage("eval-loc", [&](StageRecord& stage) {
    fs::create_directories(config.out_dir / "eval");
    std::vector<SegmentPrediction> preds(n_videos);
    for (std::size_t v = 0; v < n_videos; ++v) {
      preds[v].video_id = features[v].video_id;
      const double t = static_cast<double>(features[v].frame_count());
      const double d = features[v].duration_sec;
      for (const FrameRange& r : partitions[v].segments) {
        preds[v].predicted.push_back({static_cast<double>(r.start - 1) * d / t,
                                      static_cast<double>(r.end) * d / t});
      }
    }
    save_predictions(preds, config.out_dir / "eval" / "predictions.jsonl");
    const LocalizationReport report = evaluate(preds, annotations, config.thresholds);
    std::ofstream eout(config.out_dir / "eval" / "report.json", std::ios::trunc);
    if (!eout) raise(ErrorCode::IoFailure, "cannot write report.json");
    eout << report_to_json(report).dump(2) << "\n";
    eout.close();
    record_output(stage, fs::path("eval") / "predictions.jsonl");
    record_output(stage, fs::path("eval") / "report.json");
  });

  write_manifest(manifest, config.out_dir / "manifest.json");
  return manifest;
}

}  // namespace vidsal
