// Command-line front end: reweight / segment / retrieve / eval-loc / bench /
// synth / pipeline. Data goes to the declared output paths; logs go to
// stderr. Exit codes: 0 success, 2 input or config error, 3 stage failure.

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "vidsal/pipeline.hpp"
#include "vidsal/synthetic.hpp"

namespace fs = std::filesystem;
using namespace vidsal;

namespace {

const std::map<std::string, WeightDesign> kDesignNames{
    {"sigmoid", WeightDesign::SigmoidCenter}, {"binary", WeightDesign::HardBinary},
    {"gaussian", WeightDesign::Gaussian},     {"start", WeightDesign::StartSkew},
    {"end", WeightDesign::EndSkew},           {"random", WeightDesign::RandomSkew}};

const std::map<std::string, SegmentMode> kModeNames{
    {"adaptive-mmt", SegmentMode::AdaptiveMomentum},
    {"adaptive", SegmentMode::AdaptiveFramewise},
    {"fixed-mmt", SegmentMode::FixedMomentum},
    {"fixed", SegmentMode::FixedFramewise},
    {"window", SegmentMode::FixedWindow}};

const std::map<std::string, SegmentRepr> kReprNames{{"mean", SegmentRepr::MeanPool},
                                                    {"max", SegmentRepr::MaxPool},
                                                    {"keyframe", SegmentRepr::KeyFrame}};

double elapsed_ms(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

// --features accepts either a directory of <video_id>.sv4f files or a single
// tensor file.
std::vector<fs::path> list_feature_files(const fs::path& features) {
  if (fs::is_directory(features)) {
    std::vector<fs::path> out;
    for (const auto& entry : fs::directory_iterator(features)) {
      if (entry.is_regular_file() && entry.path().extension() == ".sv4f")
        out.push_back(entry.path());
    }
    std::sort(out.begin(), out.end());
    if (out.empty())
      raise(ErrorCode::InvalidArgument, "no .sv4f files under " + features.string());
    return out;
  }
  if (fs::is_regular_file(features)) return {features};
  raise(ErrorCode::IoFailure, features.string() + " is neither a file nor a directory");
}

FrameFeatures load_video_features(const fs::path& features, const std::string& video_id,
                                  std::size_t expected_dim = 0) {
  if (fs::is_directory(features))
    return load_features(features / (video_id + ".sv4f"), expected_dim);
  FrameFeatures f = load_features(features, expected_dim);
  if (f.video_id != video_id)
    raise(ErrorCode::UnknownVideo,
          "feature file holds " + f.video_id + " but " + video_id + " was requested");
  return f;
}

template <typename Fn>
void run_as_stage(const std::string& name, Fn&& fn) {
  try {
    fn();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(name, e);
  }
}

struct VideoTiming {
  std::string video_id;
  double wall_ms = 0.0;
};

void write_timing(const std::string& stage, const std::vector<VideoTiming>& per_video,
                  const fs::path& path) {
  nlohmann::ordered_json j;
  j["stage"] = stage;
  j["videos"] = per_video.size();
  double total = 0.0;
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const VideoTiming& t : per_video) {
    rows.push_back({{"video_id", t.video_id}, {"wall_ms", t.wall_ms}});
    total += t.wall_ms;
  }
  j["wall_ms_total"] = total;
  j["wall_ms_per_video"] = per_video.empty() ? 0.0 : total / static_cast<double>(per_video.size());
  j["per_video"] = std::move(rows);
  std::ofstream out(path, std::ios::trunc);
  if (!out) raise(ErrorCode::IoFailure, "cannot write " + path.string());
  out << j.dump(2) << "\n";
}

void emit_json(const nlohmann::ordered_json& j, const fs::path& out_path) {
  if (out_path.empty()) {
    std::cout << j.dump(2) << "\n";
    return;
  }
  std::ofstream out(out_path, std::ios::trunc);
  if (!out) raise(ErrorCode::IoFailure, "cannot write " + out_path.string());
  out << j.dump(2) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"saliency-aware video segmentation and caption retrieval toolkit"};
  app.require_subcommand(1);
  app.set_config("--config", "", "config file with flag-equivalent keys (TOML-style sections per subcommand)");

  // ---- reweight ----
  struct {
    fs::path features, annotations, out;
    std::string design = "sigmoid";
    double alpha = 10.0;
    std::uint64_t seed = 0;
    bool timing = false;
  } rw;
  {
    auto* cmd = app.add_subcommand("reweight", "timestamp-driven frame importance weights");
    cmd->add_option("--features", rw.features, "feature directory or single .sv4f file")->required();
    cmd->add_option("--annotations", rw.annotations, "annotation JSONL")->required();
    cmd->add_option("--design", rw.design, "sigmoid|binary|gaussian|start|end|random")
        ->check(CLI::IsMember(kDesignNames, CLI::ignore_case));
    cmd->add_option("--alpha", rw.alpha, "sigmoid sharpness");
    cmd->add_option("--seed", rw.seed, "rng seed (random design)");
    cmd->add_option("--out", rw.out, "output directory")->required();
    cmd->add_flag("--timing", rw.timing, "write per-video timing.json");
    cmd->callback([&] {
      const std::vector<EventSet> annotations = load_annotations(rw.annotations);
      std::vector<FrameFeatures> features;
      features.reserve(annotations.size());
      for (const EventSet& set : annotations) {
        FrameFeatures f = load_video_features(rw.features, set.video_id);
        f.duration_sec = set.duration_sec;
        features.push_back(std::move(f));
      }
      const ReweightConfig rc{rw.alpha, kDesignNames.at(rw.design), rw.seed};

      run_as_stage("reweight", [&] {
        fs::create_directories(rw.out);
        std::vector<WeightsRecord> records(features.size());
        std::vector<VideoTiming> timings(features.size());
        for (std::size_t v = 0; v < features.size(); ++v) {
          const auto t0 = std::chrono::steady_clock::now();
          const SaliencyWeights w = compute_weights(features[v], annotations[v], rc);
          const FrameFeatures weighted = apply_weights(features[v], w);
          timings[v] = {features[v].video_id, elapsed_ms(t0)};
          records[v] = {features[v].video_id, to_string(rc.design), rc.alpha, rc.rng_seed,
                        w.weights};
          save_features(weighted, rw.out / (features[v].video_id + ".weighted.sv4f"));
        }
        save_weights(records, rw.out / "weights.jsonl");
        if (rw.timing) write_timing("reweight", timings, rw.out / "timing.json");
        std::cerr << "reweight: " << features.size() << " videos -> " << rw.out << "\n";
      });
    });
  }

  // ---- segment ----
  struct {
    fs::path features, out;
    std::string mode = "adaptive-mmt";
    double beta = 1.0;
    double tau = 0.3;
    std::size_t window = 10;
    bool timing = false;
  } sg;
  {
    auto* cmd = app.add_subcommand("segment", "partition frame sequences at semantic transitions");
    cmd->add_option("--features", sg.features, "feature directory or single .sv4f file")->required();
    cmd->add_option("--mode", sg.mode, "adaptive-mmt|adaptive|fixed-mmt|fixed|window")
        ->check(CLI::IsMember(kModeNames, CLI::ignore_case));
    cmd->add_option("--beta", sg.beta, "adaptive threshold scaling");
    cmd->add_option("--tau", sg.tau, "fixed threshold");
    cmd->add_option("--window", sg.window, "fixed window size");
    cmd->add_option("--out", sg.out, "output directory")->required();
    cmd->add_flag("--timing", sg.timing, "write per-video timing.json");
    cmd->callback([&] {
      const std::vector<fs::path> paths = list_feature_files(sg.features);
      std::vector<FrameFeatures> features;
      features.reserve(paths.size());
      for (const fs::path& p : paths) features.push_back(load_features(p));
      const SegmenterConfig sc{kModeNames.at(sg.mode), sg.beta, sg.tau, sg.window};

      run_as_stage("segment", [&] {
        fs::create_directories(sg.out);
        std::vector<SegmentRecord> records(features.size());
        std::vector<VideoTiming> timings(features.size());
        for (std::size_t v = 0; v < features.size(); ++v) {
          const auto t0 = std::chrono::steady_clock::now();
          const SegmentPartition partition = segment(features[v], sc);
          timings[v] = {features[v].video_id, elapsed_ms(t0)};
          records[v] = {features[v].video_id, to_string(sc.mode),
                        segmentation_threshold(features[v], sc), partition.segments};
          std::vector<float> reps;
          reps.reserve(partition.count() * features[v].dim);
          for (const std::vector<double>& z : partition.representations)
            for (double x : z) reps.push_back(static_cast<float>(x));
          detail::write_sv4f(static_cast<std::uint32_t>(partition.count()),
                             static_cast<std::uint32_t>(features[v].dim), reps,
                             sg.out / (features[v].video_id + ".segreps.sv4f"));
        }
        save_segments(records, sg.out / "segments.jsonl");
        if (sg.timing) write_timing("segment", timings, sg.out / "timing.json");
        std::cerr << "segment: " << features.size() << " videos -> " << sg.out << "\n";
      });
    });
  }

  // ---- retrieve ----
  struct {
    fs::path features, segments, store_embeddings, store_captions, out;
    std::size_t k = 10;
    std::string repr = "mean";
    double subset_fraction = 1.0;
    bool timing = false;
  } rt;
  {
    auto* cmd = app.add_subcommand("retrieve", "top-k caption retrieval per segment");
    cmd->add_option("--features", rt.features, "feature directory or single .sv4f file")->required();
    cmd->add_option("--segments", rt.segments, "segments JSONL")->required();
    cmd->add_option("--store-embeddings", rt.store_embeddings, "datastore embedding .sv4f")->required();
    cmd->add_option("--store-captions", rt.store_captions, "datastore caption JSONL")->required();
    cmd->add_option("--k", rt.k, "captions per segment");
    cmd->add_option("--repr", rt.repr, "mean|max|keyframe")
        ->check(CLI::IsMember(kReprNames, CLI::ignore_case));
    cmd->add_option("--subset-fraction", rt.subset_fraction,
                    "use only the first ceil(fraction*N) datastore entries");
    cmd->add_option("--out", rt.out, "output directory")->required();
    cmd->add_flag("--timing", rt.timing, "write per-video timing.json");
    cmd->callback([&] {
      const std::vector<SegmentRecord> records = load_segments(rt.segments);
      if (records.empty()) raise(ErrorCode::MalformedRecord, "segments file lists no videos");
      const CaptionDatastore store =
          load_datastore(rt.store_embeddings, rt.store_captions, rt.subset_fraction);
      std::vector<FrameFeatures> features;
      features.reserve(records.size());
      for (const SegmentRecord& rec : records) {
        FrameFeatures f = load_video_features(rt.features, rec.video_id, store.dim);
        validate_partition_ranges(rec.segments, f.frame_count());
        features.push_back(std::move(f));
      }
      const RetrievalConfig rc{rt.k, kReprNames.at(rt.repr)};

      run_as_stage("retrieve", [&] {
        fs::create_directories(rt.out);
        std::ofstream jsonl(rt.out / "retrieval.jsonl", std::ios::trunc);
        if (!jsonl) raise(ErrorCode::IoFailure, "cannot write retrieval.jsonl");
        std::vector<VideoTiming> timings(records.size());
        for (std::size_t v = 0; v < records.size(); ++v) {
          SegmentPartition partition;
          partition.segments = records[v].segments;
          const auto t0 = std::chrono::steady_clock::now();
          const RetrievalResult result = retrieve_for_partition(features[v], partition, store, rc);
          timings[v] = {records[v].video_id, elapsed_ms(t0)};
          write_retrieval_outputs(jsonl, records[v].video_id, result, store.dim,
                                  rt.out / (records[v].video_id + ".guidance.sv4f"));
        }
        if (rt.timing) write_timing("retrieve", timings, rt.out / "timing.json");
        std::cerr << "retrieve: " << records.size() << " videos, k=" << rt.k << " -> " << rt.out
                  << "\n";
      });
    });
  }

  // ---- eval-loc ----
  struct {
    fs::path pred, truth, out;
    std::vector<double> thresholds = default_iou_thresholds();
    bool timing = false;
  } ev;
  {
    auto* cmd = app.add_subcommand("eval-loc", "localization precision/recall/F1 over IoU thresholds");
    cmd->add_option("--pred", ev.pred, "prediction JSONL")->required();
    cmd->add_option("--truth", ev.truth, "annotation JSONL")->required();
    cmd->add_option("--thresholds", ev.thresholds, "IoU thresholds")->delimiter(',');
    cmd->add_option("--out", ev.out, "report path (default: stdout)");
    cmd->add_flag("--timing", ev.timing, "include wall_ms in the report");
    cmd->callback([&] {
      // Bad predictions, truth, or thresholds are all input errors (exit 2).
      const std::vector<SegmentPrediction> preds = load_predictions(ev.pred);
      const std::vector<EventSet> truth = load_annotations(ev.truth);
      const auto t0 = std::chrono::steady_clock::now();
      const LocalizationReport report = evaluate(preds, truth, ev.thresholds);
      nlohmann::ordered_json j = report_to_json(report);
      if (ev.timing) j["wall_ms"] = elapsed_ms(t0);
      emit_json(j, ev.out);
    });
  }

  // ---- bench ----
  struct {
    fs::path store_embeddings, store_captions, queries, out;
    std::size_t k = 10;
    std::size_t repeats = 3;
    double subset_fraction = 1.0;
  } bn;
  {
    auto* cmd = app.add_subcommand("bench", "exhaustive-search latency for a query batch");
    cmd->add_option("--store-embeddings", bn.store_embeddings, "datastore embedding .sv4f")->required();
    cmd->add_option("--store-captions", bn.store_captions, "datastore caption JSONL")->required();
    cmd->add_option("--queries", bn.queries, "query tensor .sv4f (one video's segment queries)")->required();
    cmd->add_option("--k", bn.k, "captions per query");
    cmd->add_option("--repeats", bn.repeats, "benchmark passes over the batch");
    cmd->add_option("--subset-fraction", bn.subset_fraction,
                    "use only the first ceil(fraction*N) datastore entries");
    cmd->add_option("--out", bn.out, "timing JSON path (default: stdout)");
    cmd->callback([&] {
      const CaptionDatastore store =
          load_datastore(bn.store_embeddings, bn.store_captions, bn.subset_fraction);
      const detail::Sv4fTensor q = detail::read_sv4f(bn.queries);
      if (q.cols != store.dim)
        raise(ErrorCode::DimensionMismatch, "query dimension " + std::to_string(q.cols) +
                                                " vs datastore " + std::to_string(store.dim));
      std::vector<std::vector<double>> queries(q.rows);
      for (std::uint32_t r = 0; r < q.rows; ++r) {
        queries[r].assign(q.data.begin() + static_cast<std::ptrdiff_t>(r) * q.cols,
                          q.data.begin() + static_cast<std::ptrdiff_t>(r + 1) * q.cols);
      }
      const SearchBenchStats stats = bench_search(store, queries, bn.k, bn.repeats);
      nlohmann::ordered_json j;
      j["datastore_entries"] = store.size();
      j["dim"] = store.dim;
      j["queries"] = stats.queries;
      j["k"] = bn.k;
      j["repeats"] = stats.repeats;
      j["mean_ms"] = stats.mean_ms;
      j["median_ms"] = stats.median_ms;
      j["p95_ms"] = stats.p95_ms;
      j["per_video_ms"] = stats.per_video_ms;
      emit_json(j, bn.out);
    });
  }

  // ---- synth ----
  struct {
    fs::path out;
    SynthParams params;
    std::uint64_t seed = 0;
  } sy;
  {
    auto* cmd = app.add_subcommand("synth", "seeded synthetic corpus with planted scenes");
    cmd->add_option("--out", sy.out, "corpus directory")->required();
    cmd->add_option("--videos", sy.params.videos, "number of videos");
    cmd->add_option("--frames", sy.params.frames, "frames per video (T)");
    cmd->add_option("--dim", sy.params.dim, "feature dimension (D)");
    cmd->add_option("--scenes-min", sy.params.scenes_min, "minimum planted scenes");
    cmd->add_option("--scenes-max", sy.params.scenes_max, "maximum planted scenes");
    cmd->add_option("--noise", sy.params.noise, "perturbation magnitude");
    cmd->add_option("--captions-per-scene", sy.params.captions_per_scene, "datastore captions per scene");
    cmd->add_option("--store-total", sy.params.store_total, "force exact datastore entry count");
    cmd->add_option("--seed", sy.seed, "rng seed");
    cmd->callback([&] {
      const SynthCorpus corpus = make_synthetic_corpus(sy.params, sy.seed);
      run_as_stage("synth", [&] {
        write_synthetic_corpus(corpus, sy.out);
        std::cerr << "synth: " << corpus.features.size() << " videos, store "
                  << corpus.store.size() << " entries -> " << sy.out << "\n";
      });
    });
  }

  // ---- pipeline ----
  PipelineConfig pc;
  struct {
    std::string design = "sigmoid", mode = "adaptive-mmt", repr = "mean";
  } pnames;
  {
    auto* cmd = app.add_subcommand("pipeline", "reweight -> segment -> retrieve -> eval-loc with manifest");
    cmd->add_option("--features", pc.features_dir, "feature directory")->required();
    cmd->add_option("--annotations", pc.annotations_path, "annotation JSONL")->required();
    cmd->add_option("--store-embeddings", pc.store_embeddings_path, "datastore embedding .sv4f")->required();
    cmd->add_option("--store-captions", pc.store_captions_path, "datastore caption JSONL")->required();
    cmd->add_option("--out", pc.out_dir, "output directory")->required();
    cmd->add_option("--alpha", pc.alpha, "sigmoid sharpness");
    cmd->add_option("--beta", pc.beta, "adaptive threshold scaling");
    cmd->add_option("--k", pc.k, "captions per segment");
    cmd->add_option("--design", pnames.design, "sigmoid|binary|gaussian|start|end|random")
        ->check(CLI::IsMember(kDesignNames, CLI::ignore_case));
    cmd->add_option("--mode", pnames.mode, "adaptive-mmt|adaptive|fixed-mmt|fixed|window")
        ->check(CLI::IsMember(kModeNames, CLI::ignore_case));
    cmd->add_option("--repr", pnames.repr, "mean|max|keyframe")
        ->check(CLI::IsMember(kReprNames, CLI::ignore_case));
    cmd->add_option("--tau", pc.tau_fixed, "fixed threshold");
    cmd->add_option("--window", pc.window, "fixed window size");
    cmd->add_option("--subset-fraction", pc.subset_fraction,
                    "use only the first ceil(fraction*N) datastore entries");
    cmd->add_option("--thresholds", pc.thresholds, "IoU thresholds")->delimiter(',');
    cmd->add_option("--seed", pc.seed, "rng seed");
    cmd->add_option("--jobs", pc.jobs, "concurrent videos per stage (0 = hardware)");
    cmd->callback([&] {
      pc.design = kDesignNames.at(pnames.design);
      pc.mode = kModeNames.at(pnames.mode);
      pc.repr = kReprNames.at(pnames.repr);
      const RunManifest manifest = run_pipeline(pc);
      std::cerr << "pipeline: " << manifest.stages.size() << " stages -> "
                << (pc.out_dir / "manifest.json") << "\n";
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  } catch (const StageError& e) {
    nlohmann::ordered_json j;
    j["error"] = {{"stage", e.stage()}, {"code", to_string(e.code())}, {"message", e.what()}};
    std::cerr << j.dump() << "\n";
    return 3;
  } catch (const Error& e) {
    nlohmann::ordered_json j;
    j["error"] = {{"code", to_string(e.code())}, {"message", e.what()}};
    std::cerr << j.dump() << "\n";
    return 2;
  } catch (const std::exception& e) {
    nlohmann::ordered_json j;
    j["error"] = {{"code", "Unhandled"}, {"message", e.what()}};
    std::cerr << j.dump() << "\n";
    return 3;
  }
  return 0;
}
