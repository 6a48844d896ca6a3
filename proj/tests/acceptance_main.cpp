// Acceptance suite: runs every release criterion at its pinned tolerance and
// prints one pass/fail line per criterion. Exit code is the failure count.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "test_util.hpp"
#include "vidsal/pipeline.hpp"
#include "vidsal/synthetic.hpp"

using namespace vidsal;

namespace {

struct Check {
  bool pass = true;
  std::string detail;

  void expect(bool ok, const std::string& why) {
    if (!ok && pass) {
      pass = false;
      detail = why;
    }
  }
  void note(const std::string& text) {
    if (pass) detail = text;
  }
};

oracle::Frames to_oracle_frames(const FrameFeatures& f) {
  oracle::Frames frames(f.frame_count());
  for (std::size_t i = 0; i < f.frame_count(); ++i) {
    std::span<const float> row = f.frame(i);
    frames[i].assign(row.begin(), row.end());
  }
  return frames;
}

oracle::Ranges to_pairs(const SegmentPartition& p) {
  oracle::Ranges out;
  for (const FrameRange& r : p.segments) out.emplace_back(r.start, r.end);
  return out;
}

EventSet make_events(double duration, const std::vector<std::pair<double, double>>& spans) {
  EventSet set;
  set.video_id = "vid";
  set.duration_sec = duration;
  for (auto [s, e] : spans) set.events.push_back({s, e, ""});
  return set;
}

// 1. Closed-form sigmoid values (Runtime < 1 s).
Check criterion_closed_form_weights() {
  Check c;
  FrameFeatures f = testutil::random_features(100, 4, 1);
  f.duration_sec = 100.0;
  const ReweightConfig cfg{10.0, WeightDesign::SigmoidCenter, 0};

  const EventSet full = make_events(100.0, {{0.0, 100.0}});
  const double w_mid = event_weight(f, full, 0, 50, cfg);
  const double sigma5_sq = logistic(5.0) * logistic(5.0);
  c.expect(std::abs(w_mid - 0.98661) <= 1e-4,
           "W(0.5) = " + std::to_string(w_mid) + ", expected 0.98661 within 1e-4");
  c.expect(std::abs(w_mid - sigma5_sq) <= 1e-12, "W(0.5) deviates from sigmoid(5)^2");

  const EventSet offset = make_events(100.0, {{25.0, 100.0}});
  const double w_boundary = event_weight(f, offset, 0, 25, cfg);
  const double expected = 0.5 * logistic(10.0 * 0.75);
  c.expect(std::abs(w_boundary - expected) <= 1e-9,
           "boundary weight " + std::to_string(w_boundary) + " vs 0.5 * right factor");
  c.note("W(0.5)=sigmoid(5)^2 within 1e-4 of 0.98661; boundary left factor 0.5 within 1e-9");
  return c;
}

// 2. Sharpness limit across 200 random event configurations (Runtime < 5 s).
Check criterion_sharpness_limit() {
  Check c;
  SplitMix64 rng(2024);
  int compared = 0;
  for (int rep = 0; rep < 200 && c.pass; ++rep) {
    const std::size_t t = 8 + rng.next() % 249;  // up to 256 frames
    FrameFeatures f = testutil::random_features(t, 2, rng.next());
    const double d = 10.0 + 200.0 * rng.uniform01();
    f.duration_sec = d;
    std::vector<std::pair<double, double>> spans;
    const std::size_t n = 1 + rng.next() % 3;
    for (std::size_t i = 0; i < n; ++i) {
      double a = d * rng.uniform01(), b = d * rng.uniform01();
      if (a > b) std::swap(a, b);
      if (b - a < 0.05 * d) b = std::min(d, a + 0.05 * d);
      spans.emplace_back(a, b);
    }
    const EventSet events = make_events(d, spans);
    const SaliencyWeights sharp =
        compute_weights(f, events, {1e4, WeightDesign::SigmoidCenter, 0});
    const SaliencyWeights binary =
        compute_weights(f, events, {1e4, WeightDesign::HardBinary, 0});
    const double margin = 1.0 / static_cast<double>(t);
    for (std::size_t i = 1; i <= t; ++i) {
      const double pos = static_cast<double>(i) / static_cast<double>(t);
      bool near = false;
      for (const Event& e : events.events) {
        if (std::abs(pos - e.start_sec / d) < margin || std::abs(pos - e.end_sec / d) < margin)
          near = true;
      }
      if (near) continue;
      ++compared;
      c.expect(std::abs(sharp.weights[i - 1] - binary.weights[i - 1]) <= 1e-3,
               "alpha=1e4 weight off binary mask by > 1e-3 at frame " + std::to_string(i));
    }
  }
  c.note("200 configs, " + std::to_string(compared) + " frames >= 1/T from boundaries, all within 1e-3");
  return c;
}

// 3. Oracle equivalence on 1000 random inputs, T <= 64, D <= 16 (Runtime < 30 s).
Check criterion_segmentation_oracle() {
  Check c;
  SplitMix64 rng(3033);
  for (int rep = 0; rep < 1000 && c.pass; ++rep) {
    const std::size_t t = 1 + rng.next() % 64;
    const std::size_t dim = 1 + rng.next() % 16;
    const FrameFeatures f = testutil::random_features(t, dim, rng.next());
    const double tau = rng.uniform(-0.1, 1.4);
    const oracle::Frames frames = to_oracle_frames(f);
    c.expect(to_pairs(segment_momentum(f, tau)) == oracle::momentum_segments(frames, tau),
             "momentum partition diverged from oracle at rep " + std::to_string(rep));
    c.expect(to_pairs(segment_framewise(f, tau)) == oracle::framewise_segments(frames, tau),
             "framewise partition diverged from oracle at rep " + std::to_string(rep));
  }
  c.note("1000 random inputs, exact partition equality for momentum and framewise");
  return c;
}

// 4. Hand-traced two-scene example (Runtime < 1 s).
Check criterion_hand_traced_segmentation() {
  Check c;
  const FrameFeatures f = testutil::basis_features({0, 0, 0, 1, 1, 1}, 4);
  const DifferenceProfile profile = frame_differences(f, 1.0);
  c.expect(std::abs(profile.mean - 0.2) <= 1e-12, "mu != 0.2");
  c.expect(std::abs(profile.stddev - 0.4) <= 1e-12, "sigma != 0.4");
  c.expect(std::abs(profile.tau_adaptive - 0.6) <= 1e-12, "tau_adap != 0.6");
  const SegmentPartition p = segment(f, {SegmentMode::AdaptiveMomentum, 1.0, 0.3, 10});
  c.expect(p.count() == 2 && p.segments[0] == FrameRange{1, 3} && p.segments[1] == FrameRange{4, 6},
           "partition is not [(1,3),(4,6)]");
  c.note("tau_adap = 0.6 at beta=1 and partition [(1,3),(4,6)]");
  return c;
}

// 5. Retrieval exactness vs full sort on 500 random stores (Runtime < 30 s).
Check criterion_retrieval_exactness() {
  Check c;
  SplitMix64 rng(5055);
  for (int rep = 0; rep < 500 && c.pass; ++rep) {
    const std::size_t n = 2 + rng.next() % 499;
    CaptionDatastore store = testutil::random_store(n, 16, rng.next());
    if (n >= 6) {
      // Duplicate rows to force score ties resolved by caption_id.
      for (std::size_t pair = 0; pair < 2; ++pair) {
        const std::size_t src = rng.next() % n;
        const std::size_t dst = rng.next() % n;
        for (std::size_t j = 0; j < 16; ++j)
          store.embeddings[dst * 16 + j] = store.embeddings[src * 16 + j];
        store.norms[dst] = store.norms[src];
      }
    }
    std::vector<double> q(16);
    for (double& x : q) x = rng.gauss();
    const std::size_t k = 1 + rng.next() % n;
    const auto hits = retrieve_topk(q, store, k);
    const auto expected = oracle::topk_full_sort(
        [&] {
          oracle::Frames rows(n);
          for (std::size_t r = 0; r < n; ++r) {
            std::span<const float> e = store.embedding(r);
            rows[r].assign(e.begin(), e.end());
          }
          return rows;
        }(),
        store.caption_ids, q, k);
    for (std::size_t i = 0; i < k && c.pass; ++i)
      c.expect(hits[i].index == expected[i],
               "rank " + std::to_string(i) + " differs from oracle at rep " + std::to_string(rep));
  }
  c.note("500 random stores and queries incl. duplicated-embedding ties, ids and order exact");
  return c;
}

// 6. Synthetic recovery across 200 seeded corpora (Runtime < 60 s).
Check criterion_synthetic_recovery() {
  Check c;
  SplitMix64 rng(6066);
  int exact = 0;
  const int corpora = 200;
  for (int rep = 0; rep < corpora; ++rep) {
    SynthParams params;
    params.videos = 1;
    params.frames = 60 + rng.next() % 61;
    params.dim = 32;
    params.scenes_min = 3;
    params.scenes_max = 8;
    params.noise = rng.uniform(0.01, 0.05);
    params.captions_per_scene = 1;
    const SynthCorpus corpus = make_synthetic_corpus(params, rng.next());
    const SegmentPartition p =
        segment(corpus.features[0], {SegmentMode::AdaptiveMomentum, 1.0, 0.3, 10});
    const std::vector<FrameRange>& planted = corpus.planted[0];
    if (p.count() != planted.size()) continue;
    ++exact;
    for (std::size_t m = 0; m + 1 < planted.size(); ++m) {
      const auto recovered = static_cast<long long>(p.segments[m].end);
      const auto truth = static_cast<long long>(planted[m].end);
      c.expect(std::llabs(recovered - truth) <= 1,
               "boundary off by > 1 frame in corpus " + std::to_string(rep));
    }
  }
  const double rate = static_cast<double>(exact) / corpora;
  c.expect(rate >= 0.95, "exact segment-count recovery rate " + std::to_string(rate) + " < 0.95");
  std::ostringstream os;
  os << "exact count recovery " << exact << "/" << corpora
     << ", matched boundaries within +-1 frame";
  c.note(os.str());
  return c;
}

// 7. Localization metric checks (Runtime < 10 s).
Check criterion_localization_metrics() {
  Check c;
  {
    const std::vector<EventSet> truth{make_events(100, {{0, 30}, {40, 90}})};
    std::vector<SegmentPrediction> preds(1);
    preds[0].video_id = "vid";
    preds[0].predicted = {{0, 30}, {40, 90}};
    const LocalizationReport r = evaluate(preds, truth);
    c.expect(r.avg_f1 == 1.0, "perfect predictions do not give avg F1 == 1.0");
  }
  {
    const std::vector<EventSet> truth{make_events(100, {{0, 100}})};
    std::vector<SegmentPrediction> preds(1);
    preds[0].video_id = "vid";
    preds[0].predicted = {{0, 50}};
    const LocalizationReport r = evaluate(preds, truth);
    c.expect(r.avg_f1 == 0.5, "half-overlap case does not give avg F1 == 0.5");
  }
  SplitMix64 rng(7077);
  for (int rep = 0; rep < 500 && c.pass; ++rep) {
    std::vector<EventSet> truth;
    std::vector<SegmentPrediction> preds;
    const std::size_t videos = 1 + rng.next() % 3;
    for (std::size_t v = 0; v < videos; ++v) {
      std::vector<std::pair<double, double>> spans;
      for (std::size_t i = 0, n = 1 + rng.next() % 5; i < n; ++i) {
        const double s = rng.uniform(0, 90);
        spans.emplace_back(s, s + rng.uniform(0.5, 10));
      }
      EventSet set = make_events(100, spans);
      set.video_id = "v" + std::to_string(v);
      truth.push_back(std::move(set));
      SegmentPrediction p;
      p.video_id = "v" + std::to_string(v);
      for (std::size_t i = 0, n = rng.next() % 5; i < n; ++i) {
        const double s = rng.uniform(0, 90);
        p.predicted.push_back({s, s + rng.uniform(0.5, 10)});
      }
      preds.push_back(std::move(p));
    }
    const LocalizationReport r = evaluate(preds, truth, {0.1, 0.3, 0.5, 0.7, 0.9});
    for (std::size_t i = 0; i + 1 < r.per_threshold.size(); ++i) {
      c.expect(r.per_threshold[i].precision >= r.per_threshold[i + 1].precision,
               "precision increased with threshold at rep " + std::to_string(rep));
      c.expect(r.per_threshold[i].recall >= r.per_threshold[i + 1].recall,
               "recall increased with threshold at rep " + std::to_string(rep));
    }
  }
  c.note("perfect case avg F1 = 1.0 exact, half-overlap avg F1 = 0.5 exact, monotone on 500 instances");
  return c;
}

// 8. Latency at paper scale: T=100, D=768, N_R=9600, k=10, 50 ms/video budgets.
Check criterion_latency_surface() {
  Check c;
  SynthParams params;
  params.videos = 8;
  params.frames = 100;
  params.dim = 768;
  params.scenes_min = 3;
  params.scenes_max = 8;
  params.noise = 0.03;
  params.captions_per_scene = 1;
  params.store_total = 9600;
  const SynthCorpus corpus = make_synthetic_corpus(params, 8088);
  const SegmenterConfig sc{SegmentMode::AdaptiveMomentum, 1.0, 0.3, 10};

  using clock = std::chrono::steady_clock;
  std::vector<double> seg_ms;
  std::vector<double> search_ms;
  std::size_t total_segments = 0;
  for (const FrameFeatures& f : corpus.features) {
    std::vector<double> reps;
    for (int r = 0; r < 5; ++r) {
      const auto t0 = clock::now();
      const SegmentPartition p = segment(f, sc);
      reps.push_back(std::chrono::duration<double, std::milli>(clock::now() - t0).count());
      if (r == 0) total_segments += p.count();
    }
    std::sort(reps.begin(), reps.end());
    seg_ms.push_back(reps[reps.size() / 2]);

    const SegmentPartition p = segment(f, sc);
    const SearchBenchStats stats =
        bench_search(corpus.store, segment_representation(f, p, SegmentRepr::MeanPool), 10, 5);
    search_ms.push_back(stats.per_video_ms);
  }
  std::sort(seg_ms.begin(), seg_ms.end());
  std::sort(search_ms.begin(), search_ms.end());
  const double seg_median = seg_ms[seg_ms.size() / 2];
  const double search_median = search_ms[search_ms.size() / 2];
  c.expect(seg_median < 50.0,
           "median per-video segmentation " + std::to_string(seg_median) + " ms >= 50 ms");
  c.expect(search_median < 50.0,
           "median per-video retrieval " + std::to_string(search_median) + " ms >= 50 ms");
  std::ostringstream os;
  os.precision(3);
  os << "median per-video: segment " << seg_median << " ms, search " << search_median
     << " ms (budget 50 ms; N_R=9600, D=768, T=100, M~"
     << (total_segments + corpus.features.size() / 2) / corpus.features.size() << ", k=10)";
  c.note(os.str());
  return c;
}

// 9. Bit-exact format round trips for 100 random tensors (Runtime < 10 s).
Check criterion_format_round_trip() {
  Check c;
  testutil::TempDir tmp;
  SplitMix64 rng(9099);
  for (int rep = 0; rep < 100 && c.pass; ++rep) {
    const std::size_t t = 1 + rng.next() % 50;
    const std::size_t dim = 1 + rng.next() % 64;
    FrameFeatures f = testutil::random_features(t, dim, rng.next(), "v" + std::to_string(rep));
    if (rng.uniform01() < 0.5) f.fps_note = "note " + std::to_string(rep);
    const auto fpath = tmp.path / "f.sv4f";
    save_features(f, fpath);
    const FrameFeatures f2 = load_features(fpath);
    c.expect(f2.data == f.data && f2.video_id == f.video_id &&
                 f2.duration_sec == f.duration_sec && f2.fps_note == f.fps_note,
             "feature round trip diverged at rep " + std::to_string(rep));

    const CaptionDatastore store = testutil::random_store(1 + rng.next() % 64, dim, rng.next());
    save_datastore(store, tmp.path / "e.sv4f", tmp.path / "c.jsonl");
    const CaptionDatastore s2 = load_datastore(tmp.path / "e.sv4f", tmp.path / "c.jsonl");
    c.expect(s2.embeddings == store.embeddings && s2.caption_ids == store.caption_ids &&
                 s2.texts == store.texts,
             "datastore round trip diverged at rep " + std::to_string(rep));
  }
  c.note("100 random feature files and datastores, payloads bit-exact after save/load");
  return c;
}

// 10. End-to-end determinism of the CLI pipeline, concurrency included.
Check criterion_pipeline_determinism() {
  Check c;
  testutil::TempDir tmp;
  const std::string cli = VIDSAL_CLI_PATH;
  const std::string corpus = (tmp.path / "corpus").string();

  const auto run = [&](const std::string& args) {
    const std::string cmd = cli + " " + args + " 2>/dev/null";
    return std::system(cmd.c_str());
  };
  c.expect(run("synth --out " + corpus +
               " --videos 6 --frames 50 --dim 24 --scenes-min 2 --scenes-max 5 --noise 0.03 "
               "--captions-per-scene 3 --seed 4242") == 0,
           "synth subcommand failed");

  const std::string common = " --features " + corpus + "/features --annotations " + corpus +
                             "/annotations.jsonl --store-embeddings " + corpus +
                             "/store/embeddings.sv4f --store-captions " + corpus +
                             "/store/captions.jsonl --k 5";
  const auto digests_of = [&](const std::string& dir) {
    std::ifstream in(dir + "/manifest.json");
    const auto manifest = nlohmann::json::parse(in);
    std::map<std::string, std::string> out;
    for (const auto& stage : manifest.at("stages"))
      for (const auto& o : stage.at("outputs"))
        out[o.at("path").get<std::string>()] = o.at("sha256").get<std::string>();
    return out;
  };

  const std::string run1 = (tmp.path / "run1").string();
  const std::string run2 = (tmp.path / "run2").string();
  const std::string run3 = (tmp.path / "run3").string();
  c.expect(run("pipeline" + common + " --jobs 1 --out " + run1) == 0, "pipeline run 1 failed");
  c.expect(run("pipeline" + common + " --jobs 1 --out " + run2) == 0, "pipeline run 2 failed");
  c.expect(run("pipeline" + common + " --jobs 4 --out " + run3) == 0, "pipeline run 3 failed");
  if (c.pass) {
    const auto d1 = digests_of(run1), d2 = digests_of(run2), d3 = digests_of(run3);
    c.expect(!d1.empty(), "manifest lists no outputs");
    c.expect(d1 == d2, "rerun changed at least one output digest");
    c.expect(d1 == d3, "concurrent execution changed at least one output digest");
    c.note("3 CLI runs (jobs 1,1,4): " + std::to_string(d1.size()) +
           " output digests identical across runs");
  }
  return c;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Check()> fn;
  };
  const std::vector<Criterion> criteria{
      {"closed-form weight check", criterion_closed_form_weights},
      {"sharpness-limit suite", criterion_sharpness_limit},
      {"segmentation oracle equivalence", criterion_segmentation_oracle},
      {"hand-traced segmentation", criterion_hand_traced_segmentation},
      {"retrieval exactness", criterion_retrieval_exactness},
      {"synthetic recovery", criterion_synthetic_recovery},
      {"localization metric checks", criterion_localization_metrics},
      {"latency surface", criterion_latency_surface},
      {"format round-trip", criterion_format_round_trip},
      {"pipeline determinism", criterion_pipeline_determinism},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Check result;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      result = criteria[i].fn();
    } catch (const std::exception& e) {
      result.pass = false;
      result.detail = std::string("exception: ") + e.what();
    }
    const double sec =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("[%s] criterion %zu: %s - %s (%.2fs)\n", result.pass ? "PASS" : "FAIL", i + 1,
                criteria[i].name, result.detail.c_str(), sec);
    std::fflush(stdout);
    if (!result.pass) ++failures;
  }
  if (failures == 0) {
    std::printf("all %zu acceptance criteria passed\n", criteria.size());
  } else {
    std::printf("%d of %zu acceptance criteria FAILED\n", failures, criteria.size());
  }
  return failures;
}
