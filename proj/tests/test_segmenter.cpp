#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "oracles.hpp"
#include "test_util.hpp"
#include "vidsal/segmenter.hpp"

using namespace vidsal;
using Catch::Approx;

namespace {

// [e1,e1,e1,e2,e2,e2]: diffs [0,0,1,0,0], mu 0.2, sigma 0.4, tau(beta=1) 0.6.
FrameFeatures two_scene_basis() { return testutil::basis_features({0, 0, 0, 1, 1, 1}, 4); }

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

}  // namespace

TEST_CASE("frame differences and the adaptive threshold", "[segmenter]") {
  SECTION("identical frames give a zero profile") {
    const FrameFeatures f = testutil::basis_features({2, 2, 2, 2}, 4);
    const DifferenceProfile p = frame_differences(f);
    for (double d : p.diffs) CHECK(d == 0.0);
    CHECK(p.mean == 0.0);
    CHECK(p.stddev == 0.0);
    CHECK(p.tau_adaptive == 0.0);
  }
  SECTION("orthogonal neighbours give unit differences") {
    const FrameFeatures f = testutil::basis_features({0, 1, 0, 1}, 4);
    const DifferenceProfile p = frame_differences(f);
    for (double d : p.diffs) CHECK(d == 1.0);
  }
  SECTION("hand-computed profile of the two-scene sequence") {
    const DifferenceProfile p = frame_differences(two_scene_basis(), 1.0);
    REQUIRE(p.diffs.size() == 5);
    CHECK(p.diffs == std::vector<double>{0, 0, 1, 0, 0});
    CHECK(p.mean == Approx(0.2).margin(1e-12));
    CHECK(p.stddev == Approx(0.4).margin(1e-12));  // population std over 5 diffs
    CHECK(p.tau_adaptive == Approx(0.6).margin(1e-12));
  }
  SECTION("single frame is too short") {
    const FrameFeatures f = testutil::basis_features({0}, 4);
    CHECK(testutil::throws_code([&] { frame_differences(f); }, ErrorCode::TooShort));
  }
}

TEST_CASE("momentum segmentation", "[segmenter]") {
  SECTION("threshold above the maximum difference keeps one segment") {
    const FrameFeatures f = testutil::random_features(12, 6, 1);
    const SegmentPartition p = segment_momentum(f, 2.1);
    REQUIRE(p.count() == 1);
    CHECK(p.segments[0] == FrameRange{1, 12});
  }
  SECTION("negative threshold splits distinct frames into singletons") {
    const FrameFeatures f = testutil::random_features(9, 6, 2);
    const SegmentPartition p = segment_momentum(f, -0.1);
    REQUIRE(p.count() == 9);
    for (std::size_t m = 0; m < 9; ++m) CHECK(p.segments[m] == FrameRange{m + 1, m + 1});
  }
  SECTION("hand trace of the two-scene sequence at threshold 0.6") {
    const SegmentPartition p = segment_momentum(two_scene_basis(), 0.6);
    REQUIRE(p.count() == 2);
    CHECK(p.segments[0] == FrameRange{1, 3});
    CHECK(p.segments[1] == FrameRange{4, 6});
    CHECK(p.representations[0][0] == 1.0);  // exactly e1
    CHECK(p.representations[1][1] == 1.0);  // exactly e2
  }
  SECTION("a difference exactly equal to the threshold does not split") {
    const FrameFeatures f = testutil::basis_features({0, 1}, 4);  // D' = 1 exactly
    CHECK(segment_momentum(f, 1.0).count() == 1);
    CHECK(segment_momentum(f, 0.999).count() == 2);
  }
  SECTION("single frame is a single segment") {
    const FrameFeatures f = testutil::basis_features({3}, 4);
    const SegmentPartition p = segment_momentum(f, 0.5);
    REQUIRE(p.count() == 1);
    CHECK(p.segments[0] == FrameRange{1, 1});
  }
}

TEST_CASE("running mean matches a direct recomputation at every step",
          "[segmenter][property]") {
  for (int rep = 0; rep < 10; ++rep) {
    const FrameFeatures f = testutil::random_features(32, 8, 40 + rep);
    std::vector<MomentumStep> trace;
    segment_momentum(f, 0.21, &trace);
    std::size_t seg_start = 1;
    for (const MomentumStep& step : trace) {
      if (step.boundary) {
        seg_start = step.frame;
        continue;
      }
      // Direct mean over seg_start..step.frame.
      std::vector<double> mean(f.dim, 0.0);
      for (std::size_t i = seg_start; i <= step.frame; ++i) {
        std::span<const float> row = f.frame(i - 1);
        for (std::size_t j = 0; j < f.dim; ++j) mean[j] += static_cast<double>(row[j]);
      }
      for (double& x : mean) x /= static_cast<double>(step.frame - seg_start + 1);
      for (std::size_t j = 0; j < f.dim; ++j)
        REQUIRE(std::abs(step.running_mean[j] - mean[j]) <= 1e-9);
    }
  }
}

TEST_CASE("framewise segmentation", "[segmenter]") {
  SECTION("no exceedance keeps one segment") {
    const FrameFeatures f = testutil::basis_features({1, 1, 1, 1, 1}, 4);
    CHECK(segment_framewise(f, 0.5).count() == 1);
  }
  SECTION("two-scene sequence splits at the transition") {
    const SegmentPartition p = segment_framewise(two_scene_basis(), 0.6);
    REQUIRE(p.count() == 2);
    CHECK(p.segments[0] == FrameRange{1, 3});
    CHECK(p.segments[1] == FrameRange{4, 6});
  }
  SECTION("alternating frames over-segment into singletons") {
    const FrameFeatures f = testutil::basis_features({0, 1, 0, 1, 0, 1}, 4);
    const SegmentPartition p = segment_framewise(f, 0.5);
    CHECK(p.count() == f.frame_count());
  }
}

TEST_CASE("fixed-window segmentation", "[segmenter]") {
  SECTION("T=100 window=10 gives ten equal chunks") {
    const FrameFeatures f = testutil::random_features(100, 4, 50);
    const SegmentPartition p = segment_fixed_window(f, 10);
    REQUIRE(p.count() == 10);
    for (std::size_t m = 0; m < 10; ++m) CHECK(p.segments[m].length() == 10);
  }
  SECTION("window at least T gives one segment") {
    const FrameFeatures f = testutil::random_features(7, 4, 51);
    CHECK(segment_fixed_window(f, 7).count() == 1);
    CHECK(segment_fixed_window(f, 100).count() == 1);
  }
  SECTION("remainder goes to a short final chunk") {
    const FrameFeatures f = testutil::random_features(25, 4, 52);
    const SegmentPartition p = segment_fixed_window(f, 10);
    REQUIRE(p.count() == 3);
    CHECK(p.segments[2].length() == 5);
  }
  SECTION("zero window is invalid") {
    const FrameFeatures f = testutil::random_features(5, 4, 53);
    CHECK(testutil::throws_code([&] { segment_fixed_window(f, 0); }, ErrorCode::InvalidArgument));
  }
}

TEST_CASE("segment dispatches per mode", "[segmenter]") {
  SECTION("adaptive momentum on the hand-traced case") {
    const SegmentPartition p =
        segment(two_scene_basis(), {SegmentMode::AdaptiveMomentum, 1.0, 0.3, 10});
    REQUIRE(p.count() == 2);
    CHECK(p.segments[0] == FrameRange{1, 3});
  }
  SECTION("window mode equals segment_fixed_window") {
    const FrameFeatures f = testutil::random_features(34, 4, 60);
    const SegmentPartition a = segment(f, {SegmentMode::FixedWindow, 1.0, 0.3, 10});
    const SegmentPartition b = segment_fixed_window(f, 10);
    CHECK(to_pairs(a) == to_pairs(b));
  }
  SECTION("huge beta collapses any non-constant sequence to one segment") {
    const FrameFeatures f = testutil::random_features(40, 8, 61);
    const SegmentPartition p = segment(f, {SegmentMode::AdaptiveMomentum, 1e6, 0.3, 10});
    CHECK(p.count() == 1);
  }
  SECTION("T=1 adaptive raises TooShort, fixed modes return a singleton") {
    const FrameFeatures f = testutil::basis_features({0}, 4);
    CHECK(testutil::throws_code(
        [&] { segment(f, {SegmentMode::AdaptiveMomentum, 1.0, 0.3, 10}); }, ErrorCode::TooShort));
    CHECK(testutil::throws_code(
        [&] { segment(f, {SegmentMode::AdaptiveFramewise, 1.0, 0.3, 10}); }, ErrorCode::TooShort));
    CHECK(segment(f, {SegmentMode::FixedMomentum, 1.0, 0.3, 10}).count() == 1);
    CHECK(segment(f, {SegmentMode::FixedFramewise, 1.0, 0.3, 10}).count() == 1);
    CHECK(segment(f, {SegmentMode::FixedWindow, 1.0, 0.3, 10}).count() == 1);
  }
}

TEST_CASE("every mode yields an ordered exact cover of 1..T", "[segmenter][property]") {
  const SegmentMode modes[] = {SegmentMode::AdaptiveMomentum, SegmentMode::AdaptiveFramewise,
                               SegmentMode::FixedMomentum, SegmentMode::FixedFramewise,
                               SegmentMode::FixedWindow};
  SplitMix64 rng(70);
  for (int rep = 0; rep < 25; ++rep) {
    const std::size_t t = 2 + rng.next() % 50;
    const FrameFeatures f = testutil::random_features(t, 6, rng.next());
    const SegmenterConfig cfg{modes[rep % 5], 0.25 + rng.uniform01(), 0.1 + 0.3 * rng.uniform01(),
                              1 + rng.next() % 12};
    const SegmentPartition p = segment(f, cfg);
    CHECK_NOTHROW(validate_partition_ranges(p.segments, t));
    REQUIRE(p.representations.size() == p.count());
  }
}

TEST_CASE("segment means average back to the global mean", "[segmenter][property]") {
  for (int rep = 0; rep < 10; ++rep) {
    const FrameFeatures f = testutil::random_features(48, 8, 80 + rep);
    const SegmentPartition p = segment(f, {SegmentMode::AdaptiveMomentum, 0.5, 0.3, 10});

    std::vector<double> pooled(f.dim, 0.0);
    for (std::size_t m = 0; m < p.count(); ++m) {
      const double weight = static_cast<double>(p.segments[m].length());
      for (std::size_t j = 0; j < f.dim; ++j) pooled[j] += weight * p.representations[m][j];
    }
    for (double& x : pooled) x /= static_cast<double>(f.frame_count());

    std::vector<double> global(f.dim, 0.0);
    for (std::size_t i = 0; i < f.frame_count(); ++i) {
      std::span<const float> row = f.frame(i);
      for (std::size_t j = 0; j < f.dim; ++j) global[j] += static_cast<double>(row[j]);
    }
    for (double& x : global) x /= static_cast<double>(f.frame_count());

    for (std::size_t j = 0; j < f.dim; ++j) REQUIRE(std::abs(pooled[j] - global[j]) <= 1e-9);
  }
}

TEST_CASE("momentum and framewise match the independent oracles", "[segmenter][oracle]") {
  SplitMix64 rng(90);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t t = 1 + rng.next() % 64;
    const std::size_t d = 1 + rng.next() % 16;
    const FrameFeatures f = testutil::random_features(t, d, rng.next());
    const double tau = rng.uniform(-0.1, 1.4);
    const oracle::Frames frames = to_oracle_frames(f);
    REQUIRE(to_pairs(segment_momentum(f, tau)) == oracle::momentum_segments(frames, tau));
    REQUIRE(to_pairs(segment_framewise(f, tau)) == oracle::framewise_segments(frames, tau));
  }
}

TEST_CASE("raising the threshold never adds framewise segments", "[segmenter][property]") {
  for (int rep = 0; rep < 10; ++rep) {
    const FrameFeatures f = testutil::random_features(40, 6, 200 + rep);
    std::size_t prev = std::numeric_limits<std::size_t>::max();
    for (double tau : {0.0, 0.1, 0.2, 0.4, 0.8, 1.2, 2.0}) {
      const std::size_t count = segment_framewise(f, tau).count();
      REQUIRE(count <= prev);
      prev = count;
    }
  }
}

TEST_CASE("segmentation is deterministic", "[segmenter]") {
  const FrameFeatures f = testutil::random_features(33, 8, 300);
  const SegmenterConfig cfg{SegmentMode::AdaptiveMomentum, 1.0, 0.3, 10};
  const SegmentPartition a = segment(f, cfg);
  const SegmentPartition b = segment(f, cfg);
  CHECK(to_pairs(a) == to_pairs(b));
  CHECK(a.representations == b.representations);
}

TEST_CASE("segment records survive a JSONL round trip", "[segmenter]") {
  testutil::TempDir tmp;
  std::vector<SegmentRecord> records(2);
  records[0] = {"a", "adaptive-mmt", 0.25, {{1, 3}, {4, 6}}};
  records[1] = {"b", "window", std::nullopt, {{1, 10}}};
  save_segments(records, tmp.path / "segments.jsonl");
  const auto back = load_segments(tmp.path / "segments.jsonl");
  REQUIRE(back.size() == 2);
  CHECK(back[0].video_id == "a");
  CHECK(back[0].tau_effective == 0.25);
  CHECK(back[0].segments == records[0].segments);
  CHECK_FALSE(back[1].tau_effective.has_value());
}
