#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "vidsal/feature_io.hpp"
#include "vidsal/types.hpp"

namespace vidsal {

struct Interval {
  double start_sec = 0.0;
  double end_sec = 0.0;
};

struct SegmentPrediction {
  std::string video_id;
  std::vector<Interval> predicted;
};

struct ThresholdMetrics {
  double threshold = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Precision/recall/F1 per IoU threshold plus their averages. Counts pool
/// all intervals across videos (micro-averaging); F1 is computed at each
/// threshold from that threshold's P and R, then averaged.
struct LocalizationReport {
  std::vector<ThresholdMetrics> per_threshold;
  double avg_precision = 0.0;
  double avg_recall = 0.0;
  double avg_f1 = 0.0;
  std::size_t total_predictions = 0;
  std::size_t total_events = 0;
  bool empty_predictions = false;  // precision was undefined and pinned to 0
};

inline std::vector<double> default_iou_thresholds() { return {0.3, 0.5, 0.7, 0.9}; }

/// Intersection-over-union of two temporal intervals.
inline double iou(const Interval& a, const Interval& b) {
  if (!(a.start_sec < a.end_sec) || !(b.start_sec < b.end_sec))
    raise(ErrorCode::InvalidTimestamp, "iou requires start < end");
  const double inter =
      std::max(0.0, std::min(a.end_sec, b.end_sec) - std::max(a.start_sec, b.start_sec));
  const double uni = (a.end_sec - a.start_sec) + (b.end_sec - b.start_sec) - inter;
  return inter / uni;
}

/// Best-IoU matching (many-to-one allowed): a prediction counts toward
/// precision at threshold t if its best IoU against any same-video event is
/// >= t; an event counts toward recall if its best IoU against any
/// same-video prediction is >= t. Events of videos without predictions stay
/// in the recall denominator.
inline LocalizationReport evaluate(const std::vector<SegmentPrediction>& predictions,
                                   const std::vector<EventSet>& truth,
                                   const std::vector<double>& thresholds = default_iou_thresholds()) {
  if (thresholds.empty()) raise(ErrorCode::InvalidArgument, "no IoU thresholds given");

  std::unordered_map<std::string, const EventSet*> truth_by_id;
  for (const EventSet& s : truth) truth_by_id[s.video_id] = &s;

  std::unordered_map<std::string, std::vector<Interval>> preds_by_id;
  for (const SegmentPrediction& p : predictions) {
    if (!truth_by_id.contains(p.video_id))
      raise(ErrorCode::UnknownVideo, "prediction for unannotated video " + p.video_id);
    auto& dst = preds_by_id[p.video_id];
    dst.insert(dst.end(), p.predicted.begin(), p.predicted.end());
  }

  // Best IoU per prediction and per ground-truth event; thresholds only bin
  // these, so per-threshold metrics are monotone by construction.
  std::vector<double> best_per_pred;
  std::vector<double> best_per_event;
  for (const EventSet& s : truth) {
    const auto it = preds_by_id.find(s.video_id);
    const std::vector<Interval>* preds = it == preds_by_id.end() ? nullptr : &it->second;

    for (const Event& e : s.events) {
      const Interval ev{e.start_sec, e.end_sec};
      double best = 0.0;
      if (preds) {
        for (const Interval& p : *preds) best = std::max(best, iou(p, ev));
      }
      best_per_event.push_back(best);
    }
    if (preds) {
      for (const Interval& p : *preds) {
        double best = 0.0;
        for (const Event& e : s.events) best = std::max(best, iou(p, Interval{e.start_sec, e.end_sec}));
        best_per_pred.push_back(best);
      }
    }
  }

  LocalizationReport report;
  report.total_predictions = best_per_pred.size();
  report.total_events = best_per_event.size();
  report.empty_predictions = best_per_pred.empty();

  for (double t : thresholds) {
    ThresholdMetrics m;
    m.threshold = t;
    if (!best_per_pred.empty()) {
      const auto hits = std::count_if(best_per_pred.begin(), best_per_pred.end(),
                                      [&](double b) { return b >= t; });
      m.precision = static_cast<double>(hits) / static_cast<double>(best_per_pred.size());
    }
    if (!best_per_event.empty()) {
      const auto hits = std::count_if(best_per_event.begin(), best_per_event.end(),
                                      [&](double b) { return b >= t; });
      m.recall = static_cast<double>(hits) / static_cast<double>(best_per_event.size());
    }
    m.f1 = (m.precision + m.recall) > 0.0
               ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
               : 0.0;
    report.per_threshold.push_back(m);
  }

  for (const ThresholdMetrics& m : report.per_threshold) {
    report.avg_precision += m.precision;
    report.avg_recall += m.recall;
    report.avg_f1 += m.f1;
  }
  const double n = static_cast<double>(report.per_threshold.size());
  report.avg_precision /= n;
  report.avg_recall /= n;
  report.avg_f1 /= n;
  return report;
}

/// Prediction JSONL: {"video_id", "events": [{"start_sec", "end_sec"}, ...]}.
inline std::vector<SegmentPrediction> load_predictions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorCode::IoFailure, "cannot open " + path.string());
  std::vector<SegmentPrediction> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    nlohmann::json j = detail::parse_json_line(line, where);
    SegmentPrediction p;
    try {
      p.video_id = j.at("video_id").get<std::string>();
      for (const auto& je : j.at("events")) {
        Interval iv{je.at("start_sec").get<double>(), je.at("end_sec").get<double>()};
        if (!(iv.start_sec < iv.end_sec))
          raise(ErrorCode::InvalidTimestamp, where + ": interval start must precede end");
        p.predicted.push_back(iv);
      }
    } catch (const nlohmann::json::exception& ex) {
      raise(ErrorCode::MalformedRecord, where + ": " + ex.what());
    }
    out.push_back(std::move(p));
  }
  return out;
}

inline void save_predictions(const std::vector<SegmentPrediction>& preds,
                             const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) raise(ErrorCode::IoFailure, "cannot open " + path.string() + " for writing");
  for (const SegmentPrediction& p : preds) {
    nlohmann::ordered_json j;
    j["video_id"] = p.video_id;
    nlohmann::ordered_json events = nlohmann::ordered_json::array();
    for (const Interval& iv : p.predicted)
      events.push_back({{"start_sec", iv.start_sec}, {"end_sec", iv.end_sec}});
    j["events"] = std::move(events);
    out << j.dump() << "\n";
  }
  if (!out) raise(ErrorCode::IoFailure, "short write to " + path.string());
}

inline nlohmann::ordered_json report_to_json(const LocalizationReport& r) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json per = nlohmann::ordered_json::array();
  for (const ThresholdMetrics& m : r.per_threshold) {
    per.push_back({{"threshold", m.threshold},
                   {"precision", m.precision},
                   {"recall", m.recall},
                   {"f1", m.f1}});
  }
  j["per_threshold"] = std::move(per);
  j["avg_precision"] = r.avg_precision;
  j["avg_recall"] = r.avg_recall;
  j["avg_f1"] = r.avg_f1;
  j["total_predictions"] = r.total_predictions;
  j["total_events"] = r.total_events;
  j["empty_predictions"] = r.empty_predictions;
  return j;
}

}  // namespace vidsal
