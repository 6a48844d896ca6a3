#pragma once

// Independent straight-line re-implementations used as oracles. These are
// written directly from the algorithm descriptions and share no code with
// the library implementations they check.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

namespace oracle {

using Frames = std::vector<std::vector<double>>;  // T rows of dimension D
using Ranges = std::vector<std::pair<std::size_t, std::size_t>>;  // 1-based inclusive

inline double inner(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Momentum loop: grow a segment while 1 - <running mean, next frame> stays
// at or below tau; on a strict exceedance close the segment and restart the
// running mean at the incoming frame.
inline Ranges momentum_segments(const Frames& frames, double tau) {
  Ranges out;
  std::size_t start = 1;
  std::vector<double> z = frames[0];
  std::size_t members = 1;
  for (std::size_t next = 1; next < frames.size(); ++next) {
    const double dprime = 1.0 - inner(z, frames[next]);
    if (dprime > tau) {
      out.emplace_back(start, next);  // next frame is 1-based next+1; close at next
      start = next + 1;
      z = frames[next];
      members = 1;
    } else {
      const double m = static_cast<double>(members);
      for (std::size_t j = 0; j < z.size(); ++j) z[j] = (m * z[j] + frames[next][j]) / (m + 1.0);
      ++members;
    }
  }
  out.emplace_back(start, frames.size());
  return out;
}

// Boundary after every consecutive pair whose cosine difference strictly
// exceeds tau.
inline Ranges framewise_segments(const Frames& frames, double tau) {
  Ranges out;
  std::size_t start = 1;
  for (std::size_t i = 0; i + 1 < frames.size(); ++i) {
    if (1.0 - inner(frames[i], frames[i + 1]) > tau) {
      out.emplace_back(start, i + 1);
      start = i + 2;
    }
  }
  out.emplace_back(start, frames.size());
  return out;
}

// Full sort of the whole store by (cosine desc, caption_id asc), then the
// first k row indices.
inline std::vector<std::size_t> topk_full_sort(const Frames& store_rows,
                                               const std::vector<std::string>& ids,
                                               const std::vector<double>& query, std::size_t k) {
  const double qn = std::sqrt(inner(query, query));
  std::vector<double> score(store_rows.size());
  for (std::size_t r = 0; r < store_rows.size(); ++r) {
    const double rn = std::sqrt(inner(store_rows[r], store_rows[r]));
    score[r] = inner(query, store_rows[r]) / (qn * rn);
  }
  std::vector<std::size_t> order(store_rows.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (score[a] != score[b]) return score[a] > score[b];
    return ids[a] < ids[b];
  });
  order.resize(k);
  return order;
}

}  // namespace oracle
