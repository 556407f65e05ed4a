// Trailing trajectory segments for the sliding task window.
//
// A history is a list of per-step input vectors (observation followed by the
// previous action one-hot). The segment of window size k at time t covers
// steps t-k..t; steps before 0 are zero-padded on the left and masked.

#pragma once

#include "smaug/numerics/tensor.hpp"

#include <functional>
#include <vector>

namespace smaug::window {

using StepInput = std::vector<float>;

struct TrajectorySegment {
  int window_size = 1;
  std::vector<StepInput> steps;  // k + 1 entries, oldest first
  std::vector<std::uint8_t> mask;

  int padding() const {
    int p = 0;
    for (auto m : mask) p += m == 0;
    return p;
  }
};

/// Concatenates an observation with the one-hot of the previous action
/// (all zeros when prev_action < 0).
inline StepInput make_step_input(const std::vector<float>& obs, int prev_action, int n_actions) {
  StepInput x(obs);
  x.resize(obs.size() + static_cast<std::size_t>(n_actions), 0.0f);
  if (prev_action >= 0) x[obs.size() + static_cast<std::size_t>(prev_action)] = 1.0f;
  return x;
}

inline std::vector<TrajectorySegment> extract_segments(const std::vector<StepInput>& history, int t,
                                                       int n_window) {
  if (t < 0) throw ArgumentError("extract_segments: t must be >= 0, got " + std::to_string(t));
  if (n_window < 1) throw ArgumentError("extract_segments: n_window must be >= 1");
  if (static_cast<std::size_t>(t) >= history.size())
    throw ArgumentError("extract_segments: history has " + std::to_string(history.size()) +
                        " steps, t=" + std::to_string(t));
  const std::size_t width = history[static_cast<std::size_t>(t)].size();
  std::vector<TrajectorySegment> out;
  for (int k = 1; k <= n_window; ++k) {
    TrajectorySegment seg;
    seg.window_size = k;
    for (int s = t - k; s <= t; ++s) {
      if (s < 0) {
        seg.steps.emplace_back(width, 0.0f);
        seg.mask.push_back(0);
      } else {
        seg.steps.push_back(history[static_cast<std::size_t>(s)]);
        seg.mask.push_back(1);
      }
    }
    out.push_back(std::move(seg));
  }
  return out;
}

/// Row lookup for batched segment encoding.
///
/// steps[k-1][j][r] is the row of the position matrix that feeds step j of
/// the size-k segment for query row r, or -1 for a padded step.
struct SegmentIndex {
  std::vector<std::vector<std::vector<Eigen::Index>>> steps;

  int n_window() const { return static_cast<int>(steps.size()); }
  std::size_t rows() const { return steps.empty() ? 0 : steps.front().front().size(); }
};

/// Builds an index from locate(row, offset), which maps an offset in
/// [-k, 0] relative to the segment end to a position row, or -1.
inline SegmentIndex build_segment_index(std::size_t rows, int n_window,
                                        const std::function<Eigen::Index(std::size_t, int)>& locate) {
  SegmentIndex idx;
  idx.steps.resize(static_cast<std::size_t>(n_window));
  for (int k = 1; k <= n_window; ++k) {
    auto& seg = idx.steps[static_cast<std::size_t>(k - 1)];
    seg.assign(static_cast<std::size_t>(k + 1), std::vector<Eigen::Index>(rows, -1));
    for (int j = 0; j <= k; ++j)
      for (std::size_t r = 0; r < rows; ++r) seg[static_cast<std::size_t>(j)][r] = locate(r, j - k);
  }
  return idx;
}

}  // namespace smaug::window
