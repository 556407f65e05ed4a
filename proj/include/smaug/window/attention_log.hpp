// Per-step attention dump: t, agent, alpha_1..alpha_K, argmax window size.

#pragma once

#include <algorithm>
#include <sstream>
#include <string>
#include <vector>

namespace smaug::window {

struct AttentionRow {
  int t = 0;
  int agent = 0;
  std::vector<double> alpha;  // head-averaged, one per window size
};

inline std::string attention_csv(const std::vector<AttentionRow>& rows, int n_window) {
  std::ostringstream os;
  os.precision(9);
  os << "t,agent";
  for (int k = 1; k <= n_window; ++k) os << ",alpha_" << k;
  os << ",argmax_window\n";
  for (const auto& r : rows) {
    os << r.t << ',' << r.agent;
    for (double a : r.alpha) os << ',' << a;
    const auto best = std::max_element(r.alpha.begin(), r.alpha.end()) - r.alpha.begin();
    os << ',' << best + 1 << '\n';
  }
  return os.str();
}

}  // namespace smaug::window
