// Central finite-difference gradient verification.

#pragma once

#include "smaug/numerics/tape.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

namespace smaug {

struct GradCheckOptions {
  double tolerance = 1e-3;
  double step = 1e-4;
  // Relative error is |a - n| / max(|a|, |n|, scale_floor).
  double scale_floor = 1e-6;
  // 0 checks every element; otherwise a seeded random subset per tensor.
  std::size_t max_per_tensor = 0;
  std::uint64_t seed = 0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_parameter;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
  bool passed = true;
};

/// Compares analytic gradients of `loss` against central differences for
/// every tensor in `params`. `loss` must rebuild the whole forward pass on
/// the tape it is handed.
inline GradCheckReport grad_check(ParameterList<double>& params,
                                  const std::function<Var<double>(Tape<double>&)>& loss,
                                  const GradCheckOptions& opt = {}) {
  params.zero_grad();
  {
    Tape<double> tape;
    tape.backward(loss(tape));
  }
  std::vector<Matrix<double>> analytic;
  for (auto& [_, p] : params.items) analytic.push_back(p->grad);
  params.zero_grad();

  auto eval = [&] {
    Tape<double> tape;
    return loss(tape).scalar();
  };

  GradCheckReport report;
  std::mt19937_64 rng(opt.seed);
  for (std::size_t pi = 0; pi < params.items.size(); ++pi) {
    auto& [name, p] = params.items[pi];
    const auto n = static_cast<std::size_t>(p->value.size());
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    if (opt.max_per_tensor && n > opt.max_per_tensor) {
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(opt.max_per_tensor);
    }
    for (auto i : idx) {
      double& x = p->value.data()[i];
      const double saved = x;
      x = saved + opt.step;
      const double up = eval();
      x = saved - opt.step;
      const double down = eval();
      x = saved;
      const double numeric = (up - down) / (2.0 * opt.step);
      const double a = analytic[pi].data()[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), opt.scale_floor});
      const double rel = std::abs(a - numeric) / denom;
      ++report.checked;
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_parameter = name + "[" + std::to_string(i) + "]";
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
    }
  }
  report.passed = report.max_rel_error <= opt.tolerance;
  return report;
}

}  // namespace smaug
