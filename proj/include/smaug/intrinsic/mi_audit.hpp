// Exact information-theoretic audit of the intrinsic-reward lower bound on a
// small discrete joint p(o, tau, z, a).
//
//   lhs = I(tau; z) + I(o; tau | z) + I(a; tau | o) + H(a | o, tau)
//   rhs = E[log p(tau | o, z)] - E[log p(a | o)]
//
// Natural logarithms throughout; 0 log 0 = 0.

#pragma once

#include "smaug/numerics/tensor.hpp"

#include <array>
#include <cmath>
#include <map>

namespace smaug::intrinsic {

struct TabularJoint {
  std::array<int, 4> dims{};  // o, tau, z, a
  std::vector<double> p;      // row-major over (o, tau, z, a)

  std::size_t index(int o, int tau, int z, int a) const {
    return ((static_cast<std::size_t>(o) * static_cast<std::size_t>(dims[1]) + static_cast<std::size_t>(tau)) *
                static_cast<std::size_t>(dims[2]) +
            static_cast<std::size_t>(z)) *
               static_cast<std::size_t>(dims[3]) +
           static_cast<std::size_t>(a);
  }
  double at(int o, int tau, int z, int a) const { return p[index(o, tau, z, a)]; }
};

struct MiAudit {
  double lhs = 0.0;
  double rhs = 0.0;
  double i_tau_z = 0.0;
  double i_o_tau_given_z = 0.0;
  double i_a_tau_given_o = 0.0;
  double h_a_given_o_tau = 0.0;
  double h_tau = 0.0;
  double h_tau_given_o_z = 0.0;
  double h_a_given_o = 0.0;

  double slack() const { return lhs - rhs; }
  /// lhs >= rhs up to accumulated rounding of the entropy sums.
  bool holds() const { return slack() >= -1e-12 * (1.0 + std::abs(lhs) + std::abs(rhs)); }
};

inline constexpr int kVarO = 1, kVarTau = 2, kVarZ = 4, kVarA = 8;

/// Entropy of the marginal over the variables selected by `vars` (bitmask).
inline double marginal_entropy(const TabularJoint& j, int vars) {
  std::map<std::array<int, 4>, double> m;
  for (int o = 0; o < j.dims[0]; ++o)
    for (int t = 0; t < j.dims[1]; ++t)
      for (int z = 0; z < j.dims[2]; ++z)
        for (int a = 0; a < j.dims[3]; ++a) {
          const std::array<int, 4> key{vars & kVarO ? o : -1, vars & kVarTau ? t : -1, vars & kVarZ ? z : -1,
                                       vars & kVarA ? a : -1};
          m[key] += j.at(o, t, z, a);
        }
  double h = 0.0;
  for (const auto& [_, q] : m)
    if (q > 0.0) h -= q * std::log(q);
  return h;
}

/// E[log p(tau | o, z)] - E[log p(a | o)] evaluated directly from the table.
inline double expected_log_conditionals(const TabularJoint& j) {
  const auto n_o = static_cast<std::size_t>(j.dims[0]), n_t = static_cast<std::size_t>(j.dims[1]),
             n_z = static_cast<std::size_t>(j.dims[2]), n_a = static_cast<std::size_t>(j.dims[3]);
  std::vector<double> p_otz(n_o * n_t * n_z, 0.0), p_oz(n_o * n_z, 0.0), p_oa(n_o * n_a, 0.0), p_o(n_o, 0.0);
  for (std::size_t o = 0; o < n_o; ++o)
    for (std::size_t t = 0; t < n_t; ++t)
      for (std::size_t z = 0; z < n_z; ++z)
        for (std::size_t a = 0; a < n_a; ++a) {
          const double q = j.at(static_cast<int>(o), static_cast<int>(t), static_cast<int>(z), static_cast<int>(a));
          p_otz[(o * n_t + t) * n_z + z] += q;
          p_oz[o * n_z + z] += q;
          p_oa[o * n_a + a] += q;
          p_o[o] += q;
        }
  double e_tau = 0.0, e_a = 0.0;
  for (std::size_t o = 0; o < n_o; ++o)
    for (std::size_t t = 0; t < n_t; ++t)
      for (std::size_t z = 0; z < n_z; ++z)
        for (std::size_t a = 0; a < n_a; ++a) {
          const double q = j.at(static_cast<int>(o), static_cast<int>(t), static_cast<int>(z), static_cast<int>(a));
          if (q <= 0.0) continue;
          e_tau += q * std::log(p_otz[(o * n_t + t) * n_z + z] / p_oz[o * n_z + z]);
          e_a += q * std::log(p_oa[o * n_a + a] / p_o[o]);
        }
  return e_tau - e_a;
}

inline void validate_joint(const TabularJoint& j) {
  std::size_t n = 1;
  for (int d : j.dims) {
    if (d < 1 || d > 6) throw ArgumentError("mi_bound_audit: each variable needs 1..6 values");
    n *= static_cast<std::size_t>(d);
  }
  if (j.p.size() != n)
    throw ArgumentError("mi_bound_audit: table has " + std::to_string(j.p.size()) + " entries, expected " +
                        std::to_string(n));
  double s = 0.0;
  for (double v : j.p) {
    if (!std::isfinite(v) || v < 0.0) throw ArgumentError("mi_bound_audit: negative or non-finite probability");
    s += v;
  }
  if (std::abs(s - 1.0) > 1e-9)
    throw ArgumentError("mi_bound_audit: table sums to " + std::to_string(s) + ", not 1");
}

inline MiAudit mi_bound_audit(const TabularJoint& j) {
  validate_joint(j);
  auto H = [&](int vars) { return marginal_entropy(j, vars); };
  MiAudit r;
  r.h_tau = H(kVarTau);
  r.i_tau_z = H(kVarTau) + H(kVarZ) - H(kVarTau | kVarZ);
  r.i_o_tau_given_z = H(kVarO | kVarZ) + H(kVarTau | kVarZ) - H(kVarO | kVarTau | kVarZ) - H(kVarZ);
  r.i_a_tau_given_o = H(kVarA | kVarO) + H(kVarTau | kVarO) - H(kVarA | kVarTau | kVarO) - H(kVarO);
  r.h_a_given_o_tau = H(kVarA | kVarO | kVarTau) - H(kVarO | kVarTau);
  r.h_tau_given_o_z = H(kVarTau | kVarO | kVarZ) - H(kVarO | kVarZ);
  r.h_a_given_o = H(kVarA | kVarO) - H(kVarO);
  r.lhs = r.i_tau_z + r.i_o_tau_given_z + r.i_a_tau_given_o + r.h_a_given_o_tau;
  r.rhs = expected_log_conditionals(j);
  return r;
}

}  // namespace smaug::intrinsic
