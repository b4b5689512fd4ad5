#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <ostream>
#include <string>
#include <vector>

#include "efl/error.hpp"

namespace efl {

struct TheoryCondition {
  std::string name;
  bool satisfied = false;
  double lhs = 0.0;
  double rhs = 0.0;
};

// Hypotheses of the non-convex convergence guarantee for equitable
// aggregation, evaluated for one configuration. Advisory only.
struct TheoryReport {
  double eta = 0.0;
  double mu = 0.0;
  std::size_t local_epochs = 0;
  std::size_t rounds = 0;
  double smoothness = 0.0;

  double zeta = 0.0;
  double eta_LE = 0.0;
  double eta_muE = 0.0;
  double K_floor = 0.0;
  std::vector<TheoryCondition> conditions;
  std::vector<double> pk;  // sampling distribution over rounds 0..K-1

  bool all_satisfied() const {
    return std::all_of(conditions.begin(), conditions.end(),
                       [](const TheoryCondition& c) { return c.satisfied; });
  }
};

// eta = 1 / (4 E sqrt(3 L K))
inline double theorem_eta(std::size_t local_epochs, std::size_t rounds, double smoothness) {
  detail::require(local_epochs >= 1 && rounds >= 1, "theorem_eta: E and K must be >= 1");
  detail::require(smoothness > 0.0, "theorem_eta: L must be > 0");
  return 1.0 / (4.0 * static_cast<double>(local_epochs) *
                std::sqrt(3.0 * smoothness * static_cast<double>(rounds)));
}

// zeta = eta^2 E^2 (9 eta L^2 E + 4 eta mu E + 6 L (1 + 4 eta^2 mu^2 E^2 / 18))
inline double theory_zeta(double eta, double mu, std::size_t local_epochs, double smoothness) {
  const double e = static_cast<double>(local_epochs);
  const double l = smoothness;
  return eta * eta * e * e *
         (9.0 * eta * l * l * e + 4.0 * eta * mu * e +
          6.0 * l * (1.0 + 4.0 * eta * eta * mu * mu * e * e / 18.0));
}

// P(k) proportional to (1 + zeta)^(K-1-k), k = 0..K-1. Computed as
// (1 + zeta)^(-k) normalized, which is the same distribution and never
// overflows; zeta = 0 gives exactly 1/K.
inline std::vector<double> round_distribution(double zeta, std::size_t rounds) {
  detail::require(zeta >= 0.0, "round_distribution: zeta must be >= 0");
  detail::require(rounds >= 1, "round_distribution: K must be >= 1");
  const double log_base = std::log1p(zeta);
  std::vector<double> p(rounds);
  double total = 0.0;
  for (std::size_t k = 0; k < rounds; ++k) {
    p[k] = std::exp(-static_cast<double>(k) * log_base);
    total += p[k];
  }
  for (double& v : p) v /= total;
  return p;
}

inline TheoryReport validate_theorem_conditions(double eta, double mu, std::size_t local_epochs,
                                                std::size_t rounds, double smoothness) {
  detail::require(eta > 0.0 && std::isfinite(eta), "theory: eta must be > 0, got ", eta);
  detail::require(mu >= 0.0 && std::isfinite(mu), "theory: mu must be >= 0, got ", mu);
  detail::require(local_epochs >= 1, "theory: E must be >= 1");
  detail::require(rounds >= 1, "theory: K must be >= 1");
  detail::require(smoothness > 0.0 && std::isfinite(smoothness), "theory: L must be > 0, got ",
                  smoothness);

  TheoryReport r;
  r.eta = eta;
  r.mu = mu;
  r.local_epochs = local_epochs;
  r.rounds = rounds;
  r.smoothness = smoothness;

  const double e = static_cast<double>(local_epochs);
  const double l = smoothness;
  r.zeta = theory_zeta(eta, mu, local_epochs, smoothness);
  r.eta_LE = eta * l * e;
  r.eta_muE = eta * mu * e;
  r.K_floor = std::max({3.0 * l / 32.0, mu * mu / (12.0 * l), mu * mu / (108.0 * l * l * l)});
  const double k = static_cast<double>(rounds);
  r.conditions = {
      {"eta*L*E <= 1/2", r.eta_LE <= 0.5, r.eta_LE, 0.5},
      {"eta*mu*E <= 1/2", r.eta_muE <= 0.5, r.eta_muE, 0.5},
      {"mu < 1", mu < 1.0, mu, 1.0},
      {"K >= max(3L/32, mu^2/(12L), mu^2/(108L^3))", k >= r.K_floor, k, r.K_floor},
  };
  r.pk = round_distribution(r.zeta, rounds);
  return r;
}

inline std::ostream& operator<<(std::ostream& os, const TheoryReport& r) {
  os << "eta      " << r.eta << "\n"
     << "mu       " << r.mu << "\n"
     << "E        " << r.local_epochs << "\n"
     << "K        " << r.rounds << "\n"
     << "L        " << r.smoothness << "\n"
     << "zeta     " << r.zeta << "\n"
     << "eta*L*E  " << r.eta_LE << "\n"
     << "eta*mu*E " << r.eta_muE << "\n"
     << "K_floor  " << r.K_floor << "\n"
     << "conditions:\n";
  for (const auto& c : r.conditions)
    os << "  [" << (c.satisfied ? "ok  " : "FAIL") << "] " << c.name << "  (lhs " << c.lhs
       << ", rhs " << c.rhs << ")\n";
  os << "P(k): first " << r.pk.front() << ", last " << r.pk.back() << "\n";
  os << "all conditions satisfied: " << (r.all_satisfied() ? "yes" : "no") << "\n";
  return os;
}

}  // namespace efl
