#pragma once

// Random and hand-built models shared by the unit tests and the acceptance runner.

#include <random>
#include <vector>

#include "lobimpact/hawkes.hpp"
#include "lobimpact/impact.hpp"
#include "lobimpact/lob_model.hpp"
#include "lobimpact/model_io.hpp"

namespace fixtures {

using namespace lobimpact;

// Kernel L1 norms drawn in [0, max_norm], so the radius heuristic stays below d_E * max_norm.
inline HawkesParams random_params(std::mt19937_64& rng, int d_E = 4, int d_S = 9,
                                  double max_norm = 0.15, double nu_lo = 0.2, double nu_hi = 1.0) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  HawkesParams p(d_E, d_S);
  for (int e = 1; e <= d_E; ++e) p.nu[e] = nu_lo + (nu_hi - nu_lo) * u(rng);
  for (int src = 1; src <= d_E; ++src)
    for (int x = 0; x < d_S; ++x)
      for (int e = 1; e <= d_E; ++e) {
        const double b = 1.5 + 1.5 * u(rng);
        p.b(src, x, e) = b;
        p.a(src, x, e) = max_norm * u(rng) * (b - 1.0);
      }
  return p;
}

// Random transitions that respect the event semantics: sells never lift the price, buys never
// lower it, deflationary limit events lower it and inflationary ones raise it.
inline TransitionMatrices random_phi(std::mt19937_64& rng, int K) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  const int d_S = num_states(K);
  TransitionMatrices phi(4, d_S);
  auto allowed = [](int e, int x1) {
    switch (e) {
      case 1: return x1 <= 0;
      case 2: return x1 >= 0;
      case 3: return x1 == -1;
      default: return x1 == 1;
    }
  };
  for (int e = 1; e <= 4; ++e)
    for (int from = 0; from < d_S; ++from) {
      double total = 0.0;
      std::vector<double> row(d_S, 0.0);
      for (int to = 0; to < d_S; ++to)
        if (allowed(e, StateVariable::from_index(to, K).x1)) total += row[to] = u(rng);
      for (int to = 0; to < d_S; ++to) phi(e, from, to) = row[to] / total;
    }
  return phi;
}

// Random market model made price-symmetric under the canonical maps.
inline Model symmetric_model(std::mt19937_64& rng, int K = 3, double max_norm = 0.15) {
  Model m;
  m.K = K;
  m.n = 2;
  m.params = random_params(rng, 4, num_states(K), max_norm);
  m.phi = random_phi(rng, K);
  symmetrise(m.params, m.phi, canonical_event_map(4), canonical_state_map(K), K);
  m.gamma = DirichletParams::uniform(2, K);
  return m;
}

}  // namespace fixtures
