#pragma once

#include "wts/bregman.hpp"
#include "wts/rng.hpp"
#include "wts/simplex.hpp"

namespace wts {

// Random interior point of a generator's domain, a margin away from every
// boundary.  Used by the verification suites.
inline Vec random_interior_point(const Generator& gen, RngStream& rng,
                                 double margin = 1e-3) {
  const int n = gen.dim();
  Vec x(n);
  switch (gen.kind()) {
    case GeneratorKind::L2:
      for (int i = 0; i < n; ++i) x[i] = rng.next_uniform(-5.0, 5.0);
      break;
    case GeneratorKind::Logistic:
      for (int i = 0; i < n; ++i) x[i] = rng.next_uniform(-8.0, 8.0);
      break;
    case GeneratorKind::ItakuraSaito:
      for (int i = 0; i < n; ++i) x[i] = rng.next_uniform(margin, 10.0);
      break;
    case GeneratorKind::NegEntropyBinary:
      x[0] = rng.next_uniform(margin, 1.0 - margin);
      break;
    case GeneratorKind::NegEntropyMulticlass: {
      // exponential spacings, pulled toward uniform to respect the margin
      Vec p(n + 1);
      for (int i = 0; i <= n; ++i) p[i] = -std::log(rng.next_uniform());
      p /= p.sum();
      double delta = margin * (n + 1);
      p = (1.0 - delta) * p + Vec::Constant(n + 1, margin);
      x = p.head(n);
      break;
    }
  }
  return x;
}

inline ProbVector random_simplex_point(int c, RngStream& rng,
                                       double margin = 1e-6) {
  Vec p(c);
  for (int i = 0; i < c; ++i) p[i] = -std::log(rng.next_uniform());
  p /= p.sum();
  p = (1.0 - margin * c) * p + Vec::Constant(c, margin);
  return ProbVector::normalized(std::move(p));
}

}  // namespace wts
