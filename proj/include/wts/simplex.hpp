#pragma once

#include <cmath>
#include <stdexcept>

#include "wts/bregman.hpp"

namespace wts {

// Interior clamp applied to model outputs before anything takes a log.
inline constexpr double kEpsInterior = 1e-7;

// A point of the closed probability simplex, stored with all c coordinates.
// By convention the implicit class of the logit parameterization is the LAST
// coordinate.
struct ProbVector {
  Vec p;

  ProbVector() = default;
  explicit ProbVector(Vec probs) : p(std::move(probs)) {
    if (p.size() < 2) throw std::invalid_argument("need at least 2 classes");
    if (!(p.array() >= 0.0).all())
      throw std::invalid_argument("negative probability");
    if (std::abs(p.sum() - 1.0) > 1e-12)
      throw std::invalid_argument("probabilities must sum to 1");
  }

  // normalizes, for inputs assembled by arithmetic
  static ProbVector normalized(Vec v) {
    double s = v.sum();
    if (!(s > 0.0)) throw std::invalid_argument("non-positive mass");
    return ProbVector(v / s);
  }

  int classes() const { return static_cast<int>(p.size()); }
  bool interior(double eps = 0.0) const { return (p.array() > eps).all(); }

  // drop the last coordinate (the truncated-simplex parameterization)
  Vec truncated() const { return p.head(p.size() - 1); }
};

// c-1 positive entries with sum < 1
struct TruncatedProbVector {
  Vec q;
  explicit TruncatedProbVector(Vec v) : q(std::move(v)) {
    if (!(q.array() > 0.0).all() || q.sum() >= 1.0)
      throw std::invalid_argument("not in the open truncated simplex");
  }
  ProbVector full() const {
    Vec p(q.size() + 1);
    p.head(q.size()) = q;
    p[q.size()] = 1.0 - q.sum();
    return ProbVector(p);
  }
};

// c-1 logits, implicit 0 for the last class
struct LogitVector {
  Vec z;
  explicit LogitVector(Vec v) : z(std::move(v)) {
    if (!z.allFinite()) throw std::invalid_argument("non-finite logit");
  }
  int classes() const { return static_cast<int>(z.size()) + 1; }
};

// softmax([z_1..z_{c-1}, 0]) with max-subtraction
inline ProbVector softmax(const LogitVector& zv) {
  const Vec& z = zv.z;
  double m = std::max(0.0, z.maxCoeff());
  Vec p(z.size() + 1);
  p.head(z.size()) = (z.array() - m).exp();
  p[z.size()] = std::exp(-m);
  return ProbVector(Vec(p / p.sum()));
}

// logit relative to the last class: log(p_i / p_c)
inline LogitVector logit(const ProbVector& pv) {
  if (!pv.interior())
    throw std::domain_error("logit undefined on the simplex boundary");
  int c = pv.classes();
  double lpc = std::log(pv.p[c - 1]);
  Vec z(c - 1);
  for (int i = 0; i < c - 1; ++i) z[i] = std::log(pv.p[i]) - lpc;
  return LogitVector(z);
}

// Shannon entropy, in [0, log c]
inline double entropy(const ProbVector& pv) {
  double h = 0.0;
  for (int i = 0; i < pv.classes(); ++i) h -= xlogx(pv.p[i]);
  return h;
}

// D_KL(p || q); +inf when q vanishes where p does not
inline double kl(const ProbVector& pv, const ProbVector& qv) {
  if (pv.classes() != qv.classes())
    throw std::invalid_argument("class count mismatch");
  double s = 0.0;
  for (int i = 0; i < pv.classes(); ++i) {
    double p = pv.p[i], q = qv.p[i];
    if (p == 0.0) continue;
    if (q == 0.0) return kInf;
    s += p * std::log(p / q);
  }
  return s;
}

// XE(p || q) = KL(p || q) + H(p)
inline double xe(const ProbVector& pv, const ProbVector& qv) {
  if (pv.classes() != qv.classes())
    throw std::invalid_argument("class count mismatch");
  double s = 0.0;
  for (int i = 0; i < pv.classes(); ++i) {
    double p = pv.p[i], q = qv.p[i];
    if (p == 0.0) continue;
    if (q == 0.0) return kInf;
    s -= p * std::log(q);
  }
  return s;
}

// TV = (1/2) sum |p_i - q_i|
inline double total_variation(const ProbVector& pv, const ProbVector& qv) {
  return 0.5 * (pv.p - qv.p).lpNorm<1>();
}

// KL(p||q) - 2 TV(p,q)^2, nonnegative by Pinsker
inline double pinsker_slack(const ProbVector& pv, const ProbVector& qv) {
  double tv = total_variation(pv, qv);
  return kl(pv, qv) - 2.0 * tv * tv;
}

// sqrt(2 KL(p||q)) / min_i(p_i, q_i)  minus  max_i |log p_i - log q_i|
inline double kl_loginf_bound_slack(const ProbVector& pv,
                                    const ProbVector& qv) {
  if (!pv.interior() || !qv.interior())
    throw std::domain_error("interior distributions required");
  double pmin = std::min(pv.p.minCoeff(), qv.p.minCoeff());
  double maxlog = 0.0;
  for (int i = 0; i < pv.classes(); ++i)
    maxlog = std::max(maxlog, std::abs(std::log(pv.p[i]) - std::log(qv.p[i])));
  return std::sqrt(2.0 * kl(pv, qv)) / pmin - maxlog;
}

// Push every coordinate to >= eps, renormalize; identity on interior inputs.
inline ProbVector clamp_to_interior(const ProbVector& pv,
                                    double eps = kEpsInterior) {
  int c = pv.classes();
  if (!(eps > 0.0) || eps >= 1.0 / c)
    throw std::invalid_argument("eps out of range");
  if (pv.interior(eps)) return pv;
  // mix toward the interior so the exact sum-to-1 constraint is kept
  Vec v = (1.0 - c * eps) * pv.p + Vec::Constant(c, eps);
  return ProbVector::normalized(std::move(v));
}

}  // namespace wts
