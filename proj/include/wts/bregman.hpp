#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace wts {

using Vec = Eigen::VectorXd;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// x log x with the limit convention 0 log 0 = 0.
inline double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

enum class GeneratorKind {
  L2,
  NegEntropyBinary,
  NegEntropyMulticlass,
  Logistic,
  ItakuraSaito,
};

inline std::string to_string(GeneratorKind k) {
  switch (k) {
    case GeneratorKind::L2: return "L2";
    case GeneratorKind::NegEntropyBinary: return "NegEntropyBinary";
    case GeneratorKind::NegEntropyMulticlass: return "NegEntropyMulticlass";
    case GeneratorKind::Logistic: return "Logistic";
    case GeneratorKind::ItakuraSaito: return "ItakuraSaito";
  }
  return "?";
}

// A strictly convex C^1 generator psi together with its dual map, Legendre
// dual and inverse dual map.  The multiclass negative entropy lives on the
// truncated simplex: points carry c-1 coordinates, the c-th probability is
// implicit as 1 - sum.
class Generator {
 public:
  static Generator l2(int n) { return Generator(GeneratorKind::L2, n); }
  static Generator neg_entropy_binary() {
    return Generator(GeneratorKind::NegEntropyBinary, 1);
  }
  static Generator neg_entropy_multiclass(int c) {
    if (c < 2) throw std::invalid_argument("need c >= 2");
    return Generator(GeneratorKind::NegEntropyMulticlass, c - 1);
  }
  static Generator logistic(int n) {
    return Generator(GeneratorKind::Logistic, n);
  }
  static Generator itakura_saito(int n) {
    return Generator(GeneratorKind::ItakuraSaito, n);
  }

  GeneratorKind kind() const { return kind_; }
  int dim() const { return n_; }
  // class count for the multiclass entropy, dim()+1
  int num_classes() const { return n_ + 1; }

  bool in_open_domain(const Vec& x) const {
    check_dim(x);
    switch (kind_) {
      case GeneratorKind::L2:
      case GeneratorKind::Logistic:
        return x.allFinite();
      case GeneratorKind::NegEntropyBinary:
        return x[0] > 0.0 && x[0] < 1.0;
      case GeneratorKind::NegEntropyMulticlass:
        return (x.array() > 0.0).all() && x.sum() < 1.0;
      case GeneratorKind::ItakuraSaito:
        return (x.array() > 0.0).all();
    }
    return false;
  }

  bool in_closed_domain(const Vec& x) const {
    check_dim(x);
    switch (kind_) {
      case GeneratorKind::L2:
      case GeneratorKind::Logistic:
        return x.allFinite();
      case GeneratorKind::NegEntropyBinary:
        return x[0] >= 0.0 && x[0] <= 1.0;
      case GeneratorKind::NegEntropyMulticlass:
        return (x.array() >= 0.0).all() && x.sum() <= 1.0 + 1e-15;
      case GeneratorKind::ItakuraSaito:
        return (x.array() > 0.0).all();  // -log x is +inf at 0 anyway
    }
    return false;
  }

  // psi(x); +inf outside the closed domain.  Boundary points of the entropy
  // generators are evaluated with the 0 log 0 = 0 convention.
  double value(const Vec& x) const {
    check_dim(x);
    if (!in_closed_domain(x)) return kInf;
    switch (kind_) {
      case GeneratorKind::L2:
        return 0.5 * x.squaredNorm();
      case GeneratorKind::NegEntropyBinary:
        return xlogx(x[0]) + xlogx(1.0 - x[0]);
      case GeneratorKind::NegEntropyMulticlass: {
        double s = 0.0;
        for (int i = 0; i < n_; ++i) s += xlogx(x[i]);
        s += xlogx(1.0 - x.sum());
        return s;
      }
      case GeneratorKind::Logistic: {
        double s = 0.0;
        for (int i = 0; i < n_; ++i) s += log1pexp(x[i]);
        return s;
      }
      case GeneratorKind::ItakuraSaito:
        return -x.array().log().sum();
    }
    return kInf;
  }

  // grad psi; requires an interior point (gradients of the entropy generators
  // diverge on the boundary).
  Vec dual_map(const Vec& x) const {
    require_open(x, "dual_map");
    switch (kind_) {
      case GeneratorKind::L2:
        return x;
      case GeneratorKind::NegEntropyBinary: {
        Vec y(1);
        y[0] = std::log(x[0] / (1.0 - x[0]));
        return y;
      }
      case GeneratorKind::NegEntropyMulticlass: {
        double pc = 1.0 - x.sum();
        return (x.array() / pc).log().matrix();
      }
      case GeneratorKind::Logistic:
        return x.unaryExpr([](double t) { return sigmoid(t); });
      case GeneratorKind::ItakuraSaito:
        return (-x.array().inverse()).matrix();
    }
    return x;
  }

  bool in_dual_domain(const Vec& xs) const {
    check_dim(xs);
    switch (kind_) {
      case GeneratorKind::L2:
      case GeneratorKind::NegEntropyBinary:
      case GeneratorKind::NegEntropyMulticlass:
        return xs.allFinite();
      case GeneratorKind::Logistic:
        return (xs.array() > 0.0).all() && (xs.array() < 1.0).all();
      case GeneratorKind::ItakuraSaito:
        return (xs.array() < 0.0).all();
    }
    return false;
  }

  // psi*(x*)
  double legendre_value(const Vec& xs) const {
    check_dim(xs);
    if (!in_dual_domain(xs)) return kInf;
    switch (kind_) {
      case GeneratorKind::L2:
        return 0.5 * xs.squaredNorm();
      case GeneratorKind::NegEntropyBinary:
        return log1pexp(xs[0]);
      case GeneratorKind::NegEntropyMulticlass: {
        // log(1 + sum e^{z_i}) with max-subtraction
        double m = std::max(0.0, xs.maxCoeff());
        double s = std::exp(-m);
        for (int i = 0; i < n_; ++i) s += std::exp(xs[i] - m);
        return m + std::log(s);
      }
      case GeneratorKind::Logistic: {
        double s = 0.0;
        for (int i = 0; i < n_; ++i) s += xlogx(xs[i]) + xlogx(1.0 - xs[i]);
        return s;
      }
      case GeneratorKind::ItakuraSaito:
        return -static_cast<double>(n_) - (-xs.array()).log().sum();
    }
    return kInf;
  }

  // grad psi* = (grad psi)^{-1}
  Vec inverse_dual_map(const Vec& xs) const {
    check_dim(xs);
    if (!in_dual_domain(xs))
      throw std::domain_error(to_string(kind_) +
                              ": point outside dual domain");
    switch (kind_) {
      case GeneratorKind::L2:
        return xs;
      case GeneratorKind::NegEntropyBinary: {
        Vec y(1);
        y[0] = sigmoid(xs[0]);
        return y;
      }
      case GeneratorKind::NegEntropyMulticlass: {
        double m = std::max(0.0, xs.maxCoeff());
        Vec e = (xs.array() - m).exp().matrix();
        double denom = std::exp(-m) + e.sum();
        return e / denom;
      }
      case GeneratorKind::Logistic:
        return xs.unaryExpr(
            [](double t) { return std::log(t / (1.0 - t)); });
      case GeneratorKind::ItakuraSaito:
        return (-xs.array().inverse()).matrix();
    }
    return xs;
  }

  // D_psi(x, y) = psi(x) - psi(y) - <x - y, grad psi(y)>
  double divergence(const Vec& x, const Vec& y) const {
    double vx = value(x);
    if (!std::isfinite(vx)) return kInf;
    Vec ys = dual_map(y);
    return vx - value(y) - (x - y).dot(ys);
  }

  // |D_psi(x,y) - D_psi*(y*, x*)|
  double duality_residual(const Vec& x, const Vec& y) const {
    Vec xs = dual_map(x);
    Vec ys = dual_map(y);
    double lhs = divergence(x, y);
    double rhs = legendre_value(ys) - legendre_value(xs) -
                 (ys - xs).dot(inverse_dual_map(xs));
    return std::abs(lhs - rhs);
  }

  // D(x,z) - D(x,y) - D(y,z) + <x - y, z* - y*>
  double law_of_cosines_residual(const Vec& x, const Vec& y,
                                 const Vec& z) const {
    return divergence(x, z) - divergence(x, y) - divergence(y, z) +
           (x - y).dot(dual_map(z) - dual_map(y));
  }

 private:
  Generator(GeneratorKind k, int n) : kind_(k), n_(n) {
    if (n < 1) throw std::invalid_argument("dimension must be positive");
  }

  void check_dim(const Vec& x) const {
    if (x.size() != n_)
      throw std::invalid_argument(to_string(kind_) + ": expected dimension " +
                                  std::to_string(n_) + ", got " +
                                  std::to_string(x.size()));
  }

  void require_open(const Vec& x, const char* what) const {
    if (!in_open_domain(x))
      throw std::domain_error(to_string(kind_) + "::" + what +
                              ": point outside open domain");
  }

  static double sigmoid(double t) {
    return t >= 0.0 ? 1.0 / (1.0 + std::exp(-t))
                    : std::exp(t) / (1.0 + std::exp(t));
  }

  static double log1pexp(double t) {
    return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
  }

  GeneratorKind kind_;
  int n_;
};

}  // namespace wts
