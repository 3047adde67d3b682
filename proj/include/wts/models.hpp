#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <stdexcept>
#include <vector>

#include "wts/rng.hpp"
#include "wts/simplex.hpp"

namespace wts {

using Mat = Eigen::MatrixXd;

namespace detail {

// rows x cols matrix whose shorter side is orthonormal (QR of a Gaussian,
// sign-fixed so the draw is a deterministic function of the stream)
inline Mat random_orthogonal(int rows, int cols, RngStream& rng) {
  const int big = std::max(rows, cols), sml = std::min(rows, cols);
  Mat g(big, sml);
  for (int i = 0; i < big; ++i)
    for (int j = 0; j < sml; ++j) g(i, j) = rng.next_normal();
  Eigen::HouseholderQR<Mat> qr(g);
  Mat q = qr.householderQ() * Mat::Identity(big, sml);
  Mat r = qr.matrixQR().topRows(sml).triangularView<Eigen::Upper>();
  for (int j = 0; j < sml; ++j)
    if (r(j, j) < 0) q.col(j) = -q.col(j);
  return rows >= cols ? q : Mat(q.transpose());
}

}  // namespace detail

// Fully-connected network with rectifier hidden layers and identity output.
struct MlpParams {
  std::vector<Mat> W;  // W[l] maps layer l-1 activations to layer l preacts
  std::vector<Vec> b;

  int in_dim() const { return static_cast<int>(W.front().cols()); }
  int out_dim() const { return static_cast<int>(W.back().rows()); }
  int layers() const { return static_cast<int>(W.size()); }

  void check() const {
    if (W.empty() || W.size() != b.size())
      throw std::invalid_argument("inconsistent layer count");
    for (size_t l = 0; l < W.size(); ++l) {
      if (W[l].rows() != b[l].size())
        throw std::invalid_argument("bias shape mismatch");
      if (l > 0 && W[l].cols() != W[l - 1].rows())
        throw std::invalid_argument("layer shape chain broken");
    }
  }

  // hidden_layers rectified layers of width `hidden`, then a linear map to
  // out_dim; entries ~ N(0, 2 / fan_in)
  static MlpParams random(int in_dim, int hidden, int out_dim,
                          int hidden_layers, RngStream& rng) {
    MlpParams m;
    int prev = in_dim;
    for (int l = 0; l < hidden_layers + 1; ++l) {
      int rows = (l == hidden_layers) ? out_dim : hidden;
      Mat w(rows, prev);
      double sd = std::sqrt(2.0 / prev);
      for (int i = 0; i < w.rows(); ++i)
        for (int j = 0; j < w.cols(); ++j) w(i, j) = sd * rng.next_normal();
      m.W.push_back(std::move(w));
      m.b.push_back(Vec::Zero(rows));
      prev = rows;
    }
    return m;
  }

  // Mirrored-block ("looks linear") initialization.  Each hidden layer is
  // [A; -A] over the positive/negative channel pair, so at init the network
  // computes an exact orthogonal linear map of its input: a rectifier pair
  // (s)+ and (s)- together carry s losslessly, and depth costs nothing until
  // training breaks the mirror symmetry.  Requires an even hidden width with
  // hidden/2 >= in_dim for the first layer to be injective.  noise_sd adds
  // fan-in-scaled Gaussian noise on top of the mirrored blocks (relative to
  // the usual sqrt(2/fan_in) scale) to seed feature diversity.
  static MlpParams looks_linear(int in_dim, int hidden, int out_dim,
                                int hidden_layers, RngStream& rng,
                                double noise_sd = 0.0) {
    if (hidden_layers < 1 || hidden % 2 != 0 || hidden / 2 < in_dim)
      throw std::invalid_argument("looks_linear needs even hidden >= 2*in_dim");
    const int h2 = hidden / 2;
    MlpParams m;
    // first layer: [A0; -A0], A0 with orthonormal rows restricted to in_dim
    Mat a0 = detail::random_orthogonal(h2, in_dim, rng);
    Mat w0(hidden, in_dim);
    w0 << a0, -a0;
    m.W.push_back(std::move(w0));
    m.b.push_back(Vec::Zero(hidden));
    // middle layers: [[A, -A], [-A, A]] with A orthogonal, acting on s = p - n
    for (int l = 1; l < hidden_layers; ++l) {
      Mat a = detail::random_orthogonal(h2, h2, rng);
      Mat w(hidden, hidden);
      w << a, -a, -a, a;
      m.W.push_back(std::move(w));
      m.b.push_back(Vec::Zero(hidden));
    }
    // output layer: [C, -C] reconstructs C (p - n)
    Mat c = detail::random_orthogonal(out_dim, h2, rng);
    Mat wl(out_dim, hidden);
    wl << c, -c;
    m.W.push_back(std::move(wl));
    m.b.push_back(Vec::Zero(out_dim));
    if (noise_sd > 0.0) {
      for (auto& w : m.W) {
        const double sd = noise_sd * std::sqrt(2.0 / w.cols());
        for (int i = 0; i < w.rows(); ++i)
          for (int j = 0; j < w.cols(); ++j) w(i, j) += sd * rng.next_normal();
      }
    }
    return m;
  }
};

inline Vec mlp_forward(const MlpParams& m, const Vec& x) {
  if (x.size() != m.in_dim()) throw std::invalid_argument("input dim mismatch");
  Vec a = x;
  for (int l = 0; l < m.layers(); ++l) {
    a = (m.W[l] * a + m.b[l]).eval();
    if (l + 1 < m.layers()) a = a.cwiseMax(0.0);
  }
  return a;
}

// rows of X are inputs; returns rows of representations
inline Mat mlp_forward_batch(const MlpParams& m, const Mat& X) {
  if (X.cols() != m.in_dim()) throw std::invalid_argument("input dim mismatch");
  Mat A = X;
  for (int l = 0; l < m.layers(); ++l) {
    A = ((A * m.W[l].transpose()).rowwise() + m.b[l].transpose()).eval();
    if (l + 1 < m.layers()) A = A.cwiseMax(0.0);
  }
  return A;
}

// Single c-class logistic head, W in R^{(c-1) x d}; the last class carries
// the implicit zero logit.
struct SoftmaxHead {
  Mat W;

  int classes() const { return static_cast<int>(W.rows()) + 1; }
  int rep_dim() const { return static_cast<int>(W.cols()); }

  static SoftmaxHead random(int c, int d, double sd, RngStream& rng) {
    SoftmaxHead h;
    h.W.resize(c - 1, d);
    for (int i = 0; i < c - 1; ++i)
      for (int j = 0; j < d; ++j) h.W(i, j) = sd * rng.next_normal();
    return h;
  }
};

inline ProbVector head_forward(const SoftmaxHead& h, const Vec& rep) {
  if (rep.size() != h.rep_dim())
    throw std::invalid_argument("representation dim mismatch");
  return clamp_to_interior(softmax(LogitVector(h.W * rep)));
}

// batch: rows of R are representations; returns N x c row-stochastic matrix
inline Mat head_forward_batch(const SoftmaxHead& h, const Mat& R) {
  if (R.cols() != h.rep_dim())
    throw std::invalid_argument("representation dim mismatch");
  const int c = h.classes();
  Mat Z = R * h.W.transpose();  // N x (c-1)
  Mat P(R.rows(), c);
  for (int j = 0; j < R.rows(); ++j) {
    double mx = std::max(0.0, Z.row(j).maxCoeff());
    double denom = std::exp(-mx);
    for (int i = 0; i < c - 1; ++i) {
      P(j, i) = std::exp(Z(j, i) - mx);
      denom += P(j, i);
    }
    P(j, c - 1) = std::exp(-mx);
    P.row(j) /= denom;
    // interior clamp before anything downstream takes a log
    double pmin = P.row(j).minCoeff();
    if (pmin <= kEpsInterior) {
      P.row(j) = (1.0 - c * kEpsInterior) * P.row(j) +
                 Eigen::RowVectorXd::Constant(c, kEpsInterior);
      P.row(j) /= P.row(j).sum();
    }
  }
  return P;
}

// k heads mixed in probability space; lambda = softmax of free logits so the
// mixture stays in the open simplex by construction.
struct HeadEnsemble {
  std::vector<SoftmaxHead> heads;
  Vec mix_logits;

  int k() const { return static_cast<int>(heads.size()); }
  int classes() const { return heads.front().classes(); }
  int rep_dim() const { return heads.front().rep_dim(); }

  Vec mixture() const {
    double mx = mix_logits.maxCoeff();
    Vec lam = (mix_logits.array() - mx).exp().matrix();
    return lam / lam.sum();
  }

  static HeadEnsemble random(int k, int c, int d, double sd, RngStream& rng) {
    HeadEnsemble e;
    e.heads.reserve(k);
    for (int a = 0; a < k; ++a)
      e.heads.push_back(SoftmaxHead::random(c, d, sd, rng));
    e.mix_logits = Vec::Zero(k);
    return e;
  }
};

inline ProbVector ensemble_forward(const HeadEnsemble& ens, const Vec& rep) {
  Vec lam = ens.mixture();
  Vec p = Vec::Zero(ens.classes());
  for (int a = 0; a < ens.k(); ++a)
    p += lam[a] * head_forward(ens.heads[a], rep).p;
  return ProbVector::normalized(std::move(p));
}

inline Mat ensemble_forward_batch(const HeadEnsemble& ens, const Mat& R) {
  Vec lam = ens.mixture();
  Mat P = Mat::Zero(R.rows(), ens.classes());
  for (int a = 0; a < ens.k(); ++a)
    P += lam[a] * head_forward_batch(ens.heads[a], R);
  return P;
}

struct EnsembleGrad {
  std::vector<Mat> dW;
  Vec dmix;
  double objective = 0.0;
};

// Gradient of (1/N) sum_j KL(ensemble(r_j) || y_j) + reg * sum_a ||W_a||^2
// with respect to all head weights and the mixture logits.  Labels must be
// interior distributions.
inline EnsembleGrad grad_reverse_kl(const HeadEnsemble& ens, const Mat& R,
                                    const Mat& Y, double reg_coef) {
  const int N = static_cast<int>(R.rows());
  const int c = ens.classes();
  const int k = ens.k();
  if (N < 1) throw std::invalid_argument("empty batch");
  if (Y.rows() != N || Y.cols() != c)
    throw std::invalid_argument("label shape mismatch");

  Vec lam = ens.mixture();
  std::vector<Mat> P(k);  // per-head probabilities, N x c
  for (int a = 0; a < k; ++a) P[a] = head_forward_batch(ens.heads[a], R);
  Mat Pbar = Mat::Zero(N, c);
  for (int a = 0; a < k; ++a) Pbar += lam[a] * P[a];

  // dL/dPbar_ji = log(Pbar/Y) + 1  (the constant is annihilated by the
  // softmax Jacobians downstream, kept for the lambda gradient projection)
  Mat G(N, c);
  double obj = 0.0;
  for (int j = 0; j < N; ++j) {
    for (int i = 0; i < c; ++i) {
      double p = Pbar(j, i), y = Y(j, i);
      if (!(y > 0.0))
        throw std::domain_error("weak label not interior at row " +
                                std::to_string(j));
      double lr = std::log(p / y);
      if (!std::isfinite(lr))
        throw std::domain_error("non-finite intermediate at row " +
                                std::to_string(j));
      obj += p * lr;
      G(j, i) = lr + 1.0;
    }
  }
  obj /= N;

  EnsembleGrad out;
  out.dW.resize(k);
  Vec dlam = Vec::Zero(k);
  for (int a = 0; a < k; ++a) {
    dlam[a] = (P[a].array() * G.array()).sum() / N;
    // back through softmax of head a: dL/dz_m = p_m (u_m - <p,u>), u = lam_a G
    Mat U = lam[a] * G;  // N x c
    Vec inner = (P[a].array() * U.array()).rowwise().sum().matrix();  // N
    Mat Dz =
        (P[a].leftCols(c - 1).array() *
         (U.leftCols(c - 1).array().colwise() - inner.array()))
            .matrix();  // N x (c-1)
    out.dW[a] = Dz.transpose() * R / N;
    obj += reg_coef * ens.heads[a].W.squaredNorm();
    out.dW[a] += 2.0 * reg_coef * ens.heads[a].W;
  }
  // lambda = softmax(mix_logits)
  double lbar = lam.dot(dlam);
  out.dmix = (lam.array() * (dlam.array() - lbar)).matrix();
  out.objective = obj;
  return out;
}

struct HeadGrad {
  Mat dW;
  double objective = 0.0;
};

// Gradient of (1/N) sum_j XE(y_j || softmax([W r_j, 0])) in W.
inline HeadGrad grad_forward_xe(const SoftmaxHead& head, const Mat& R,
                                const Mat& Y) {
  const int N = static_cast<int>(R.rows());
  const int c = head.classes();
  if (N < 1) throw std::invalid_argument("empty batch");
  if (Y.rows() != N || Y.cols() != c)
    throw std::invalid_argument("label shape mismatch");
  Mat P = head_forward_batch(head, R);
  HeadGrad out;
  out.objective = -(Y.array() * P.array().log()).sum() / N;
  Mat Dz = (P.leftCols(c - 1) - Y.leftCols(c - 1));  // classic p - y form
  out.dW = Dz.transpose() * R / N;
  return out;
}

// As above, but also returns the gradient with respect to the representation
// rows (for backprop into a trainable representation).
inline HeadGrad grad_forward_xe_with_rep(const SoftmaxHead& head, const Mat& R,
                                         const Mat& Y, Mat& dR) {
  const int c = head.classes();
  Mat P = head_forward_batch(head, R);
  const int N = static_cast<int>(R.rows());
  HeadGrad out;
  out.objective = -(Y.array() * P.array().log()).sum() / N;
  Mat Dz = (P.leftCols(c - 1) - Y.leftCols(c - 1));
  out.dW = Dz.transpose() * R / N;
  dR = Dz * head.W / N;
  return out;
}

// Backprop of dL/dRep through the network; accumulates parameter gradients.
// X rows are inputs, dOut rows are upstream gradients.
struct MlpGrad {
  std::vector<Mat> dW;
  std::vector<Vec> db;
};

inline MlpGrad mlp_backward(const MlpParams& m, const Mat& X, const Mat& dOut) {
  const int L = m.layers();
  std::vector<Mat> acts(L + 1);
  acts[0] = X;
  for (int l = 0; l < L; ++l) {
    acts[l + 1] =
        ((acts[l] * m.W[l].transpose()).rowwise() + m.b[l].transpose()).eval();
    if (l + 1 < L) acts[l + 1] = acts[l + 1].cwiseMax(0.0);
  }
  MlpGrad g;
  g.dW.resize(L);
  g.db.resize(L);
  Mat delta = dOut;
  for (int l = L - 1; l >= 0; --l) {
    if (l + 1 < L) {
      // rectifier subgradient: 0 at 0
      delta = ((acts[l + 1].array() > 0.0).cast<double>() * delta.array())
                  .matrix();
    }
    g.dW[l] = delta.transpose() * acts[l];
    g.db[l] = delta.colwise().sum();
    if (l > 0) delta = delta * m.W[l];
  }
  return g;
}

}  // namespace wts
