#pragma once

// CP (PARAFAC) models of sparse third-order tensors: ALS fitting,
// normalization, last-T0 heuristic scoring and the factor match score.

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "tlp/errors.hpp"
#include "tlp/lowrank.hpp"
#include "tlp/matscore.hpp"
#include "tlp/tensor.hpp"

namespace tlp {

/// sum_k lambda_k a_k o b_k o c_k. After normalize_model: unit columns, lambda positive and nonincreasing.
struct KruskalModel {
  Vector lambda;
  DenseMatrix a;  // M x K
  DenseMatrix b;  // N x K
  DenseMatrix c;  // T x K

  Index rank() const { return static_cast<Index>(lambda.size()); }
  Dims dims() const {
    return {static_cast<Index>(a.rows()), static_cast<Index>(b.rows()), static_cast<Index>(c.rows())};
  }

  double entry(Index i, Index j, Index t) const {
    return (lambda.array() * a.row(i).transpose().array() * b.row(j).transpose().array() *
            c.row(t).transpose().array())
        .sum();
  }

  /// Dense reconstruction; intended for small tensors and tests.
  DenseTensor3 full() const {
    DenseTensor3 out(dims());
    const Dims d = dims();
    for (Index t = 0; t < d.steps; ++t) {
      DenseMatrix slice = a * (lambda.array() * c.row(t).transpose().array()).matrix().asDiagonal() * b.transpose();
      for (Index j = 0; j < d.cols; ++j)
        for (Index i = 0; i < d.rows; ++i) out(i, j, t) = slice(i, j);
    }
    return out;
  }

  void validate() const {
    const auto k = lambda.size();
    if (a.cols() != k || b.cols() != k || c.cols() != k) throw DimensionError("Kruskal model: factor ranks disagree");
  }
};

inline DenseMatrix mttkrp(const SparseTensor3& z, const KruskalModel& m, int mode) {
  return mttkrp(z, m.a, m.b, m.c, mode);
}

/// <m1, m2> in the tensor inner product, from Gram matrices.
inline double inner_product(const KruskalModel& m1, const KruskalModel& m2) {
  DenseMatrix g = (m1.a.transpose() * m2.a).cwiseProduct(m1.b.transpose() * m2.b).cwiseProduct(m1.c.transpose() * m2.c);
  return (m1.lambda.asDiagonal() * g * m2.lambda.asDiagonal()).sum();
}

inline double frobenius_norm(const KruskalModel& m) { return std::sqrt(std::max(inner_product(m, m), 0.0)); }

/// 1 - ||model - truth|| / ||truth|| for two Kruskal tensors of equal dimensions.
inline double fit_to(const KruskalModel& model, const KruskalModel& truth) {
  const double tt = inner_product(truth, truth);
  const double res2 = inner_product(model, model) + tt - 2.0 * inner_product(model, truth);
  return 1.0 - std::sqrt(std::max(res2, 0.0)) / std::sqrt(tt);
}

/// Folds column norms into lambda, repairs negative lambda through C, sorts by lambda descending and
/// makes the largest-magnitude entry of every A column nonnegative (flipping B with it).
inline KruskalModel normalize_model(const KruskalModel& in) {
  in.validate();
  KruskalModel m = in;
  const Eigen::Index k = m.lambda.size();
  for (Eigen::Index p = 0; p < k; ++p) {
    const double na = m.a.col(p).norm(), nb = m.b.col(p).norm(), nc = m.c.col(p).norm();
    if (na == 0.0 || nb == 0.0 || nc == 0.0)
      throw DomainError("normalize_model: degenerate component " + std::to_string(p + 1) + " has a zero factor column");
    m.a.col(p) /= na;
    m.b.col(p) /= nb;
    m.c.col(p) /= nc;
    m.lambda(p) *= na * nb * nc;
    if (m.lambda(p) < 0.0) {
      m.lambda(p) = -m.lambda(p);
      m.c.col(p) = -m.c.col(p);
    }
    Eigen::Index arg = 0;
    m.a.col(p).cwiseAbs().maxCoeff(&arg);
    if (m.a(arg, p) < 0.0) {
      m.a.col(p) = -m.a.col(p);
      m.b.col(p) = -m.b.col(p);
    }
  }
  std::vector<Eigen::Index> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto x, auto y) { return m.lambda(x) > m.lambda(y); });
  KruskalModel out{Vector(k), DenseMatrix(m.a.rows(), k), DenseMatrix(m.b.rows(), k), DenseMatrix(m.c.rows(), k)};
  for (Eigen::Index p = 0; p < k; ++p) {
    out.lambda(p) = m.lambda(order[p]);
    out.a.col(p) = m.a.col(order[p]);
    out.b.col(p) = m.b.col(order[p]);
    out.c.col(p) = m.c.col(order[p]);
  }
  return out;
}

struct FitTrace {
  Index iterations = 0;
  std::vector<double> fit_history;
  bool converged = false;
};

struct CpOptions {
  double tol = 1e-6;
  Index max_iter = 500;
  std::uint64_t seed = 0;
};

namespace detail {

/// Solves X G = rhs for X with G symmetric positive (semi)definite; ridge retry on singularity.
inline DenseMatrix solve_gram(const DenseMatrix& gram, const DenseMatrix& rhs) {
  Eigen::LLT<DenseMatrix> llt(gram);
  if (llt.info() == Eigen::Success && llt.rcond() > 1e-14) return llt.solve(rhs.transpose()).transpose();
  const double ridge = 1e-12 * std::max(1.0, gram.diagonal().maxCoeff());
  DenseMatrix g = gram;
  g.diagonal().array() += ridge;
  Eigen::LLT<DenseMatrix> retry(g);
  if (retry.info() != Eigen::Success || !(retry.rcond() > 0.0))
    throw SingularityError("cp_als: K x K Gram system singular after ridge regularization");
  return retry.solve(rhs.transpose()).transpose();
}

inline Vector normalize_columns(DenseMatrix& x) {
  Vector norms = x.colwise().norm().transpose();
  for (Eigen::Index p = 0; p < x.cols(); ++p)
    if (norms(p) > 0.0) x.col(p) /= norms(p);
  return norms;
}

}  // namespace detail

/// Fits a rank-k CP model by alternating least squares. Deterministic for a given seed.
inline std::pair<KruskalModel, FitTrace> cp_als(const SparseTensor3& z, Index k, const CpOptions& opt = {}) {
  if (k == 0) throw ParameterError("cp_als: rank must be positive");
  if (!(opt.tol >= 0.0) || opt.max_iter == 0) throw ParameterError("cp_als: invalid stopping parameters");
  const double znorm = frobenius_norm(z);
  if (znorm == 0.0) throw DomainError("cp_als: zero tensor");
  const Dims d = z.dims();
  const auto kk = static_cast<Eigen::Index>(k);

  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  auto init = [&](Index rows) {
    DenseMatrix x(static_cast<Eigen::Index>(rows), kk);
    for (Eigen::Index c = 0; c < kk; ++c)
      for (Eigen::Index r = 0; r < x.rows(); ++r) x(r, c) = unif(rng);
    detail::normalize_columns(x);
    return x;
  };
  DenseMatrix a = init(d.rows), b = init(d.cols), c = init(d.steps);
  Vector lambda = Vector::Ones(kk);

  // Dense kernel once the tensor is mostly filled in; same contraction, BLAS-shaped.
  const bool dense = static_cast<double>(z.nnz()) >= 0.25 * static_cast<double>(d.size()) && d.size() <= 100'000'000;
  DenseTensor3 zd;
  if (dense) zd = DenseTensor3(z);
  auto kernel = [&](int mode) { return dense ? mttkrp(zd, a, b, c, mode) : mttkrp(z, a, b, c, mode); };

  FitTrace trace;
  double fit_old = 0.0;
  for (Index it = 0; it < opt.max_iter; ++it) {
    // A and B keep unit columns, lambda rides on C.
    c = c * lambda.asDiagonal();
    a = detail::solve_gram((b.transpose() * b).cwiseProduct(c.transpose() * c), kernel(1));
    detail::normalize_columns(a);
    b = detail::solve_gram((a.transpose() * a).cwiseProduct(c.transpose() * c), kernel(2));
    detail::normalize_columns(b);
    const DenseMatrix m3 = kernel(3);
    c = detail::solve_gram((a.transpose() * a).cwiseProduct(b.transpose() * b), m3);

    const double inner = m3.cwiseProduct(c).sum();
    const double mnorm2 =
        (a.transpose() * a).cwiseProduct(b.transpose() * b).cwiseProduct(c.transpose() * c).sum();
    const double res2 = znorm * znorm + mnorm2 - 2.0 * inner;
    const double fit = 1.0 - std::sqrt(std::max(res2, 0.0)) / znorm;
    lambda = detail::normalize_columns(c);
    trace.fit_history.push_back(fit);
    trace.iterations = it + 1;
    if (it > 0 && std::abs(fit - fit_old) < opt.tol) {
      trace.converged = true;
      break;
    }
    fit_old = fit;
  }
  return {normalize_model(KruskalModel{lambda, a, b, c}), trace};
}

/// gamma_k = mean of the last t0 entries of C_k; scores sum_k gamma_k lambda_k A_k B_k^T.
inline ScoreModel cp_heuristic_scores(const KruskalModel& m, Index t0) {
  m.validate();
  const Index steps = static_cast<Index>(m.c.rows());
  if (t0 == 0 || t0 > steps) throw ParameterError("cp_heuristic_scores: t0 must lie in [1, T]");
  Vector gamma = m.c.bottomRows(static_cast<Eigen::Index>(t0)).colwise().mean().transpose();
  return ScoreModel::single(m.a, gamma.cwiseProduct(m.lambda), m.b);
}

/// Factor match score with greedy matching: each round takes the globally best remaining pair.
inline double fms(const KruskalModel& m1, const KruskalModel& m2) {
  if (m1.dims() != m2.dims() || m1.rank() != m2.rank()) throw DimensionError("fms: models differ in shape or rank");
  const KruskalModel x = normalize_model(m1), y = normalize_model(m2);
  const Eigen::Index k = x.lambda.size();
  DenseMatrix score = (x.a.transpose() * y.a).cwiseAbs().cwiseProduct((x.b.transpose() * y.b).cwiseAbs())
                          .cwiseProduct((x.c.transpose() * y.c).cwiseAbs());
  for (Eigen::Index p = 0; p < k; ++p)
    for (Eigen::Index q = 0; q < k; ++q) {
      const double hi = std::max(x.lambda(p), y.lambda(q));
      const double pen = hi > 0.0 ? 1.0 - std::abs(x.lambda(p) - y.lambda(q)) / hi : 1.0;
      score(p, q) *= pen;
    }
  std::vector<bool> used_r(k, false), used_c(k, false);
  double total = 0.0;
  for (Eigen::Index round = 0; round < k; ++round) {
    double best = -1.0;
    Eigen::Index br = -1, bc = -1;
    for (Eigen::Index p = 0; p < k; ++p) {
      if (used_r[p]) continue;
      for (Eigen::Index q = 0; q < k; ++q) {
        if (used_c[q]) continue;
        if (score(p, q) > best) {
          best = score(p, q);
          br = p;
          bc = q;
        }
      }
    }
    used_r[br] = used_c[bc] = true;
    total += best;
  }
  return total / static_cast<double>(k);
}

// Model file: lambda on one line, then A, B and C in the factor-file format.

inline void write_model(std::ostream& out, const KruskalModel& m) {
  for (Eigen::Index p = 0; p < m.lambda.size(); ++p) {
    if (p) out << ' ';
    out << detail::format_double(m.lambda(p));
  }
  out << '\n';
  write_matrix(out, m.a);
  write_matrix(out, m.b);
  write_matrix(out, m.c);
}

inline KruskalModel read_model(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("model file: missing lambda line", 1);
  std::vector<double> lam;
  for (auto tok : detail::split_ws(line)) {
    double v;
    if (!detail::parse_double(tok, v) || !std::isfinite(v)) throw ParseError("model file: bad lambda value", 1);
    lam.push_back(v);
  }
  KruskalModel m;
  m.lambda = Eigen::Map<Vector>(lam.data(), static_cast<Eigen::Index>(lam.size()));
  m.a = read_matrix(in);
  m.b = read_matrix(in);
  m.c = read_matrix(in);
  m.validate();
  return m;
}

inline void save_model(const std::string& path, const KruskalModel& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  write_model(out, m);
}

inline KruskalModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  return read_model(in);
}

}  // namespace tlp
