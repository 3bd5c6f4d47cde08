#pragma once

// Truncated SVD by Golub-Kahan-Lanczos bidiagonalization with full
// reorthogonalization, plus a dense SVD used as an oracle and for small inputs.

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <functional>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <random>

#include "tlp/collapse.hpp"
#include "tlp/errors.hpp"
#include "tlp/tensor.hpp"

namespace tlp {

/// Leading singular triplets: X ~ U diag(sigma) V^T with orthonormal U, V and sigma nonincreasing.
struct SvdFactors {
  DenseMatrix u;
  Vector sigma;
  DenseMatrix v;
  /// Rank that was asked for; larger than rank() when X had fewer nonzero singular values.
  Index requested = 0;

  Index rank() const { return static_cast<Index>(sigma.size()); }
  bool deflated() const { return requested > rank(); }

  SvdFactors leading(Index k) const {
    if (k > rank()) throw ParameterError("requested more singular triplets than available");
    return {u.leftCols(k), sigma.head(k), v.leftCols(k), k};
  }
};

/// Lanczos did not meet the residual tolerance; the best iterate is attached.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, SvdFactors best) : Error(what), best_(std::move(best)) {}
  const SvdFactors& best_iterate() const { return best_; }

 private:
  SvdFactors best_;
};

struct SvdOptions {
  double tol = 1e-10;
  /// Lanczos step budget; defaults to 10 k + 100.
  std::optional<Index> max_iter;
  std::uint64_t seed = 0x5eed;
};

/// Makes the largest-magnitude entry of every u column nonnegative, flipping v alongside.
inline void canonicalize_signs(DenseMatrix& u, DenseMatrix& v) {
  for (Eigen::Index p = 0; p < u.cols(); ++p) {
    Eigen::Index arg = 0;
    u.col(p).cwiseAbs().maxCoeff(&arg);
    if (u(arg, p) < 0.0) {
      u.col(p) = -u.col(p);
      v.col(p) = -v.col(p);
    }
  }
}

namespace detail {

inline void drop_negligible(SvdFactors& f) {
  if (f.sigma.size() == 0) return;
  const double cut = 1e-12 * f.sigma(0);
  Eigen::Index keep = 0;
  while (keep < f.sigma.size() && f.sigma(keep) > cut && f.sigma(keep) > 0.0) ++keep;
  f.u.conservativeResize(Eigen::NoChange, keep);
  f.v.conservativeResize(Eigen::NoChange, keep);
  f.sigma.conservativeResize(keep);
}

/// Orthogonalizes x against the first `count` columns of basis (two passes of classical Gram-Schmidt).
inline void reorthogonalize(Vector& x, const DenseMatrix& basis, Eigen::Index count) {
  if (count == 0) return;
  for (int pass = 0; pass < 2; ++pass) {
    Vector coeffs = basis.leftCols(count).transpose() * x;
    x.noalias() -= basis.leftCols(count) * coeffs;
  }
}

inline Vector random_orthogonal(std::mt19937_64& rng, const DenseMatrix& basis, Eigen::Index count) {
  std::normal_distribution<double> g;
  Vector x(basis.rows());
  for (int attempt = 0; attempt < 8; ++attempt) {
    for (Eigen::Index r = 0; r < x.size(); ++r) x(r) = g(rng);
    reorthogonalize(x, basis, count);
    const double n = x.norm();
    if (n > 1e-8) return x / n;
  }
  throw SingularityError("truncated_svd: could not extend Krylov basis");
}

using Apply = std::function<Vector(const Vector&)>;

/// Core Lanczos loop for an m x n operator with m >= n.
inline SvdFactors lanczos_svd(const Apply& mul, const Apply& mul_t, Index m, Index n, Index k, const SvdOptions& opt) {
  const Index budget = std::min<Index>(n, opt.max_iter.value_or(10 * k + 100));
  if (budget < k) throw ParameterError("truncated_svd: max_iter smaller than k");
  std::mt19937_64 rng(opt.seed);

  DenseMatrix ubasis(m, budget);
  DenseMatrix vbasis(n, budget + 1);
  std::vector<double> alpha, beta;  // beta[j] couples step j and j+1
  vbasis.col(0) = random_orthogonal(rng, vbasis, 0);

  double scale = 0.0;
  SvdFactors best;
  double best_worst = std::numeric_limits<double>::infinity();
  const double tiny = std::numeric_limits<double>::epsilon();

  Index steps = 0;
  for (Index j = 0; j < budget; ++j) {
    const Eigen::Index jj = static_cast<Eigen::Index>(j);
    Vector u = mul(vbasis.col(jj));
    if (j > 0) u -= beta[j - 1] * ubasis.col(jj - 1);
    reorthogonalize(u, ubasis, jj);
    double a = u.norm();
    scale = std::max(scale, a);
    if (a <= tiny * std::max(scale, 1e-300) * 1e3) {
      a = 0.0;
      u = random_orthogonal(rng, ubasis, jj);
    } else {
      u /= a;
    }
    ubasis.col(jj) = u;
    alpha.push_back(a);

    Vector w = mul_t(ubasis.col(jj)) - a * vbasis.col(jj);
    reorthogonalize(w, vbasis, jj + 1);
    double b = w.norm();
    scale = std::max(scale, b);
    const bool exhausted = (j + 1 == n);
    if (exhausted || b <= tiny * std::max(scale, 1e-300) * 1e3) {
      b = 0.0;
      if (!exhausted) w = random_orthogonal(rng, vbasis, jj + 1);
    } else {
      w /= b;
    }
    if (!exhausted) vbasis.col(jj + 1) = w;
    beta.push_back(b);
    steps = j + 1;

    const bool last = exhausted || steps == budget;
    if (steps < k || (!last && (steps - k) % 4 != 0)) continue;

    // Ritz values from the upper bidiagonal projection.
    const Eigen::Index s = static_cast<Eigen::Index>(steps);
    DenseMatrix bmat = DenseMatrix::Zero(s, s);
    for (Eigen::Index p = 0; p < s; ++p) {
      bmat(p, p) = alpha[p];
      if (p + 1 < s) bmat(p, p + 1) = beta[p];
    }
    Eigen::JacobiSVD<DenseMatrix> svd(bmat, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vector& sv = svd.singularValues();
    const double sigma1 = sv.size() ? sv(0) : 0.0;
    const Eigen::Index want = static_cast<Eigen::Index>(k);
    double worst = 0.0;
    for (Eigen::Index p = 0; p < want; ++p) {
      if (sv(p) <= 1e-12 * sigma1) break;  // deflated direction
      worst = std::max(worst, std::abs(beta[steps - 1] * svd.matrixU()(s - 1, p)));
    }
    SvdFactors cand{ubasis.leftCols(s) * svd.matrixU().leftCols(want), sv.head(want),
                    vbasis.leftCols(s) * svd.matrixV().leftCols(want), k};
    if (worst < best_worst) {
      best_worst = worst;
      best = cand;
    }
    if (worst <= opt.tol * sigma1 || exhausted) {
      drop_negligible(cand);
      return cand;
    }
  }
  drop_negligible(best);
  throw ConvergenceError("truncated_svd: residual tolerance not reached within " + std::to_string(budget) +
                             " Lanczos steps",
                         std::move(best));
}

}  // namespace detail

/// Leading k singular triplets of x. Triplets below 1e-12 sigma_1 are dropped (see SvdFactors::deflated()).
inline SvdFactors truncated_svd(const LinkMatrix& x, Index k, const SvdOptions& opt = {}) {
  const Index m = x.rows(), n = x.cols();
  if (k == 0) throw ParameterError("truncated_svd: k must be positive");
  if (k > std::min(m, n)) throw ParameterError("truncated_svd: k exceeds min(M, N)");
  SvdFactors f;
  if (m >= n) {
    f = detail::lanczos_svd([&](const Vector& v) { return x.multiply(v); },
                            [&](const Vector& u) { return x.multiply_transpose(u); }, m, n, k, opt);
  } else {
    f = detail::lanczos_svd([&](const Vector& v) { return x.multiply_transpose(v); },
                            [&](const Vector& u) { return x.multiply(u); }, n, m, k, opt);
    std::swap(f.u, f.v);
  }
  canonicalize_signs(f.u, f.v);
  return f;
}

inline SvdFactors truncated_svd(const DenseMatrix& x, Index k, const SvdOptions& opt = {}) {
  return truncated_svd(LinkMatrix(x), k, opt);
}

/// Full compact SVD via Eigen's divide-and-conquer solver. Guarded to min(M, N) <= 2000.
inline SvdFactors dense_svd(const DenseMatrix& x) {
  if (std::min(x.rows(), x.cols()) > 2000) throw SizeError("dense_svd: min(M, N) exceeds 2000");
  if (x.size() == 0) throw DimensionError("dense_svd: empty matrix");
  Eigen::BDCSVD<DenseMatrix> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
  SvdFactors f{svd.matrixU(), svd.singularValues(), svd.matrixV(), static_cast<Index>(std::min(x.rows(), x.cols()))};
  detail::drop_negligible(f);
  f.requested = f.rank();
  canonicalize_signs(f.u, f.v);
  return f;
}

// ---------------------------------------------------------------------------
// Factor files: header "rows cols", then one row of values per line.

inline void write_matrix(std::ostream& out, const DenseMatrix& a) {
  out << a.rows() << ' ' << a.cols() << '\n';
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    for (Eigen::Index c = 0; c < a.cols(); ++c) {
      if (c) out << ' ';
      out << detail::format_double(a(r, c));
    }
    out << '\n';
  }
}

inline DenseMatrix read_matrix(std::istream& in) {
  long long rows = -1, cols = -1;
  if (!(in >> rows >> cols) || rows < 0 || cols < 0) throw ParseError("factor file: bad 'rows cols' header", 0);
  DenseMatrix a(rows, cols);
  std::string tok;
  for (long long r = 0; r < rows; ++r)
    for (long long c = 0; c < cols; ++c) {
      double v;
      if (!(in >> tok) || !detail::parse_double(tok, v) || !std::isfinite(v))
        throw ParseError("factor file: bad value at row " + std::to_string(r + 1), 0);
      a(r, c) = v;
    }
  return a;
}

inline void write_vector(std::ostream& out, const Vector& v) {
  for (Eigen::Index p = 0; p < v.size(); ++p) out << detail::format_double(v(p)) << '\n';
}

inline Vector read_vector(std::istream& in) {
  std::vector<double> vals;
  std::string tok;
  while (in >> tok) {
    double v;
    if (!detail::parse_double(tok, v) || !std::isfinite(v)) throw ParseError("bad value in vector file", 0);
    vals.push_back(v);
  }
  return Eigen::Map<Vector>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

/// Writes prefix_U.txt, prefix_sigma.txt, prefix_V.txt.
inline void save_svd(const std::string& prefix, const SvdFactors& f) {
  auto open = [](const std::string& p) {
    std::ofstream o(p, std::ios::binary);
    if (!o) throw IoError("cannot write " + p);
    return o;
  };
  {
    auto o = open(prefix + "_U.txt");
    write_matrix(o, f.u);
  }
  {
    auto o = open(prefix + "_sigma.txt");
    write_vector(o, f.sigma);
  }
  {
    auto o = open(prefix + "_V.txt");
    write_matrix(o, f.v);
  }
}

inline SvdFactors load_svd(const std::string& prefix) {
  auto open = [](const std::string& p) {
    std::ifstream i(p);
    if (!i) throw IoError("cannot open " + p);
    return i;
  };
  SvdFactors f;
  {
    auto i = open(prefix + "_U.txt");
    f.u = read_matrix(i);
  }
  {
    auto i = open(prefix + "_sigma.txt");
    f.sigma = read_vector(i);
  }
  {
    auto i = open(prefix + "_V.txt");
    f.v = read_matrix(i);
  }
  if (f.u.cols() != f.sigma.size() || f.v.cols() != f.sigma.size())
    throw ParseError("svd factor files disagree on rank", 0);
  f.requested = f.rank();
  return f;
}

}  // namespace tlp
