#pragma once

// Collapse the time mode of a tensor into one M x N matrix.

#include <Eigen/Sparse>

#include <cmath>
#include <variant>

#include "tlp/errors.hpp"
#include "tlp/tensor.hpp"

namespace tlp {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor>;

/// M x N link matrix stored sparse or dense; both expose the products the SVD needs.
class LinkMatrix {
 public:
  LinkMatrix() = default;
  explicit LinkMatrix(DenseMatrix x) : store_(std::move(x)) {}
  explicit LinkMatrix(SparseMatrix x) : store_(std::move(x)) { std::get<SparseMatrix>(store_).makeCompressed(); }

  Index rows() const {
    return std::visit([](const auto& x) { return static_cast<Index>(x.rows()); }, store_);
  }
  Index cols() const {
    return std::visit([](const auto& x) { return static_cast<Index>(x.cols()); }, store_);
  }
  bool is_sparse() const { return std::holds_alternative<SparseMatrix>(store_); }
  Index nnz() const {
    if (is_sparse()) return static_cast<Index>(std::get<SparseMatrix>(store_).nonZeros());
    const auto& d = std::get<DenseMatrix>(store_);
    return static_cast<Index>((d.array() != 0.0).count());
  }

  Vector multiply(const Vector& v) const {
    return std::visit([&](const auto& x) -> Vector { return x * v; }, store_);
  }
  Vector multiply_transpose(const Vector& u) const {
    return std::visit([&](const auto& x) -> Vector { return x.transpose() * u; }, store_);
  }

  DenseMatrix to_dense() const {
    if (is_sparse()) return DenseMatrix(std::get<SparseMatrix>(store_));
    return std::get<DenseMatrix>(store_);
  }
  double operator()(Index i, Index j) const {
    if (is_sparse()) return std::get<SparseMatrix>(store_).coeff(i, j);
    return std::get<DenseMatrix>(store_)(i, j);
  }
  double frobenius_norm() const {
    return std::visit([](const auto& x) { return x.norm(); }, store_);
  }
  const SparseMatrix* sparse() const { return std::get_if<SparseMatrix>(&store_); }

 private:
  std::variant<DenseMatrix, SparseMatrix> store_;
};

enum class CollapseKind { CT, CWT };

struct CollapseSpec {
  CollapseKind kind = CollapseKind::CWT;
  double theta = 0.2;

  void validate() const {
    if (kind == CollapseKind::CWT && !(theta > 0.0 && theta < 1.0))
      throw ParameterError("collapse theta must lie in (0, 1)");
  }
};

/// Weight applied to slice t (0-based) of a T-step tensor under CWT: (1-theta)^(T-1-t).
inline double cwt_weight(double theta, Index t, Index steps) {
  return std::pow(1.0 - theta, static_cast<double>(steps - 1 - t));
}

namespace detail {

inline LinkMatrix weighted_collapse(const SparseTensor3& z, const std::vector<double>& weights) {
  const Dims& d = z.dims();
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(z.nnz());
  for (const auto& e : z.entries()) trips.emplace_back(e.i, e.j, weights[e.t] * e.value);
  SparseMatrix x(static_cast<Eigen::Index>(d.rows), static_cast<Eigen::Index>(d.cols));
  x.setFromTriplets(trips.begin(), trips.end());  // sums duplicates across t
  x.prune(0.0);
  const double density = static_cast<double>(x.nonZeros()) / (static_cast<double>(d.rows) * static_cast<double>(d.cols));
  if (density < 0.10) return LinkMatrix(std::move(x));
  return LinkMatrix(DenseMatrix(x));
}

}  // namespace detail

/// X[i,j] = sum_t Z[i,j,t].
inline LinkMatrix collapse_ct(const SparseTensor3& z) {
  return detail::weighted_collapse(z, std::vector<double>(z.dims().steps, 1.0));
}

/// X[i,j] = sum_t (1-theta)^(T-t) Z[i,j,t]; the most recent slice has weight 1.
inline LinkMatrix collapse_cwt(const SparseTensor3& z, double theta) {
  if (!(theta > 0.0 && theta < 1.0)) throw ParameterError("collapse_cwt: theta must lie in (0, 1)");
  std::vector<double> w(z.dims().steps);
  for (Index t = 0; t < w.size(); ++t) w[t] = cwt_weight(theta, t, w.size());
  return detail::weighted_collapse(z, w);
}

inline LinkMatrix collapse(const SparseTensor3& z, const CollapseSpec& spec) {
  spec.validate();
  return spec.kind == CollapseKind::CT ? collapse_ct(z) : collapse_cwt(z, spec.theta);
}

}  // namespace tlp
