#pragma once

// Factored link-score models (TSVD, bipartite Katz, truncated Katz, ensembles)
// and the bounded-memory queries on them.

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <functional>
#include <iostream>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include "tlp/errors.hpp"
#include "tlp/lowrank.hpp"
#include "tlp/tensor.hpp"

namespace tlp {

using WarningSink = std::function<void(const std::string&)>;

inline WarningSink stderr_warnings() {
  return [](const std::string& msg) { std::cerr << "warning: " << msg << '\n'; };
}

/// One factored term w * U diag(d) V^T.
struct ScoreTerm {
  double weight = 1.0;
  DenseMatrix u;  // M x K
  Vector d;       // K
  DenseMatrix v;  // N x K

  Index rank() const { return static_cast<Index>(d.size()); }
};

/// S = sum over terms of w * U diag(d) V^T. Pair queries cost O(sum K).
class ScoreModel {
 public:
  ScoreModel(Index rows, Index cols) : rows_(rows), cols_(cols) {}
  ScoreModel(Index rows, Index cols, std::vector<ScoreTerm> terms) : rows_(rows), cols_(cols) {
    for (auto& t : terms) add_term(std::move(t));
  }

  static ScoreModel single(DenseMatrix u, Vector d, DenseMatrix v, double weight = 1.0) {
    ScoreModel s(static_cast<Index>(u.rows()), static_cast<Index>(v.rows()));
    s.add_term({weight, std::move(u), std::move(d), std::move(v)});
    return s;
  }

  void add_term(ScoreTerm t) {
    if (static_cast<Index>(t.u.rows()) != rows_ || static_cast<Index>(t.v.rows()) != cols_)
      throw DimensionError("score term does not match model dimensions");
    if (t.u.cols() != t.d.size() || t.v.cols() != t.d.size())
      throw DimensionError("score term factor ranks disagree");
    terms_.push_back(std::move(t));
  }

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  const std::vector<ScoreTerm>& terms() const { return terms_; }

  double score_pair(Index i, Index j) const {
    if (i >= rows_ || j >= cols_) throw ParameterError("score_pair: index out of range");
    double s = 0.0;
    for (const auto& t : terms_) {
      if (t.weight == 0.0) continue;
      s += t.weight * (t.u.row(i).transpose().cwiseProduct(t.d)).dot(t.v.row(j).transpose());
    }
    return s;
  }

  /// Scores of rows [first, first + count) into out (count x N).
  void score_rows(Index first, Index count, Eigen::Ref<DenseMatrix> out) const {
    out.setZero();
    for (const auto& t : terms_) {
      if (t.weight == 0.0) continue;
      DenseMatrix left = t.u.middleRows(first, count) * (t.weight * t.d).asDiagonal();
      out.noalias() += left * t.v.transpose();
    }
  }

  DenseMatrix materialize() const {
    DenseMatrix s(rows_, cols_);
    score_rows(0, rows_, s);
    return s;
  }

  /// Exact Frobenius norm from Gram matrices; no M x N materialization.
  double frobenius_norm() const {
    double total = 0.0;
    for (const auto& a : terms_)
      for (const auto& b : terms_) {
        if (a.weight == 0.0 || b.weight == 0.0) continue;
        DenseMatrix gu = a.u.transpose() * b.u;
        DenseMatrix gv = a.v.transpose() * b.v;
        total += a.weight * b.weight * (a.d.asDiagonal() * gu * b.d.asDiagonal()).cwiseProduct(gv).sum();
      }
    return std::sqrt(std::max(total, 0.0));
  }

 private:
  Index rows_ = 0, cols_ = 0;
  std::vector<ScoreTerm> terms_;
};

// ---------------------------------------------------------------------------
// Row-block scorers. Anything that can fill a block of score rows can be
// ranked and evaluated without materializing M x N values.

class RowScorer {
 public:
  using BlockFn = std::function<void(Index first, Index count, Eigen::Ref<DenseMatrix> out)>;

  RowScorer(Index rows, Index cols, BlockFn fn) : rows_(rows), cols_(cols), fn_(std::move(fn)) {}

  static RowScorer of(const ScoreModel& s) {
    return RowScorer(s.rows(), s.cols(),
                     [&s](Index first, Index count, Eigen::Ref<DenseMatrix> out) { s.score_rows(first, count, out); });
  }
  static RowScorer of(const DenseMatrix& s) {
    return RowScorer(static_cast<Index>(s.rows()), static_cast<Index>(s.cols()),
                     [&s](Index first, Index count, Eigen::Ref<DenseMatrix> out) { out = s.middleRows(first, count); });
  }

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  void score_rows(Index first, Index count, Eigen::Ref<DenseMatrix> out) const { fn_(first, count, out); }

 private:
  Index rows_, cols_;
  BlockFn fn_;
};

inline constexpr Index kRowBlock = 64;

/// Calls visit(i, j, score) for every pair in row-major order, one block of rows at a time.
template <typename Visit>
void for_each_score(const RowScorer& scorer, Visit&& visit) {
  DenseMatrix block;
  for (Index first = 0; first < scorer.rows(); first += kRowBlock) {
    const Index count = std::min(kRowBlock, scorer.rows() - first);
    block.resize(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(scorer.cols()));
    scorer.score_rows(first, count, block);
    for (Index r = 0; r < count; ++r)
      for (Index j = 0; j < scorer.cols(); ++j) visit(first + r, j, block(r, j));
  }
}

struct ScoredPair {
  Index slice = 0;  // test step for multi-step scorers, 0 otherwise
  Index i = 0;
  Index j = 0;
  double score = 0.0;

  friend bool operator==(const ScoredPair&, const ScoredPair&) = default;
};

/// Descending score, ties by ascending (slice, i, j).
inline bool ranks_before(const ScoredPair& a, const ScoredPair& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.slice != b.slice) return a.slice < b.slice;
  if (a.i != b.i) return a.i < b.i;
  return a.j < b.j;
}

/// Bounded top-k accumulator; memory O(k).
class TopK {
 public:
  explicit TopK(Index k) : k_(k) {}

  void offer(const ScoredPair& p) {
    if (k_ == 0) return;
    if (heap_.size() < k_) {
      heap_.push_back(p);
      std::push_heap(heap_.begin(), heap_.end(), ranks_before);
    } else if (ranks_before(p, heap_.front())) {
      std::pop_heap(heap_.begin(), heap_.end(), ranks_before);
      heap_.back() = p;
      std::push_heap(heap_.begin(), heap_.end(), ranks_before);
    }
  }

  std::vector<ScoredPair> sorted() const {
    auto out = heap_;
    std::sort(out.begin(), out.end(), ranks_before);
    return out;
  }

 private:
  Index k_;
  std::vector<ScoredPair> heap_;  // heap top is the worst retained pair
};

using PairMask = std::function<bool(Index i, Index j)>;

/// Exact top-k pairs, streamed in blocks of 64 rows. mask(i, j) == false excludes a pair.
inline std::vector<ScoredPair> top_k_scores(const RowScorer& scorer, Index k, const PairMask& mask = {}) {
  if (k == 0) throw ParameterError("top_k_scores: k must be positive");
  if (k > scorer.rows() * scorer.cols()) throw ParameterError("top_k_scores: k exceeds M*N");
  TopK acc(k);
  for_each_score(scorer, [&](Index i, Index j, double s) {
    if (!mask || mask(i, j)) acc.offer({0, i, j, s});
  });
  return acc.sorted();
}

inline std::vector<ScoredPair> top_k_scores(const ScoreModel& s, Index k, const PairMask& mask = {}) {
  return top_k_scores(RowScorer::of(s), k, mask);
}

/// Score report: header "M N k", then "i j score" lines (1-based), descending.
inline void write_score_report(std::ostream& out, Index rows, Index cols, const std::vector<ScoredPair>& top) {
  out << rows << ' ' << cols << ' ' << top.size() << '\n';
  for (const auto& p : top) out << (p.i + 1) << ' ' << (p.j + 1) << ' ' << detail::format_double(p.score) << '\n';
}

// ---------------------------------------------------------------------------
// Score constructions

inline ScoreModel tsvd_scores(const SvdFactors& f, Index k) {
  if (k == 0 || k > f.rank()) throw ParameterError("tsvd_scores: k must lie in [1, available triplets]");
  return ScoreModel::single(f.u.leftCols(k), f.sigma.head(k), f.v.leftCols(k));
}

/// psi+_p = 1 / (1 - beta^2 sigma_p^2) - 1: the diagonal of the same-side Katz blocks.
inline Vector psi_plus(const Vector& sigma, double beta) {
  Vector out(sigma.size());
  for (Eigen::Index p = 0; p < sigma.size(); ++p) {
    const double bs = beta * sigma(p);
    if (std::abs(1.0 - bs) == 0.0 || std::abs(1.0 + bs) == 0.0) throw SingularityError("psi_plus: beta*sigma = 1");
    out(p) = bs * bs / (1.0 - bs * bs);
  }
  return out;
}

/// psi-_p = beta sigma_p / (1 - beta^2 sigma_p^2). Nonpositive entries are reported to `warn`.
inline Vector psi_minus(const Vector& sigma, double beta, const WarningSink& warn = stderr_warnings()) {
  Vector out(sigma.size());
  bool nonpositive = false;
  for (Eigen::Index p = 0; p < sigma.size(); ++p) {
    const double bs = beta * sigma(p);
    if (bs == 1.0 || bs == -1.0) throw SingularityError("psi_minus: beta*sigma_p = 1 at p = " + std::to_string(p + 1));
    out(p) = bs / (1.0 - bs * bs);
    if (out(p) <= 0.0 && beta != 0.0) nonpositive = true;
  }
  if (nonpositive && warn) {
    const double s1 = sigma.size() ? sigma.cwiseAbs().maxCoeff() : 0.0;
    warn("psi- has nonpositive entries; beta must stay below 1/sigma_1 = " + detail::format_double(1.0 / s1));
  }
  return out;
}

inline constexpr Index kKatzDenseGuard = 2000;

/// Spectral radius of [[0, X], [X^T, 0]], i.e. sigma_1(X).
inline double bipartite_spectral_radius(const DenseMatrix& x) {
  if (x.size() == 0 || x.isZero(0.0)) return 0.0;
  if (static_cast<Index>(x.rows() + x.cols()) <= kKatzDenseGuard)
    return Eigen::BDCSVD<DenseMatrix>(x).singularValues()(0);
  const auto f = truncated_svd(x, 1);
  return f.rank() ? f.sigma(0) : 0.0;
}

/// Upper-right block of (I - beta Xhat)^{-1} - I for Xhat = [[0, X], [X^T, 0]], by dense LU solve.
inline DenseMatrix katz_scores_exact(const DenseMatrix& x, double beta) {
  const Index m = static_cast<Index>(x.rows()), n = static_cast<Index>(x.cols());
  if (m + n > kKatzDenseGuard) throw SizeError("katz_scores_exact: M + N exceeds the dense guard of 2000");
  if (!(beta >= 0.0 && beta < 1.0)) throw ParameterError("katz_scores_exact: beta must lie in [0, 1)");
  const double s1 = bipartite_spectral_radius(x);
  if (beta * s1 >= 1.0)
    throw DivergenceError("katz_scores_exact: beta*sigma_1 >= 1; largest admissible beta is below " +
                          detail::format_double(1.0 / s1));
  if (beta == 0.0) return DenseMatrix::Zero(m, n);
  const Eigen::Index p = static_cast<Eigen::Index>(m + n);
  DenseMatrix sys = DenseMatrix::Identity(p, p);
  sys.topRightCorner(m, n) = -beta * x;
  sys.bottomLeftCorner(n, m) = -beta * x.transpose();
  // Right-hand side restricted to the last n identity columns gives the top-right block directly.
  DenseMatrix rhs = DenseMatrix::Zero(p, static_cast<Eigen::Index>(n));
  rhs.bottomRows(n).setIdentity();
  DenseMatrix sol = Eigen::PartialPivLU<DenseMatrix>(sys).solve(rhs);
  return sol.topRows(m);  // off-diagonal block of the identity is zero
}

/// U_K diag(psi-_K) V_K^T.
inline ScoreModel tkatz_scores(const SvdFactors& f, Index k, double beta, const WarningSink& warn = stderr_warnings()) {
  if (k == 0 || k > f.rank()) throw ParameterError("tkatz_scores: k must lie in [1, available triplets]");
  if (!(beta >= 0.0 && beta < 1.0)) throw ParameterError("tkatz_scores: beta must lie in [0, 1)");
  if (f.rank() && beta * f.sigma(0) >= 1.0)
    throw DivergenceError("tkatz_scores: beta*sigma_1 >= 1; largest admissible beta is below " +
                          detail::format_double(1.0 / f.sigma(0)));
  return ScoreModel::single(f.u.leftCols(k), psi_minus(f.sigma.head(k), beta, warn), f.v.leftCols(k));
}

namespace detail {
inline bool lex_less(const double* a, Eigen::Index na, const double* b, Eigen::Index nb) {
  return std::lexicographical_compare(a, a + na, b, b + nb);
}
/// Content-based total order so that ensembles do not depend on input order.
inline bool term_order(const ScoreTerm& a, const ScoreTerm& b) {
  if (a.d.size() != b.d.size()) return a.d.size() < b.d.size();
  if (a.weight != b.weight) return a.weight < b.weight;
  if (a.d != b.d) return lex_less(a.d.data(), a.d.size(), b.d.data(), b.d.size());
  if (a.u != b.u) return lex_less(a.u.data(), a.u.size(), b.u.data(), b.u.size());
  return lex_less(a.v.data(), a.v.size(), b.v.data(), b.v.size());
}
}  // namespace detail

/// sum_K S(K) / ||S(K)||_F. Every input must be a single-term model.
inline ScoreModel ensemble_scores(const std::vector<ScoreModel>& models) {
  if (models.empty()) throw ParameterError("ensemble_scores: no models");
  const Index m = models.front().rows(), n = models.front().cols();
  std::vector<ScoreTerm> terms;
  for (const auto& s : models) {
    if (s.rows() != m || s.cols() != n) throw DimensionError("ensemble_scores: models differ in shape");
    if (s.terms().size() != 1) throw ParameterError("ensemble_scores: each model must have exactly one term");
    const double norm = s.frobenius_norm();
    if (!(norm > 0.0)) throw DomainError("ensemble_scores: model with zero Frobenius norm");
    ScoreTerm t = s.terms().front();
    t.weight /= norm;
    terms.push_back(std::move(t));
  }
  std::sort(terms.begin(), terms.end(), detail::term_order);
  return ScoreModel(m, n, std::move(terms));
}

// ---------------------------------------------------------------------------
// Score-model files: "terms n", then per term "weight w", d as "rows 1" matrix, U, V.

inline void write_score_model(std::ostream& out, const ScoreModel& s) {
  out << "terms " << s.terms().size() << '\n';
  for (const auto& t : s.terms()) {
    out << "weight " << detail::format_double(t.weight) << '\n';
    write_matrix(out, DenseMatrix(t.d.transpose()));
    write_matrix(out, t.u);
    write_matrix(out, t.v);
  }
}

inline ScoreModel read_score_model(std::istream& in) {
  std::string tag;
  std::size_t count = 0;
  if (!(in >> tag >> count) || tag != "terms") throw ParseError("score model: expected 'terms n'", 0);
  std::vector<ScoreTerm> terms;
  for (std::size_t n = 0; n < count; ++n) {
    std::string wtok;
    ScoreTerm t;
    if (!(in >> tag >> wtok) || tag != "weight" || !detail::parse_double(wtok, t.weight))
      throw ParseError("score model: expected 'weight w'", 0);
    DenseMatrix d = read_matrix(in);
    if (d.rows() != 1) throw ParseError("score model: diagonal must be a single row", 0);
    t.d = d.row(0).transpose();
    t.u = read_matrix(in);
    t.v = read_matrix(in);
    terms.push_back(std::move(t));
  }
  if (terms.empty()) throw ParseError("score model without terms", 0);
  const Index m = static_cast<Index>(terms.front().u.rows()), nn = static_cast<Index>(terms.front().v.rows());
  return ScoreModel(m, nn, std::move(terms));
}

}  // namespace tlp
