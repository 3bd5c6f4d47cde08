#pragma once

// Ranking evaluation: midrank AUC, ROC curves and top-k hit counts over
// streamed row-block scores, under the all-links and new-links protocols.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "tlp/collapse.hpp"
#include "tlp/errors.hpp"
#include "tlp/matscore.hpp"
#include "tlp/tensor.hpp"

namespace tlp {

/// Binary labels over an M x N grid. Pairs are row-major linear indices i*N + j.
/// Everything not excluded and not positive is a negative.
struct LabeledPairs {
  Index rows = 0, cols = 0;
  std::vector<Index> positives;  // sorted, unique
  std::vector<Index> excluded;   // sorted, unique, disjoint from positives

  Index universe() const { return rows * cols - excluded.size(); }
  Index positive_count() const { return positives.size(); }
  Index negative_count() const { return universe() - positives.size(); }
  bool is_positive(Index i, Index j) const { return std::binary_search(positives.begin(), positives.end(), i * cols + j); }
  bool is_excluded(Index i, Index j) const { return std::binary_search(excluded.begin(), excluded.end(), i * cols + j); }
};

enum class Protocol { All, New };

inline std::string to_string(Protocol p) { return p == Protocol::All ? "all" : "new"; }

inline Protocol parse_protocol(const std::string& s) {
  if (s == "all") return Protocol::All;
  if (s == "new") return Protocol::New;
  throw ParameterError("protocol must be 'all' or 'new', got '" + s + "'");
}

inline LabeledPairs binarize_test(const DenseMatrix& z) {
  LabeledPairs out{static_cast<Index>(z.rows()), static_cast<Index>(z.cols()), {}, {}};
  for (Eigen::Index i = 0; i < z.rows(); ++i)
    for (Eigen::Index j = 0; j < z.cols(); ++j)
      if (z(i, j) != 0.0) out.positives.push_back(static_cast<Index>(i) * out.cols + static_cast<Index>(j));
  return out;
}

/// Positive wherever any step of the test tensor is nonzero.
inline LabeledPairs binarize_test(const SparseTensor3& z) {
  const Dims& d = z.dims();
  LabeledPairs out{d.rows, d.cols, {}, {}};
  for (const auto& e : z.entries())
    if (e.value != 0.0) out.positives.push_back(static_cast<Index>(e.i) * d.cols + e.j);
  std::sort(out.positives.begin(), out.positives.end());
  out.positives.erase(std::unique(out.positives.begin(), out.positives.end()), out.positives.end());
  return out;
}

/// One label set per test step.
inline std::vector<LabeledPairs> binarize_slices(const SparseTensor3& z) {
  const Dims& d = z.dims();
  std::vector<LabeledPairs> out;
  out.reserve(d.steps);
  for (Index t = 0; t < d.steps; ++t) {
    LabeledPairs lp{d.rows, d.cols, {}, {}};
    for (const auto& e : z.slice(t))
      if (e.value != 0.0) lp.positives.push_back(static_cast<Index>(e.i) * d.cols + e.j);
    std::sort(lp.positives.begin(), lp.positives.end());
    out.push_back(std::move(lp));
  }
  return out;
}

/// Drops every pair with a positive training total from both classes.
inline LabeledPairs new_link_filter(const LabeledPairs& labels, const SparseTensor3& z_train) {
  const Dims& d = z_train.dims();
  if (d.rows != labels.rows || d.cols != labels.cols) throw DimensionError("new_link_filter: train and test grids differ");
  std::vector<std::pair<Index, double>> sums;
  sums.reserve(z_train.nnz());
  for (const auto& e : z_train.entries()) sums.emplace_back(static_cast<Index>(e.i) * d.cols + e.j, e.value);
  std::sort(sums.begin(), sums.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<Index> seen;
  for (std::size_t p = 0; p < sums.size();) {
    std::size_t q = p;
    double total = 0.0;
    while (q < sums.size() && sums[q].first == sums[p].first) total += sums[q++].second;
    if (total > 0.0) seen.push_back(sums[p].first);
    p = q;
  }
  LabeledPairs out{labels.rows, labels.cols, {}, {}};
  std::set_difference(labels.positives.begin(), labels.positives.end(), seen.begin(), seen.end(),
                      std::back_inserter(out.positives));
  std::set_union(labels.excluded.begin(), labels.excluded.end(), seen.begin(), seen.end(),
                 std::back_inserter(out.excluded));
  return out;
}

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

struct EvalReport {
  double auc = 0.0;
  std::vector<RocPoint> roc;
  Index topk_correct = 0;
  Index k = 0;
  Protocol protocol = Protocol::All;
  Index positives = 0;
  Index negatives = 0;
  std::vector<ScoredPair> top;  // pooled top-k, best first
};

/// One test step: its scorer and its labels. Several slices pool into one ranking.
struct EvalSlice {
  RowScorer scorer;
  const LabeledPairs* labels;
};

namespace detail {

/// Streams the labeled, non-excluded pairs of one slice: visit(is_positive, i, j, score).
template <typename Visit>
void for_each_labeled(const EvalSlice& s, bool positives_only, Visit&& visit) {
  const LabeledPairs& lp = *s.labels;
  if (s.scorer.rows() != lp.rows || s.scorer.cols() != lp.cols) throw DimensionError("evaluation: scorer and labels differ in shape");
  auto pos = lp.positives.begin();
  auto exc = lp.excluded.begin();
  DenseMatrix block;
  for (Index first = 0; first < lp.rows; first += kRowBlock) {
    const Index count = std::min(kRowBlock, lp.rows - first);
    const Index end = (first + count) * lp.cols;
    if (positives_only && (pos == lp.positives.end() || *pos >= end)) continue;
    block.resize(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(lp.cols));
    s.scorer.score_rows(first, count, block);
    for (Index r = 0; r < count; ++r) {
      for (Index j = 0; j < lp.cols; ++j) {
        const Index lin = (first + r) * lp.cols + j;
        while (exc != lp.excluded.end() && *exc < lin) ++exc;
        if (exc != lp.excluded.end() && *exc == lin) continue;
        while (pos != lp.positives.end() && *pos < lin) ++pos;
        const bool is_pos = pos != lp.positives.end() && *pos == lin;
        if (positives_only && !is_pos) continue;
        const double v = block(r, j);
        if (!std::isfinite(v)) throw EvaluationError("evaluation: non-finite score at pair (" + std::to_string(first + r + 1) + ", " + std::to_string(j + 1) + ")");
        visit(is_pos, first + r, j, v);
      }
    }
  }
}

}  // namespace detail

/// Pooled midrank AUC, ROC and top-k hits. Memory is O(#positives + k); the scores are streamed twice.
inline EvalReport evaluate(const std::vector<EvalSlice>& slices, Index k, Protocol protocol = Protocol::All) {
  Index n_pos = 0, n_universe = 0;
  for (const auto& s : slices) {
    n_pos += s.labels->positive_count();
    n_universe += s.labels->universe();
  }
  const Index n_neg = n_universe - n_pos;
  if (n_pos == 0 || n_neg == 0) throw EvaluationError("evaluation needs at least one positive and one negative pair");
  if (k > n_universe) throw ParameterError("top-k size exceeds the evaluated pair universe");

  // Pass 1: positive scores, as sorted unique values with multiplicities.
  std::vector<double> pos_scores;
  pos_scores.reserve(n_pos);
  for (const auto& s : slices)
    detail::for_each_labeled(s, true, [&](bool, Index, Index, double v) { pos_scores.push_back(v); });
  std::sort(pos_scores.begin(), pos_scores.end());
  std::vector<double> uniq;
  std::vector<std::uint64_t> mult;
  for (double v : pos_scores) {
    if (uniq.empty() || uniq.back() != v) {
      uniq.push_back(v);
      mult.push_back(0);
    }
    ++mult.back();
  }
  pos_scores = {};
  const std::size_t q = uniq.size();
  std::vector<std::uint64_t> pos_above(q + 1, 0);  // pos_above[c] = positives with value >= uniq[c]
  for (std::size_t c = q; c-- > 0;) pos_above[c] = pos_above[c + 1] + mult[c];

  // Pass 2: every negative lands strictly between two positive values or on one.
  std::vector<std::uint64_t> neg_between(q + 1, 0), neg_equal(q, 0);
  std::uint64_t concordant2 = 0;  // 2 * (wins + ties / 2)
  TopK top(k);
  for (std::size_t sidx = 0; sidx < slices.size(); ++sidx) {
    detail::for_each_labeled(slices[sidx], false, [&](bool is_pos, Index i, Index j, double v) {
      if (k > 0) top.offer({sidx, i, j, v});
      if (is_pos) return;
      const std::size_t c = static_cast<std::size_t>(std::upper_bound(uniq.begin(), uniq.end(), v) - uniq.begin());
      if (c > 0 && uniq[c - 1] == v) {
        ++neg_equal[c - 1];
        concordant2 += 2 * pos_above[c] + mult[c - 1];
      } else {
        ++neg_between[c];
        concordant2 += 2 * pos_above[c];
      }
    });
  }

  EvalReport rep;
  rep.protocol = protocol;
  rep.positives = n_pos;
  rep.negatives = n_neg;
  rep.k = k;
  rep.auc = static_cast<double>(concordant2) / (2.0 * static_cast<double>(n_pos) * static_cast<double>(n_neg));

  // ROC: thresholds descend through the positive values; negatives strictly between two of them add a
  // horizontal step, a tie block adds a diagonal one.
  const double P = static_cast<double>(n_pos), N = static_cast<double>(n_neg);
  std::uint64_t fp = 0, tp = 0;
  rep.roc.push_back({0.0, 0.0});
  for (std::size_t c = q + 1; c-- > 0;) {
    if (neg_between[c] > 0) {
      fp += neg_between[c];
      rep.roc.push_back({static_cast<double>(fp) / N, static_cast<double>(tp) / P});
    }
    if (c == 0) break;
    fp += neg_equal[c - 1];
    tp += mult[c - 1];
    rep.roc.push_back({static_cast<double>(fp) / N, static_cast<double>(tp) / P});
  }
  if (rep.roc.back().fpr != 1.0 || rep.roc.back().tpr != 1.0) rep.roc.push_back({1.0, 1.0});

  if (k > 0) {
    rep.top = top.sorted();
    for (const auto& p : rep.top)
      if (slices[p.slice].labels->is_positive(p.i, p.j)) ++rep.topk_correct;
  }
  return rep;
}

inline EvalReport evaluate(const RowScorer& scorer, const LabeledPairs& labels, Index k, Protocol protocol = Protocol::All) {
  return evaluate(std::vector<EvalSlice>{{scorer, &labels}}, k, protocol);
}

inline double auc(const RowScorer& scorer, const LabeledPairs& labels) { return evaluate(scorer, labels, 0).auc; }

inline Index top_k_correct(const RowScorer& scorer, const LabeledPairs& labels, Index k) {
  if (k == 0) throw ParameterError("top_k_correct: k must be positive");
  Index n = labels.universe();
  if (k > n) throw ParameterError("top_k_correct: k exceeds the pair universe");
  PairMask mask;
  if (!labels.excluded.empty()) mask = [&labels](Index i, Index j) { return !labels.is_excluded(i, j); };
  Index hits = 0;
  for (const auto& p : top_k_scores(scorer, k, mask))
    if (labels.is_positive(p.i, p.j)) ++hits;
  return hits;
}

inline double trapezoid_area(const std::vector<RocPoint>& roc) {
  double a = 0.0;
  for (std::size_t p = 1; p < roc.size(); ++p) a += (roc[p].fpr - roc[p - 1].fpr) * (roc[p].tpr + roc[p - 1].tpr) / 2.0;
  return a;
}

inline void write_roc_csv(std::ostream& out, const std::vector<RocPoint>& roc) {
  out << "fpr,tpr\n";
  for (const auto& p : roc) out << detail::format_double(p.fpr) << ',' << detail::format_double(p.tpr) << '\n';
}

}  // namespace tlp
