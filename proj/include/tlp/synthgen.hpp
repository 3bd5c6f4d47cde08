#pragma once

// Simulated periodic link data: planted Kruskal structure with weekly
// temporal patterns and trends, swap corruption of large entries, additive
// noise, and the Last Period baseline scorer.

#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "tlp/cpmodel.hpp"
#include "tlp/errors.hpp"
#include "tlp/matscore.hpp"
#include "tlp/tensor.hpp"

namespace tlp {

enum class TrendMode { Increasing, Decreasing, Neutral };

inline const char* to_string(TrendMode m) {
  switch (m) {
    case TrendMode::Increasing: return "increasing";
    case TrendMode::Decreasing: return "decreasing";
    default: return "neutral";
  }
}

inline TrendMode parse_trend_mode(const std::string& s) {
  if (s == "increasing") return TrendMode::Increasing;
  if (s == "decreasing") return TrendMode::Decreasing;
  if (s == "neutral") return TrendMode::Neutral;
  throw ParameterError("unknown trend mode '" + s + "'");
}

/// Ramp endpoint: the column envelope goes from 1 to this value across all L(P+1) steps.
inline double trend_ratio(TrendMode m) {
  switch (m) {
    case TrendMode::Increasing: return 2.0;
    case TrendMode::Decreasing: return 0.5;
    default: return 1.0;
  }
}

using WeeklyTemplates = std::vector<std::vector<double>>;

inline WeeklyTemplates default_templates() {
  return {
      {1, 1, 1, 1, 1, 0, 0},                  // weekdays
      {0, 0, 0, 0, 0, 1, 1},                  // weekend
      {1, 0, 0, 0, 0, 0, 0},                  // Monday only
      {0, 1, 0, 1, 0, 0, 0},                  // Tuesday and Thursday
      {1, 0, 1, 0, 1, 0, 0},                  // Monday, Wednesday, Friday
      {1, 1, 1, 1, 1, 0, 0},                  // weekdays again, other entities
      {1, 1, 1, 1, 1, 1, 1},                  // daily
      {0.25, 0.25, 0.25, 0.5, 1, 0, 0},       // Friday peak
      {0, 0, 0, 0, 0, 1, 0},                  // Saturday only
      {0.5, 0.25, 0, 0, 0, 0, 1},             // Sunday, declining into the week
  };
}

struct SynthConfig {
  Index rows = 500;  // M
  Index cols = 400;  // N
  Index components = 10;
  Index period = 7;
  Index train_periods = 10;
  double p_top = 0.25;
  double p_swap = 0.5;
  double p_rand = 0.1;
  double temporal_noise = 0.1;
  std::uint64_t seed = 0;
  WeeklyTemplates templates = default_templates();
  std::vector<TrendMode> trends;  // empty: drawn uniformly per component

  Index steps() const { return period * (train_periods + 1); }
  Index train_steps() const { return period * train_periods; }

  void validate() const {
    if (rows == 0 || cols == 0 || components == 0 || period == 0 || train_periods == 0)
      throw ParameterError("synth: sizes must be positive");
    auto frac = [](double x) { return x >= 0.0 && x <= 1.0; };
    if (!frac(p_top) || !frac(p_swap) || !frac(p_rand)) throw ParameterError("synth: p_top, p_swap and p_rand must lie in [0, 1]");
    if (!(temporal_noise >= 0.0)) throw ParameterError("synth: temporal noise must be nonnegative");
    if (templates.size() < components) throw ParameterError("synth: fewer weekly templates than components");
    for (const auto& t : templates)
      if (t.size() != period) throw ParameterError("synth: template length differs from the period");
    if (!trends.empty() && trends.size() != components) throw ParameterError("synth: one trend mode per component required");
    if (static_cast<double>(rows) * static_cast<double>(cols) * static_cast<double>(train_steps()) > 4.0e9)
      throw SizeError("synth: training tensor too large to generate densely");
  }
};

struct SynthInstance {
  KruskalModel planted;  // lambda = 1, C over all L(P+1) steps
  std::vector<TrendMode> trends;
  SparseTensor3 z_train;  // degraded, L*P steps
  SparseTensor3 z_test;   // noise-free, L steps
};

/// count x k participation matrix. Membership count law: P(at least m+1 components) = 4^-m.
inline DenseMatrix gen_participation(Index count, Index k, std::mt19937_64& rng) {
  if (count == 0 || k == 0) throw ParameterError("gen_participation: sizes must be positive");
  std::uniform_real_distribution<double> unif(0.0, 1.0), strength(1.0, 10.0);
  DenseMatrix x = DenseMatrix::Zero(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(k));
  std::vector<Index> pool(k);
  for (Index r = 0; r < count; ++r) {
    Index m = 1;
    while (m < k && unif(rng) < 0.25) ++m;
    std::iota(pool.begin(), pool.end(), Index{0});
    for (Index p = 0; p < m; ++p) {
      std::uniform_int_distribution<Index> pick(p, k - 1);
      std::swap(pool[p], pool[pick(rng)]);
      x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(pool[p])) = strength(rng);
    }
  }
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    const double n = x.col(c).norm();
    if (n > 0.0) x.col(c) /= n;
  }
  return x;
}

inline DenseMatrix gen_participation(Index count, Index k, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return gen_participation(count, k, rng);
}

/// Memberships per row: hist[m] = rows with exactly m nonzeros.
inline std::vector<Index> membership_histogram(const DenseMatrix& x) {
  std::vector<Index> hist(static_cast<std::size_t>(x.cols()) + 1, 0);
  for (Eigen::Index r = 0; r < x.rows(); ++r) ++hist[static_cast<std::size_t>((x.row(r).array() != 0.0).count())];
  return hist;
}

struct TemporalFactors {
  DenseMatrix c;  // L(P+1) x K, unit columns; noisy training rows, clean test rows
  std::vector<TrendMode> trends;
};

/// Per column: tile the template P+1 times, apply the trend ramp, add noise scaled by the column's
/// standard deviation to the training rows only, then normalize the whole column.
inline TemporalFactors gen_temporal(const SynthConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  const Index T = cfg.steps(), LP = cfg.train_steps(), K = cfg.components;
  std::uniform_int_distribution<int> mode(0, 2);
  std::normal_distribution<double> gauss(0.0, 1.0);
  TemporalFactors out{DenseMatrix(static_cast<Eigen::Index>(T), static_cast<Eigen::Index>(K)), {}};
  for (Index k = 0; k < K; ++k) {
    const TrendMode tm = cfg.trends.empty() ? static_cast<TrendMode>(mode(rng)) : cfg.trends[k];
    out.trends.push_back(tm);
    const double r = trend_ratio(tm);
    Vector col(static_cast<Eigen::Index>(T));
    for (Index t = 0; t < T; ++t) {
      const double ramp = T > 1 ? 1.0 + (r - 1.0) * static_cast<double>(t) / static_cast<double>(T - 1) : 1.0;
      col(static_cast<Eigen::Index>(t)) = cfg.templates[k][t % cfg.period] * ramp;
    }
    const double sd = std::sqrt((col.array() - col.mean()).square().mean());
    for (Index t = 0; t < LP; ++t) col(static_cast<Eigen::Index>(t)) += cfg.temporal_noise * sd * gauss(rng);
    const double n = col.norm();
    if (n > 0.0) col /= n;
    out.c.col(static_cast<Eigen::Index>(k)) = col;
  }
  return out;
}

/// Dense expansion of sum_k A_k o B_k o C_k over the given temporal rows.
inline DenseTensor3 expand(const DenseMatrix& a, const DenseMatrix& b, const DenseMatrix& c) {
  DenseTensor3 z(Dims{static_cast<Index>(a.rows()), static_cast<Index>(b.rows()), static_cast<Index>(c.rows())});
  const Eigen::Index mn = a.rows() * b.rows();
  DenseMatrix kr(mn, a.cols());  // Khatri-Rao of B and A, i fastest
  for (Eigen::Index k = 0; k < a.cols(); ++k)
    for (Eigen::Index j = 0; j < b.rows(); ++j) kr.col(k).segment(j * a.rows(), a.rows()) = b(j, k) * a.col(k);
  Eigen::Map<DenseMatrix>(z.data().data(), mn, c.rows()).noalias() = kr * c.transpose();
  return z;
}

/// Swaps p_swap of the p_top largest-magnitude positions (over the dense position space) with uniformly
/// chosen positions, then adds p_rand * sd(z) * N(0, 1) to every entry.
inline void degrade_dense(DenseTensor3& z, double p_top, double p_swap, double p_rand, std::mt19937_64& rng) {
  auto frac = [](double x) { return x >= 0.0 && x <= 1.0; };
  if (!frac(p_top) || !frac(p_swap) || !frac(p_rand)) throw ParameterError("degrade: fractions must lie in [0, 1]");
  const std::size_t n = z.dims().size();
  double* v = z.data().data();
  double mean = 0.0;
  for (std::size_t p = 0; p < n; ++p) mean += v[p];
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (std::size_t p = 0; p < n; ++p) var += (v[p] - mean) * (v[p] - mean);
  const double sd = std::sqrt(var / static_cast<double>(n));

  const auto n_top = static_cast<std::size_t>(std::llround(p_top * static_cast<double>(n)));
  const auto n_swap = static_cast<std::size_t>(std::llround(p_swap * static_cast<double>(n_top)));
  if (n_swap > 0) {
    std::vector<std::uint64_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::uint64_t{0});
    auto larger = [v](std::uint64_t x, std::uint64_t y) {
      const double ax = std::abs(v[x]), ay = std::abs(v[y]);
      return ax != ay ? ax > ay : x < y;
    };
    if (n_top < n) std::nth_element(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_top), idx.end(), larger);
    idx.resize(n_top);
    std::sort(idx.begin(), idx.end());
    for (std::size_t p = 0; p < n_swap; ++p) {
      std::uniform_int_distribution<std::size_t> pick(p, n_top - 1);
      std::swap(idx[p], idx[pick(rng)]);
    }
    std::uniform_int_distribution<std::uint64_t> anywhere(0, n - 1);
    for (std::size_t p = 0; p < n_swap; ++p) std::swap(v[idx[p]], v[anywhere(rng)]);
  }
  if (p_rand > 0.0) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (std::size_t p = 0; p < n; ++p) v[p] += p_rand * sd * gauss(rng);
  }
}

inline constexpr double kSparseThreshold = 1e-12;

inline SparseTensor3 degrade(const SparseTensor3& z, double p_top, double p_swap, double p_rand, std::uint64_t seed) {
  DenseTensor3 d(z);
  std::mt19937_64 rng(seed);
  degrade_dense(d, p_top, p_swap, p_rand, rng);
  return d.to_sparse(kSparseThreshold);
}

/// Generates one instance from a single seeded stream: A, B, C, swaps, noise.
inline SynthInstance generate_instance(const SynthConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  const DenseMatrix a = gen_participation(cfg.rows, cfg.components, rng);
  const DenseMatrix b = gen_participation(cfg.cols, cfg.components, rng);
  TemporalFactors tf = gen_temporal(cfg, rng);
  const auto LP = static_cast<Eigen::Index>(cfg.train_steps()), L = static_cast<Eigen::Index>(cfg.period);

  SynthInstance inst;
  inst.planted = KruskalModel{Vector::Ones(static_cast<Eigen::Index>(cfg.components)), a, b, tf.c};
  inst.trends = std::move(tf.trends);
  inst.z_test = expand(a, b, inst.planted.c.bottomRows(L)).to_sparse(kSparseThreshold);
  DenseTensor3 train = expand(a, b, inst.planted.c.topRows(LP));
  degrade_dense(train, cfg.p_top, cfg.p_swap, cfg.p_rand, rng);
  inst.z_train = train.to_sparse(kSparseThreshold);
  return inst;
}

/// The noise-free training tensor as a Kruskal model: planted factors restricted to the training rows.
inline KruskalModel planted_train_model(const SynthInstance& inst, Index train_steps) {
  KruskalModel m = inst.planted;
  m.c = m.c.topRows(static_cast<Eigen::Index>(train_steps)).eval();
  return m;
}

using SparseRowMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

inline RowScorer row_scorer(const SparseRowMatrix& s) {
  return RowScorer(static_cast<Index>(s.rows()), static_cast<Index>(s.cols()),
                   [&s](Index first, Index count, Eigen::Ref<DenseMatrix> out) {
                     out.setZero();
                     for (Index r = 0; r < count; ++r)
                       for (SparseRowMatrix::InnerIterator it(s, static_cast<Eigen::Index>(first + r)); it; ++it)
                         out(static_cast<Eigen::Index>(r), it.col()) = it.value();
                   });
}

/// Slice l predicts test step l with training slice T - L + l.
inline std::vector<SparseRowMatrix> last_period_scores(const SparseTensor3& z_train, Index period) {
  const Dims& d = z_train.dims();
  if (period == 0 || d.steps < period) throw DomainError("last_period_scores: fewer training steps than one period");
  std::vector<SparseRowMatrix> out;
  for (Index l = 0; l < period; ++l) {
    std::vector<Eigen::Triplet<double>> trips;
    for (const auto& e : z_train.slice(d.steps - period + l)) trips.emplace_back(e.i, e.j, e.value);
    SparseRowMatrix s(static_cast<Eigen::Index>(d.rows), static_cast<Eigen::Index>(d.cols));
    s.setFromTriplets(trips.begin(), trips.end());
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace tlp
