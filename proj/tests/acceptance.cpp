// Acceptance criteria 1-8. Prints one PASS/FAIL line per criterion and exits
// nonzero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "pipeline_suite.hpp"
#include "test_util.hpp"
#include "tlp/pipeline.hpp"

using namespace tlp;

namespace {

const std::string kData = TLP_TEST_DATA;

struct Verdict {
  bool pass;
  std::string detail;
};

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

double stddev(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------
// Synthetic forecast experiment: CP-ALS (K = 10) + Holt-Winters against the
// previous period, both scored on the seven test slices pooled.

struct SynthOutcome {
  double cp_auc, lp_auc;
  double cp_top, lp_top;  // fraction of the top 1000 that are test links
  double fit_degraded, fit_clean, fms_planted;
};

SynthOutcome synth_experiment(SynthConfig cfg) {
  const SynthInstance inst = generate_instance(cfg);
  const Index k = cfg.components;
  auto [model, trace] = cp_als(inst.z_train, k, {1e-6, 500, cfg.seed + k});
  const KruskalModel truth = planted_train_model(inst, cfg.train_steps());

  const auto labels = binarize_slices(inst.z_test);
  const auto cp = cp_forecast_scores(model, {});
  const auto lp = last_period_scores(inst.z_train, cfg.period);
  std::vector<EvalSlice> cp_slices, lp_slices;
  for (std::size_t l = 0; l < labels.size(); ++l) {
    cp_slices.push_back({RowScorer::of(cp[l]), &labels[l]});
    lp_slices.push_back({row_scorer(lp[l]), &labels[l]});
  }
  const EvalReport rc = evaluate(cp_slices, 1000), rl = evaluate(lp_slices, 1000);
  return {rc.auc,
          rl.auc,
          static_cast<double>(rc.topk_correct) / static_cast<double>(rc.k),
          static_cast<double>(rl.topk_correct) / static_cast<double>(rl.k),
          trace.fit_history.back(),
          fit_to(model, truth),
          fms(model, truth)};
}

struct SeedSweep {
  std::vector<SynthOutcome> runs;
  double seconds = 0.0;

  std::vector<double> get(double SynthOutcome::*field) const {
    std::vector<double> v;
    for (const auto& r : runs) v.push_back(r.*field);
    return v;
  }
};

SeedSweep sweep(Index rows, Index cols, double p_swap, int seeds) {
  SeedSweep s;
  const auto t0 = std::chrono::steady_clock::now();
  for (int seed = 1; seed <= seeds; ++seed) {
    SynthConfig cfg;
    cfg.rows = rows;
    cfg.cols = cols;
    cfg.p_swap = p_swap;
    cfg.seed = static_cast<std::uint64_t>(seed);
    s.runs.push_back(synth_experiment(cfg));
  }
  s.seconds = seconds_since(t0);
  return s;
}

Verdict criterion1(const SeedSweep& full_scale, const SeedSweep& desk) {
  const double cp = mean(full_scale.get(&SynthOutcome::cp_auc)), lp = mean(full_scale.get(&SynthOutcome::lp_auc));
  const double cp_d = mean(desk.get(&SynthOutcome::cp_auc)), lp_d = mean(desk.get(&SynthOutcome::lp_auc));
  const bool ok = cp >= 0.80 && std::abs(lp - 0.686) <= 0.07 && cp - lp >= 0.10 && cp_d > lp_d;
  return {ok, "500x400x77, 10 seeds: CP AUC " + fmt("%.4f", cp) + ", Last Period AUC " + fmt("%.4f", lp) + " (band 0.686 +- 0.07) in " +
                  fmt("%.0f", full_scale.seconds) + " s; 125x100x77: CP " + fmt("%.4f", cp_d) + ", Last Period " + fmt("%.4f", lp_d)};
}

Verdict criterion2(const SeedSweep& s) {
  const double cp = mean(s.get(&SynthOutcome::cp_top)), lp = mean(s.get(&SynthOutcome::lp_top));
  return {cp >= 0.95 && std::abs(lp - 0.70) <= 0.1,
          "top-1000 correct fraction: CP " + fmt("%.4f", cp) + ", Last Period " + fmt("%.4f", lp) + " (band 0.70 +- 0.1)"};
}

Verdict criterion3(const SeedSweep& s) {
  const double fit = mean(s.get(&SynthOutcome::fit_clean)), fm = mean(s.get(&SynthOutcome::fms_planted));
  const double degraded = mean(s.get(&SynthOutcome::fit_degraded));
  return {std::abs(fit - 0.5) <= 0.1 && std::abs(fm - 0.52) <= 0.1,
          "fit vs noise-free training tensor " + fmt("%.4f", fit) + " (band 0.5 +- 0.1), FMS vs planted " + fmt("%.4f", fm) +
              " (band 0.52 +- 0.1); fit vs degraded training tensor " + fmt("%.4f", degraded)};
}

Verdict criterion4() {
  const std::vector<double> levels{0.0, 0.2, 0.4, 0.6, 0.8};
  std::vector<double> lp_means;
  bool ok = true;
  std::string detail;
  double secs = 0.0;
  for (double p : levels) {
    const SeedSweep s = sweep(500, 400, p, 10);
    secs += s.seconds;
    const auto cp = s.get(&SynthOutcome::cp_auc), lp = s.get(&SynthOutcome::lp_auc);
    std::vector<double> diff;
    for (std::size_t i = 0; i < cp.size(); ++i) diff.push_back(cp[i] - lp[i]);
    // Paired one-sided t test at the 0.5% level, 9 degrees of freedom.
    const double t = mean(diff) / (stddev(diff) / std::sqrt(static_cast<double>(diff.size())));
    const double top = mean(s.get(&SynthOutcome::cp_top));
    ok = ok && mean(diff) > 0.0 && t > 3.25 && top >= 0.95;
    lp_means.push_back(mean(lp));
    detail += " p_swap " + fmt("%.1f", p) + ": CP " + fmt("%.4f", mean(cp)) + " / LP " + fmt("%.4f", mean(lp)) + " (t " +
              fmt("%.1f", t) + "), CP top " + fmt("%.3f", top) + ";";
  }
  // Last Period trend: least-squares slope of the level means, and first level above last.
  const double xm = mean(levels), ym = mean(lp_means);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    sxy += (levels[i] - xm) * (lp_means[i] - ym);
    sxx += (levels[i] - xm) * (levels[i] - xm);
  }
  const double slope = sxy / sxx;
  ok = ok && slope < 0.0 && lp_means.front() > lp_means.back();
  return {ok, "10 seeds per level;" + detail + " LP slope " + fmt("%.4f", slope) + " per unit p_swap; " + fmt("%.0f", secs) + " s"};
}

// ---------------------------------------------------------------------------
// Oracle equivalence suite.

DenseMatrix dense_bipartite_katz(const DenseMatrix& x, double beta) {
  // (I - beta A)^-1 - I on A = [[0, X], [X^T, 0]]; the author-venue block.
  const Eigen::Index m = x.rows(), n = x.cols();
  DenseMatrix a = DenseMatrix::Zero(m + n, m + n);
  a.topRightCorner(m, n) = x;
  a.bottomLeftCorner(n, m) = x.transpose();
  const DenseMatrix id = DenseMatrix::Identity(m + n, m + n);
  const DenseMatrix k = (id - beta * a).fullPivLu().inverse() - id;
  return k.topRightCorner(m, n);
}

DenseMatrix dense_mttkrp(const SparseTensor3& z, const KruskalModel& mdl, int mode) {
  const Dims d = z.dims();
  const DenseTensor3 full(z);
  DenseMatrix out = DenseMatrix::Zero(static_cast<Eigen::Index>(d.extent(mode)), mdl.a.cols());
  for (Eigen::Index r = 0; r < mdl.a.cols(); ++r)
    for (Index i = 0; i < d.rows; ++i)
      for (Index j = 0; j < d.cols; ++j)
        for (Index t = 0; t < d.steps; ++t) {
          const double v = full(i, j, t);
          if (mode == 1) out(i, r) += v * mdl.b(j, r) * mdl.c(t, r);
          if (mode == 2) out(j, r) += v * mdl.a(i, r) * mdl.c(t, r);
          if (mode == 3) out(t, r) += v * mdl.a(i, r) * mdl.b(j, r);
        }
  return out;
}

double brute_auc(const DenseMatrix& s, const LabeledPairs& lp) {
  std::vector<double> pos, neg;
  for (Index i = 0; i < lp.rows; ++i)
    for (Index j = 0; j < lp.cols; ++j) {
      if (lp.is_excluded(i, j)) continue;
      (lp.is_positive(i, j) ? pos : neg).push_back(s(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    }
  double wins = 0.0;
  for (double p : pos)
    for (double n : neg) wins += p > n ? 1.0 : (p == n ? 0.5 : 0.0);
  return wins / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

Verdict criterion5() {
  const auto t0 = std::chrono::steady_clock::now();
  using tlp::testing::max_abs_diff;
  using tlp::testing::random_matrix;
  double katz_err = 0.0, tkatz_err = 0.0, tsvd_err = 0.0, ens_err = 0.0, mttkrp_err = 0.0, auc_err = 0.0;
  const WarningSink quiet = [](const std::string&) {};

  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const DenseMatrix x = random_matrix(50, 40, seed, 0.0, 1.0);
    const double beta = 0.9 / dense_svd(x).sigma(0);
    const DenseMatrix oracle = dense_bipartite_katz(x, beta);
    katz_err = std::max(katz_err, max_abs_diff(katz_scores_exact(x, beta), oracle));
    const SvdFactors f = truncated_svd(x, 40);
    tkatz_err = std::max(tkatz_err, max_abs_diff(tkatz_scores(f, 40, beta, quiet).materialize(), oracle));

    const DenseMatrix y = random_matrix(30, 25, seed + 100);
    const Eigen::JacobiSVD<DenseMatrix> svd(y, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const SvdFactors g = truncated_svd(y, 8);
    std::vector<ScoreModel> parts;
    DenseMatrix ens = DenseMatrix::Zero(30, 25);
    for (Index k : {2, 5, 8}) {
      const auto kk = static_cast<Eigen::Index>(k);
      const DenseMatrix recon = svd.matrixU().leftCols(kk) * svd.singularValues().head(kk).asDiagonal() *
                                svd.matrixV().leftCols(kk).transpose();
      tsvd_err = std::max(tsvd_err, max_abs_diff(tsvd_scores(g, k).materialize(), recon));
      parts.push_back(tsvd_scores(g, k));
      ens += recon / recon.norm();
    }
    ens_err = std::max(ens_err, max_abs_diff(ensemble_scores(parts).materialize(), ens));

    const SparseTensor3 z = tlp::testing::random_tensor({5, 4, 5}, 0.4, seed + 200);
    const KruskalModel mdl{Vector::Ones(3), random_matrix(5, 3, seed + 1), random_matrix(4, 3, seed + 2), random_matrix(5, 3, seed + 3)};
    for (int mode = 1; mode <= 3; ++mode) {
      const DenseMatrix want = dense_mttkrp(z, mdl, mode);
      mttkrp_err = std::max(mttkrp_err, max_abs_diff(mttkrp(z, mdl, mode), want) / std::max(1.0, want.cwiseAbs().maxCoeff()));
    }

    std::mt19937_64 rng(seed + 300);
    const Index rows = 20 + rng() % 11, cols = 20 + rng() % 11;  // at most 900 pairs
    DenseMatrix s(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    LabeledPairs lp{rows, cols, {}, {}};
    std::bernoulli_distribution pos(0.15), exc(0.1);
    std::uniform_int_distribution<int> level(0, 7);
    for (Index lin = 0; lin < rows * cols; ++lin) {
      s(static_cast<Eigen::Index>(lin / cols), static_cast<Eigen::Index>(lin % cols)) = 0.5 * level(rng);
      if (exc(rng))
        lp.excluded.push_back(lin);
      else if (pos(rng))
        lp.positives.push_back(lin);
    }
    auc_err = std::max(auc_err, std::abs(evaluate(RowScorer::of(s), lp, 0).auc - brute_auc(s, lp)));
  }
  const bool ok = katz_err <= 1e-8 && tkatz_err <= 1e-8 && tsvd_err <= 1e-10 && ens_err <= 1e-10 && mttkrp_err <= 1e-12 && auc_err <= 1e-12;
  return {ok, "max-abs errors: exact Katz " + fmt("%.1e", katz_err) + ", full-rank TKatz " + fmt("%.1e", tkatz_err) + ", TSVD " +
                  fmt("%.1e", tsvd_err) + ", ensemble " + fmt("%.1e", ens_err) + ", mttkrp (relative) " + fmt("%.1e", mttkrp_err) +
                  ", AUC " + fmt("%.1e", auc_err) + "; " + fmt("%.1f", seconds_since(t0)) + " s"};
}

// ---------------------------------------------------------------------------

Verdict criterion6() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst_fms = 1.0, worst_fit = 1.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    SynthConfig cfg;
    cfg.rows = 60;
    cfg.cols = 50;
    cfg.p_top = cfg.p_swap = cfg.p_rand = 0.0;
    cfg.seed = seed;
    const SynthInstance inst = generate_instance(cfg);
    const KruskalModel truth = planted_train_model(inst, cfg.train_steps());
    auto [m, trace] = cp_als(inst.z_train, 10, {1e-10, 3000, seed});
    worst_fms = std::min(worst_fms, fms(m, truth));
    worst_fit = std::min(worst_fit, trace.fit_history.back());
  }
  Index monotone = 0;
  double worst_drop = 0.0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const auto z = tlp::testing::random_tensor({6, 5, 4}, 0.6, seed);
    auto [m, trace] = cp_als(z, 3, {1e-12, 200, seed});
    double drop = 0.0;
    for (std::size_t i = 1; i < trace.fit_history.size(); ++i)
      drop = std::max(drop, trace.fit_history[i - 1] - trace.fit_history[i]);
    monotone += drop <= 1e-10;
    worst_drop = std::max(worst_drop, drop);
  }
  return {worst_fms >= 0.95 && worst_fit >= 0.99 && monotone == 100,
          "noise-free 60x50x77, K=10, 5 seeds: min FMS " + fmt("%.4f", worst_fms) + ", min fit " + fmt("%.6f", worst_fit) +
              "; fit history nondecreasing on " + std::to_string(monotone) + "/100 random tensors (largest drop " +
              fmt("%.1e", worst_drop) + "); " + fmt("%.1f", seconds_since(t0)) + " s"};
}

// ---------------------------------------------------------------------------

Verdict criterion7() {
  const double season[7] = {1, -1, 2, 0, -2, 0.5, -0.5};
  double cont_err = 0.0;
  // Level + trend + season, started from the closed-form state after the first period.
  for (double a : {10.0, -3.0, 250.0})
    for (double b : {0.5, -0.2, 0.0}) {
      std::vector<double> y;
      for (int t = 0; t < 70; ++t) y.push_back(a + b * t + season[t % 7]);
      HoltWintersState s{a + 6.0 * b, b, Vector(7)};
      for (int t = 0; t < 7; ++t) s.season(t) = season[t];
      const auto r = holt_winters_forecast(TimeSeries(y), {}, 0, s);
      for (int h = 1; h <= 7; ++h) cont_err = std::max(cont_err, std::abs(r.forecast(h - 1) - (a + b * (69 + h) + season[(69 + h) % 7])));
    }
  // Level + season with the default first-period initialization.
  for (double a : {5.0, -40.0}) {
    std::vector<double> y;
    for (int t = 0; t < 35; ++t) y.push_back(a + season[t % 7]);
    const auto r = holt_winters_forecast(TimeSeries(y), {});
    for (int h = 0; h < 7; ++h) cont_err = std::max(cont_err, std::abs(r.forecast(h) - (a + season[h])));
  }
  // Level + trend with unit period.
  {
    std::vector<double> y;
    for (int t = 0; t < 20; ++t) y.push_back(3.0 + 0.75 * t);
    HoltWintersParams p;
    p.period = 1;
    const auto r = holt_winters_forecast(TimeSeries(y), p, 5);
    for (int h = 1; h <= 5; ++h) cont_err = std::max(cont_err, std::abs(r.forecast(h - 1) - (3.0 + 0.75 * (19 + h))));
  }
  // Default initialization on trend + season: frozen independent evaluation of the recursions.
  const double want[7] = {45.785817314259674, 44.2616701520493, 47.7596114297241, 46.28789552311471,
                          44.8540683839945,  47.96470621220087, 47.62519786401702};
  double oracle_err = 0.0;
  {
    std::vector<double> y;
    for (int t = 0; t < 70; ++t) y.push_back(10.0 + 0.5 * t + season[t % 7]);
    const auto r = holt_winters_forecast(TimeSeries(y), {});
    for (int h = 0; h < 7; ++h) oracle_err = std::max(oracle_err, std::abs(r.forecast(h) - want[h]));
  }
  double equiv_err = 0.0;
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<double> y(35), shifted(35), scaled(35);
    for (auto& v : y) v = g(rng);
    const double c = 10.0 * g(rng), s = std::exp(g(rng));
    for (int t = 0; t < 35; ++t) {
      shifted[t] = y[t] + c;
      scaled[t] = y[t] * s;
    }
    const auto base = holt_winters_forecast(TimeSeries(y), {});
    const auto sh = holt_winters_forecast(TimeSeries(shifted), {});
    const auto sc = holt_winters_forecast(TimeSeries(scaled), {});
    for (int h = 0; h < 7; ++h) {
      equiv_err = std::max(equiv_err, std::abs(sh.forecast(h) - base.forecast(h) - c) / std::max(1.0, std::abs(c)));
      equiv_err = std::max(equiv_err, std::abs(sc.forecast(h) - base.forecast(h) * s) / std::max(1.0, std::abs(base.forecast(h) * s)));
    }
  }
  return {cont_err <= 1e-6 && oracle_err <= 1e-6 && equiv_err <= 1e-10,
          "continuation error " + fmt("%.1e", cont_err) + ", recursion oracle error " + fmt("%.1e", oracle_err) +
              ", shift/scale equivariance error " + fmt("%.1e", equiv_err)};
}

// ---------------------------------------------------------------------------

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Verdict criterion8() {
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path out = fs::temp_directory_path() / "tlp_acceptance" / "biblio";
  fs::remove_all(out);
  const Json got = tlp::testing::run_biblio_suite(kData, out);
  const std::string diff = tlp::testing::check_golden(got, kData + "/" + tlp::testing::kBiblioGolden, 1e-9);
  std::vector<double> auc_all, auc_new;
  for (const auto& row : got) (row["protocol"] == "all" ? auc_all : auc_new).push_back(row["auc"].get<double>());

  // Random scorer: 1000 test links among 10^6 pairs, so about 0.1% of a top-1000 list is correct by chance.
  const Index n = 1000;
  LabeledPairs lp{n, n, {}, {}};
  std::mt19937_64 rng(2024);
  std::set<Index> pos;
  while (pos.size() < 1000) pos.insert(rng() % (n * n));
  lp.positives.assign(pos.begin(), pos.end());
  std::vector<double> hits;
  for (std::uint64_t s = 1; s <= 50; ++s) {
    const RowScorer rnd(n, n, [s](Index first, Index count, Eigen::Ref<DenseMatrix> block) {
      for (Index r = 0; r < count; ++r)
        for (Index j = 0; j < n; ++j)
          block(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) =
              static_cast<double>(splitmix(s * 0x100000001b3ULL ^ ((first + r) * n + j)) >> 11);
    });
    hits.push_back(static_cast<double>(top_k_correct(rnd, lp, 1000)));
  }
  // 50 draws of a count with mean and variance about 1: four standard errors either side.
  const double chance = mean(hits);
  const bool ok = diff.empty() && got.size() == 98 && std::abs(chance - 1.0) <= 4.0 / std::sqrt(50.0);
  return {ok, "7 windows x 7 methods x 2 protocols " + std::string(diff.empty() ? "match the golden file" : "differ: " + diff) +
                  "; mean AUC all " + fmt("%.4f", mean(auc_all)) + ", new " + fmt("%.4f", mean(auc_new)) +
                  "; random scorer top-1000 hits " + fmt("%.2f", chance) + " per 1000 (expected 1.0, i.e. 0.1%); " +
                  fmt("%.1f", seconds_since(t0)) + " s"};
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](int id, const std::string& name, const std::function<Verdict()>& fn) {
    Verdict v;
    try {
      v = fn();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    failures += !v.pass;
    std::cout << (v.pass ? "PASS" : "FAIL") << " criterion " << id << " (" << name << "): " << v.detail << std::endl;
  };

  SeedSweep full_scale, desk;
  Verdict setup{true, ""};
  try {
    full_scale = sweep(500, 400, 0.5, 10);
    desk = sweep(125, 100, 0.5, 10);
  } catch (const std::exception& e) {
    setup = {false, std::string("threw: ") + e.what()};
  }
  auto guarded = [&](Verdict (*fn)(const SeedSweep&)) { return [&, fn] { return setup.pass ? fn(full_scale) : setup; }; };
  report(1, "synthetic forecast AUC", [&] { return setup.pass ? criterion1(full_scale, desk) : setup; });
  report(2, "synthetic top-1000 accuracy", guarded(criterion2));
  report(3, "degradation diagnostics", guarded(criterion3));
  report(4, "swap-noise sweep", criterion4);
  report(5, "oracle equivalence", criterion5);
  report(6, "CP recovery", criterion6);
  report(7, "Holt-Winters exactness", criterion7);
  report(8, "bibliometric pipeline and chance rate", criterion8);

  std::cout << (failures ? std::to_string(failures) + " criterion(s) failed" : std::string("all criteria passed")) << std::endl;
  return failures ? 1 : 0;
}
