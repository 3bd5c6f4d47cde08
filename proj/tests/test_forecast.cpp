#include <gtest/gtest.h>

#include <sstream>

#include "test_util.hpp"
#include "tlp/forecast.hpp"

using namespace tlp;
using tlp::testing::random_matrix;

namespace {

const double kSeason[7] = {1, -1, 2, 0, -2, 0.5, -0.5};

TimeSeries seasonal_trend(Index periods, double a, double b) {
  std::vector<double> y;
  for (Index t = 0; t < 7 * periods; ++t) y.push_back(a + b * static_cast<double>(t) + kSeason[t % 7]);
  return TimeSeries(y);
}

HoltWintersState exact_state(double a, double b) {
  // State at the end of the first period when the series is exactly a + b t + s.
  HoltWintersState s{a + 6.0 * b, b, Vector(7)};
  for (int t = 0; t < 7; ++t) s.season(t) = kSeason[t];
  return s;
}

}  // namespace

TEST(HoltWinters, PeriodicSeriesForecastsItself) {
  auto y = seasonal_trend(4, 5.0, 0.0);
  auto r = holt_winters_forecast(y, {});
  for (int h = 0; h < 7; ++h) EXPECT_NEAR(r.forecast(h), 5.0 + kSeason[h], 1e-12);
  EXPECT_NEAR(r.trend, 0.0, 1e-14);
  EXPECT_NEAR(r.level, 5.0, 1e-12);
}

TEST(HoltWinters, LinearSeriesWithUnitPeriod) {
  std::vector<double> y;
  for (int t = 0; t < 12; ++t) y.push_back(3.0 + 0.75 * t);
  HoltWintersParams p;
  p.period = 1;
  auto r = holt_winters_forecast(TimeSeries(y), p, 5);
  for (int h = 1; h <= 5; ++h) EXPECT_NEAR(r.forecast(h - 1), 3.0 + 0.75 * (11 + h), 1e-12);
}

TEST(HoltWinters, TrendAndSeasonWithExactStateContinues) {
  auto y = seasonal_trend(10, 10.0, 0.5);
  auto r = holt_winters_forecast(y, {}, 0, exact_state(10.0, 0.5));
  for (int h = 1; h <= 7; ++h) EXPECT_NEAR(r.forecast(h - 1), 10.0 + 0.5 * (69 + h) + kSeason[(69 + h) % 7], 1e-9);
}

TEST(HoltWinters, TrendAndSeasonWithDefaultInitMatchesRecursionOracle) {
  // Independent evaluation of the recursions from the first-period initialization, 10 periods, all constants 0.2.
  const double want[7] = {45.785817314259674, 44.2616701520493, 47.7596114297241, 46.28789552311471,
                          44.8540683839945,  47.96470621220087, 47.62519786401702};
  auto r = holt_winters_forecast(seasonal_trend(10, 10.0, 0.5), {});
  for (int h = 0; h < 7; ++h) EXPECT_NEAR(r.forecast(h), want[h], 1e-6);
}

TEST(HoltWinters, DefaultInitialState) {
  auto s = default_initial_state(seasonal_trend(2, 10.0, 0.5), 7);
  EXPECT_NEAR(s.level, 10.0 + 0.5 * 3.0, 1e-14);
  EXPECT_NEAR(s.trend, 0.5, 1e-14);
  for (int t = 0; t < 7; ++t) EXPECT_NEAR(s.season(t), kSeason[t] + 0.5 * (t - 3.0), 1e-14);
}

TEST(HoltWinters, ShiftAndScaleEquivariance) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> y(35), shifted(35), scaled(35);
    for (int t = 0; t < 35; ++t) y[t] = g(rng);
    const double c = 10.0 * g(rng), s = std::exp(g(rng));
    for (int t = 0; t < 35; ++t) {
      shifted[t] = y[t] + c;
      scaled[t] = y[t] * s;
    }
    auto base = holt_winters_forecast(TimeSeries(y), {});
    auto sh = holt_winters_forecast(TimeSeries(shifted), {});
    auto sc = holt_winters_forecast(TimeSeries(scaled), {});
    for (int h = 0; h < 7; ++h) {
      EXPECT_NEAR(sh.forecast(h), base.forecast(h) + c, 1e-10 * std::max(1.0, std::abs(c)));
      EXPECT_NEAR(sc.forecast(h), base.forecast(h) * s, 1e-10 * std::max(1.0, std::abs(base.forecast(h) * s)));
    }
  }
}

TEST(HoltWinters, SeasonalStateReproducesPeriod) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> pattern(7), y;
  for (auto& v : pattern) v = u(rng);
  for (int t = 0; t < 70; ++t) y.push_back(pattern[t % 7]);
  const double mean = std::accumulate(pattern.begin(), pattern.end(), 0.0) / 7.0;
  HoltWintersState init{mean, 0.0, Vector(7)};
  for (int t = 0; t < 7; ++t) init.season(t) = pattern[t] - mean;
  auto r = holt_winters_forecast(TimeSeries(y), {}, 0, init);
  for (int t = 0; t < 7; ++t) {
    EXPECT_NEAR(r.season(t) + mean, pattern[t], 1e-8);
    EXPECT_NEAR(r.forecast(t), pattern[t], 1e-8);
  }
}

TEST(HoltWinters, Errors) {
  auto y = seasonal_trend(1, 0.0, 1.0);
  EXPECT_THROW(holt_winters_forecast(y, {}), DomainError);
  auto ok = seasonal_trend(2, 0.0, 1.0);
  for (double bad : {0.0, 1.0, -0.2, 1.5}) {
    HoltWintersParams p;
    p.alpha = bad;
    EXPECT_THROW(holt_winters_forecast(ok, p), ParameterError);
    p = {};
    p.delta_season = bad;
    EXPECT_THROW(holt_winters_forecast(ok, p), ParameterError);
  }
  HoltWintersParams zero;
  zero.period = 0;
  EXPECT_THROW(holt_winters_forecast(ok, zero), ParameterError);
  HoltWintersState wrong{0.0, 0.0, Vector::Zero(3)};
  EXPECT_THROW(holt_winters_forecast(ok, {}, 0, wrong), DimensionError);
}

TEST(CpForecast, ConstantFactorGivesLevel) {
  KruskalModel m{Vector::Constant(1, 2.0), random_matrix(4, 1, 1), random_matrix(3, 1, 2), DenseMatrix::Constant(14, 1, 0.25)};
  auto slices = cp_forecast_scores(m, {});
  ASSERT_EQ(slices.size(), 7u);
  const DenseMatrix want = 2.0 * 0.25 * m.a * m.b.transpose();
  for (const auto& s : slices) EXPECT_LE(tlp::testing::max_abs_diff(s.materialize(), want), 1e-14);
}

TEST(CpForecast, MatchesDenseExpansion) {
  KruskalModel m{Vector(2), random_matrix(5, 2, 3), random_matrix(4, 2, 4), random_matrix(21, 2, 5, 0.0, 1.0)};
  m.lambda << 3.0, 0.5;
  auto slices = cp_forecast_scores(m, {});
  for (Index l = 0; l < 7; ++l) {
    double g[2];
    for (int k = 0; k < 2; ++k) g[k] = holt_winters_forecast(TimeSeries::from(m.c.col(k)), {}).forecast(l);
    for (Index i = 0; i < 5; ++i)
      for (Index j = 0; j < 4; ++j) {
        double want = 0.0;
        for (int k = 0; k < 2; ++k) want += m.lambda(k) * g[k] * m.a(i, k) * m.b(j, k);
        EXPECT_NEAR(slices[l].score_pair(i, j), want, 1e-12);
      }
  }
}

TEST(CpForecast, ZeroFactorAndShortSeries) {
  KruskalModel m{Vector::Ones(1), random_matrix(3, 1, 1), random_matrix(2, 1, 2), DenseMatrix::Zero(14, 1)};
  for (const auto& s : cp_forecast_scores(m, {})) EXPECT_TRUE(s.materialize().isZero(0.0));
  m.c = DenseMatrix::Ones(13, 1);
  EXPECT_THROW(cp_forecast_scores(m, {}), DomainError);
}

TEST(CpForecast, CsvDump) {
  DenseMatrix gamma(2, 2);
  gamma << 1, 3, 2, 4.5;
  std::ostringstream out;
  write_forecast_csv(out, gamma);
  EXPECT_EQ(out.str(), "component,step,value\n1,1,1\n1,2,2\n2,1,3\n2,2,4.5\n");
}
