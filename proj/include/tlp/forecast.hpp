#pragma once

// Additive Holt-Winters smoothing of CP temporal factors and the resulting
// L-step prediction score slices.

#include <optional>
#include <ostream>
#include <vector>

#include "tlp/cpmodel.hpp"
#include "tlp/errors.hpp"
#include "tlp/matscore.hpp"
#include "tlp/tensor.hpp"

namespace tlp {

struct HoltWintersParams {
  double alpha = 0.2;         // level
  double gamma_trend = 0.2;   // trend
  double delta_season = 0.2;  // seasonal
  Index period = 7;

  void validate() const {
    auto open01 = [](double x) { return x > 0.0 && x < 1.0; };
    if (!open01(alpha) || !open01(gamma_trend) || !open01(delta_season))
      throw ParameterError("Holt-Winters smoothing constants must lie in (0, 1)");
    if (period == 0) throw ParameterError("Holt-Winters period must be positive");
  }
};

/// Smoothing state at the end of the first period, used to seed the recursions.
struct HoltWintersState {
  double level = 0.0;
  double trend = 0.0;
  Vector season;  // period values, oldest first
};

struct ForecastResult {
  double level = 0.0;
  double trend = 0.0;
  Vector season;    // last L seasonal indices, oldest first
  Vector forecast;  // h = 1..horizon
};

/// Level = mean of period 1, trend = (mean of period 2 - mean of period 1) / L,
/// seasonal indices = period-1 values minus the level.
inline HoltWintersState default_initial_state(const TimeSeries& y, Index period) {
  if (period == 0 || y.size() < 2 * period) throw DomainError("Holt-Winters needs at least two full periods");
  const auto vals = y.values();
  double m1 = 0.0, m2 = 0.0;
  for (Index t = 0; t < period; ++t) {
    m1 += vals[t];
    m2 += vals[period + t];
  }
  m1 /= static_cast<double>(period);
  m2 /= static_cast<double>(period);
  HoltWintersState s{m1, (m2 - m1) / static_cast<double>(period), Vector(static_cast<Eigen::Index>(period))};
  for (Index t = 0; t < period; ++t) s.season(static_cast<Eigen::Index>(t)) = vals[t] - m1;
  return s;
}

/// Runs the recursions over steps L..n-1 and forecasts h = 1..horizon (horizon 0 means one period).
inline ForecastResult holt_winters_forecast(const TimeSeries& y, const HoltWintersParams& p, Index horizon = 0,
                                            const std::optional<HoltWintersState>& initial = std::nullopt) {
  p.validate();
  const Index n = y.size(), L = p.period;
  if (n < 2 * L) throw DomainError("Holt-Winters series too short: need " + std::to_string(2 * L) + " values, got " + std::to_string(n));
  const HoltWintersState init = initial ? *initial : default_initial_state(y, L);
  if (init.season.size() != static_cast<Eigen::Index>(L)) throw DimensionError("initial seasonal state length differs from the period");
  if (horizon == 0) horizon = L;

  const auto vals = y.values();
  std::vector<double> season(n);
  for (Index t = 0; t < L; ++t) season[t] = init.season(static_cast<Eigen::Index>(t));
  double level = init.level, trend = init.trend;
  for (Index t = L; t < n; ++t) {
    const double prev = level;
    level = p.alpha * (vals[t] - season[t - L]) + (1.0 - p.alpha) * (prev + trend);
    trend = p.gamma_trend * (level - prev) + (1.0 - p.gamma_trend) * trend;
    season[t] = p.delta_season * (vals[t] - level) + (1.0 - p.delta_season) * season[t - L];
  }

  ForecastResult r;
  r.level = level;
  r.trend = trend;
  r.season = Vector(static_cast<Eigen::Index>(L));
  for (Index t = 0; t < L; ++t) r.season(static_cast<Eigen::Index>(t)) = season[n - L + t];
  r.forecast = Vector(static_cast<Eigen::Index>(horizon));
  for (Index h = 1; h <= horizon; ++h)
    r.forecast(static_cast<Eigen::Index>(h - 1)) =
        level + static_cast<double>(h) * trend + season[n - L + (h - 1) % L];
  return r;
}

/// Forecasts every temporal factor column one period ahead; returns the L x K matrix of gamma values.
inline DenseMatrix forecast_temporal(const KruskalModel& m, const HoltWintersParams& p) {
  m.validate();
  p.validate();
  if (static_cast<Index>(m.c.rows()) < 2 * p.period) throw DomainError("cp forecast: T must be at least 2L");
  DenseMatrix gamma(static_cast<Eigen::Index>(p.period), m.c.cols());
  for (Eigen::Index k = 0; k < m.c.cols(); ++k)
    gamma.col(k) = holt_winters_forecast(TimeSeries::from(m.c.col(k)), p).forecast;
  return gamma;
}

/// Slice l scores sum_k lambda_k gamma_k[l] A_k B_k^T.
inline std::vector<ScoreModel> cp_forecast_scores(const KruskalModel& m, const HoltWintersParams& p) {
  const DenseMatrix gamma = forecast_temporal(m, p);
  std::vector<ScoreModel> slices;
  slices.reserve(static_cast<std::size_t>(gamma.rows()));
  for (Eigen::Index l = 0; l < gamma.rows(); ++l)
    slices.push_back(ScoreModel::single(m.a, gamma.row(l).transpose().cwiseProduct(m.lambda), m.b));
  return slices;
}

/// CSV with header "component,step,value"; component and step are 1-based.
inline void write_forecast_csv(std::ostream& out, const DenseMatrix& gamma) {
  out << "component,step,value\n";
  for (Eigen::Index k = 0; k < gamma.cols(); ++k)
    for (Eigen::Index l = 0; l < gamma.rows(); ++l)
      out << k + 1 << ',' << l + 1 << ',' << detail::format_double(gamma(l, k)) << '\n';
}

}  // namespace tlp
