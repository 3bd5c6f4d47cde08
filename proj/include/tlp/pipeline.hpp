#pragma once

// Pipeline driver: split, run, eval, synth and forecast-dump. Every command
// writes its artifacts into one output directory; a run leaves a `.partial`
// marker behind until it has finished successfully.

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tlp/collapse.hpp"
#include "tlp/cpmodel.hpp"
#include "tlp/errors.hpp"
#include "tlp/evalkit.hpp"
#include "tlp/forecast.hpp"
#include "tlp/lowrank.hpp"
#include "tlp/matscore.hpp"
#include "tlp/synthgen.hpp"
#include "tlp/tensor.hpp"

namespace tlp {

using Json = nlohmann::json;
namespace fs = std::filesystem;

inline constexpr int kReportSchema = 1;

enum class Method { TsvdCt, TsvdCwt, TkatzCt, TkatzCwt, KatzCt, KatzCwt, CpHeuristic, CpForecast, LastPeriod };

inline const std::vector<std::pair<Method, std::string>>& method_names() {
  static const std::vector<std::pair<Method, std::string>> names{
      {Method::TsvdCt, "tsvd-ct"},     {Method::TsvdCwt, "tsvd-cwt"},         {Method::TkatzCt, "tkatz-ct"},
      {Method::TkatzCwt, "tkatz-cwt"}, {Method::KatzCt, "katz-ct"},           {Method::KatzCwt, "katz-cwt"},
      {Method::CpHeuristic, "cp-heuristic"}, {Method::CpForecast, "cp-forecast"}, {Method::LastPeriod, "last-period"}};
  return names;
}

inline std::string to_string(Method m) {
  for (const auto& [k, v] : method_names())
    if (k == m) return v;
  return "?";
}

inline Method parse_method(const std::string& s) {
  for (const auto& [k, v] : method_names())
    if (v == s) return k;
  throw ParameterError("unknown method '" + s + "'");
}

inline bool uses_collapse(Method m) {
  return m == Method::TsvdCt || m == Method::TsvdCwt || m == Method::TkatzCt || m == Method::TkatzCwt ||
         m == Method::KatzCt || m == Method::KatzCwt;
}

inline CollapseKind collapse_kind(Method m) {
  return (m == Method::TsvdCt || m == Method::TkatzCt || m == Method::KatzCt) ? CollapseKind::CT : CollapseKind::CWT;
}

// ---------------------------------------------------------------------------
// Splitting

struct SplitResult {
  SparseTensor3 train;
  SparseTensor3 test;
  std::vector<Index> kept_rows;  // original 0-based row of every retained row
};

/// Steps [start, start + train_len) train, the next test_len steps test.
inline SplitResult split_window(const SparseTensor3& z, Index start, Index train_len, Index test_len) {
  const Dims& d = z.dims();
  if (train_len == 0 || test_len == 0 || start + train_len + test_len > d.steps)
    throw ParameterError("split: window [" + std::to_string(start + 1) + ", " + std::to_string(start + train_len + test_len) +
                         "] does not fit in " + std::to_string(d.steps) + " steps");
  std::vector<TensorEntry> tr, te;
  for (const auto& e : z.entries()) {
    if (e.t >= start && e.t < start + train_len)
      tr.push_back({e.i, e.j, static_cast<std::uint32_t>(e.t - start), e.value});
    else if (e.t >= start + train_len && e.t < start + train_len + test_len)
      te.push_back({e.i, e.j, static_cast<std::uint32_t>(e.t - start - train_len), e.value});
  }
  SplitResult r{SparseTensor3::from_sorted({d.rows, d.cols, train_len}, std::move(tr)),
                SparseTensor3::from_sorted({d.rows, d.cols, test_len}, std::move(te)), {}};
  r.kept_rows.resize(d.rows);
  std::iota(r.kept_rows.begin(), r.kept_rows.end(), Index{0});
  return r;
}

/// Prefix/suffix split along time.
inline SplitResult cmd_split(const SparseTensor3& z, Index train_len) {
  if (train_len == 0 || train_len >= z.dims().steps) throw ParameterError("split: train length must lie in [1, T-1]");
  return split_window(z, 0, train_len, z.dims().steps - train_len);
}

/// Window start offsets for consecutive train/test windows of fixed length.
inline std::vector<Index> sliding_windows(Index steps, Index train_len, Index test_len = 1) {
  std::vector<Index> starts;
  for (Index s = 0; s + train_len + test_len <= steps; ++s) starts.push_back(s);
  return starts;
}

/// Keeps rows whose total training weight reaches `threshold`; test entries on dropped rows go too.
inline SplitResult filter_rows(const SplitResult& in, double threshold) {
  const Dims& d = in.train.dims();
  std::vector<double> weight(d.rows, 0.0);
  for (const auto& e : in.train.entries()) weight[e.i] += e.value;
  std::vector<std::int64_t> remap(d.rows, -1);
  SplitResult out;
  for (Index i = 0; i < d.rows; ++i)
    if (weight[i] >= threshold) {
      remap[i] = static_cast<std::int64_t>(out.kept_rows.size());
      out.kept_rows.push_back(in.kept_rows[i]);
    }
  if (out.kept_rows.empty()) throw DomainError("row filter removed every row");
  auto apply = [&](const SparseTensor3& z) {
    std::vector<TensorEntry> es;
    for (const auto& e : z.entries())
      if (remap[e.i] >= 0) es.push_back({static_cast<std::uint32_t>(remap[e.i]), e.j, e.t, e.value});
    return SparseTensor3::from_sorted({out.kept_rows.size(), z.dims().cols, z.dims().steps}, std::move(es));
  };
  out.train = apply(in.train);
  out.test = apply(in.test);
  return out;
}

/// Re-declares the grid of a tensor whose file did not carry the full extents.
inline SparseTensor3 with_grid(const SparseTensor3& z, Index rows, Index cols) {
  if (z.dims().rows > rows || z.dims().cols > cols) throw DimensionError("test tensor exceeds the training grid");
  return SparseTensor3::from_sorted({rows, cols, z.dims().steps}, std::vector<TensorEntry>(z.entries().begin(), z.entries().end()));
}

// ---------------------------------------------------------------------------
// Run configuration

struct RunConfig {
  std::string train_path, test_path;  // explicit train and test files
  std::string input_path;             // or one tensor split here
  Index offset = 0;  // leading steps skipped before the window
  Index train_len = 0;
  Index test_len = 0;  // 0: all remaining steps
  double min_row_weight = 0.0;
  bool log_transform = false;

  Method method = Method::TsvdCwt;
  std::vector<Index> ranks{10};
  double beta = 0.001;
  double theta = 0.2;
  Index t0 = 3;
  HoltWintersParams hw{};
  double cp_tol = 1e-6;
  Index cp_max_iter = 500;
  Protocol protocol = Protocol::All;
  Index topk = 1000;
  std::uint64_t seed = 0;
  std::string out_dir = "run";

  /// Method-independent and method-specific checks, run before any work.
  void validate() const {
    if (input_path.empty() && (train_path.empty() || test_path.empty()))
      throw ParameterError("run: give --input with --train-len, or both --train and --test");
    if (!input_path.empty() && train_len == 0) throw ParameterError("run: --input requires --train-len");
    if (topk == 0) throw ParameterError("run: --topk must be positive");
    if (out_dir.empty()) throw ParameterError("run: output directory must not be empty");
    if (method != Method::LastPeriod && method != Method::KatzCt && method != Method::KatzCwt) {
      if (ranks.empty()) throw ParameterError("run: rank grid is empty");
      for (Index k : ranks)
        if (k == 0) throw ParameterError("run: ranks must be positive");
    }
    if (uses_collapse(method) && collapse_kind(method) == CollapseKind::CWT && !(theta > 0.0 && theta < 1.0))
      throw ParameterError("run: theta must lie in (0, 1)");
    if ((method == Method::TkatzCt || method == Method::TkatzCwt || method == Method::KatzCt || method == Method::KatzCwt) &&
        !(beta >= 0.0 && beta < 1.0))
      throw ParameterError("run: beta must lie in [0, 1)");
    if (method == Method::CpHeuristic && t0 == 0) throw ParameterError("run: t0 must be positive");
    if (method == Method::CpForecast || method == Method::LastPeriod) hw.validate();
    if (method == Method::CpHeuristic || method == Method::CpForecast)
      if (!(cp_tol >= 0.0) || cp_max_iter == 0) throw ParameterError("run: invalid CP stopping parameters");
  }
};

inline Json to_json(const HoltWintersParams& p) {
  return {{"alpha", p.alpha}, {"gamma_trend", p.gamma_trend}, {"delta_season", p.delta_season}, {"period", p.period}};
}

inline Json to_json(const RunConfig& c) {
  return {{"train", c.train_path},
          {"test", c.test_path},
          {"input", c.input_path},
          {"offset", c.offset},
          {"train_len", c.train_len},
          {"test_len", c.test_len},
          {"min_row_weight", c.min_row_weight},
          {"log", c.log_transform},
          {"method", to_string(c.method)},
          {"ranks", c.ranks},
          {"beta", c.beta},
          {"theta", c.theta},
          {"t0", c.t0},
          {"hw", to_json(c.hw)},
          {"cp_tol", c.cp_tol},
          {"cp_max_iter", c.cp_max_iter},
          {"protocol", to_string(c.protocol)},
          {"topk", c.topk},
          {"seed", c.seed},
          {"out_dir", c.out_dir}};
}

inline Json to_json(const EvalReport& r) {
  return {{"auc", r.auc}, {"topk_correct", r.topk_correct}, {"k", r.k}, {"protocol", to_string(r.protocol)},
          {"positives", r.positives}, {"negatives", r.negatives}};
}

namespace detail {

class PartialMarker {
 public:
  explicit PartialMarker(const fs::path& dir) : path_(dir / ".partial") {
    std::ofstream o(path_);
    if (!o) throw IoError("cannot write " + path_.string());
  }
  void done() { fs::remove(path_); }

 private:
  fs::path path_;
};

inline void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

template <typename Fn>
void write_file(const fs::path& p, Fn&& fn) {
  std::ofstream o(p, std::ios::binary);
  if (!o) throw IoError("cannot write " + p.string());
  fn(o);
  if (!o) throw IoError("write failed for " + p.string());
}

inline void write_json(const fs::path& p, const Json& j) {
  write_file(p, [&](std::ostream& o) { o << j.dump(2) << '\n'; });
}

/// Top-k report; multi-step rankings carry the 1-based test step as a leading column.
inline void write_top_scores(std::ostream& out, Index rows, Index cols, Index slices, const std::vector<ScoredPair>& top) {
  if (slices == 1) {
    write_score_report(out, rows, cols, top);
    return;
  }
  out << rows << ' ' << cols << ' ' << slices << ' ' << top.size() << '\n';
  for (const auto& p : top)
    out << (p.slice + 1) << ' ' << (p.i + 1) << ' ' << (p.j + 1) << ' ' << format_double(p.score) << '\n';
}

}  // namespace detail

struct RunData {
  SparseTensor3 train;
  SparseTensor3 test;
  std::vector<Index> kept_rows;
};

inline RunData load_run_data(const RunConfig& cfg) {
  SplitResult s;
  if (!cfg.input_path.empty()) {
    const SparseTensor3 z = load_coo(cfg.input_path);
    const Index steps = z.dims().steps;
    if (cfg.offset + cfg.train_len >= steps) throw ParameterError("run: train window leaves no test steps");
    const Index test_len = cfg.test_len ? cfg.test_len : steps - cfg.offset - cfg.train_len;
    s = split_window(z, cfg.offset, cfg.train_len, test_len);
  } else {
    s.train = load_coo(cfg.train_path);
    s.test = with_grid(load_coo(cfg.test_path), s.train.dims().rows, s.train.dims().cols);
    s.kept_rows.resize(s.train.dims().rows);
    std::iota(s.kept_rows.begin(), s.kept_rows.end(), Index{0});
  }
  if (cfg.min_row_weight > 0.0) s = filter_rows(s, cfg.min_row_weight);
  if (s.train.nnz() == 0) throw DomainError("run: training tensor is empty");
  RunData d{cfg.log_transform ? log_preprocess(s.train) : s.train, std::move(s.test), std::move(s.kept_rows)};
  return d;
}

struct RunResult {
  EvalReport report;
  Json json;
};

/// Collapse or factorize, score, evaluate, and write model files, top scores, ROC CSV and report.json.
inline RunResult cmd_run(const RunConfig& cfg) {
  cfg.validate();
  const fs::path out = cfg.out_dir;
  detail::ensure_dir(out);
  detail::PartialMarker marker(out);

  const RunData data = load_run_data(cfg);
  const Dims dims = data.train.dims();
  const Index test_steps = data.test.dims().steps;
  const bool multi_step = cfg.method == Method::CpForecast || cfg.method == Method::LastPeriod;
  if (multi_step && test_steps != cfg.hw.period)
    throw ParameterError("run: " + to_string(cfg.method) + " predicts one period; test has " + std::to_string(test_steps) +
                         " steps but the period is " + std::to_string(cfg.hw.period));
  if (cfg.method == Method::CpHeuristic && cfg.t0 > dims.steps) throw ParameterError("run: t0 exceeds the training length");
  if (cfg.method == Method::CpForecast && dims.steps < 2 * cfg.hw.period)
    throw ParameterError("run: cp-forecast needs at least two training periods");
  if (cfg.method == Method::LastPeriod && dims.steps < cfg.hw.period)
    throw ParameterError("run: last-period needs at least one training period");
  if (uses_collapse(cfg.method) && cfg.method != Method::KatzCt && cfg.method != Method::KatzCwt)
    for (Index k : cfg.ranks)
      if (k > std::min(dims.rows, dims.cols)) throw ParameterError("run: rank " + std::to_string(k) + " exceeds min(M, N)");

  Json models = Json::array();
  Json warnings = Json::array();
  const WarningSink warn = [&](const std::string& msg) {
    warnings.push_back(msg);
    stderr_warnings()(msg);
  };

  std::vector<ScoreModel> factored;          // one per test step (or one for all steps)
  std::optional<DenseMatrix> dense_scores;   // exact Katz
  std::vector<SparseRowMatrix> last_period;  // baseline slices

  if (uses_collapse(cfg.method)) {
    const LinkMatrix x = collapse(data.train, {collapse_kind(cfg.method), cfg.theta});
    if (cfg.method == Method::KatzCt || cfg.method == Method::KatzCwt) {
      dense_scores = katz_scores_exact(x.to_dense(), cfg.beta);
      models.push_back({{"kind", "katz"}, {"beta", cfg.beta}});
    } else {
      const Index kmax = *std::max_element(cfg.ranks.begin(), cfg.ranks.end());
      const SvdFactors f = truncated_svd(x, kmax, SvdOptions{1e-10, std::nullopt, cfg.seed ^ 0x5eedULL});
      save_svd((out / "svd").string(), f);
      std::vector<ScoreModel> per_rank;
      for (Index k : cfg.ranks) {
        const Index kk = std::min(k, f.rank());
        if (kk < k) warn("rank " + std::to_string(k) + " truncated to " + std::to_string(kk) + " nonzero singular values");
        const bool tkatz = cfg.method == Method::TkatzCt || cfg.method == Method::TkatzCwt;
        per_rank.push_back(tkatz ? tkatz_scores(f, kk, cfg.beta, warn) : tsvd_scores(f, kk));
        models.push_back({{"kind", "svd"}, {"rank", k}, {"sigma_1", f.sigma(0)}, {"sigma_k", f.sigma(kk - 1)}});
      }
      factored.push_back(ensemble_scores(per_rank));
    }
  } else if (cfg.method == Method::LastPeriod) {
    last_period = last_period_scores(data.train, cfg.hw.period);
    models.push_back({{"kind", "last-period"}, {"period", cfg.hw.period}});
  } else {
    const Index slices = cfg.method == Method::CpForecast ? cfg.hw.period : 1;
    std::vector<std::vector<ScoreModel>> per_slice(slices);
    for (Index k : cfg.ranks) {
      auto [m, trace] = cp_als(data.train, k, {cfg.cp_tol, cfg.cp_max_iter, cfg.seed + k});
      detail::write_file(out / ("cp_K" + std::to_string(k) + ".txt"), [&](std::ostream& o) { write_model(o, m); });
      if (!trace.converged) warn("cp_als rank " + std::to_string(k) + " stopped at the iteration limit");
      models.push_back({{"kind", "cp"}, {"rank", k}, {"fit", trace.fit_history.back()},
                        {"iterations", trace.iterations}, {"converged", trace.converged}});
      if (cfg.method == Method::CpHeuristic) {
        per_slice[0].push_back(cp_heuristic_scores(m, cfg.t0));
      } else {
        auto s = cp_forecast_scores(m, cfg.hw);
        for (Index l = 0; l < slices; ++l) per_slice[l].push_back(std::move(s[l]));
      }
    }
    for (auto& v : per_slice) factored.push_back(ensemble_scores(v));
  }

  // Labels: multi-step methods are scored per test step, the rest against the union of test steps.
  std::vector<LabeledPairs> labels = multi_step ? binarize_slices(data.test) : std::vector<LabeledPairs>{binarize_test(data.test)};
  if (cfg.protocol == Protocol::New)
    for (auto& lp : labels) lp = new_link_filter(lp, data.train);

  std::vector<EvalSlice> slices;
  for (std::size_t l = 0; l < labels.size(); ++l) {
    if (dense_scores) slices.push_back({RowScorer::of(*dense_scores), &labels[l]});
    else if (!last_period.empty()) slices.push_back({row_scorer(last_period[l]), &labels[l]});
    else slices.push_back({RowScorer::of(factored[factored.size() == 1 ? 0 : l]), &labels[l]});
  }
  const Index universe = [&] {
    Index u = 0;
    for (const auto& lp : labels) u += lp.universe();
    return u;
  }();
  const EvalReport rep = evaluate(slices, std::min(cfg.topk, universe), cfg.protocol);

  for (std::size_t l = 0; l < factored.size(); ++l) {
    const std::string name = factored.size() == 1 ? "score_model.txt" : "score_model_step" + std::to_string(l + 1) + ".txt";
    detail::write_file(out / name, [&](std::ostream& o) { write_score_model(o, factored[l]); });
  }
  detail::write_file(out / "top_scores.txt",
                     [&](std::ostream& o) { detail::write_top_scores(o, dims.rows, dims.cols, labels.size(), rep.top); });
  detail::write_file(out / "roc.csv", [&](std::ostream& o) { write_roc_csv(o, rep.roc); });

  Json j = to_json(rep);
  j["schema"] = kReportSchema;
  j["command"] = "run";
  j["config"] = to_json(cfg);
  j["method"] = to_string(cfg.method);
  j["seed"] = cfg.seed;
  j["data"] = {{"rows", dims.rows}, {"cols", dims.cols}, {"train_steps", dims.steps}, {"test_steps", test_steps},
               {"train_nnz", data.train.nnz()}, {"test_nnz", data.test.nnz()}};
  j["models"] = models;
  j["warnings"] = warnings;
  detail::write_json(out / "report.json", j);
  marker.done();
  return {rep, j};
}

// ---------------------------------------------------------------------------
// eval: a saved factored score model (or one per test step) against a test tensor.

struct EvalConfig {
  std::vector<std::string> score_paths;
  std::string test_path, train_path;
  Protocol protocol = Protocol::All;
  Index topk = 1000;
  std::string out_dir = "eval";
};

inline RunResult cmd_eval(const EvalConfig& cfg) {
  if (cfg.score_paths.empty() || cfg.test_path.empty()) throw ParameterError("eval: --scores and --test are required");
  if (cfg.protocol == Protocol::New && cfg.train_path.empty()) throw ParameterError("eval: protocol 'new' needs --train");
  if (cfg.topk == 0) throw ParameterError("eval: --topk must be positive");
  const fs::path out = cfg.out_dir;
  detail::ensure_dir(out);
  detail::PartialMarker marker(out);

  std::vector<ScoreModel> models;
  for (const auto& p : cfg.score_paths) {
    std::ifstream in(p);
    if (!in) throw IoError("cannot open " + p);
    models.push_back(read_score_model(in));
  }
  const Index rows = models.front().rows(), cols = models.front().cols();
  const SparseTensor3 test = with_grid(load_coo(cfg.test_path), rows, cols);
  const bool multi = models.size() > 1;
  if (multi && models.size() != test.dims().steps) throw DimensionError("eval: one score model per test step required");
  std::vector<LabeledPairs> labels = multi ? binarize_slices(test) : std::vector<LabeledPairs>{binarize_test(test)};
  if (cfg.protocol == Protocol::New) {
    const SparseTensor3 train = load_coo(cfg.train_path);
    for (auto& lp : labels) lp = new_link_filter(lp, train);
  }
  std::vector<EvalSlice> slices;
  Index universe = 0;
  for (std::size_t l = 0; l < labels.size(); ++l) {
    slices.push_back({RowScorer::of(models[multi ? l : 0]), &labels[l]});
    universe += labels[l].universe();
  }
  const EvalReport rep = evaluate(slices, std::min(cfg.topk, universe), cfg.protocol);
  detail::write_file(out / "roc.csv", [&](std::ostream& o) { write_roc_csv(o, rep.roc); });
  detail::write_file(out / "top_scores.txt",
                     [&](std::ostream& o) { detail::write_top_scores(o, rows, cols, labels.size(), rep.top); });
  Json j = to_json(rep);
  j["schema"] = kReportSchema;
  j["command"] = "eval";
  j["config"] = {{"scores", cfg.score_paths}, {"test", cfg.test_path}, {"train", cfg.train_path},
                 {"protocol", to_string(cfg.protocol)}, {"topk", cfg.topk}, {"out_dir", cfg.out_dir}};
  detail::write_json(out / "report.json", j);
  marker.done();
  return {rep, j};
}

// ---------------------------------------------------------------------------
// split: one window, or every sliding window, written as train/test COO pairs.

struct SplitConfig {
  std::string input_path;
  Index offset = 0;  // leading steps skipped before the window
  Index train_len = 0;
  Index test_len = 0;  // 0: all remaining steps (single window) or 1 (sliding)
  bool sliding = false;
  double min_row_weight = 0.0;
  std::string out_dir = "split";
};

/// Returns the number of windows written.
inline Index cmd_split_files(const SplitConfig& cfg) {
  if (cfg.input_path.empty() || cfg.train_len == 0) throw ParameterError("split: --input and --train-len are required");
  const SparseTensor3 z = load_coo(cfg.input_path);
  const fs::path out = cfg.out_dir;
  detail::ensure_dir(out);
  detail::PartialMarker marker(out);
  auto emit = [&](const fs::path& dir, SplitResult s) {
    detail::ensure_dir(dir);
    if (cfg.min_row_weight > 0.0) s = filter_rows(s, cfg.min_row_weight);
    save_coo((dir / "train.coo").string(), s.train);
    save_coo((dir / "test.coo").string(), s.test);
    detail::write_file(dir / "rows.txt", [&](std::ostream& o) {
      for (Index r : s.kept_rows) o << r + 1 << '\n';
    });
  };
  Index written = 0;
  if (cfg.sliding) {
    const Index test_len = cfg.test_len ? cfg.test_len : 1;
    const auto starts = sliding_windows(z.dims().steps, cfg.train_len, test_len);
    if (starts.empty()) throw ParameterError("split: no window fits the tensor");
    for (Index s : starts) {
      char name[32];
      std::snprintf(name, sizeof name, "window_%02zu", static_cast<std::size_t>(s + 1));
      emit(out / name, split_window(z, s, cfg.train_len, test_len));
      ++written;
    }
  } else {
    if (cfg.offset + cfg.train_len >= z.dims().steps) throw ParameterError("split: train window leaves no test steps");
    const Index test_len = cfg.test_len ? cfg.test_len : z.dims().steps - cfg.offset - cfg.train_len;
    emit(out, split_window(z, cfg.offset, cfg.train_len, test_len));
    written = 1;
  }
  marker.done();
  return written;
}

// ---------------------------------------------------------------------------
// synth

inline Json to_json(const SynthConfig& c) {
  return {{"rows", c.rows},
          {"cols", c.cols},
          {"components", c.components},
          {"period", c.period},
          {"train_periods", c.train_periods},
          {"p_top", c.p_top},
          {"p_swap", c.p_swap},
          {"p_rand", c.p_rand},
          {"temporal_noise", c.temporal_noise},
          {"seed", c.seed},
          {"templates", c.templates},
          {"noise_scale", "p_rand * population std of the noise-free training tensor, zeros included"},
          {"swap_positions", "uniform over all dense positions; collisions allowed"}};
}

/// Writes train.coo, test.coo, planted.txt, membership CSVs and manifest.json.
inline SynthInstance cmd_synth(const SynthConfig& cfg, const std::string& out_dir) {
  cfg.validate();
  const fs::path out = out_dir;
  detail::ensure_dir(out);
  detail::PartialMarker marker(out);
  SynthInstance inst = generate_instance(cfg);
  save_coo((out / "train.coo").string(), inst.z_train);
  save_coo((out / "test.coo").string(), inst.z_test);
  save_model((out / "planted.txt").string(), inst.planted);
  auto hist_csv = [&](const std::string& name, const DenseMatrix& x) {
    detail::write_file(out / name, [&](std::ostream& o) {
      o << "memberships,count\n";
      const auto h = membership_histogram(x);
      for (std::size_t m = 1; m < h.size(); ++m) o << m << ',' << h[m] << '\n';
    });
  };
  hist_csv("membership_rows.csv", inst.planted.a);
  hist_csv("membership_cols.csv", inst.planted.b);
  Json trends = Json::array();
  for (auto t : inst.trends) trends.push_back(to_string(t));
  Json j{{"schema", kReportSchema},
         {"command", "synth"},
         {"config", to_json(cfg)},
         {"trends", trends},
         {"train_nnz", inst.z_train.nnz()},
         {"test_nnz", inst.z_test.nnz()}};
  detail::write_json(out / "manifest.json", j);
  marker.done();
  return inst;
}

// ---------------------------------------------------------------------------
// forecast-dump

inline DenseMatrix cmd_forecast_dump(const std::string& model_path, const HoltWintersParams& hw, const std::string& csv_path) {
  const KruskalModel m = load_model(model_path);
  const DenseMatrix gamma = forecast_temporal(m, hw);
  detail::write_file(csv_path, [&](std::ostream& o) { write_forecast_csv(o, gamma); });
  return gamma;
}

}  // namespace tlp
