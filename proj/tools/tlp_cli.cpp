// tlp: temporal link prediction pipeline.
//
//   tlp synth --out DIR [--rows 500 --cols 400 ...]
//   tlp split --input Z.coo --train-len 10 [--sliding] --out DIR
//   tlp run --train train.coo --test test.coo --method cp-forecast --out DIR
//   tlp eval --scores score_model.txt --test test.coo --out DIR
//   tlp forecast-dump --model cp_K10.txt --out forecast.csv
//
// Every subcommand accepts --config FILE.json holding a flat object of flag names
// (underscores allowed); command-line flags win over the file.
// Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 I/O error.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "tlp/pipeline.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitIo = 4;

/// Fills every option of `sub` that was not given on the command line from a flat JSON object.
/// Keys are long flag names with '_' or '-' separators; arrays feed multi-value options.
void apply_json_config(CLI::App* sub, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw tlp::IoError("cannot open config file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw tlp::ParameterError("config file " + path + " is not valid JSON: " + e.what());
  }
  if (!j.is_object()) throw tlp::ParameterError("config file " + path + " must hold a JSON object");
  for (const auto& [key, value] : j.items()) {
    std::string flag = key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    CLI::Option* opt = nullptr;
    try {
      opt = sub->get_option("--" + flag);
    } catch (const CLI::OptionNotFound&) {
    }
    if (!opt || flag == "config") throw tlp::ParameterError("config file " + path + ": unknown key '" + key + "'");
    if (opt->count() > 0) continue;  // the command line wins
    auto text = [&](const nlohmann::json& v) -> std::string {
      if (v.is_string()) return v.get<std::string>();
      if (v.is_object() || v.is_null()) throw tlp::ParameterError("config file " + path + ": key '" + key + "' needs a scalar or a list");
      if (v.is_array()) {  // one template row; spaces keep CLI11 from splitting it
        std::string row;
        for (const auto& x : v) row += (row.empty() ? "" : " ") + x.dump();
        return row;
      }
      return v.dump();
    };
    if (value.is_array()) {
      if (opt->get_expected_max() <= 1) {
        std::string joined;  // a list for a single-value option, e.g. "hw_params": [0.2, 0.2, 0.2]
        for (const auto& v : value) joined += (joined.empty() ? "" : ",") + text(v);
        opt->add_result(joined);
      } else {
        for (const auto& v : value) opt->add_result(text(v));
      }
    } else {
      opt->add_result(text(value));
    }
    opt->run_callback();
  }
}

std::vector<double> parse_list(std::string s) {
  for (char& c : s)
    if (c == '[' || c == ']' || c == ',') c = ' ';
  std::istringstream in(s);
  std::vector<double> out;
  std::string tok;
  while (in >> tok) {
    double v;
    if (!tlp::detail::parse_double(tok, v) || !std::isfinite(v)) throw tlp::ParameterError("bad number '" + tok + "' in list");
    out.push_back(v);
  }
  return out;
}

void add_hw_options(CLI::App* sub, tlp::HoltWintersParams& hw, std::string& forecast, std::string& hw_params) {
  sub->add_option("--forecast", forecast, "Forecasting method for temporal factors")
      ->check(CLI::IsMember({"holt-winters"}));
  sub->add_option("--period", hw.period, "Season length L");
  sub->add_option("--hw-params", hw_params, "alpha,gamma,delta smoothing constants");
}

void apply_hw_params(const std::string& text, tlp::HoltWintersParams& hw) {
  if (text.empty()) return;
  const auto v = parse_list(text);
  if (v.size() != 3) throw tlp::ParameterError("--hw-params needs three values alpha,gamma,delta");
  hw.alpha = v[0];
  hw.gamma_trend = v[1];
  hw.delta_season = v[2];
}

/// "tsvd" + "ct" -> "tsvd-ct"; a suffixed method must agree with an explicit --collapse.
std::string with_collapse(const std::string& method, const std::string& collapse) {
  if (method == "tsvd" || method == "tkatz" || method == "katz") return method + "-" + (collapse.empty() ? "cwt" : collapse);
  if (collapse.empty()) return method;
  const auto dash = method.rfind('-');
  const std::string suffix = dash == std::string::npos ? "" : method.substr(dash + 1);
  if ((suffix != "ct" && suffix != "cwt") || method.rfind("cp-", 0) == 0)
    throw tlp::ParameterError("--collapse applies only to tsvd, tkatz and katz");
  if (suffix != collapse) throw tlp::ParameterError("--collapse " + collapse + " contradicts --method " + method);
  return method;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Temporal link prediction toolkit"};
  app.require_subcommand(1);
  std::string run_config, synth_config, split_config, eval_config, fdump_config;

  // run
  tlp::RunConfig rc;
  std::string method = "tsvd-cwt", collapse, protocol = "all", forecast = "holt-winters", hw_params;
  auto* run = app.add_subcommand("run", "Score and evaluate one method");
  run->add_option("--config", run_config, "JSON config file; flags win");
  run->add_option("--train", rc.train_path, "Training tensor (COO)");
  run->add_option("--test", rc.test_path, "Test tensor (COO)");
  run->add_option("--input", rc.input_path, "Full tensor to split (COO)");
  run->add_option("--offset", rc.offset, "Leading steps skipped before the training window");
  run->add_option("--train-len", rc.train_len, "Training steps");
  run->add_option("--test-len", rc.test_len, "Test steps (default: the rest)");
  run->add_option("--min-row-weight", rc.min_row_weight, "Keep rows with at least this training total");
  run->add_flag("--log", rc.log_transform, "Replace training counts c by 1 + ln c");
  run->add_option("--method", method, "Scoring method")->check(CLI::IsMember([] {
    std::vector<std::string> names;
    for (const auto& [m, n] : tlp::method_names()) names.push_back(n);
    for (const char* base : {"tsvd", "tkatz", "katz"}) names.push_back(base);
    return names;
  }()));
  run->add_option("--collapse", collapse, "ct or cwt, for tsvd, tkatz and katz")->check(CLI::IsMember({"ct", "cwt"}));
  run->add_option("--ranks,--cp-rank", rc.ranks, "Rank grid, ensembled")->delimiter(',');
  run->add_option("--beta", rc.beta, "Katz damping");
  run->add_option("--theta", rc.theta, "CWT decay");
  run->add_option("--t0", rc.t0, "Steps averaged by cp-heuristic");
  add_hw_options(run, rc.hw, forecast, hw_params);
  run->add_option("--cp-tol,--tol", rc.cp_tol, "ALS fit-change tolerance");
  run->add_option("--cp-max-iter,--max-iter", rc.cp_max_iter, "ALS iteration limit");
  run->add_option("--protocol", protocol, "all or new")->check(CLI::IsMember({"all", "new"}));
  run->add_option("--topk", rc.topk, "k for top-k hit counts");
  run->add_option("--seed", rc.seed, "Seed for factorization starts");
  run->add_option("--out", rc.out_dir, "Output directory");

  // synth
  tlp::SynthConfig sc;
  std::string synth_out = "synth";
  std::vector<std::string> templates, trends;
  auto* synth = app.add_subcommand("synth", "Generate a planted periodic instance");
  synth->add_option("--config", synth_config, "JSON config file; flags win");
  synth->add_option("--rows", sc.rows, "M");
  synth->add_option("--cols", sc.cols, "N");
  synth->add_option("--components", sc.components, "K");
  synth->add_option("--period", sc.period, "L");
  synth->add_option("--train-periods", sc.train_periods, "P");
  synth->add_option("--p-top", sc.p_top, "Fraction of largest entries eligible for swapping");
  synth->add_option("--p-swap", sc.p_swap, "Fraction of those swapped");
  synth->add_option("--p-rand", sc.p_rand, "Additive noise level");
  synth->add_option("--temporal-noise", sc.temporal_noise, "Noise on temporal patterns");
  synth->add_option("--seed", sc.seed, "Generator seed");
  synth->add_option("--templates", templates, "Weekly templates, one comma list each");
  synth->add_option("--trends", trends, "increasing, decreasing or neutral per component")->delimiter(',');
  synth->add_option("--out", synth_out, "Output directory");

  // split
  tlp::SplitConfig spc;
  auto* split = app.add_subcommand("split", "Cut train/test windows along time");
  split->add_option("--config", split_config, "JSON config file; flags win");
  split->add_option("--input", spc.input_path, "Tensor (COO)");
  split->add_option("--offset", spc.offset, "Leading steps skipped");
  split->add_option("--train-len", spc.train_len, "Training steps");
  split->add_option("--test-len", spc.test_len, "Test steps");
  split->add_flag("--sliding", spc.sliding, "Write every window of the given lengths");
  split->add_option("--min-row-weight", spc.min_row_weight, "Keep rows with at least this training total");
  split->add_option("--out", spc.out_dir, "Output directory");

  // eval
  tlp::EvalConfig ec;
  std::string eval_protocol = "all";
  auto* eval = app.add_subcommand("eval", "Evaluate saved score models");
  eval->add_option("--config", eval_config, "JSON config file; flags win");
  eval->add_option("--scores", ec.score_paths, "Score model file(s), one per test step");
  eval->add_option("--test", ec.test_path, "Test tensor (COO)");
  eval->add_option("--train", ec.train_path, "Training tensor, for the new-links protocol");
  eval->add_option("--protocol", eval_protocol, "all or new")->check(CLI::IsMember({"all", "new"}));
  eval->add_option("--topk", ec.topk, "k for top-k hit counts");
  eval->add_option("--out", ec.out_dir, "Output directory");

  // forecast-dump
  tlp::HoltWintersParams fd_hw;
  std::string model_path, fd_out = "forecast.csv", fd_forecast = "holt-winters", fd_params;
  auto* fdump = app.add_subcommand("forecast-dump", "Write Holt-Winters forecasts of CP temporal factors as CSV");
  fdump->add_option("--config", fdump_config, "JSON config file; flags win");
  fdump->add_option("--model", model_path, "CP model file");
  add_hw_options(fdump, fd_hw, fd_forecast, fd_params);
  fdump->add_option("--out", fd_out, "CSV path");

  try {
    app.parse(argc, argv);
    const std::pair<CLI::App*, const std::string*> configs[] = {
        {run, &run_config}, {synth, &synth_config}, {split, &split_config}, {eval, &eval_config}, {fdump, &fdump_config}};
    for (const auto& [sub, path] : configs)
      if (sub->parsed() && !path->empty()) apply_json_config(sub, *path);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  if (run->parsed()) {
    rc.method = tlp::parse_method(with_collapse(method, collapse));
    rc.protocol = tlp::parse_protocol(protocol);
    apply_hw_params(hw_params, rc.hw);
    const auto r = tlp::cmd_run(rc);
    std::cout << "auc " << tlp::detail::format_double(r.report.auc) << "  top" << r.report.k << " " << r.report.topk_correct
              << "  (" << rc.out_dir << "/report.json)\n";
  } else if (synth->parsed()) {
    if (!templates.empty()) {
      sc.templates.clear();
      for (const auto& t : templates) sc.templates.push_back(parse_list(t));
    }
    for (const auto& t : trends) sc.trends.push_back(tlp::parse_trend_mode(t));
    const auto inst = tlp::cmd_synth(sc, synth_out);
    std::cout << "train nnz " << inst.z_train.nnz() << ", test nnz " << inst.z_test.nnz() << " (" << synth_out << ")\n";
  } else if (split->parsed()) {
    const auto n = tlp::cmd_split_files(spc);
    std::cout << n << " window(s) written to " << spc.out_dir << "\n";
  } else if (eval->parsed()) {
    ec.protocol = tlp::parse_protocol(eval_protocol);
    const auto r = tlp::cmd_eval(ec);
    std::cout << "auc " << tlp::detail::format_double(r.report.auc) << "  top" << r.report.k << " " << r.report.topk_correct
              << "\n";
  } else if (fdump->parsed()) {
    if (model_path.empty()) throw tlp::ParameterError("forecast-dump: --model is required");
    apply_hw_params(fd_params, fd_hw);
    tlp::cmd_forecast_dump(model_path, fd_hw, fd_out);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_cli(argc, argv);
  } catch (const tlp::ParameterError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const tlp::DimensionError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const tlp::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const tlp::IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const tlp::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
