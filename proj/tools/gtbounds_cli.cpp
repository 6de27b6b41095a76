// Copyright 2026 The gtbounds Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "gtbounds/bounds.hpp"
#include "gtbounds/decoders.hpp"
#include "gtbounds/experiments.hpp"
#include "gtbounds/model.hpp"
#include "gtbounds/version.hpp"

namespace {

using nlohmann::json;

struct Options {
  int n = 0;
  int k = 0;
  int l = 0;
  int m = -1;
  double p = -1.0;  // -1 means "default to 1/K"
  double u = 0.0;
  double q = 0.0;
  int trials = 10000;
  std::uint64_t seed = 1;
  std::string scheme = "multistage";
  std::vector<int> m_list;
  std::vector<int> l_list;
  std::vector<int> k_list = {8, 16, 32, 64};
  std::vector<double> alpha_list = {0.25};
  std::string out;
  std::string format = "csv";
  bool force = false;
};

// Ordered key=value metadata echoed into every output: the fully-resolved
// configuration, including defaults.
using Meta = std::vector<std::pair<std::string, std::string>>;

std::string fmt(double v) { return gtbounds::detail::fmt_double(v); }

void write_output(const Options& opt, const Meta& meta,
                  const std::string& csv_header,
                  const std::vector<std::string>& csv_rows, json json_rows) {
  std::string text;
  if (opt.format == "csv") {
    for (const auto& [key, value] : meta) text += "# " + key + "=" + value + "\n";
    text += csv_header + "\n";
    for (const auto& row : csv_rows) text += row + "\n";
  } else {
    json meta_obj = json::object();
    for (const auto& [key, value] : meta) meta_obj[key] = value;
    text = json{{"meta", meta_obj}, {"rows", std::move(json_rows)}}.dump(2);
    text += "\n";
  }
  if (opt.out.empty()) {
    std::cout << text;
  } else {
    std::ofstream file(opt.out, std::ios::binary);
    if (!file) throw gtbounds::Error("cannot open output file: " + opt.out);
    file << text;
  }
}

Meta base_meta(const std::string& command, const Options& opt, double p) {
  Meta meta;
  meta.emplace_back("tool", std::string("gtbounds ") + gtbounds::kVersion);
  meta.emplace_back("command", command);
  meta.emplace_back("n", std::to_string(opt.n));
  meta.emplace_back("k", std::to_string(opt.k));
  meta.emplace_back("p", fmt(p));
  meta.emplace_back("u", fmt(opt.u));
  meta.emplace_back("q", fmt(opt.q));
  return meta;
}

double resolved_p(const Options& opt) {
  if (opt.p >= 0.0) return opt.p;
  // 1/K is the near-optimal pool density; for K = 1 that degenerates to 1,
  // where the informative default is 1/2.
  return opt.k == 1 ? 0.5 : 1.0 / opt.k;
}

int run_bounds(const Options& opt) {
  const double p = resolved_p(opt);
  const gtbounds::ProblemConfig config{opt.n, opt.k, opt.l,
                                       opt.m > 0 ? opt.m : 0};
  const gtbounds::DesignParams design{p};
  const gtbounds::NoiseParams noise{opt.u, opt.q};
  std::optional<int> m;
  if (opt.m >= 1) m = opt.m;
  const auto report = gtbounds::compute_bound_report(config, design, noise, m);

  Meta meta = base_meta("bounds", opt, p);
  meta.emplace_back("l", std::to_string(opt.l));
  if (m) meta.emplace_back("m", std::to_string(*m));
  write_output(opt, meta, gtbounds::bound_report_csv_header(),
               {gtbounds::to_csv_row(report)},
               json::array({gtbounds::to_json(report)}));
  return 0;
}

int run_simulate(const Options& opt) {
  const double p = resolved_p(opt);
  const gtbounds::ProblemConfig config{opt.n, opt.k, opt.l, opt.m};
  const gtbounds::DesignParams design{p};
  const gtbounds::NoiseParams noise{opt.u, opt.q};
  const auto scheme = gtbounds::scheme_from_name(opt.scheme);
  const auto batch = gtbounds::estimate_pe(config, design, noise, scheme,
                                           opt.m, opt.trials, opt.seed,
                                           opt.force);
  std::cerr << "simulate: " << batch.errors_observed << "/" << batch.n_trials
            << " errors in " << batch.wall_time_ms << " ms\n";

  Meta meta = base_meta("simulate", opt, p);
  meta.emplace_back("l", std::to_string(opt.l));
  meta.emplace_back("m", std::to_string(opt.m));
  meta.emplace_back("scheme", opt.scheme);
  meta.emplace_back("trials", std::to_string(opt.trials));
  meta.emplace_back("seed", std::to_string(opt.seed));
  meta.emplace_back("force", opt.force ? "1" : "0");
  write_output(opt, meta, gtbounds::trial_batch_csv_header(),
               {gtbounds::to_csv_row(batch)},
               json::array({gtbounds::to_json(batch)}));
  return 0;
}

int run_sweep(const Options& opt) {
  if (opt.m_list.empty())
    throw gtbounds::InvalidConfigError("sweep: --m-list is required");
  const double p = resolved_p(opt);
  const gtbounds::ProblemConfig config{opt.n, opt.k, opt.l, 0};
  const gtbounds::DesignParams design{p};
  const gtbounds::NoiseParams noise{opt.u, opt.q};
  const auto scheme = gtbounds::scheme_from_name(opt.scheme);
  const auto rows = gtbounds::sweep_m(config, design, noise, scheme,
                                      opt.m_list, opt.trials, opt.seed,
                                      opt.force);

  Meta meta = base_meta("sweep", opt, p);
  meta.emplace_back("l", std::to_string(opt.l));
  meta.emplace_back("scheme", opt.scheme);
  meta.emplace_back("trials", std::to_string(opt.trials));
  meta.emplace_back("seed", std::to_string(opt.seed));
  std::vector<std::string> csv;
  json jrows = json::array();
  for (const auto& b : rows) {
    csv.push_back(gtbounds::to_csv_row(b));
    jrows.push_back(gtbounds::to_json(b));
  }
  write_output(opt, meta, gtbounds::trial_batch_csv_header(), csv, jrows);
  return 0;
}

int run_figure1(const Options& opt) {
  if (opt.l_list.empty())
    throw gtbounds::InvalidConfigError("figure1: --l-list is required");
  const auto rows = gtbounds::compare_factors(opt.n, opt.k, opt.l_list);

  Meta meta = base_meta("figure1", opt, resolved_p(opt));
  std::vector<std::string> csv;
  json jrows = json::array();
  for (const auto& r : rows) {
    csv.push_back(gtbounds::to_csv_row(opt.n, opt.k, r));
    jrows.push_back(json{{"n", opt.n},
                         {"k", opt.k},
                         {"l", r.l},
                         {"gamma_u2", r.gamma_u2},
                         {"gamma_u1", r.gamma_u1},
                         {"gamma_ud", r.gamma_ud},
                         {"gamma_l1", r.gamma_l1}});
  }
  write_output(opt, meta, gtbounds::factor_row_csv_header(), csv, jrows);
  return 0;
}

int run_tables(const Options& opt) {
  const double dilution_u = opt.u > 0.0 ? opt.u : 0.5;
  const double additive_q = opt.q > 0.0 ? opt.q : 0.1;
  const std::vector<gtbounds::NoiseCase> cases = {
      {"noiseless", {0.0, 0.0}},
      {"dilution", {dilution_u, 0.0}},
      {"additive", {0.0, additive_q}},
  };
  const auto rows = gtbounds::order_tables(opt.k_list, opt.alpha_list, cases);

  Meta meta;
  meta.emplace_back("tool", std::string("gtbounds ") + gtbounds::kVersion);
  meta.emplace_back("command", "tables");
  std::string ks, as;
  for (int k : opt.k_list) ks += (ks.empty() ? "" : " ") + std::to_string(k);
  for (double a : opt.alpha_list) as += (as.empty() ? "" : " ") + fmt(a);
  meta.emplace_back("k_list", ks);
  meta.emplace_back("alpha_list", as);
  meta.emplace_back("dilution_u", fmt(dilution_u));
  meta.emplace_back("additive_q", fmt(additive_q));

  std::vector<std::string> csv;
  json jrows = json::array();
  for (const auto& r : rows) {
    csv.push_back(gtbounds::to_csv_row(r));
    jrows.push_back(json{{"case", r.noise_case},
                         {"k", r.k},
                         {"n", r.n},
                         {"l", r.l},
                         {"alpha", r.alpha},
                         {"u", r.u},
                         {"q", r.q},
                         {"i1", r.i1},
                         {"suff_m", r.suff_m},
                         {"necessity_m", r.necessity_m},
                         {"suff_predicted", r.suff_predicted},
                         {"necessity_predicted", r.necessity_predicted},
                         {"suff_ratio", r.suff_ratio},
                         {"necessity_ratio", r.necessity_ratio}});
  }
  write_output(opt, meta, gtbounds::order_row_csv_header(), csv, jrows);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pooled (group) testing: analytical test-count bounds and "
               "Monte Carlo error estimation for finding non-defective items"};
  app.set_version_flag("--version", std::string("gtbounds ") + gtbounds::kVersion);
  app.require_subcommand(1);
  Options opt;

  auto add_problem = [&](CLI::App* cmd, bool need_l) {
    cmd->add_option("--n", opt.n, "number of items N")->required();
    cmd->add_option("--k", opt.k, "number of defective items K")->required();
    auto* l = cmd->add_option("--l", opt.l, "number of non-defectives to find L");
    if (need_l) l->required();
    cmd->add_option("--p", opt.p, "pool density p (default 1/K)");
    cmd->add_option("--u", opt.u, "dilution noise u (default 0)");
    cmd->add_option("--q", opt.q, "additive noise q (default 0)");
  };
  auto add_mc = [&](CLI::App* cmd) {
    cmd->add_option("--trials", opt.trials, "Monte Carlo trials per point");
    cmd->add_option("--seed", opt.seed, "master seed");
    cmd->add_option("--scheme", opt.scheme,
                    "decoder: scheme1 | k1_sort | multistage");
    cmd->add_flag("--force", opt.force,
                  "override the subset-enumeration guardrail");
  };
  auto add_io = [&](CLI::App* cmd) {
    cmd->add_option("--out", opt.out, "output path (default stdout)");
    cmd->add_option("--format", opt.format, "csv | json")
        ->check(CLI::IsMember({"csv", "json"}));
  };

  auto* bounds_cmd =
      app.add_subcommand("bounds", "analytical bound report for one configuration");
  add_problem(bounds_cmd, true);
  bounds_cmd->add_option("--m", opt.m,
                         "tests M (optional; adds an error-probability bound)");
  add_io(bounds_cmd);

  auto* sim_cmd = app.add_subcommand("simulate", "Monte Carlo error estimate");
  add_problem(sim_cmd, true);
  sim_cmd->add_option("--m", opt.m, "number of tests M")->required();
  add_mc(sim_cmd);
  add_io(sim_cmd);

  auto* sweep_cmd = app.add_subcommand("sweep", "error estimates across M values");
  add_problem(sweep_cmd, true);
  sweep_cmd->add_option("--m-list", opt.m_list, "comma-separated M values")
      ->delimiter(',')
      ->required();
  add_mc(sweep_cmd);
  add_io(sweep_cmd);

  auto* fig_cmd = app.add_subcommand(
      "figure1", "sufficiency/necessity factors on the M*I(1) scale across L");
  fig_cmd->add_option("--n", opt.n, "number of items N")->required();
  fig_cmd->add_option("--k", opt.k, "number of defective items K")->required();
  fig_cmd->add_option("--l-list", opt.l_list, "comma-separated L values")
      ->delimiter(',')
      ->required();
  add_io(fig_cmd);

  auto* tab_cmd = app.add_subcommand(
      "tables", "order-scaling table: computed thresholds vs predictions");
  tab_cmd->add_option("--k-list", opt.k_list, "comma-separated K values")
      ->delimiter(',');
  tab_cmd->add_option("--alpha-list", opt.alpha_list,
                      "comma-separated alpha values")
      ->delimiter(',');
  tab_cmd->add_option("--u", opt.u, "dilution level for the dilution case");
  tab_cmd->add_option("--q", opt.q, "additive level for the additive case");
  add_io(tab_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }

  try {
    if (bounds_cmd->parsed()) return run_bounds(opt);
    if (sim_cmd->parsed()) return run_simulate(opt);
    if (sweep_cmd->parsed()) return run_sweep(opt);
    if (fig_cmd->parsed()) return run_figure1(opt);
    if (tab_cmd->parsed()) return run_tables(opt);
  } catch (const gtbounds::InvalidConfigError& e) {
    std::cerr << "argument error: " << e.what() << "\n";
    return 2;
  } catch (const gtbounds::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
