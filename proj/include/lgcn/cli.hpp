// Copyright 2026 The lgcn Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#pragma once

#include "lgcn/dataset.hpp"
#include "lgcn/diffusion.hpp"
#include "lgcn/eval.hpp"
#include "lgcn/experiment.hpp"
#include "lgcn/graph.hpp"
#include "lgcn/model.hpp"
#include "lgcn/train.hpp"
#include "lgcn/types.hpp"

#include <CLI11.hpp>
#include <fmt/chrono.h>
#include <fmt/format.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <map>
#include <mutex>
#include <string>
#include <vector>

namespace lgcn::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

namespace fs = std::filesystem;

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path);
  if (!os || !(os << text)) throw DataError(fmt::format("cannot write '{}'", path.string()));
}

// <out>/<prefix><hash>-<UTC timestamp>, with a numeric suffix on collision.
inline fs::path make_run_dir(const fs::path& out, const std::string& prefix, const std::string& hash) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw DataError(fmt::format("cannot create output directory '{}': {}", out.string(), ec.message()));
  const auto stamp = fmt::format("{:%Y%m%dT%H%M%S}", fmt::gmtime(std::chrono::system_clock::to_time_t(std::chrono::system_clock::now())));
  static std::mutex mu;
  std::lock_guard lock(mu);
  fs::path dir = out / fmt::format("{}{}-{}", prefix, hash, stamp);
  for (int n = 2; fs::exists(dir); ++n) dir = out / fmt::format("{}{}-{}-{}", prefix, hash, stamp, n);
  fs::create_directory(dir, ec);
  if (ec) throw DataError(fmt::format("cannot create run directory '{}': {}", dir.string(), ec.message()));
  // Probe writability before any training starts.
  write_text(dir / ".probe", "");
  fs::remove(dir / ".probe");
  return dir;
}

// Test-set metrics tracked in the history: recall/ndcg at every cutoff.
// Diffusion runs add the same metrics on the propagated embeddings without
// the diffusion stage, prefixed "lgcn:".
inline EvalHook make_history_hook(const InteractionGraph& g, const InteractionDataset& ds, const ExperimentSpec& spec) {
  return [&g, &ds, cutoffs = spec.cutoffs, bins = spec.bins](int, const EmbeddingState& s) {
    MetricList out;
    auto add = [&](const std::string& prefix, const Matrix& emb) {
      const auto reports = evaluate(emb, s.num_users, g, ds, cutoffs, bins);
      for (const auto& r : reports) {
        out.emplace_back(fmt::format("{}recall@{}", prefix, r.cutoff), r.recall);
        out.emplace_back(fmt::format("{}ndcg@{}", prefix, r.cutoff), r.ndcg);
      }
    };
    add("", s.output());
    if (s.diffused) add("lgcn:", s.combined);
    return out;
  };
}

struct TrainOutcome {
  RunRecord record;
  TrainHistory history;
};

inline TrainOutcome run_experiment(const ExperimentSpec& spec, const LoadedDataset& data) {
  spec.train.validate();
  const auto start = std::chrono::steady_clock::now();
  RunRecord rec;
  rec.label = spec.model_label();
  rec.config_hash = spec.config_hash();
  rec.spec = spec.semantic_settings();
  rec.dir = make_run_dir(spec.out, "", rec.config_hash);
  write_text(rec.dir / "config.txt", spec.canonical_text());
  {
    std::ofstream users(rec.dir / "user_map.txt"), items(rec.dir / "item_map.txt");
    data.users.write(users);
    data.items.write(items);
  }
  write_text(rec.dir / "INCOMPLETE", "");
  try {
    const auto& ds = data.data;
    const InteractionGraph g = build_graph(ds);
    auto result = train(ds, spec.train, make_history_hook(g, ds, spec));
    rec.reports = evaluate(result.state, g, ds, spec.cutoffs, spec.bins);

    std::ostringstream hist, csv;
    result.history.write_csv(hist);
    write_text(rec.dir / "history.csv", hist.str());
    write_reports_csv(csv, rec.label, rec.reports);
    write_text(rec.dir / "report.csv", csv.str());
    nlohmann::json reps = nlohmann::json::array();
    for (const auto& r : rec.reports) reps.push_back(to_json(r));
    write_text(rec.dir / "report.json", nlohmann::json{{"model", rec.label}, {"reports", reps}}.dump(2) + "\n");
    save_embeddings(result.state.layer0, rec.dir / "embeddings.txt");

    rec.complete = true;
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_text(rec.dir / "run.json", rec.to_json().dump(2) + "\n");
    fs::remove(rec.dir / "INCOMPLETE");
    return {std::move(rec), std::move(result.history)};
  } catch (const std::exception& e) {
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_text(rec.dir / "INCOMPLETE", std::string(e.what()) + "\n");
    write_text(rec.dir / "run.json", rec.to_json().dump(2) + "\n");
    throw;
  }
}

inline int cmd_stats(const ExperimentSpec& spec, std::ostream& os) {
  const auto data = load_experiment_data(spec, false);
  const auto stats = compute_stats(data.loaded.data);
  os << stats.to_key_value();
  std::error_code ec;
  fs::create_directories(spec.out, ec);
  if (ec) throw DataError(fmt::format("cannot create output directory '{}': {}", spec.out.string(), ec.message()));
  write_text(spec.out / "stats.txt", stats.to_key_value());
  write_text(spec.out / "stats.csv", DatasetStats::csv_header() + "\n" + stats.to_csv_row() + "\n");
  return kOk;
}

inline int cmd_train(const ExperimentSpec& spec, std::ostream& os) {
  require_scalar_axes(spec);
  const auto data = load_experiment_data(spec);
  const auto outcome = run_experiment(spec, data.loaded);
  const auto& rec = outcome.record;
  os << "run=" << rec.dir.string() << '\n';
  for (const auto& r : rec.reports)
    os << fmt::format("recall@{0}={1:.6f} ndcg@{0}={2:.6f} precision@{0}={3:.6f} ild@{0}={4:.6f}\n", r.cutoff, r.recall,
                      r.ndcg, r.precision, r.ild);
  return kOk;
}

// Cartesian product of the layer, scheme and alpha axes.
inline std::vector<ExperimentSpec> expand_sweep(const ExperimentSpec& base) {
  const std::vector<int> layers = base.layers_axis.empty() ? std::vector<int>{base.train.layers} : base.layers_axis;
  const std::vector<NormScheme> schemes =
      base.scheme_axis.empty() ? std::vector<NormScheme>{base.train.scheme} : base.scheme_axis;
  std::vector<std::optional<double>> alphas;
  if (base.alpha_axis.empty())
    alphas.push_back(base.train.diffusion ? std::optional(base.train.diffusion->alpha) : std::nullopt);
  else
    alphas.assign(base.alpha_axis.begin(), base.alpha_axis.end());

  std::vector<ExperimentSpec> out;
  for (int k : layers)
    for (const auto& sc : schemes)
      for (const auto& a : alphas) {
        ExperimentSpec s = base;
        s.layers_axis = {k};
        s.scheme_axis = {sc};
        s.alpha_axis.clear();
        s.train.layers = k;
        s.train.scheme = sc;
        if (a) s.diffusion().alpha = *a;
        else s.train.diffusion.reset();
        if (a) s.alpha_axis = {*a};
        s.label.clear();
        out.push_back(std::move(s));
      }
  return out;
}

inline int cmd_sweep(const ExperimentSpec& base, std::ostream& os, int jobs = 1) {
  const auto configs = expand_sweep(base);
  const auto data = load_experiment_data(base);
  struct Row {
    ExperimentSpec spec;
    std::optional<RunRecord> record;
    std::string error;
  };
  std::vector<Row> rows;
  for (const auto& c : configs) rows.push_back({c, std::nullopt, {}});

  auto run_one = [&](Row& row) {
    try {
      row.record = run_experiment(row.spec, data.loaded).record;
    } catch (const std::exception& e) {
      row.error = e.what();
      log::warn(fmt::format("sweep run {} failed: {}", row.spec.model_label(), e.what()));
    }
  };
  if (jobs <= 1) {
    for (auto& r : rows) run_one(r);
  } else {
    for (std::size_t start = 0; start < rows.size(); start += static_cast<std::size_t>(jobs)) {
      std::vector<std::future<void>> wave;
      for (std::size_t k = start; k < std::min(rows.size(), start + static_cast<std::size_t>(jobs)); ++k)
        wave.push_back(std::async(std::launch::async, run_one, std::ref(rows[k])));
      for (auto& f : wave) f.get();
    }
  }

  fs::create_directories(base.out);
  const int c = base.primary_cutoff();
  std::ostringstream table, failures;
  table << fmt::format("model,layers,scheme,alpha,config_hash,run_dir,recall@{0},ndcg@{0},ild@{0},fairness_gap@{0}\n", c);
  failures << "model,layers,scheme,alpha,config_hash,error\n";
  std::size_t failed = 0;
  for (const auto& row : rows) {
    const auto& t = row.spec.train;
    const std::string alpha = t.diffusion ? detail::num(t.diffusion->alpha) : "";
    if (!row.record) {
      ++failed;
      std::string msg = row.error;
      for (auto& ch : msg)
        if (ch == ',' || ch == '\n') ch = ' ';
      failures << fmt::format("{},{},{},{},{},{}\n", row.spec.model_label(), t.layers, t.scheme.name(), alpha,
                              row.spec.config_hash(), msg);
      continue;
    }
    const auto* r = row.record->report_at(c);
    table << fmt::format("{},{},{},{},{},{},{:.17g},{:.17g},{:.17g},{:.17g}\n", row.record->label, t.layers,
                         t.scheme.name(), alpha, row.record->config_hash, row.record->dir.filename().string(), r->recall,
                         r->ndcg, r->ild, r->fairness.gap);
  }
  write_text(base.out / "comparison.csv", table.str());
  write_text(base.out / "failures.csv", failures.str());
  os << table.str();
  os << fmt::format("runs={} failed={}\n", rows.size(), failed);
  return kOk;
}

enum class PlotKind { curves, fairness_bars, diversity_bars };

inline PlotKind parse_plot_kind(const std::string& s) {
  if (s == "curves") return PlotKind::curves;
  if (s == "fairness-bars") return PlotKind::fairness_bars;
  if (s == "diversity-bars") return PlotKind::diversity_bars;
  throw UsageError(fmt::format("unknown plot kind '{}'", s));
}

// Long-format (series, x, y) CSV for one figure kind.
inline std::string plot_data(const std::vector<fs::path>& runs, PlotKind kind, const std::string& metric, int cutoff) {
  if (runs.empty()) throw UsageError("plotdata needs at least one run");
  std::ostringstream os;
  os << "series,x,y\n";
  for (const auto& dir : runs) {
    const auto rec = RunRecord::load(dir);
    if (!rec.complete) throw DataError(fmt::format("run '{}' is incomplete", dir.string()));
    if (kind == PlotKind::curves) {
      if (!fs::exists(dir / "history.csv"))
        throw DataError(fmt::format("run '{}' ({}) has no history", dir.string(), rec.label));
      const auto h = read_history_csv(dir / "history.csv");
      bool any = false;
      for (const auto& col : h.metric_names) {
        std::string series;
        if (col == metric) series = rec.label;
        else if (auto p = col.find(':'); p != std::string::npos && col.substr(p + 1) == metric)
          series = rec.label + "/" + col.substr(0, p);
        else continue;
        any = true;
        for (const auto& [x, y] : h.series(col)) os << fmt::format("{},{},{:.17g}\n", series, x, y);
      }
      if (!any) throw DataError(fmt::format("run '{}' ({}) does not track '{}'", dir.string(), rec.label, metric));
      continue;
    }
    const auto* r = rec.report_at(cutoff);
    if (!r) throw DataError(fmt::format("run '{}' ({}) has no report at cutoff {}", dir.string(), rec.label, cutoff));
    if (kind == PlotKind::fairness_bars) {
      for (std::size_t b = 0; b < r->fairness.bins.size(); ++b)
        os << fmt::format("{},{},{:.17g}\n", rec.label, b + 1, r->fairness.bins[b].mean);
    } else {
      os << fmt::format("{},ndcg@{},{:.17g}\n", rec.label, cutoff, r->ndcg);
      os << fmt::format("{},ild@{},{:.17g}\n", rec.label, cutoff, r->ild);
    }
  }
  return os.str();
}

inline int cmd_plotdata(const std::vector<fs::path>& runs, PlotKind kind, const std::string& metric, int cutoff,
                        const fs::path& out, std::ostream& os) {
  const auto text = plot_data(runs, kind, metric, cutoff);
  fs::create_directories(out);
  const char* name = kind == PlotKind::curves ? "curves.csv" : kind == PlotKind::fairness_bars ? "fairness-bars.csv" : "diversity-bars.csv";
  write_text(out / name, text);
  os << (out / name).string() << '\n';
  return kOk;
}

// Trains one diffusion model per candidate alpha on train minus a per-user
// validation holdout and keeps the alpha with the best validation NDCG.
inline int cmd_alpha_search(const ExperimentSpec& base, double validation_fraction, std::ostream& os) {
  auto data = load_experiment_data(base);
  const auto& full = data.loaded.data;
  InteractionDataset tuning = holdout_split(full.train, validation_fraction, base.split_seed + 1, full.num_users, full.num_items);
  std::vector<double> candidates = base.alpha_axis.empty() ? std::vector<double>{0.05, 0.1, 0.2} : base.alpha_axis;
  const int c = base.primary_cutoff();

  std::vector<std::pair<double, double>> scores;
  const double best = grid_search_alpha(candidates, [&](double alpha) {
    ExperimentSpec s = base;
    s.diffusion().alpha = alpha;
    if (!base.epochs_set) s.train.epochs = 600;
    auto result = train(tuning, s.train);
    const auto g = build_graph(tuning);
    const double v = evaluate(result.state, g, tuning, {c}, s.bins)[0].ndcg;
    scores.emplace_back(alpha, v);
    log::info(fmt::format("alpha={} validation ndcg@{}={:.6f}", alpha, c, v));
    return v;
  });

  ExperimentSpec tagged = base;
  tagged.alpha_axis = candidates;
  const auto dir = make_run_dir(base.out, "alpha-", tagged.config_hash());
  std::ostringstream csv;
  csv << fmt::format("alpha,validation_ndcg@{}\n", c);
  for (const auto& [a, v] : scores) csv << fmt::format("{},{:.17g}\n", detail::num(a), v);
  write_text(dir / "alpha_search.csv", csv.str());
  write_text(dir / "best_alpha.txt", detail::num(best) + "\n");
  os << "best_alpha=" << detail::num(best) << '\n';
  return kOk;
}

// Setting keys shared by stats/train/sweep/alpha-search; each maps to
// --<key> on the command line and "key = value" in a config file.
inline const std::vector<std::pair<std::string, std::string>>& setting_flags() {
  static const std::vector<std::pair<std::string, std::string>> flags{
      {"dataset", "dataset directory (train.txt, test.txt) or single interaction file"},
      {"format", "adjacency-list | pair-list"},
      {"string-ids", "treat ids as opaque strings (true/false)"},
      {"test-fraction", "per-user test share when splitting a single file"},
      {"split-seed", "seed of the per-user holdout split"},
      {"layers", "propagation layers K (list for sweep)"},
      {"scheme", "normalization: sqrt, left, right, l1, l1-left, l1-right (list for sweep)"},
      {"epochs", "training epochs"},
      {"lr", "Adam learning rate"},
      {"lambda", "L2 coefficient"},
      {"reg", "L2 scope: batch | full"},
      {"batch-size", "BPR triples per step"},
      {"dim", "embedding dimension"},
      {"seed", "training seed"},
      {"init-std", "std of the normal initialization"},
      {"eval-every", "evaluation cadence in epochs"},
      {"workers", "threads per sparse product"},
      {"diffusion-alpha", "APPNP teleport probability; enables diffusion (list for sweep/alpha-search)"},
      {"diffusion-steps", "APPNP power-iteration steps"},
      {"diffusion-mode", "train | posthoc"},
      {"diffusion-source", "combined | last"},
      {"diffusion-self-loops", "add self-loops to the diffusion operator (true/false)"},
      {"cutoff", "ranking cutoff(s), first is primary"},
      {"bins", "fairness bins"},
      {"out", "output directory"},
      {"label", "model label in reports"},
  };
  return flags;
}

inline int run(int argc, const char* const* argv, std::ostream& os = std::cout) {
  CLI::App app{"lgcn: LightGCN propagation, APPNP diffusion and top-K evaluation"};
  app.require_subcommand(1);

  struct Bound {
    std::string config;
    std::map<std::string, std::string> values;
    std::map<std::string, CLI::Option*> options;
  };
  std::map<std::string, Bound> bound;
  auto add_settings = [&](CLI::App* sub) {
    auto& b = bound[sub->get_name()];
    sub->add_option("--config", b.config, "key=value config file; flags override it");
    for (const auto& [key, help] : setting_flags()) b.options[key] = sub->add_option("--" + key, b.values[key], help);
  };

  auto* stats = app.add_subcommand("stats", "dataset statistics");
  auto* trn = app.add_subcommand("train", "train and evaluate one model");
  auto* sweep = app.add_subcommand("sweep", "train the cartesian product of --layers x --scheme x --diffusion-alpha");
  auto* plot = app.add_subcommand("plotdata", "emit plot-ready CSV from finished runs");
  auto* alpha = app.add_subcommand("alpha-search", "grid search of the APPNP teleport probability");
  for (auto* sub : {stats, trn, sweep, alpha}) add_settings(sub);

  int jobs = 1;
  sweep->add_option("--jobs", jobs, "parallel runs")->check(CLI::PositiveNumber);
  double validation_fraction = 0.1;
  alpha->add_option("--validation-fraction", validation_fraction, "per-user validation share carved from train");

  std::vector<std::string> run_dirs;
  std::string kind = "curves", metric;
  std::string plot_out = "plots";
  int plot_cutoff = 20;
  plot->add_option("--runs", run_dirs, "run directories")->delimiter(',');
  plot->add_option("--kind", kind, "curves | fairness-bars | diversity-bars");
  plot->add_option("--metric", metric, "history column for curves (default recall@<cutoff>)");
  plot->add_option("--cutoff", plot_cutoff, "report cutoff");
  plot->add_option("--out", plot_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, os, std::cerr);
  } catch (const CLI::ParseError& e) {
    app.exit(e, os, std::cerr);
    return kUsage;
  }

  auto spec_for = [&](CLI::App* sub) {
    auto& b = bound[sub->get_name()];
    std::map<std::string, std::string> settings;
    if (!b.config.empty()) settings = read_key_values(b.config);
    for (const auto& [key, opt] : b.options)
      if (opt->count() > 0) settings[key] = b.values[key];
    return make_spec(settings);
  };

  try {
    if (*stats) return cmd_stats(spec_for(stats), os);
    if (*trn) return cmd_train(spec_for(trn), os);
    if (*sweep) return cmd_sweep(spec_for(sweep), os, jobs);
    if (*alpha) return cmd_alpha_search(spec_for(alpha), validation_fraction, os);
    if (*plot) {
      std::vector<fs::path> dirs(run_dirs.begin(), run_dirs.end());
      return cmd_plotdata(dirs, parse_plot_kind(kind), metric.empty() ? fmt::format("recall@{}", plot_cutoff) : metric,
                          plot_cutoff, plot_out, os);
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  }
  return kUsage;
}

}  // namespace lgcn::cli
