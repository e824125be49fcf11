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

// Runs every acceptance criterion and prints one PASS/FAIL line each.
// Exit status is nonzero when any criterion fails.

#include "lgcn/cli.hpp"
#include "lgcn/lgcn.hpp"
#include "../gradcheck.hpp"
#include "../oracles.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <chrono>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>

namespace fs = std::filesystem;
using namespace lgcn;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Context {
  fs::path work;
  fs::path fixture;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  // Recall@20 histories of the 600-epoch runs, keyed by seed.
  std::map<std::uint64_t, std::vector<std::pair<int, double>>> lgcn_history, appnp_history;
};

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, bool integral = false) {
  Matrix m(rows, cols);
  std::normal_distribution<double> n;
  std::uniform_int_distribution<int> k(-2, 2);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = integral ? k(rng) : n(rng);
  return m;
}

// 1. Analytic layer-0 gradient against central differences.
Outcome gradient_fidelity(Context&) {
  const auto start = std::chrono::steady_clock::now();
  double worst = 0;
  std::string where;
  for (const auto scheme : kAllSchemes)
    for (int layers = 0; layers <= 3; ++layers)
      for (auto scope : {RegScope::full, RegScope::batch}) {
        oracle::GradCheckCase c;
        c.scheme = scheme;
        c.layers = layers;
        c.scope = scope;
        c.seed = static_cast<std::uint64_t>(layers) + 1;
        const auto r = oracle::gradient_check(c);
        if (r.max_rel_error > worst) {
          worst = r.max_rel_error;
          where = fmt::format("{} K={}", scheme.label(), layers);
        }
      }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {worst < 1e-4 && secs < 60,
          fmt::format("48 cases, max relative error {:.2e} ({}), {:.1f}s", worst, where, secs)};
}

// 2. Power iteration against the exact personalized-PageRank solve.
Outcome diffusion_fixed_point(Context&) {
  std::mt19937_64 rng(11);
  double worst_limit = 0, worst_ratio = 0;
  int graphs = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const std::int32_t nu = 2 + static_cast<std::int32_t>(seed % 20), ni = 3 + static_cast<std::int32_t>(seed);
    if (nu + ni > 50) continue;
    const auto pairs = seed == 0 ? std::vector<Interaction>{{0, 0}, {0, 1}, {1, 0}} : oracle::random_pairs(nu, ni, 0.3, seed);
    const std::int32_t u = seed == 0 ? 2 : nu, i = seed == 0 ? 2 : ni;
    const auto adj = normalize(build_graph(u, i, pairs));
    const oracle::Dense a = oracle::dense_adjacency(u, i, pairs, 0, 0.5);
    const Matrix z0 = random_matrix(u + i, 4, rng);
    const oracle::Dense m = oracle::Dense::Identity(u + i, u + i) - 0.9 * a;
    const oracle::Dense exact = 0.1 * m.fullPivLu().solve(oracle::Dense(z0));
    DiffusionConfig cfg;
    cfg.alpha = 0.1;
    cfg.steps = 200;
    worst_limit = std::max(worst_limit, (oracle::Dense(appnp(z0, adj, cfg)) - exact).cwiseAbs().maxCoeff());
    cfg.steps = 10;
    const double residual = (oracle::Dense(appnp(z0, adj, cfg)) - exact).norm();
    const double bound = std::pow(0.9, 10) * (oracle::Dense(z0) - exact).norm();
    worst_ratio = std::max(worst_ratio, residual / bound);
    ++graphs;
  }
  return {worst_limit <= 1e-8 && worst_ratio <= 1 + 1e-12,
          fmt::format("{} graphs, steps=200 max |err| {:.2e}, steps=10 residual/bound max {:.3f}", graphs, worst_limit,
                      worst_ratio)};
}

// 3. alpha = 1 and alpha = 0 collapse cases.
Outcome teleport_limits(Context&) {
  std::mt19937_64 rng(5);
  bool identity = true;
  double worst = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto pairs = oracle::random_pairs(15, 20, 0.2, seed);
    const auto g = build_graph(15, 20, pairs);
    const Matrix z0 = random_matrix(35, 6, rng);
    for (const auto scheme : kAllSchemes) {
      const auto adj = normalize(g, scheme);
      for (int steps : {0, 1, 3, 10}) {
        DiffusionConfig one;
        one.alpha = 1.0;
        one.steps = steps;
        identity = identity && appnp(z0, adj, one) == z0;
      }
      for (int k = 1; k <= 6; ++k) {
        DiffusionConfig zero;
        zero.alpha = 0.0;
        zero.steps = k;
        Matrix expect = z0;
        for (int s = 0; s < k; ++s) expect = spmv(adj, expect);
        worst = std::max(worst, (appnp(z0, adj, zero) - expect).cwiseAbs().maxCoeff());
      }
    }
  }
  return {identity && worst <= 1e-12,
          fmt::format("alpha=1 exact identity: {}, alpha=0 max |err| vs repeated spmv {:.2e}", identity ? "yes" : "no",
                      worst)};
}

// 4. Batched metrics against a per-user loop.
Outcome metric_oracles(Context&) {
  log::quiet() = true;
  std::mt19937_64 rng(99);
  double worst = 0;
  for (std::uint64_t inst = 0; inst < 100; ++inst) {
    std::uniform_int_distribution<std::int32_t> size(5, 40);
    const std::int32_t nu = size(rng), ni = size(rng) + 10;
    const auto pairs = oracle::random_pairs(nu, ni, 0.25, inst + 1000);
    const auto ds = holdout_split(pairs, 0.3, inst, nu, ni);
    if (ds.test.empty()) continue;
    const Matrix emb = random_matrix(nu + ni, 1 + static_cast<int>(inst % 8), rng, inst % 3 == 0);
    const auto g = build_graph(ds);
    const std::vector<int> cutoffs{1, 5, 20};
    const auto reports = evaluate(emb, nu, g, ds, cutoffs, 2);
    for (const auto& r : reports) {
      const auto n = oracle::naive_evaluate(emb, nu, ds.train, ds.test, r.cutoff);
      if (n.users != r.users || n.ild_users != r.ild_users) worst = std::max(worst, 1.0);
      for (auto [x, y] : {std::pair{r.recall, n.recall}, {r.precision, n.precision}, {r.ndcg, n.ndcg}, {r.ild, n.ild}})
        worst = std::max(worst, std::abs(x - y));
    }
  }
  log::quiet() = false;
  return {worst <= 1e-10, fmt::format("100 instances x 3 cutoffs, max |batched - naive| {:.2e}", worst)};
}

// 5. Dataset statistics through the stats subcommand.
Outcome dataset_statistics(Context& ctx) {
  ExperimentSpec spec;
  spec.dataset = ctx.fixture.string();
  spec.out = ctx.work / "stats";
  std::ostringstream os;
  const int code = cli::cmd_stats(spec, os);
  std::map<std::string, std::string> kv;
  std::istringstream in(os.str());
  for (std::string line; std::getline(in, line);)
    if (auto eq = line.find('='); eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
  const double density = std::stod(kv.at("density"));
  const bool ok = code == 0 && kv.at("num_users") == "1434" && kv.at("num_items") == "1522" &&
                  kv.at("num_interactions") == "35931" && std::abs(density - 0.01645) <= 5e-5;
  return {ok, fmt::format("synthetic fixture: users {} items {} interactions {} density {}", kv.at("num_users"),
                          kv.at("num_items"), kv.at("num_interactions"), kv.at("density"))};
}

LoadedExperimentData fixture_data(const Context& ctx) {
  ExperimentSpec spec;
  spec.dataset = ctx.fixture.string();
  return load_experiment_data(spec);
}

TrainConfig desk_config(int layers, std::uint64_t seed, int epochs) {
  TrainConfig cfg;
  cfg.layers = layers;
  cfg.seed = seed;
  cfg.epochs = epochs;
  cfg.eval_every = 20;
  return cfg;
}

double final_recall(const InteractionDataset& ds, const TrainConfig& cfg) {
  const auto g = build_graph(ds);
  const auto r = train(ds, cfg);
  return evaluate(r.state, g, ds, {20})[0].recall;
}

std::string join(const std::vector<double>& v) {
  std::string s;
  for (double x : v) s += (s.empty() ? "" : " ") + fmt::format("{:.4f}", x);
  return s;
}

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

// 6. Four propagation layers against one, 200 epochs.
Outcome layer_depth(Context& ctx) {
  const auto start = std::chrono::steady_clock::now();
  const auto data = fixture_data(ctx);
  std::vector<double> one, four;
  for (auto seed : ctx.seeds) {
    one.push_back(final_recall(data.loaded.data, desk_config(1, seed, 200)));
    four.push_back(final_recall(data.loaded.data, desk_config(4, seed, 200)));
  }
  const double gain = mean(four) / mean(one) - 1;
  const double mins = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() / 60;
  return {gain >= 0.10 && mins <= 30,
          fmt::format("recall@20 K=1 [{}] K=4 [{}], mean gain {:+.1f}%, {:.1f} min", join(one), join(four), 100 * gain,
                      mins)};
}

std::vector<std::pair<int, double>> recall_history(const InteractionDataset& ds, const TrainConfig& cfg) {
  const auto g = build_graph(ds);
  const auto r = train(ds, cfg, [&](int, const EmbeddingState& s) {
    return MetricList{{"recall@20", evaluate(s, g, ds, {20})[0].recall}};
  });
  return r.history.series("recall@20");
}

// Runs the 600-epoch LightGCN and APPNP histories once; criteria 7 and 8
// both read them.
void ensure_histories(Context& ctx) {
  if (!ctx.lgcn_history.empty()) return;
  const auto data = fixture_data(ctx);
  fs::create_directories(ctx.work);
  std::ofstream csv(ctx.work / "stability_histories.csv");
  csv << "model,seed,epoch,recall@20\n";
  for (auto seed : ctx.seeds) {
    auto cfg = desk_config(3, seed, 600);
    ctx.lgcn_history[seed] = recall_history(data.loaded.data, cfg);
    cfg.diffusion = DiffusionConfig{};
    cfg.diffusion->alpha = 0.1;
    cfg.diffusion->steps = 10;
    ctx.appnp_history[seed] = recall_history(data.loaded.data, cfg);
    for (const auto& [name, h] : {std::pair{"LGCN", &ctx.lgcn_history[seed]}, {"APPNP", &ctx.appnp_history[seed]}})
      for (const auto& [e, v] : *h) csv << fmt::format("{},{},{},{:.17g}\n", name, seed, e, v);
    csv.flush();
  }
}

// 7. Symmetric sqrt against L1-R normalization, K=3, 200 epochs. The sqrt
// values are the epoch-200 points of the 600-epoch LightGCN histories: the
// run is deterministic, so they equal a separate 200-epoch run.
Outcome normalization_ordering(Context& ctx) {
  ensure_histories(ctx);
  const auto data = fixture_data(ctx);
  std::vector<double> sqrt_r, l1r;
  for (auto seed : ctx.seeds) {
    const auto& h = ctx.lgcn_history.at(seed);
    const auto it = std::find_if(h.begin(), h.end(), [](const auto& p) { return p.first == 200; });
    if (it == h.end()) throw std::logic_error("history lacks epoch 200");
    sqrt_r.push_back(it->second);
    auto cfg = desk_config(3, seed, 200);
    cfg.scheme = NormScheme{NormSide::right, NormKind::l1};
    l1r.push_back(final_recall(data.loaded.data, cfg));
  }
  return {mean(sqrt_r) >= mean(l1r),
          fmt::format("recall@20 LightGCN [{}] mean {:.4f}, LightGCN-L1-R [{}] mean {:.4f}", join(sqrt_r), mean(sqrt_r),
                      join(l1r), mean(l1r))};
}

double max_drawdown(const std::vector<std::pair<int, double>>& h) {
  double peak = -std::numeric_limits<double>::infinity(), worst = 0;
  for (const auto& [e, v] : h) {
    peak = std::max(peak, v);
    worst = std::max(worst, peak - v);
  }
  return worst;
}

// 8. Drawdown of the recall@20 history with and without diffusion.
Outcome diffusion_stability(Context& ctx) {
  ensure_histories(ctx);
  std::vector<double> lg, ap;
  for (auto seed : ctx.seeds) {
    lg.push_back(max_drawdown(ctx.lgcn_history.at(seed)));
    ap.push_back(max_drawdown(ctx.appnp_history.at(seed)));
  }
  return {mean(ap) < mean(lg),
          fmt::format("max drawdown of recall@20, LGCN [{}] mean {:.4f}, APPNP [{}] mean {:.4f}", join(lg), mean(lg),
                      join(ap), mean(ap))};
}

// 9. Two identical train runs produce identical report CSVs.
Outcome reproducibility(Context& ctx) {
  ExperimentSpec spec;
  spec.dataset = ctx.fixture.string();
  spec.out = ctx.work / "repro";
  spec.train.epochs = 5;
  spec.train.workers = 1;
  fs::remove_all(spec.out);
  std::ostringstream sink;
  std::vector<std::string> reports;
  for (int run = 0; run < 2; ++run) {
    cli::cmd_train(spec, sink);
    reports.clear();
    std::vector<fs::path> dirs;
    for (const auto& e : fs::directory_iterator(spec.out)) dirs.push_back(e.path());
    for (const auto& d : dirs) {
      std::ifstream in(d / "report.csv");
      reports.emplace_back(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    }
  }
  const bool ok = reports.size() == 2 && !reports[0].empty() && reports[0] == reports[1];
  return {ok, fmt::format("{} runs, report.csv {} ({} bytes)", reports.size(), ok ? "identical" : "differ",
                          reports.empty() ? 0 : reports[0].size())};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  Context ctx;
  std::string work = "acceptance_work";
  std::string fixture = std::string(LGCN_TEST_DATA_DIR) + "/electro_synth";
  std::vector<int> only;
  app.add_option("--work", work, "scratch directory");
  app.add_option("--fixture", fixture, "desk-scale dataset directory");
  app.add_option("--only", only, "criterion numbers to run")->delimiter(',');
  CLI11_PARSE(app, argc, argv);
  ctx.work = work;
  ctx.fixture = fixture;
  fs::create_directories(ctx.work);

  const std::vector<std::pair<std::string, std::function<Outcome(Context&)>>> criteria{
      {"gradient fidelity", gradient_fidelity},
      {"diffusion fixed point", diffusion_fixed_point},
      {"teleport limits", teleport_limits},
      {"metric oracles", metric_oracles},
      {"dataset statistics", dataset_statistics},
      {"layer-depth trend", layer_depth},
      {"normalization ordering", normalization_ordering},
      {"diffusion stability", diffusion_stability},
      {"reproducibility", reproducibility},
  };
  int failed = 0;
  std::ofstream summary(ctx.work / "summary.txt");
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int n = static_cast<int>(k) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), n) == only.end()) continue;
    Outcome o;
    try {
      o = criteria[k].second(ctx);
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    const auto line = fmt::format("[{}] {}. {}: {}", o.pass ? "PASS" : "FAIL", n, criteria[k].first, o.detail);
    std::cout << line << std::endl;
    summary << line << '\n';
  }
  return failed ? 1 : 0;
}
