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
#include "lgcn/graph.hpp"
#include "lgcn/model.hpp"
#include "lgcn/types.hpp"

#include <fmt/format.h>

#include <cmath>
#include <functional>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace lgcn {

// Which layer-0 rows the L2 term covers. `batch` penalizes the rows a
// batch touches, averaged over the batch: lambda/(2B) sum_t (|e_u|^2 +
// |e_i|^2 + |e_j|^2). `full` penalizes the whole table: lambda |E0|_F^2.
enum class RegScope { batch, full };

struct TrainConfig {
  int epochs = 1000;
  double lr = 0.001;
  double lambda = 0.0001;
  RegScope reg_scope = RegScope::batch;
  int batch_size = 1024;
  int layers = 3;
  NormScheme scheme = NormScheme::lightgcn();
  int dim = 64;
  std::uint64_t seed = 2020;
  double init_std = 0.1;
  std::optional<DiffusionConfig> diffusion;
  int eval_every = 20;  // 0 evaluates only after the last epoch
  int workers = 1;

  void validate() const {
    if (epochs < 1) throw UsageError("epochs must be >= 1");
    if (!(lr > 0.0)) throw UsageError("learning rate must be > 0");
    if (!(lambda >= 0.0)) throw UsageError("lambda must be >= 0");
    if (batch_size < 1) throw UsageError("batch size must be >= 1");
    if (layers < 0) throw UsageError("layer count must be >= 0");
    if (dim < 1) throw UsageError("embedding dimension must be >= 1");
    if (eval_every < 0) throw UsageError("eval cadence must be >= 0");
    if (diffusion) diffusion->validate();
  }
};

struct BprTriple {
  UserId user = 0;
  ItemId pos = 0;
  ItemId neg = 0;

  friend bool operator==(const BprTriple&, const BprTriple&) = default;
};

// Uniform BPR sampling: a user drawn through a uniformly drawn train
// interaction, a positive uniform over that user's items, and a negative
// drawn uniformly over all items until it misses the user's items.
class BprSampler {
 public:
  explicit BprSampler(const InteractionGraph& g) : graph_(&g) {
    std::size_t saturated = 0;
    for (UserId u = 0; u < g.num_users; ++u) {
      const auto deg = g.user_degree(u);
      if (deg == 0) continue;
      if (deg >= static_cast<std::size_t>(g.num_items)) {
        ++saturated;
        continue;
      }
      edge_users_.insert(edge_users_.end(), deg, u);
    }
    if (saturated) log::warn(fmt::format("{} user(s) interact with every item; skipped by the sampler", saturated));
    if (edge_users_.empty()) throw DataError("no user admits a negative sample");
  }

  std::size_t num_candidates() const { return edge_users_.size(); }

  std::vector<BprTriple> sample(std::size_t n, std::mt19937_64& rng) const {
    const auto& g = *graph_;
    std::uniform_int_distribution<std::size_t> pick_edge(0, edge_users_.size() - 1);
    std::uniform_int_distribution<ItemId> pick_item(0, g.num_items - 1);
    std::vector<BprTriple> out;
    out.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
      const UserId u = edge_users_[pick_edge(rng)];
      const auto& items = g.user_neighbors[static_cast<std::size_t>(u)];
      std::uniform_int_distribution<std::size_t> pick_pos(0, items.size() - 1);
      const ItemId i = items[pick_pos(rng)];
      ItemId j = pick_item(rng);
      while (g.contains(u, j)) j = pick_item(rng);
      out.push_back({u, i, j});
    }
    return out;
  }

 private:
  const InteractionGraph* graph_;
  std::vector<UserId> edge_users_;
};

inline std::vector<BprTriple> sample_batch(const InteractionGraph& g, std::size_t batch_size, std::mt19937_64& rng) {
  return BprSampler(g).sample(batch_size, rng);
}

// ln sigma(x) without overflow for large |x|.
inline double log_sigmoid(double x) {
  return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// -(1/B) sum ln sigma(pos - neg) + lambda ||layer0||_F^2
inline double bpr_loss(std::span<const double> scores_pos, std::span<const double> scores_neg, const Matrix& layer0,
                       double lambda) {
  if (scores_pos.size() != scores_neg.size()) throw std::invalid_argument("bpr_loss: score lists differ in length");
  double acc = 0.0;
  for (std::size_t k = 0; k < scores_pos.size(); ++k) acc += log_sigmoid(scores_pos[k] - scores_neg[k]);
  const double data = scores_pos.empty() ? 0.0 : -acc / static_cast<double>(scores_pos.size());
  return data + (lambda != 0.0 ? lambda * layer0.squaredNorm() : 0.0);
}

inline std::pair<std::vector<double>, std::vector<double>> batch_scores(std::span<const BprTriple> batch,
                                                                        const EmbeddingState& s) {
  std::pair<std::vector<double>, std::vector<double>> out;
  out.first.reserve(batch.size());
  out.second.reserve(batch.size());
  for (const auto& t : batch) {
    out.first.push_back(score(s, t.user, t.pos));
    out.second.push_back(score(s, t.user, t.neg));
  }
  return out;
}

// Loss of one batch at the current forward state.
inline double batch_loss(std::span<const BprTriple> batch, const EmbeddingState& s, double lambda,
                         RegScope scope = RegScope::full) {
  auto [pos, neg] = batch_scores(batch, s);
  if (scope == RegScope::full) return bpr_loss(pos, neg, s.layer0, lambda);
  double reg = 0.0;
  if (lambda != 0.0 && !batch.empty()) {
    for (const auto& t : batch)
      reg += s.layer0.row(t.user).squaredNorm() + s.layer0.row(s.num_users + t.pos).squaredNorm() +
             s.layer0.row(s.num_users + t.neg).squaredNorm();
    reg *= lambda / (2.0 * static_cast<double>(batch.size()));
  }
  return bpr_loss(pos, neg, s.layer0, 0.0) + reg;
}

// P x with P = sum_k alpha_k A^k.
inline Matrix propagation_apply(const NormalizedAdjacency& adj, const LayerWeights& w, const Matrix& x,
                                int workers = 1) {
  Matrix acc = w.alphas[0] * x;
  Matrix cur = x, next;
  for (int k = 1; k <= w.layers(); ++k) {
    adj.forward.apply(cur, next, workers);
    cur.swap(next);
    acc.noalias() += w.alphas[static_cast<std::size_t>(k)] * cur;
  }
  return acc;
}

// P^T g, evaluated Horner-style: alpha_0 g + A^T(alpha_1 g + A^T(...)).
inline Matrix propagation_transpose(const NormalizedAdjacency& adj, const LayerWeights& w, const Matrix& g,
                                    int workers = 1) {
  const auto& op = adj.transpose_op();
  const int layers = w.layers();
  Matrix h = w.alphas[static_cast<std::size_t>(layers)] * g;
  Matrix next;
  for (int k = layers - 1; k >= 0; --k) {
    op.apply(h, next, workers);
    next.noalias() += w.alphas[static_cast<std::size_t>(k)] * g;
    h.swap(next);
  }
  return h;
}

// Propagation followed by the diffusion stage when one is given.
inline void forward(EmbeddingState& s, const NormalizedAdjacency& adj, const LayerWeights& w,
                    const DiffusionStage* diffusion = nullptr, int workers = 1) {
  propagate(s, adj, w.layers(), w, workers);
  if (diffusion) apply_diffusion(s, *diffusion, workers);
}

// dL/d(output) for the data term of the BPR loss.
inline Matrix output_gradient(std::span<const BprTriple> batch, const EmbeddingState& s) {
  const Matrix& out = s.output();
  Matrix g = Matrix::Zero(out.rows(), out.cols());
  if (batch.empty()) return g;
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  for (const auto& t : batch) {
    const auto ru = t.user;
    const auto ri = s.num_users + t.pos;
    const auto rj = s.num_users + t.neg;
    const double diff = out.row(ru).dot(out.row(ri)) - out.row(ru).dot(out.row(rj));
    const double coef = -sigmoid(-diff) * inv_b;
    g.row(ru).noalias() += coef * (out.row(ri) - out.row(rj));
    g.row(ri).noalias() += coef * out.row(ru);
    g.row(rj).noalias() -= coef * out.row(ru);
  }
  return g;
}

// Gradient of bpr_loss with respect to layer0. Everything between layer0 and
// the scores is linear, so the data term is pulled back through the
// transposed diffusion and propagation operators.
inline Matrix backward(std::span<const BprTriple> batch, const EmbeddingState& s, const NormalizedAdjacency& adj,
                       const LayerWeights& w, double lambda, const DiffusionStage* diffusion = nullptr,
                       int workers = 1, RegScope scope = RegScope::full) {
  if (!s.forward_current()) throw std::logic_error("backward: forward state is stale");
  if (static_cast<int>(s.per_layer.size()) != w.layers() + 1)
    throw std::logic_error("backward: propagated layers do not match the layer weights");
  if (diffusion && !s.diffused) throw std::logic_error("backward: diffusion stage requested but not applied");
  if (!diffusion && s.diffused) throw std::logic_error("backward: state carries a diffusion output");

  Matrix g = output_gradient(batch, s);
  Matrix grad;
  if (diffusion) {
    g = appnp_transpose(g, diffusion->adj, diffusion->cfg, workers);
    if (diffusion->cfg.source == DiffusionSource::last_layer) {
      const auto& op = adj.transpose_op();
      Matrix next;
      for (int k = 0; k < w.layers(); ++k) {
        op.apply(g, next, workers);
        g.swap(next);
      }
      grad = std::move(g);
    } else {
      grad = propagation_transpose(adj, w, g, workers);
    }
  } else {
    grad = propagation_transpose(adj, w, g, workers);
  }
  if (lambda != 0.0 && scope == RegScope::full) grad.noalias() += (2.0 * lambda) * s.layer0;
  if (lambda != 0.0 && scope == RegScope::batch && !batch.empty()) {
    const double c = lambda / static_cast<double>(batch.size());
    for (const auto& t : batch) {
      grad.row(t.user).noalias() += c * s.layer0.row(t.user);
      grad.row(s.num_users + t.pos).noalias() += c * s.layer0.row(s.num_users + t.pos);
      grad.row(s.num_users + t.neg).noalias() += c * s.layer0.row(s.num_users + t.neg);
    }
  }
  return grad;
}

struct AdamState {
  Matrix m;
  Matrix v;
  std::int64_t t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState like(const Matrix& params) {
    AdamState s;
    s.m = Matrix::Zero(params.rows(), params.cols());
    s.v = Matrix::Zero(params.rows(), params.cols());
    return s;
  }
};

inline void adam_step(Matrix& params, const Matrix& grad, AdamState& s, double lr) {
  if (grad.rows() != params.rows() || grad.cols() != params.cols() || s.m.rows() != params.rows() ||
      s.m.cols() != params.cols())
    throw std::invalid_argument("adam_step: shape mismatch");
  if (!grad.allFinite()) throw NumericError(fmt::format("non-finite gradient at Adam step {}", s.t + 1));
  ++s.t;
  s.m = s.beta1 * s.m + (1.0 - s.beta1) * grad;
  s.v = s.beta2 * s.v + (1.0 - s.beta2) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.t));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.t));
  params.array() -= lr * (s.m.array() / c1) / ((s.v.array() / c2).sqrt() + s.eps);
}

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;
  std::vector<std::optional<double>> metrics;
};

// Loss per epoch plus cadenced metrics. CSV columns: epoch, loss, metrics...
struct TrainHistory {
  std::vector<std::string> metric_names;
  std::vector<EpochRecord> epochs;

  void write_csv(std::ostream& os) const {
    os << "epoch,loss";
    for (const auto& n : metric_names) os << ',' << n;
    os << '\n';
    for (const auto& r : epochs) {
      os << r.epoch << ',' << fmt::format("{:.17g}", r.loss);
      for (std::size_t k = 0; k < metric_names.size(); ++k) {
        os << ',';
        if (k < r.metrics.size() && r.metrics[k]) os << fmt::format("{:.17g}", *r.metrics[k]);
      }
      os << '\n';
    }
  }

  std::vector<std::pair<int, double>> series(const std::string& metric) const {
    std::vector<std::pair<int, double>> out;
    const auto it = std::find(metric_names.begin(), metric_names.end(), metric);
    if (it == metric_names.end()) return out;
    const auto col = static_cast<std::size_t>(it - metric_names.begin());
    for (const auto& r : epochs)
      if (col < r.metrics.size() && r.metrics[col]) out.emplace_back(r.epoch, *r.metrics[col]);
    return out;
  }
};

using MetricList = std::vector<std::pair<std::string, double>>;
// Called at the evaluation cadence with a read-only, fully forwarded state.
using EvalHook = std::function<MetricList(int epoch, const EmbeddingState&)>;

struct TrainResult {
  EmbeddingState state;
  TrainHistory history;
};

// Full training run. Every step recomputes the forward pass over the whole
// graph, so gradients are exact for the sampled batch.
inline TrainResult train(const InteractionDataset& ds, const TrainConfig& cfg, const EvalHook& hook = {}) {
  cfg.validate();
  const InteractionGraph g = build_graph(ds);
  const NormalizedAdjacency adj = normalize(g, cfg.scheme);
  const LayerWeights w = LayerWeights::uniform(cfg.layers);
  std::optional<NormalizedAdjacency> diff_adj;
  std::optional<DiffusionStage> stage;
  if (cfg.diffusion) {
    diff_adj = (cfg.diffusion->self_loops || cfg.scheme != NormScheme::lightgcn())
                   ? diffusion_operator(g, *cfg.diffusion)
                   : adj;
    stage.emplace(DiffusionStage{*diff_adj, *cfg.diffusion});
  }
  const DiffusionStage* train_stage = (stage && stage->cfg.apply_during_training) ? &*stage : nullptr;

  const BprSampler sampler(g);
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  TrainResult result{init_embeddings(ds.num_users, ds.num_items, cfg.dim, cfg.seed, cfg.init_std), {}};
  EmbeddingState& s = result.state;
  AdamState adam = AdamState::like(s.layer0);
  const std::size_t steps =
      (ds.train.size() + static_cast<std::size_t>(cfg.batch_size) - 1) / static_cast<std::size_t>(cfg.batch_size);

  auto evaluate = [&](int epoch, EpochRecord& rec) {
    forward(s, adj, w, stage ? &*stage : nullptr, cfg.workers);
    MetricList metrics = hook(epoch, s);
    auto& names = result.history.metric_names;
    if (names.empty())
      for (const auto& m : metrics) names.push_back(m.first);
    if (metrics.size() != names.size()) throw std::logic_error("eval hook changed its metric set");
    for (std::size_t k = 0; k < metrics.size(); ++k) {
      if (metrics[k].first != names[k]) throw std::logic_error("eval hook changed its metric order");
      rec.metrics.push_back(metrics[k].second);
    }
  };

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    double loss_sum = 0.0;
    for (std::size_t step = 0; step < steps; ++step) {
      forward(s, adj, w, train_stage, cfg.workers);
      const auto batch = sampler.sample(static_cast<std::size_t>(cfg.batch_size), rng);
      const double loss = batch_loss(batch, s, cfg.lambda, cfg.reg_scope);
      if (!std::isfinite(loss)) throw NumericError(fmt::format("non-finite loss at epoch {}", epoch));
      loss_sum += loss;
      const Matrix grad = backward(batch, s, adj, w, cfg.lambda, train_stage, cfg.workers, cfg.reg_scope);
      adam_step(s.layer0, grad, adam, cfg.lr);
      s.mark_updated();
    }
    EpochRecord rec{epoch, loss_sum / static_cast<double>(steps), {}};
    const bool due = epoch == cfg.epochs || (cfg.eval_every > 0 && epoch % cfg.eval_every == 0);
    if (hook && due) evaluate(epoch, rec);
    result.history.epochs.push_back(std::move(rec));
  }
  forward(s, adj, w, stage ? &*stage : nullptr, cfg.workers);
  for (auto& r : result.history.epochs) r.metrics.resize(result.history.metric_names.size());
  return result;
}

}  // namespace lgcn
