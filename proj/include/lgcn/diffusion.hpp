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

#include "lgcn/graph.hpp"
#include "lgcn/model.hpp"
#include "lgcn/types.hpp"

#include <fmt/format.h>

#include <span>

namespace lgcn {

// Which matrix seeds the power iteration.
enum class DiffusionSource { combined, last_layer };

struct DiffusionConfig {
  double alpha = 0.1;  // teleport probability
  int steps = 10;      // power-iteration count
  bool apply_during_training = true;
  DiffusionSource source = DiffusionSource::combined;
  bool self_loops = false;

  void validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw UsageError(fmt::format("diffusion alpha {} outside [0, 1]", alpha));
    if (steps < 0) throw UsageError(fmt::format("diffusion steps {} < 0", steps));
  }
};

namespace detail {

// Z <- alpha Z0 + (1 - alpha) A Z, `steps` times. The output map s(.) is the
// identity.
inline Matrix power_iterate(const CsrOperator& op, const Matrix& z0, const DiffusionConfig& cfg, int workers) {
  cfg.validate();
  if (z0.rows() != op.rows())
    throw std::invalid_argument(fmt::format("appnp: input has {} rows, operator has {}", z0.rows(), op.rows()));
  Matrix z = z0;
  if (cfg.alpha == 1.0) return z;
  Matrix next;
  for (int k = 0; k < cfg.steps; ++k) {
    op.apply(z, next, workers);
    next *= (1.0 - cfg.alpha);
    if (cfg.alpha != 0.0) next.noalias() += cfg.alpha * z0;
    z.swap(next);
  }
  return z;
}

}  // namespace detail

inline Matrix appnp(const Matrix& z0, const NormalizedAdjacency& adj, const DiffusionConfig& cfg, int workers = 1) {
  return detail::power_iterate(adj.forward, z0, cfg, workers);
}

// The recurrence is linear in Z0 with Jacobian
//   J = alpha sum_{k<K} (1-alpha)^k A^k + (1-alpha)^K A^K,
// so J^T is the same recurrence driven by A^T.
inline Matrix appnp_transpose(const Matrix& grad, const NormalizedAdjacency& adj, const DiffusionConfig& cfg,
                              int workers = 1) {
  return detail::power_iterate(adj.transpose_op(), grad, cfg, workers);
}

// The operator the diffusion stage runs on: symmetric sqrt over the bipartite
// graph, optionally with self-loops.
inline NormalizedAdjacency diffusion_operator(const InteractionGraph& g, const DiffusionConfig& cfg) {
  return cfg.self_loops ? normalize_with_self_loops(g) : normalize(g, NormScheme::lightgcn());
}

// A diffusion stage bound to its operator.
struct DiffusionStage {
  const NormalizedAdjacency& adj;
  DiffusionConfig cfg;

  const Matrix& seed_of(const EmbeddingState& s) const {
    return cfg.source == DiffusionSource::combined ? s.combined : s.per_layer.back();
  }
};

// Runs the stage on a propagated state and stores the result as its output.
inline void apply_diffusion(EmbeddingState& s, const DiffusionStage& stage, int workers = 1) {
  if (!s.forward_current()) throw std::logic_error("apply_diffusion: propagate has not run for current parameters");
  s.diffused = appnp(stage.seed_of(s), stage.adj, stage.cfg, workers);
}

// Evaluates every candidate and returns the best one; equal scores resolve
// to the smaller alpha.
template <class Scorer>
double grid_search_alpha(std::span<const double> candidates, Scorer&& evaluate) {
  if (candidates.empty()) throw UsageError("alpha grid search needs at least one candidate");
  if (candidates.size() == 1) return candidates[0];
  double best_alpha = candidates[0];
  double best_score = 0.0;
  bool first = true;
  for (double a : candidates) {
    const double s = evaluate(a);
    if (first || s > best_score || (s == best_score && a < best_alpha)) {
      best_alpha = a;
      best_score = s;
      first = false;
    }
  }
  return best_alpha;
}

}  // namespace lgcn
