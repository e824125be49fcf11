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
#include "lgcn/types.hpp"

#include <fmt/format.h>

#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>
#include <vector>

namespace lgcn {

// Per-layer combination weights alpha_0..alpha_K.
struct LayerWeights {
  std::vector<double> alphas;

  static LayerWeights uniform(int layers) {
    if (layers < 0) throw std::invalid_argument("layer count must be >= 0");
    return {std::vector<double>(static_cast<std::size_t>(layers) + 1, 1.0 / (layers + 1))};
  }
  int layers() const { return static_cast<int>(alphas.size()) - 1; }
};

struct EmbeddingState {
  std::int32_t num_users = 0;
  std::int32_t num_items = 0;
  Matrix layer0;                  // the only trainable parameters
  std::vector<Matrix> per_layer;  // e^(0..K), per_layer[0] == layer0
  Matrix combined;                // sum_k alpha_k e^(k)
  std::optional<Matrix> diffused;  // set when a diffusion stage ran after propagation

  // Bumped whenever layer0 changes; forward_version records the value the
  // derived matrices were computed from.
  std::uint64_t version = 0;
  std::uint64_t forward_version = ~std::uint64_t{0};

  std::int32_t num_nodes() const { return num_users + num_items; }
  Eigen::Index dim() const { return layer0.cols(); }
  bool forward_current() const { return forward_version == version; }

  // Embeddings used for scoring.
  const Matrix& output() const {
    if (diffused) return *diffused;
    return combined;
  }
  auto user_rows() const { return output().topRows(num_users); }
  auto item_rows() const { return output().bottomRows(num_items); }

  void mark_updated() { ++version; }
};

inline EmbeddingState init_embeddings(std::int32_t num_users, std::int32_t num_items, int dim,
                                      std::uint64_t seed, double stddev = 0.1) {
  if (dim < 1) throw std::invalid_argument("embedding dimension must be >= 1");
  EmbeddingState s;
  s.num_users = num_users;
  s.num_items = num_items;
  s.layer0.resize(num_users + num_items, dim);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, stddev);
  for (Eigen::Index r = 0; r < s.layer0.rows(); ++r)
    for (Eigen::Index c = 0; c < s.layer0.cols(); ++c) s.layer0(r, c) = normal(rng);
  return s;
}

// e^(k+1) = A e^(k) for k < K, combined = sum_k alpha_k e^(k). Clears any
// previous diffusion output.
inline void propagate(EmbeddingState& s, const NormalizedAdjacency& adj, int layers, const LayerWeights& w,
                      int workers = 1) {
  if (layers < 0) throw std::invalid_argument("layer count must be >= 0");
  if (w.layers() != layers)
    throw std::invalid_argument(fmt::format("{} layer weights for {} layers", w.alphas.size(), layers));
  if (adj.num_nodes() != s.num_nodes() || adj.num_users != s.num_users)
    throw std::invalid_argument("operator and embeddings disagree on node counts");
  s.per_layer.resize(static_cast<std::size_t>(layers) + 1);
  s.per_layer[0] = s.layer0;
  s.combined = w.alphas[0] * s.layer0;
  for (int k = 0; k < layers; ++k) {
    adj.forward.apply(s.per_layer[static_cast<std::size_t>(k)], s.per_layer[static_cast<std::size_t>(k) + 1], workers);
    s.combined.noalias() += w.alphas[static_cast<std::size_t>(k) + 1] * s.per_layer[static_cast<std::size_t>(k) + 1];
  }
  s.diffused.reset();
  s.forward_version = s.version;
}

inline double score(const EmbeddingState& s, UserId u, ItemId i) {
  if (u < 0 || u >= s.num_users || i < 0 || i >= s.num_items)
    throw std::out_of_range(fmt::format("score: ({}, {}) outside {}x{}", u, i, s.num_users, s.num_items));
  return s.output().row(u).dot(s.output().row(s.num_users + i));
}

inline Vector score_all(const EmbeddingState& s, UserId u) {
  if (u < 0 || u >= s.num_users) throw std::out_of_range(fmt::format("score_all: user {} out of range", u));
  return s.item_rows() * s.output().row(u).transpose();
}

// Checkpoint text: "num_nodes d" header, then one row of d reals per node.
inline void save_embeddings(const Matrix& m, std::ostream& os) {
  os << m.rows() << ' ' << m.cols() << '\n';
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) os << (c ? " " : "") << fmt::format("{:.17g}", m(r, c));
    os << '\n';
  }
}

inline void save_embeddings(const Matrix& m, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw DataError(fmt::format("cannot write '{}'", path.string()));
  save_embeddings(m, os);
}

inline Matrix load_embeddings(std::istream& is) {
  Eigen::Index rows = 0, cols = 0;
  if (!(is >> rows >> cols) || rows < 0 || cols < 1) throw ParseError("bad checkpoint header", 1);
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c)
      if (!(is >> m(r, c))) throw ParseError("truncated checkpoint", static_cast<std::size_t>(r) + 2);
  return m;
}

inline Matrix load_embeddings(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError(fmt::format("cannot open '{}'", path.string()));
  return load_embeddings(is);
}

}  // namespace lgcn
