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
#include "lgcn/types.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cassert>
#include <cctype>
#include <cmath>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <thread>
#include <vector>

namespace lgcn {

// Bipartite user-item graph built from train interactions only.
struct InteractionGraph {
  std::int32_t num_users = 0;
  std::int32_t num_items = 0;
  std::vector<std::vector<ItemId>> user_neighbors;  // sorted
  std::vector<std::vector<UserId>> item_neighbors;  // sorted
  std::size_t num_edges = 0;

  std::int32_t num_nodes() const { return num_users + num_items; }
  std::size_t user_degree(UserId u) const { return user_neighbors[static_cast<std::size_t>(u)].size(); }
  std::size_t item_degree(ItemId i) const { return item_neighbors[static_cast<std::size_t>(i)].size(); }

  bool contains(UserId u, ItemId i) const {
    const auto& row = user_neighbors[static_cast<std::size_t>(u)];
    return std::binary_search(row.begin(), row.end(), i);
  }
};

inline InteractionGraph build_graph(std::int32_t num_users, std::int32_t num_items,
                                    std::span<const Interaction> pairs) {
  InteractionGraph g;
  g.num_users = num_users;
  g.num_items = num_items;
  g.user_neighbors.resize(static_cast<std::size_t>(num_users));
  g.item_neighbors.resize(static_cast<std::size_t>(num_items));
  for (const auto& p : pairs) {
    g.user_neighbors[static_cast<std::size_t>(p.user)].push_back(p.item);
    g.item_neighbors[static_cast<std::size_t>(p.item)].push_back(p.user);
  }
  auto tidy = [](auto& rows) {
    std::size_t total = 0;
    for (auto& r : rows) {
      std::sort(r.begin(), r.end());
      r.erase(std::unique(r.begin(), r.end()), r.end());
      total += r.size();
    }
    return total;
  };
  g.num_edges = tidy(g.user_neighbors);
  tidy(g.item_neighbors);
  return g;
}

inline InteractionGraph build_graph(const InteractionDataset& ds) {
  if (ds.train.empty()) throw DataError("cannot build a graph without train interactions");
  return build_graph(ds.num_users, ds.num_items, ds.train);
}

enum class NormSide { left, right, symmetric };
enum class NormKind { l1, sqrt };

// Degree normalization of an edge (target v <- source w). The left side
// contributes 1/|N_v|^p, the right side 1/|N_w|^p, symmetric uses both,
// with p = 1 for L1 and p = 1/2 for sqrt.
struct NormScheme {
  NormSide side = NormSide::symmetric;
  NormKind kind = NormKind::sqrt;

  static constexpr NormScheme lightgcn() { return {}; }

  bool symmetric() const { return side == NormSide::symmetric; }
  double exponent() const { return kind == NormKind::l1 ? 1.0 : 0.5; }

  // Display label, e.g. LightGCN-L1-R.
  std::string label() const {
    std::string s = "LightGCN";
    if (kind == NormKind::l1) s += "-L1";
    if (side == NormSide::left) s += "-L";
    if (side == NormSide::right) s += "-R";
    return s;
  }

  // Short CLI name: sqrt, left, right, l1, l1-left, l1-right.
  std::string name() const {
    std::string s = kind == NormKind::l1 ? "l1" : "";
    const char* sd = side == NormSide::left ? "left" : side == NormSide::right ? "right" : "";
    if (*sd) s += s.empty() ? sd : std::string("-") + sd;
    return s.empty() ? "sqrt" : s;
  }

  static NormScheme parse(std::string text) {
    for (auto& c : text) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    for (const char* prefix : {"lightgcn-", "lightgcn"})
      if (text.rfind(prefix, 0) == 0) text = text.substr(std::string_view(prefix).size());
    if (text.empty() || text == "sqrt" || text == "default" || text == "sym") return {};
    if (text == "l" || text == "left") return {NormSide::left, NormKind::sqrt};
    if (text == "r" || text == "right") return {NormSide::right, NormKind::sqrt};
    if (text == "l1") return {NormSide::symmetric, NormKind::l1};
    if (text == "l1-l" || text == "l1-left") return {NormSide::left, NormKind::l1};
    if (text == "l1-r" || text == "l1-right") return {NormSide::right, NormKind::l1};
    throw UsageError(fmt::format("unknown normalization scheme '{}'", text));
  }

  friend bool operator==(const NormScheme&, const NormScheme&) = default;
};

inline constexpr std::array<NormScheme, 6> kAllSchemes{{
    {NormSide::left, NormKind::l1},
    {NormSide::right, NormKind::l1},
    {NormSide::symmetric, NormKind::l1},
    {NormSide::left, NormKind::sqrt},
    {NormSide::right, NormKind::sqrt},
    {NormSide::symmetric, NormKind::sqrt},
}};

// Compressed sparse rows over a square node space.
struct CsrOperator {
  std::vector<std::int64_t> row_ptr{0};
  std::vector<NodeId> cols;
  std::vector<double> weights;

  std::int32_t rows() const { return static_cast<std::int32_t>(row_ptr.size()) - 1; }
  std::size_t nnz() const { return cols.size(); }

  // y = A x. Each row is reduced by one worker in stored neighbor order, so
  // the result does not depend on `workers`.
  void apply(const Matrix& x, Matrix& y, int workers = 1) const {
    const std::int32_t n = rows();
    if (x.rows() != n)
      throw std::invalid_argument(fmt::format("spmv: operand has {} rows, operator has {}", x.rows(), n));
    if (&x == &y) throw std::invalid_argument("spmv: output aliases input");
    y.resize(n, x.cols());
    const auto d = static_cast<std::size_t>(x.cols());
    auto run = [&, d](std::int32_t lo, std::int32_t hi) {
      for (std::int32_t v = lo; v < hi; ++v) {
        double* out = y.data() + static_cast<std::size_t>(v) * d;
        std::fill(out, out + d, 0.0);
        for (auto e = row_ptr[static_cast<std::size_t>(v)]; e < row_ptr[static_cast<std::size_t>(v) + 1]; ++e) {
          const double w = weights[static_cast<std::size_t>(e)];
          const double* in = x.data() + static_cast<std::size_t>(cols[static_cast<std::size_t>(e)]) * d;
          for (std::size_t j = 0; j < d; ++j) out[j] += w * in[j];
        }
      }
    };
    if (workers <= 1 || n < 2 * workers) {
      run(0, n);
      return;
    }
    std::vector<std::jthread> pool;
    const std::int32_t chunk = (n + workers - 1) / workers;
    for (std::int32_t lo = 0; lo < n; lo += chunk) pool.emplace_back(run, lo, std::min(n, lo + chunk));
  }

  CsrOperator transposed() const {
    const std::int32_t n = rows();
    CsrOperator t;
    t.row_ptr.assign(static_cast<std::size_t>(n) + 1, 0);
    for (NodeId c : cols) ++t.row_ptr[static_cast<std::size_t>(c) + 1];
    for (std::int32_t v = 0; v < n; ++v) t.row_ptr[static_cast<std::size_t>(v) + 1] += t.row_ptr[static_cast<std::size_t>(v)];
    t.cols.resize(cols.size());
    t.weights.resize(weights.size());
    std::vector<std::int64_t> fill(t.row_ptr.begin(), t.row_ptr.end() - 1);
    // Rows visited in ascending order keep each transposed row sorted.
    for (std::int32_t v = 0; v < n; ++v) {
      for (auto e = row_ptr[static_cast<std::size_t>(v)]; e < row_ptr[static_cast<std::size_t>(v) + 1]; ++e) {
        auto& slot = fill[static_cast<std::size_t>(cols[static_cast<std::size_t>(e)])];
        t.cols[static_cast<std::size_t>(slot)] = v;
        t.weights[static_cast<std::size_t>(slot)] = weights[static_cast<std::size_t>(e)];
        ++slot;
      }
    }
    return t;
  }

  double weight(NodeId row, NodeId col) const {
    auto b = cols.begin() + row_ptr[static_cast<std::size_t>(row)];
    auto e = cols.begin() + row_ptr[static_cast<std::size_t>(row) + 1];
    auto it = std::lower_bound(b, e, col);
    return (it != e && *it == col) ? weights[static_cast<std::size_t>(it - cols.begin())] : 0.0;
  }
};

// The propagation operator over users (rows 0..U-1) followed by items
// (rows U..U+I-1). Immutable once built.
struct NormalizedAdjacency {
  std::int32_t num_users = 0;
  std::int32_t num_items = 0;
  NormScheme scheme;
  bool self_loops = false;
  CsrOperator forward;
  std::optional<CsrOperator> backward;  // only stored when not symmetric

  std::int32_t num_nodes() const { return num_users + num_items; }
  bool symmetric() const { return !backward.has_value(); }
  const CsrOperator& transpose_op() const { return backward ? *backward : forward; }
  double weight(NodeId row, NodeId col) const { return forward.weight(row, col); }
};

inline NormalizedAdjacency normalize(const InteractionGraph& g, NormScheme scheme = NormScheme::lightgcn()) {
  NormalizedAdjacency adj;
  adj.num_users = g.num_users;
  adj.num_items = g.num_items;
  adj.scheme = scheme;
  const double p = scheme.exponent();
  const bool use_target = scheme.side != NormSide::right;
  const bool use_source = scheme.side != NormSide::left;
  auto factor = [p](std::size_t degree) {
    assert(degree > 0);
    return p == 1.0 ? 1.0 / static_cast<double>(degree) : 1.0 / std::sqrt(static_cast<double>(degree));
  };

  auto& op = adj.forward;
  op.row_ptr.reserve(static_cast<std::size_t>(g.num_nodes()) + 1);
  op.cols.reserve(2 * g.num_edges);
  op.weights.reserve(2 * g.num_edges);
  for (UserId u = 0; u < g.num_users; ++u) {
    const double fu = g.user_degree(u) ? factor(g.user_degree(u)) : 0.0;
    for (ItemId i : g.user_neighbors[static_cast<std::size_t>(u)]) {
      const double fi = factor(g.item_degree(i));
      op.cols.push_back(g.num_users + i);
      op.weights.push_back((use_target ? fu : 1.0) * (use_source ? fi : 1.0));
    }
    op.row_ptr.push_back(static_cast<std::int64_t>(op.cols.size()));
  }
  for (ItemId i = 0; i < g.num_items; ++i) {
    const double fi = g.item_degree(i) ? factor(g.item_degree(i)) : 0.0;
    for (UserId u : g.item_neighbors[static_cast<std::size_t>(i)]) {
      const double fu = factor(g.user_degree(u));
      op.cols.push_back(u);
      op.weights.push_back((use_target ? fi : 1.0) * (use_source ? fu : 1.0));
    }
    op.row_ptr.push_back(static_cast<std::int64_t>(op.cols.size()));
  }
  if (!scheme.symmetric()) adj.backward = op.transposed();
  return adj;
}

// Symmetric sqrt normalization of A + I: weight 1/sqrt((d_v+1)(d_w+1)),
// diagonal 1/(d_v+1). Only used by the diffusion stage.
inline NormalizedAdjacency normalize_with_self_loops(const InteractionGraph& g) {
  NormalizedAdjacency adj;
  adj.num_users = g.num_users;
  adj.num_items = g.num_items;
  adj.self_loops = true;
  auto inv_sqrt = [](std::size_t d) { return 1.0 / std::sqrt(static_cast<double>(d + 1)); };
  auto& op = adj.forward;
  for (UserId u = 0; u < g.num_users; ++u) {
    const double fu = inv_sqrt(g.user_degree(u));
    op.cols.push_back(u);
    op.weights.push_back(fu * fu);
    for (ItemId i : g.user_neighbors[static_cast<std::size_t>(u)]) {
      op.cols.push_back(g.num_users + i);
      op.weights.push_back(fu * inv_sqrt(g.item_degree(i)));
    }
    op.row_ptr.push_back(static_cast<std::int64_t>(op.cols.size()));
  }
  for (ItemId i = 0; i < g.num_items; ++i) {
    const double fi = inv_sqrt(g.item_degree(i));
    for (UserId u : g.item_neighbors[static_cast<std::size_t>(i)]) {
      op.cols.push_back(u);
      op.weights.push_back(fi * inv_sqrt(g.user_degree(u)));
    }
    op.cols.push_back(g.num_users + i);
    op.weights.push_back(fi * fi);
    op.row_ptr.push_back(static_cast<std::int64_t>(op.cols.size()));
  }
  return adj;
}

inline Matrix spmv(const NormalizedAdjacency& adj, const Matrix& x, int workers = 1) {
  Matrix y;
  adj.forward.apply(x, y, workers);
  return y;
}

inline Matrix spmv_transpose(const NormalizedAdjacency& adj, const Matrix& x, int workers = 1) {
  Matrix y;
  adj.transpose_op().apply(x, y, workers);
  return y;
}

// "row col weight" triples, one per stored entry.
inline void dump_operator(const NormalizedAdjacency& adj, std::ostream& os) {
  const auto& op = adj.forward;
  for (std::int32_t v = 0; v < op.rows(); ++v)
    for (auto e = op.row_ptr[static_cast<std::size_t>(v)]; e < op.row_ptr[static_cast<std::size_t>(v) + 1]; ++e)
      os << fmt::format("{} {} {:.17g}\n", v, op.cols[static_cast<std::size_t>(e)], op.weights[static_cast<std::size_t>(e)]);
}

}  // namespace lgcn
