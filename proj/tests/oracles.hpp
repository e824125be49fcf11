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

// Reference implementations used only by tests. They are deliberately naive
// and share no code paths with the library beyond plain data types.

#include "lgcn/dataset.hpp"
#include "lgcn/types.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <set>
#include <vector>

namespace lgcn::oracle {

using Dense = Eigen::MatrixXd;

// Dense (U+I)x(U+I) normalized adjacency computed straight from degree
// counts. side: 0 = both factors, 1 = target only, 2 = source only.
inline Dense dense_adjacency(std::int32_t nu, std::int32_t ni, const std::vector<Interaction>& pairs, int side,
                             double p, bool self_loops = false) {
  const int n = nu + ni;
  Dense a = Dense::Zero(n, n);
  for (const auto& x : pairs) {
    a(x.user, nu + x.item) = 1.0;
    a(nu + x.item, x.user) = 1.0;
  }
  if (self_loops) a += Dense::Identity(n, n);
  Eigen::VectorXd deg = a.rowwise().sum();
  Dense out = Dense::Zero(n, n);
  for (int v = 0; v < n; ++v)
    for (int w = 0; w < n; ++w) {
      if (a(v, w) == 0.0) continue;
      const double fv = std::pow(deg(v), -p), fw = std::pow(deg(w), -p);
      out(v, w) = side == 0 ? fv * fw : side == 1 ? fv : fw;
    }
  return out;
}

// Random bipartite interactions; every user gets at least one pair.
inline std::vector<Interaction> random_pairs(std::int32_t nu, std::int32_t ni, double density, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(density);
  std::uniform_int_distribution<ItemId> any(0, ni - 1);
  std::vector<Interaction> out;
  for (UserId u = 0; u < nu; ++u) {
    std::set<ItemId> mine;
    for (ItemId i = 0; i < ni; ++i)
      if (coin(rng)) mine.insert(i);
    if (mine.empty()) mine.insert(any(rng));
    for (ItemId i : mine) out.push_back({u, i});
  }
  return out;
}

struct NaiveUserMetrics {
  double recall = 0, precision = 0, ndcg = 0;
  bool has_ild = false;
  double ild = 0;
};

// Scores every item one dot product at a time and fully sorts.
inline std::vector<ItemId> naive_ranking(const Dense& users, const Dense& items, UserId u,
                                         const std::set<ItemId>& exclude, int cutoff) {
  std::vector<std::pair<double, ItemId>> scored;
  for (ItemId i = 0; i < items.rows(); ++i) {
    if (exclude.count(i)) continue;
    double s = 0;
    for (int c = 0; c < items.cols(); ++c) s += users(u, c) * items(i, c);
    scored.emplace_back(s, i);
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<ItemId> out;
  for (int k = 0; k < cutoff && k < static_cast<int>(scored.size()); ++k) out.push_back(scored[k].second);
  return out;
}

inline NaiveUserMetrics naive_metrics(const std::vector<ItemId>& ranked, const std::set<ItemId>& test, int cutoff,
                                      const Dense& items) {
  NaiveUserMetrics m;
  int hits = 0;
  double dcg = 0;
  for (std::size_t r = 0; r < ranked.size(); ++r)
    if (test.count(ranked[r])) {
      ++hits;
      dcg += std::log(2.0) / std::log(static_cast<double>(r) + 2.0);
    }
  double idcg = 0;
  for (int r = 0; r < std::min<int>(cutoff, static_cast<int>(test.size())); ++r)
    idcg += std::log(2.0) / std::log(static_cast<double>(r) + 2.0);
  m.recall = static_cast<double>(hits) / static_cast<double>(test.size());
  m.precision = static_cast<double>(hits) / cutoff;
  m.ndcg = dcg / idcg;
  if (ranked.size() >= 2) {
    double total = 0;
    int pairs = 0;
    for (std::size_t a = 0; a < ranked.size(); ++a)
      for (std::size_t b = a + 1; b < ranked.size(); ++b) {
        double dot = 0, na = 0, nb = 0;
        for (int c = 0; c < items.cols(); ++c) {
          dot += items(ranked[a], c) * items(ranked[b], c);
          na += items(ranked[a], c) * items(ranked[a], c);
          nb += items(ranked[b], c) * items(ranked[b], c);
        }
        if (na == 0 || nb == 0) continue;
        total += 1.0 - dot / std::sqrt(na * nb);
        ++pairs;
      }
    if (pairs) {
      m.has_ild = true;
      m.ild = total / pairs;
    }
  }
  return m;
}

struct NaiveReport {
  double recall = 0, precision = 0, ndcg = 0, ild = 0;
  std::size_t users = 0, ild_users = 0;
};

// Per-user loop over a (users + items) x d embedding matrix.
inline NaiveReport naive_evaluate(const Dense& embeddings, std::int32_t nu, const std::vector<Interaction>& train,
                                  const std::vector<Interaction>& test, int cutoff) {
  const Dense users = embeddings.topRows(nu);
  const Dense items = embeddings.bottomRows(embeddings.rows() - nu);
  std::vector<std::set<ItemId>> seen(static_cast<std::size_t>(nu)), held(static_cast<std::size_t>(nu));
  for (const auto& p : train) seen[static_cast<std::size_t>(p.user)].insert(p.item);
  for (const auto& p : test) held[static_cast<std::size_t>(p.user)].insert(p.item);
  NaiveReport r;
  for (UserId u = 0; u < nu; ++u) {
    const auto& t = held[static_cast<std::size_t>(u)];
    if (t.empty()) continue;
    const auto ranked = naive_ranking(users, items, u, seen[static_cast<std::size_t>(u)], cutoff);
    const auto m = naive_metrics(ranked, t, cutoff, items);
    r.recall += m.recall;
    r.precision += m.precision;
    r.ndcg += m.ndcg;
    ++r.users;
    if (m.has_ild) {
      r.ild += m.ild;
      ++r.ild_users;
    }
  }
  r.recall /= static_cast<double>(r.users);
  r.precision /= static_cast<double>(r.users);
  r.ndcg /= static_cast<double>(r.users);
  if (r.ild_users) r.ild /= static_cast<double>(r.ild_users);
  return r;
}

// |a - n| / max(|a|, |n|, floor); the floor keeps entries that are zero up
// to finite-difference roundoff from dominating the check.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

// Central differences of f over every entry of `x`.
template <class Mat>
Mat central_differences(Mat x, const std::function<double(const Mat&)>& f, double h) {
  Mat g(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r)
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      const double keep = x(r, c);
      x(r, c) = keep + h;
      const double up = f(x);
      x(r, c) = keep - h;
      const double down = f(x);
      x(r, c) = keep;
      g(r, c) = (up - down) / (2 * h);
    }
  return g;
}

}  // namespace lgcn::oracle
