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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

namespace lgcn {

// Implicit-feedback data with latent communities: every user and item
// belongs to one community, users draw most of their items from their own
// community, and item popularity follows a Zipf law.
struct SyntheticConfig {
  std::int32_t num_users = 1434;
  std::int32_t num_items = 1522;
  std::int64_t num_interactions = 35931;
  int communities = 12;
  double in_community = 0.8;
  double popularity_skew = 0.8;  // Zipf exponent
  double degree_sigma = 0.9;     // log-normal spread of user degrees
  int min_degree = 4;
  double test_fraction = 0.2;
  std::uint64_t seed = 7;
};

namespace detail {

// Degrees summing exactly to `total`, each within [lo, hi].
inline std::vector<std::int64_t> draw_degrees(const SyntheticConfig& c, std::mt19937_64& rng) {
  const auto n = static_cast<std::size_t>(c.num_users);
  const std::int64_t lo = c.min_degree;
  const std::int64_t hi = std::max<std::int64_t>(lo, c.num_items / 2);
  if (c.num_interactions < lo * c.num_users || c.num_interactions > hi * c.num_users)
    throw UsageError("synthetic: interaction count incompatible with degree bounds");
  std::lognormal_distribution<double> ln(0.0, c.degree_sigma);
  std::vector<double> raw(n);
  for (auto& r : raw) r = ln(rng);
  const double sum = std::accumulate(raw.begin(), raw.end(), 0.0);
  const double spare = static_cast<double>(c.num_interactions - lo * c.num_users);
  std::vector<std::int64_t> deg(n);
  for (std::size_t u = 0; u < n; ++u)
    deg[u] = std::min(hi, lo + static_cast<std::int64_t>(std::floor(raw[u] / sum * spare)));
  std::int64_t have = std::accumulate(deg.begin(), deg.end(), std::int64_t{0});
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  while (have != c.num_interactions) {
    auto& d = deg[pick(rng)];
    if (have < c.num_interactions && d < hi) {
      ++d;
      ++have;
    } else if (have > c.num_interactions && d > lo) {
      --d;
      --have;
    }
  }
  return deg;
}

}  // namespace detail

inline std::vector<Interaction> make_community_interactions(const SyntheticConfig& c) {
  std::mt19937_64 rng(c.seed);
  const auto degrees = detail::draw_degrees(c, rng);

  std::vector<int> item_comm(static_cast<std::size_t>(c.num_items));
  std::vector<double> item_weight(static_cast<std::size_t>(c.num_items));
  std::vector<std::int32_t> rank(static_cast<std::size_t>(c.num_items));
  std::iota(rank.begin(), rank.end(), 0);
  std::shuffle(rank.begin(), rank.end(), rng);
  std::uniform_int_distribution<int> pick_comm(0, c.communities - 1);
  for (std::size_t i = 0; i < item_comm.size(); ++i) {
    item_comm[i] = pick_comm(rng);
    item_weight[i] = 1.0 / std::pow(static_cast<double>(rank[i]) + 1.0, c.popularity_skew);
  }
  std::vector<std::discrete_distribution<ItemId>> by_comm;
  for (int k = 0; k < c.communities; ++k) {
    std::vector<double> w(item_weight);
    for (std::size_t i = 0; i < w.size(); ++i)
      if (item_comm[i] != k) w[i] = 0.0;
    by_comm.emplace_back(w.begin(), w.end());
  }
  std::discrete_distribution<ItemId> global(item_weight.begin(), item_weight.end());
  std::bernoulli_distribution stay(c.in_community);

  std::vector<Interaction> out;
  out.reserve(static_cast<std::size_t>(c.num_interactions));
  std::vector<char> taken(static_cast<std::size_t>(c.num_items));
  for (UserId u = 0; u < c.num_users; ++u) {
    const int home = pick_comm(rng);
    std::fill(taken.begin(), taken.end(), 0);
    std::vector<ItemId> mine;
    while (static_cast<std::int64_t>(mine.size()) < degrees[static_cast<std::size_t>(u)]) {
      const ItemId i = stay(rng) ? by_comm[static_cast<std::size_t>(home)](rng) : global(rng);
      if (taken[static_cast<std::size_t>(i)]) continue;
      taken[static_cast<std::size_t>(i)] = 1;
      mine.push_back(i);
    }
    std::sort(mine.begin(), mine.end());
    for (ItemId i : mine) out.push_back({u, i});
  }

  // Hand every unused item to a random interaction whose item is used more
  // than once, so the item space is fully covered.
  std::vector<std::int64_t> uses(static_cast<std::size_t>(c.num_items));
  for (const auto& p : out) ++uses[static_cast<std::size_t>(p.item)];
  std::uniform_int_distribution<std::size_t> pick_pair(0, out.size() - 1);
  for (ItemId i = 0; i < c.num_items; ++i) {
    if (uses[static_cast<std::size_t>(i)] > 0) continue;
    for (;;) {
      auto& p = out[pick_pair(rng)];
      if (uses[static_cast<std::size_t>(p.item)] < 2) continue;
      const bool dup = std::any_of(out.begin(), out.end(), [&](const Interaction& q) { return q.user == p.user && q.item == i; });
      if (dup) continue;
      --uses[static_cast<std::size_t>(p.item)];
      p.item = i;
      ++uses[static_cast<std::size_t>(i)];
      break;
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline InteractionDataset make_community_dataset(const SyntheticConfig& c) {
  return holdout_split(make_community_interactions(c), c.test_fraction, c.seed + 1, c.num_users, c.num_items);
}

}  // namespace lgcn
