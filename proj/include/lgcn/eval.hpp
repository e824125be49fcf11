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
#include "lgcn/graph.hpp"
#include "lgcn/model.hpp"
#include "lgcn/types.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace lgcn {

// Top-cutoff items for one user, train items excluded, sorted by descending
// score with ties going to the smaller item id.
struct RankedList {
  UserId user = 0;
  int cutoff = 0;
  std::vector<ItemId> items;
  bool truncated = false;  // fewer candidates than the cutoff

  RankedList prefix(int k) const {
    RankedList r{user, k, {}, truncated || static_cast<int>(items.size()) < k};
    r.items.assign(items.begin(), items.begin() + std::min<std::ptrdiff_t>(k, static_cast<std::ptrdiff_t>(items.size())));
    return r;
  }
};

inline RankedList top_k_from_scores(UserId u, std::span<const double> scores, const InteractionGraph& g, int cutoff) {
  if (cutoff < 1) throw std::invalid_argument("cutoff must be >= 1");
  std::vector<ItemId> cand;
  cand.reserve(scores.size());
  static const std::vector<ItemId> kNone;
  const auto& seen = u < g.num_users ? g.user_neighbors[static_cast<std::size_t>(u)] : kNone;
  auto skip = seen.begin();
  for (ItemId i = 0; i < static_cast<ItemId>(scores.size()); ++i) {
    while (skip != seen.end() && *skip < i) ++skip;
    if (skip != seen.end() && *skip == i) continue;
    cand.push_back(i);
  }
  const auto n = std::min<std::size_t>(static_cast<std::size_t>(cutoff), cand.size());
  std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(n), cand.end(), [&](ItemId a, ItemId b) {
    const double sa = scores[static_cast<std::size_t>(a)], sb = scores[static_cast<std::size_t>(b)];
    return sa > sb || (sa == sb && a < b);
  });
  cand.resize(n);
  return {u, cutoff, std::move(cand), n < static_cast<std::size_t>(cutoff)};
}

inline RankedList top_k(const EmbeddingState& s, const InteractionGraph& g, UserId u, int cutoff) {
  const Vector scores = score_all(s, u);
  return top_k_from_scores(u, std::span<const double>(scores.data(), static_cast<std::size_t>(scores.size())), g, cutoff);
}

struct RecallPrecision {
  double recall = 0.0;
  double precision = 0.0;
};

namespace detail {
inline std::size_t count_hits(const RankedList& list, std::span<const ItemId> test_sorted) {
  std::size_t hits = 0;
  for (ItemId i : list.items) hits += std::binary_search(test_sorted.begin(), test_sorted.end(), i);
  return hits;
}
}  // namespace detail

// `test_sorted` must be sorted ascending and nonempty.
inline RecallPrecision recall_precision_at_k(const RankedList& list, std::span<const ItemId> test_sorted) {
  if (test_sorted.empty()) throw std::invalid_argument("recall/precision need a nonempty test set");
  const auto hits = static_cast<double>(detail::count_hits(list, test_sorted));
  return {hits / static_cast<double>(test_sorted.size()), hits / static_cast<double>(list.cutoff)};
}

// Binary relevance, log2 discount, ideal DCG over min(|test|, cutoff) slots.
inline double ndcg_at_k(const RankedList& list, std::span<const ItemId> test_sorted) {
  if (test_sorted.empty()) throw std::invalid_argument("ndcg needs a nonempty test set");
  double dcg = 0.0;
  for (std::size_t r = 0; r < list.items.size(); ++r)
    if (std::binary_search(test_sorted.begin(), test_sorted.end(), list.items[r]))
      dcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
  const auto ideal = std::min<std::size_t>(test_sorted.size(), static_cast<std::size_t>(list.cutoff));
  double idcg = 0.0;
  for (std::size_t r = 0; r < ideal; ++r) idcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
  return dcg / idcg;
}

// Mean pairwise cosine distance over the list's item embeddings; rows of
// `item_embeddings` are items. Pairs touching a zero vector are skipped.
inline std::optional<double> ild(const RankedList& list, const Matrix& item_embeddings) {
  const auto n = list.items.size();
  if (n < 2) return std::nullopt;
  std::vector<double> norms(n);
  for (std::size_t a = 0; a < n; ++a) norms[a] = item_embeddings.row(list.items[a]).norm();
  double total = 0.0;
  std::size_t pairs = 0, skipped = 0;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      if (norms[a] == 0.0 || norms[b] == 0.0) {
        ++skipped;
        continue;
      }
      const double cos =
          item_embeddings.row(list.items[a]).dot(item_embeddings.row(list.items[b])) / (norms[a] * norms[b]);
      total += 1.0 - std::clamp(cos, -1.0, 1.0);
      ++pairs;
    }
  }
  if (skipped) log::warn(fmt::format("ild: skipped {} pair(s) with a zero-norm embedding for user {}", skipped, list.user));
  if (pairs == 0) return std::nullopt;
  return total / static_cast<double>(pairs);
}

struct FairnessBin {
  std::size_t min_count = 0;  // train-interaction count range covered by the bin
  std::size_t max_count = 0;
  std::size_t users = 0;
  double mean = 0.0;
};

struct FairnessTable {
  std::vector<FairnessBin> bins;
  double gap = 0.0;     // max - min of bin means
  double stddev = 0.0;  // population std of bin means
};

// Quantile bins over users sorted by train-interaction count. Bin sizes are
// equal up to one user; a boundary that would split users with the same
// count moves by one slot when that keeps them together.
inline FairnessTable fairness_bins(const std::map<UserId, double>& per_user_metric, const InteractionGraph& g,
                                   int num_bins) {
  if (num_bins < 2) throw UsageError("fairness needs at least 2 bins");
  const auto n = per_user_metric.size();
  if (n < static_cast<std::size_t>(num_bins))
    throw DataError(fmt::format("fairness: {} user(s) cannot fill {} bins", n, num_bins));

  struct Entry {
    std::size_t count;
    UserId user;
    double value;
  };
  std::vector<Entry> users;
  users.reserve(n);
  for (const auto& [u, v] : per_user_metric) users.push_back({g.user_degree(u), u, v});
  std::sort(users.begin(), users.end(),
            [](const Entry& a, const Entry& b) { return a.count < b.count || (a.count == b.count && a.user < b.user); });

  auto splits_tie = [&](std::size_t b) { return b > 0 && b < n && users[b - 1].count == users[b].count; };
  std::vector<std::size_t> cuts{0};
  for (int k = 1; k < num_bins; ++k) {
    std::size_t b = n * static_cast<std::size_t>(k) / static_cast<std::size_t>(num_bins);
    if (splits_tie(b)) {
      if (b - 1 > cuts.back() && !splits_tie(b - 1))
        b -= 1;
      else if (b + 1 < n && !splits_tie(b + 1))
        b += 1;
    }
    cuts.push_back(b);
  }
  cuts.push_back(n);

  FairnessTable t;
  for (int k = 0; k < num_bins; ++k) {
    const auto lo = cuts[static_cast<std::size_t>(k)], hi = cuts[static_cast<std::size_t>(k) + 1];
    FairnessBin bin;
    bin.users = hi - lo;
    if (bin.users) {
      bin.min_count = users[lo].count;
      bin.max_count = users[hi - 1].count;
      double acc = 0.0;
      for (auto e = lo; e < hi; ++e) acc += users[e].value;
      bin.mean = acc / static_cast<double>(bin.users);
    }
    t.bins.push_back(bin);
  }
  double lo = t.bins[0].mean, hi = t.bins[0].mean, mean = 0.0;
  for (const auto& b : t.bins) {
    lo = std::min(lo, b.mean);
    hi = std::max(hi, b.mean);
    mean += b.mean;
  }
  mean /= static_cast<double>(t.bins.size());
  double var = 0.0;
  for (const auto& b : t.bins) var += (b.mean - mean) * (b.mean - mean);
  t.gap = hi - lo;
  t.stddev = std::sqrt(var / static_cast<double>(t.bins.size()));
  return t;
}

struct MetricsReport {
  int cutoff = 20;
  std::size_t users = 0;      // evaluable users (>= 1 test item)
  std::size_t ild_users = 0;  // users whose list admitted an ILD value
  double recall = 0.0;
  double precision = 0.0;
  double ndcg = 0.0;
  double ild = 0.0;
  FairnessTable fairness;  // empty when there are fewer users than bins
};

// Per-user test items, sorted. Users without test items map to empty lists.
inline std::vector<std::vector<ItemId>> test_items_by_user(const InteractionDataset& ds) {
  std::vector<std::vector<ItemId>> out(static_cast<std::size_t>(ds.num_users));
  for (const auto& p : ds.test) out[static_cast<std::size_t>(p.user)].push_back(p.item);
  for (auto& v : out) std::sort(v.begin(), v.end());
  return out;
}

// Scores users in blocks through one dense product per block, ranks, and
// averages every metric over users with at least one test item.
inline std::vector<MetricsReport> evaluate(const Matrix& embeddings, std::int32_t num_users, const InteractionGraph& g,
                                           const InteractionDataset& ds, std::vector<int> cutoffs, int num_bins = 4) {
  if (cutoffs.empty()) throw UsageError("at least one cutoff required");
  for (int c : cutoffs)
    if (c < 1) throw UsageError(fmt::format("cutoff {} < 1", c));
  const std::int32_t num_items = static_cast<std::int32_t>(embeddings.rows()) - num_users;
  const auto tests = test_items_by_user(ds);
  std::vector<UserId> evaluable;
  for (UserId u = 0; u < ds.num_users; ++u)
    if (!tests[static_cast<std::size_t>(u)].empty()) evaluable.push_back(u);
  if (evaluable.empty()) throw DataError("no user has a test interaction");

  const int max_cut = *std::max_element(cutoffs.begin(), cutoffs.end());
  const Matrix items = embeddings.bottomRows(num_items);
  std::vector<MetricsReport> reports(cutoffs.size());
  std::vector<std::map<UserId, double>> per_user_ndcg(cutoffs.size());
  std::vector<double> ild_sum(cutoffs.size(), 0.0);
  for (std::size_t c = 0; c < cutoffs.size(); ++c) reports[c].cutoff = cutoffs[c];

  constexpr std::size_t kBlock = 256;
  Matrix block_scores;
  for (std::size_t start = 0; start < evaluable.size(); start += kBlock) {
    const auto stop = std::min(evaluable.size(), start + kBlock);
    Matrix users(static_cast<Eigen::Index>(stop - start), embeddings.cols());
    for (auto k = start; k < stop; ++k) users.row(static_cast<Eigen::Index>(k - start)) = embeddings.row(evaluable[k]);
    block_scores.noalias() = users * items.transpose();
    for (auto k = start; k < stop; ++k) {
      const UserId u = evaluable[k];
      const auto row = block_scores.row(static_cast<Eigen::Index>(k - start));
      const auto full = top_k_from_scores(u, std::span<const double>(row.data(), static_cast<std::size_t>(num_items)), g,
                                          max_cut);
      const auto& test = tests[static_cast<std::size_t>(u)];
      for (std::size_t c = 0; c < cutoffs.size(); ++c) {
        const auto list = full.prefix(cutoffs[c]);
        auto& rep = reports[c];
        const auto rp = recall_precision_at_k(list, test);
        const double nd = ndcg_at_k(list, test);
        rep.recall += rp.recall;
        rep.precision += rp.precision;
        rep.ndcg += nd;
        per_user_ndcg[c].emplace(u, nd);
        if (auto d = ild(list, items)) {
          ild_sum[c] += *d;
          ++rep.ild_users;
        }
      }
    }
  }
  for (std::size_t c = 0; c < cutoffs.size(); ++c) {
    auto& rep = reports[c];
    rep.users = evaluable.size();
    const auto n = static_cast<double>(evaluable.size());
    rep.recall /= n;
    rep.precision /= n;
    rep.ndcg /= n;
    rep.ild = rep.ild_users ? ild_sum[c] / static_cast<double>(rep.ild_users) : 0.0;
    if (evaluable.size() >= static_cast<std::size_t>(num_bins))
      rep.fairness = fairness_bins(per_user_ndcg[c], g, num_bins);
    else
      log::warn(fmt::format("fairness skipped: {} evaluable user(s) for {} bins", evaluable.size(), num_bins));
  }
  return reports;
}

inline std::vector<MetricsReport> evaluate(const EmbeddingState& s, const InteractionGraph& g,
                                           const InteractionDataset& ds, std::vector<int> cutoffs, int num_bins = 4) {
  return evaluate(s.output(), s.num_users, g, ds, std::move(cutoffs), num_bins);
}

inline nlohmann::json to_json(const MetricsReport& r) {
  nlohmann::json bins = nlohmann::json::array();
  for (const auto& b : r.fairness.bins)
    bins.push_back({{"min_count", b.min_count}, {"max_count", b.max_count}, {"users", b.users}, {"ndcg", b.mean}});
  return {{"cutoff", r.cutoff},
          {"users", r.users},
          {"recall", r.recall},
          {"precision", r.precision},
          {"ndcg", r.ndcg},
          {"ild", r.ild},
          {"ild_users", r.ild_users},
          {"fairness", {{"bins", bins}, {"gap", r.fairness.gap}, {"std", r.fairness.stddev}}}};
}

inline MetricsReport report_from_json(const nlohmann::json& j) {
  MetricsReport r;
  r.cutoff = j.at("cutoff").get<int>();
  r.users = j.at("users").get<std::size_t>();
  r.recall = j.at("recall").get<double>();
  r.precision = j.at("precision").get<double>();
  r.ndcg = j.at("ndcg").get<double>();
  r.ild = j.at("ild").get<double>();
  r.ild_users = j.value("ild_users", std::size_t{0});
  const auto& f = j.at("fairness");
  r.fairness.gap = f.at("gap").get<double>();
  r.fairness.stddev = f.at("std").get<double>();
  for (const auto& b : f.at("bins"))
    r.fairness.bins.push_back({b.at("min_count").get<std::size_t>(), b.at("max_count").get<std::size_t>(),
                               b.at("users").get<std::size_t>(), b.at("ndcg").get<double>()});
  return r;
}

// Flat CSV: one row per (model, cutoff); fairness bins become columns.
inline void write_reports_csv(std::ostream& os, const std::string& model, const std::vector<MetricsReport>& reports,
                              bool header = true) {
  std::size_t max_bins = 0;
  for (const auto& r : reports) max_bins = std::max(max_bins, r.fairness.bins.size());
  if (header) {
    os << "model,cutoff,users,recall,precision,ndcg,ild,fairness_gap,fairness_std";
    for (std::size_t b = 0; b < max_bins; ++b) os << ",bin" << b + 1 << "_ndcg";
    os << '\n';
  }
  for (const auto& r : reports) {
    os << fmt::format("{},{},{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}", model, r.cutoff, r.users, r.recall,
                      r.precision, r.ndcg, r.ild, r.fairness.gap, r.fairness.stddev);
    for (std::size_t b = 0; b < max_bins; ++b) {
      os << ',';
      if (b < r.fairness.bins.size()) os << fmt::format("{:.17g}", r.fairness.bins[b].mean);
    }
    os << '\n';
  }
}

}  // namespace lgcn
