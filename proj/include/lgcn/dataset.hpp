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

#include "lgcn/types.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace lgcn {

// User/item interactions with a fixed train/test partition. Ids are dense.
struct InteractionDataset {
  std::int32_t num_users = 0;
  std::int32_t num_items = 0;
  std::vector<Interaction> train;
  std::vector<Interaction> test;

  std::size_t num_interactions() const { return train.size() + test.size(); }

  // Throws DataError if ids are out of range, a split holds duplicates, or
  // train and test overlap.
  void validate() const {
    auto check = [&](const std::vector<Interaction>& part, const char* name) {
      std::vector<Interaction> sorted(part);
      std::sort(sorted.begin(), sorted.end());
      for (std::size_t k = 0; k < sorted.size(); ++k) {
        const auto& p = sorted[k];
        if (p.user < 0 || p.user >= num_users || p.item < 0 || p.item >= num_items)
          throw DataError(fmt::format("{} pair ({}, {}) out of range", name, p.user, p.item));
        if (k > 0 && sorted[k - 1] == p)
          throw DataError(fmt::format("duplicate {} pair ({}, {})", name, p.user, p.item));
      }
      return sorted;
    };
    auto tr = check(train, "train");
    auto te = check(test, "test");
    std::vector<Interaction> both;
    std::set_intersection(tr.begin(), tr.end(), te.begin(), te.end(), std::back_inserter(both));
    if (!both.empty())
      throw DataError(fmt::format("pair ({}, {}) in both train and test", both[0].user, both[0].item));
  }

  friend bool operator==(const InteractionDataset&, const InteractionDataset&) = default;
};

struct DatasetStats {
  std::int64_t num_users = 0;
  std::int64_t num_items = 0;
  std::int64_t num_interactions = 0;
  double density = 0.0;

  std::string to_key_value() const {
    return fmt::format("num_users={}\nnum_items={}\nnum_interactions={}\ndensity={:.8g}\n", num_users,
                       num_items, num_interactions, density);
  }
  static std::string csv_header() { return "num_users,num_items,num_interactions,density"; }
  std::string to_csv_row() const {
    return fmt::format("{},{},{},{:.8g}", num_users, num_items, num_interactions, density);
  }
};

inline DatasetStats compute_stats(const InteractionDataset& ds) {
  DatasetStats s;
  s.num_users = ds.num_users;
  s.num_items = ds.num_items;
  s.num_interactions = static_cast<std::int64_t>(ds.num_interactions());
  const double grid = static_cast<double>(s.num_users) * static_cast<double>(s.num_items);
  s.density = grid > 0 ? static_cast<double>(s.num_interactions) / grid : 0.0;
  return s;
}

enum class FileFormat { adjacency_list, pair_list };

inline FileFormat parse_file_format(std::string_view name) {
  if (name == "adjacency-list" || name == "adj") return FileFormat::adjacency_list;
  if (name == "pair-list" || name == "pairs") return FileFormat::pair_list;
  throw UsageError(fmt::format("unknown dataset format '{}'", name));
}

// Dense index <-> external id. Integer ids are ordered numerically, so an
// already-dense id space maps onto itself.
class IdMap {
 public:
  IdMap() = default;

  static IdMap from_tokens(std::vector<std::string> tokens, bool numeric) {
    std::sort(tokens.begin(), tokens.end(), [numeric](const std::string& a, const std::string& b) {
      if (numeric && a.size() != b.size()) return a.size() < b.size();
      return a < b;
    });
    tokens.erase(std::unique(tokens.begin(), tokens.end()), tokens.end());
    IdMap m;
    m.external_ = std::move(tokens);
    for (std::size_t k = 0; k < m.external_.size(); ++k)
      m.index_.emplace(m.external_[k], static_cast<std::int32_t>(k));
    return m;
  }

  std::int32_t size() const { return static_cast<std::int32_t>(external_.size()); }
  std::int32_t at(const std::string& ext) const { return index_.at(ext); }
  const std::string& external(std::int32_t dense) const { return external_.at(dense); }

  void write(std::ostream& os) const {
    for (std::size_t k = 0; k < external_.size(); ++k) os << k << ' ' << external_[k] << '\n';
  }

 private:
  std::vector<std::string> external_;
  std::map<std::string, std::int32_t> index_;
};

struct LoadOptions {
  FileFormat format = FileFormat::adjacency_list;
  // Accept arbitrary non-whitespace tokens as ids instead of integers.
  bool string_ids = false;
};

struct LoadedDataset {
  InteractionDataset data;
  IdMap users;
  IdMap items;
  std::size_t duplicates = 0;
};

namespace detail {

struct RawPair {
  std::string user;
  std::string item;
};

struct RawFile {
  std::vector<std::string> users;  // every user token seen, including item-less lines
  std::vector<RawPair> pairs;
};

// Canonical decimal form of an integer token; leading zeros and '+' dropped.
inline std::string canonical_integer(std::string_view tok, std::size_t line) {
  long long v = 0;
  auto first = tok.data();
  if (!tok.empty() && tok.front() == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size() || first == tok.data() + tok.size() || v < 0)
    throw ParseError(fmt::format("invalid id token '{}'", tok), line);
  return std::to_string(v);
}

inline RawFile read_raw(const std::filesystem::path& path, const LoadOptions& opt) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot open '{}'", path.string()));
  RawFile raw;
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::string> toks;
  while (std::getline(in, line)) {
    ++lineno;
    toks.clear();
    std::istringstream ss(line);
    for (std::string t; ss >> t;) toks.push_back(opt.string_ids ? t : canonical_integer(t, lineno));
    if (toks.empty()) continue;
    if (opt.format == FileFormat::pair_list) {
      if (toks.size() != 2)
        throw ParseError(fmt::format("expected 'user_id item_id', got {} tokens", toks.size()), lineno);
      raw.users.push_back(toks[0]);
      raw.pairs.push_back({toks[0], toks[1]});
    } else {
      raw.users.push_back(toks[0]);
      for (std::size_t k = 1; k < toks.size(); ++k) raw.pairs.push_back({toks[0], toks[k]});
    }
  }
  return raw;
}

}  // namespace detail

// Reads a train file and an optional test file sharing one id space.
// Duplicate pairs are dropped and counted; a test pair already present in
// train counts as a duplicate too.
inline LoadedDataset load_dataset(const std::filesystem::path& train_path,
                                  const std::optional<std::filesystem::path>& test_path,
                                  const LoadOptions& opt = {}) {
  auto train_raw = detail::read_raw(train_path, opt);
  detail::RawFile test_raw;
  if (test_path) test_raw = detail::read_raw(*test_path, opt);
  if (train_raw.pairs.empty() && test_raw.pairs.empty())
    throw DataError(fmt::format("empty dataset '{}'", train_path.string()));

  std::vector<std::string> user_tokens, item_tokens;
  for (const auto* raw : {&train_raw, &test_raw}) {
    user_tokens.insert(user_tokens.end(), raw->users.begin(), raw->users.end());
    for (const auto& p : raw->pairs) item_tokens.push_back(p.item);
  }

  LoadedDataset out;
  out.users = IdMap::from_tokens(std::move(user_tokens), !opt.string_ids);
  out.items = IdMap::from_tokens(std::move(item_tokens), !opt.string_ids);
  out.data.num_users = out.users.size();
  out.data.num_items = out.items.size();

  std::set<Interaction> seen;
  auto convert = [&](const detail::RawFile& raw, std::vector<Interaction>& dst) {
    for (const auto& p : raw.pairs) {
      Interaction x{out.users.at(p.user), out.items.at(p.item)};
      if (!seen.insert(x).second) {
        ++out.duplicates;
        continue;
      }
      dst.push_back(x);
    }
  };
  convert(train_raw, out.data.train);
  convert(test_raw, out.data.test);
  if (out.duplicates > 0) log::warn(fmt::format("dropped {} duplicate interaction(s)", out.duplicates));
  return out;
}

inline LoadedDataset load_interactions(const std::filesystem::path& path, const LoadOptions& opt = {}) {
  return load_dataset(path, std::nullopt, opt);
}

// Writes one adjacency-list line per user (users without pairs get a bare
// id line so the user count survives a reload).
inline void write_adjacency_list(std::ostream& os, std::int32_t num_users, std::span<const Interaction> pairs) {
  std::vector<std::vector<ItemId>> rows(static_cast<std::size_t>(num_users));
  for (const auto& p : pairs) rows[static_cast<std::size_t>(p.user)].push_back(p.item);
  for (std::int32_t u = 0; u < num_users; ++u) {
    os << u;
    for (ItemId i : rows[static_cast<std::size_t>(u)]) os << ' ' << i;
    os << '\n';
  }
}

inline void write_pair_list(std::ostream& os, std::span<const Interaction> pairs) {
  for (const auto& p : pairs) os << p.user << ' ' << p.item << '\n';
}

// Saves as <dir>/train.txt and <dir>/test.txt in dense ids.
inline void save_dataset(const InteractionDataset& ds, const std::filesystem::path& dir,
                         FileFormat format = FileFormat::adjacency_list) {
  std::filesystem::create_directories(dir);
  for (auto [name, part] : {std::pair{"train.txt", &ds.train}, std::pair{"test.txt", &ds.test}}) {
    std::ofstream os(dir / name);
    if (!os) throw DataError(fmt::format("cannot write '{}'", (dir / name).string()));
    if (format == FileFormat::adjacency_list)
      write_adjacency_list(os, ds.num_users, *part);
    else
      write_pair_list(os, *part);
  }
}

// Per-user holdout: floor(test_fraction * degree) of each user's pairs go to
// test, the rest to train. Users with a single pair always keep it in train.
inline InteractionDataset holdout_split(std::span<const Interaction> pairs, double test_fraction,
                                        std::uint64_t seed, std::int32_t num_users = 0,
                                        std::int32_t num_items = 0) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw UsageError(fmt::format("test fraction must lie in (0, 1), got {}", test_fraction));
  if (pairs.empty()) throw DataError("cannot split an empty interaction list");

  InteractionDataset ds;
  ds.num_users = num_users;
  ds.num_items = num_items;
  for (const auto& p : pairs) {
    ds.num_users = std::max(ds.num_users, p.user + 1);
    ds.num_items = std::max(ds.num_items, p.item + 1);
  }

  std::vector<std::vector<ItemId>> by_user(static_cast<std::size_t>(ds.num_users));
  for (const auto& p : pairs) by_user[static_cast<std::size_t>(p.user)].push_back(p.item);

  std::mt19937_64 rng(seed);
  for (std::int32_t u = 0; u < ds.num_users; ++u) {
    auto& items = by_user[static_cast<std::size_t>(u)];
    std::sort(items.begin(), items.end());
    items.erase(std::unique(items.begin(), items.end()), items.end());
    std::shuffle(items.begin(), items.end(), rng);
    const auto n_test = static_cast<std::size_t>(std::floor(test_fraction * static_cast<double>(items.size())));
    std::sort(items.begin(), items.begin() + static_cast<std::ptrdiff_t>(n_test));
    std::sort(items.begin() + static_cast<std::ptrdiff_t>(n_test), items.end());
    for (std::size_t k = 0; k < items.size(); ++k)
      (k < n_test ? ds.test : ds.train).push_back({u, items[k]});
  }
  return ds;
}

}  // namespace lgcn
