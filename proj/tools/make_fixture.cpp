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

// Writes the checked-in desk-scale fixture: a community-structured stand-in
// with the Amazon-Electronics user/item/interaction counts.

#include "lgcn/dataset.hpp"
#include "lgcn/synthetic.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <fstream>

int main(int argc, char** argv) {
  CLI::App app{"generate a synthetic interaction fixture"};
  std::string out = "tests/data/electro_synth";
  lgcn::SyntheticConfig cfg;
  app.add_option("--out", out, "output directory");
  app.add_option("--users", cfg.num_users);
  app.add_option("--items", cfg.num_items);
  app.add_option("--interactions", cfg.num_interactions);
  app.add_option("--communities", cfg.communities);
  app.add_option("--seed", cfg.seed);
  CLI11_PARSE(app, argc, argv);

  const auto ds = lgcn::make_community_dataset(cfg);
  ds.validate();
  lgcn::save_dataset(ds, out);
  const auto stats = lgcn::compute_stats(ds);
  std::ofstream(std::filesystem::path(out) / "expected_stats.txt") << stats.to_key_value();
  fmt::print("{}", stats.to_key_value());
  return 0;
}
