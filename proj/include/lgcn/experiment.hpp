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
#include "lgcn/eval.hpp"
#include "lgcn/graph.hpp"
#include "lgcn/train.hpp"
#include "lgcn/types.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace lgcn {

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',' || c == ' ' || c == ';') {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  std::istringstream ss(text);
  T v{};
  if (!(ss >> v) || !(ss >> std::ws).eof()) throw UsageError(fmt::format("{}: cannot parse '{}'", key, text));
  return v;
}

inline bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "1" || text == "true" || text == "on" || text == "yes") return true;
  if (text == "0" || text == "false" || text == "off" || text == "no") return false;
  throw UsageError(fmt::format("{}: expected a boolean, got '{}'", key, text));
}

// Shortest text that parses back to the same double.
inline std::string num(double v) { return fmt::format("{}", v); }

}  // namespace detail

// Reads "key = value" lines; '#' starts a comment.
inline std::map<std::string, std::string> read_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot open config '{}'", path.string()));
  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto t = detail::trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ParseError("expected key=value", lineno);
    auto key = detail::trim(std::string_view(t).substr(0, eq));
    if (key.rfind("--", 0) == 0) key = key.substr(2);
    kv[key] = detail::trim(std::string_view(t).substr(eq + 1));
  }
  return kv;
}

// Everything one experiment (or sweep) needs.
struct ExperimentSpec {
  std::string dataset;
  FileFormat format = FileFormat::adjacency_list;
  bool string_ids = false;
  double test_fraction = 0.2;  // only used when the dataset is a single file
  std::uint64_t split_seed = 0;
  TrainConfig train;
  std::vector<int> cutoffs{20};
  int bins = 4;
  std::filesystem::path out = "runs";
  std::string label;

  // Sweep axes; empty means "use the scalar value from train".
  std::vector<int> layers_axis;
  std::vector<NormScheme> scheme_axis;
  std::vector<double> alpha_axis;

  bool epochs_set = false;

  DiffusionConfig& diffusion() {
    if (!train.diffusion) train.diffusion.emplace();
    return *train.diffusion;
  }

  int primary_cutoff() const { return cutoffs.front(); }

  std::string model_label() const {
    if (!label.empty()) return label;
    std::string s = train.diffusion ? "APPNP" : train.scheme.label();
    if (train.diffusion && train.scheme != NormScheme::lightgcn()) s += train.scheme.label().substr(8);
    s += fmt::format("-K{}", train.layers);
    if (train.diffusion) s += fmt::format("-a{}", detail::num(train.diffusion->alpha));
    return s;
  }

  // Canonical settings that determine a run's results.
  std::map<std::string, std::string> semantic_settings() const {
    std::map<std::string, std::string> kv;
    kv["dataset"] = dataset;
    kv["format"] = format == FileFormat::adjacency_list ? "adjacency-list" : "pair-list";
    kv["string-ids"] = string_ids ? "true" : "false";
    kv["test-fraction"] = detail::num(test_fraction);
    kv["split-seed"] = std::to_string(split_seed);
    kv["epochs"] = std::to_string(train.epochs);
    kv["lr"] = detail::num(train.lr);
    kv["lambda"] = detail::num(train.lambda);
    kv["reg"] = train.reg_scope == RegScope::batch ? "batch" : "full";
    kv["batch-size"] = std::to_string(train.batch_size);
    kv["layers"] = std::to_string(train.layers);
    kv["scheme"] = train.scheme.name();
    kv["dim"] = std::to_string(train.dim);
    kv["seed"] = std::to_string(train.seed);
    kv["init-std"] = detail::num(train.init_std);
    kv["eval-every"] = std::to_string(train.eval_every);
    std::string cuts;
    for (int c : cutoffs) cuts += (cuts.empty() ? "" : ",") + std::to_string(c);
    kv["cutoff"] = cuts;
    kv["bins"] = std::to_string(bins);
    if (train.diffusion) {
      const auto& d = *train.diffusion;
      kv["diffusion-alpha"] = detail::num(d.alpha);
      kv["diffusion-steps"] = std::to_string(d.steps);
      kv["diffusion-mode"] = d.apply_during_training ? "train" : "posthoc";
      kv["diffusion-source"] = d.source == DiffusionSource::combined ? "combined" : "last";
      kv["diffusion-self-loops"] = d.self_loops ? "true" : "false";
    }
    return kv;
  }

  std::string canonical_text() const {
    std::string s;
    for (const auto& [k, v] : semantic_settings()) s += k + "=" + v + "\n";
    return s;
  }

  // 64-bit FNV-1a of the canonical settings, as 16 hex digits.
  std::string config_hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : canonical_text()) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    return fmt::format("{:016x}", h);
  }
};

// Applies one setting. List-valued axes are accepted for layers, scheme and
// diffusion-alpha; a scalar consumer later rejects lists of length > 1.
inline void apply_setting(ExperimentSpec& spec, const std::string& key, const std::string& value) {
  using detail::parse_number;
  auto& t = spec.train;
  if (key == "dataset") {
    spec.dataset = value;
  } else if (key == "format") {
    spec.format = parse_file_format(value);
  } else if (key == "string-ids") {
    spec.string_ids = detail::parse_bool(key, value);
  } else if (key == "test-fraction") {
    spec.test_fraction = parse_number<double>(key, value);
  } else if (key == "split-seed") {
    spec.split_seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "layers") {
    spec.layers_axis.clear();
    for (const auto& v : detail::split_list(value)) spec.layers_axis.push_back(parse_number<int>(key, v));
    if (spec.layers_axis.empty()) throw UsageError("layers: empty list");
    t.layers = spec.layers_axis.front();
  } else if (key == "scheme") {
    spec.scheme_axis.clear();
    for (const auto& v : detail::split_list(value)) spec.scheme_axis.push_back(NormScheme::parse(v));
    if (spec.scheme_axis.empty()) throw UsageError("scheme: empty list");
    t.scheme = spec.scheme_axis.front();
  } else if (key == "epochs") {
    t.epochs = parse_number<int>(key, value);
    spec.epochs_set = true;
  } else if (key == "lr") {
    t.lr = parse_number<double>(key, value);
  } else if (key == "lambda") {
    t.lambda = parse_number<double>(key, value);
  } else if (key == "reg") {
    if (value == "batch") t.reg_scope = RegScope::batch;
    else if (value == "full") t.reg_scope = RegScope::full;
    else throw UsageError(fmt::format("reg: expected batch or full, got '{}'", value));
  } else if (key == "batch-size") {
    t.batch_size = parse_number<int>(key, value);
  } else if (key == "dim") {
    t.dim = parse_number<int>(key, value);
  } else if (key == "seed") {
    t.seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "init-std") {
    t.init_std = parse_number<double>(key, value);
  } else if (key == "eval-every") {
    t.eval_every = parse_number<int>(key, value);
  } else if (key == "workers") {
    t.workers = parse_number<int>(key, value);
  } else if (key == "diffusion-alpha") {
    spec.alpha_axis.clear();
    for (const auto& v : detail::split_list(value)) spec.alpha_axis.push_back(parse_number<double>(key, v));
    if (spec.alpha_axis.empty()) throw UsageError("diffusion-alpha: empty list");
    spec.diffusion().alpha = spec.alpha_axis.front();
  } else if (key == "diffusion-steps") {
    spec.diffusion().steps = parse_number<int>(key, value);
  } else if (key == "diffusion-mode") {
    if (value != "train" && value != "posthoc")
      throw UsageError(fmt::format("diffusion-mode: expected train or posthoc, got '{}'", value));
    spec.diffusion().apply_during_training = value == "train";
  } else if (key == "diffusion-source") {
    if (value != "combined" && value != "last")
      throw UsageError(fmt::format("diffusion-source: expected combined or last, got '{}'", value));
    spec.diffusion().source = value == "combined" ? DiffusionSource::combined : DiffusionSource::last_layer;
  } else if (key == "diffusion-self-loops") {
    spec.diffusion().self_loops = detail::parse_bool(key, value);
  } else if (key == "cutoff") {
    spec.cutoffs.clear();
    for (const auto& v : detail::split_list(value)) spec.cutoffs.push_back(parse_number<int>(key, v));
    if (spec.cutoffs.empty()) throw UsageError("cutoff: empty list");
  } else if (key == "bins") {
    spec.bins = parse_number<int>(key, value);
  } else if (key == "out") {
    spec.out = value;
  } else if (key == "label") {
    spec.label = value;
  } else {
    throw UsageError(fmt::format("unknown setting '{}'", key));
  }
}

// Settings are applied in key order, after which diffusion runs without an
// explicit epoch count fall back to 600 epochs.
inline ExperimentSpec make_spec(const std::map<std::string, std::string>& settings) {
  ExperimentSpec spec;
  for (const auto& [k, v] : settings) apply_setting(spec, k, v);
  if (spec.train.diffusion && !spec.epochs_set) spec.train.epochs = 600;
  return spec;
}

// Rejects list-valued axes where a single run is expected.
inline void require_scalar_axes(const ExperimentSpec& spec) {
  if (spec.layers_axis.size() > 1 || spec.scheme_axis.size() > 1 || spec.alpha_axis.size() > 1)
    throw UsageError("train takes single values for --layers, --scheme and --diffusion-alpha; use sweep for lists");
}

struct LoadedExperimentData {
  LoadedDataset loaded;
  bool split_applied = false;
};

// A directory holds train.txt and an optional test.txt; a single file is
// split per user with test-fraction.
inline LoadedExperimentData load_experiment_data(const ExperimentSpec& spec, bool split_single_file = true) {
  if (spec.dataset.empty()) throw UsageError("--dataset is required");
  const std::filesystem::path p(spec.dataset);
  LoadOptions opt{spec.format, spec.string_ids};
  LoadedExperimentData out;
  if (std::filesystem::is_directory(p)) {
    const auto test = p / "test.txt";
    out.loaded = load_dataset(p / "train.txt",
                              std::filesystem::exists(test) ? std::optional(test) : std::nullopt, opt);
    return out;
  }
  if (!std::filesystem::exists(p)) throw DataError(fmt::format("dataset '{}' not found", spec.dataset));
  out.loaded = load_interactions(p, opt);
  if (split_single_file) {
    auto& d = out.loaded.data;
    d = holdout_split(d.train, spec.test_fraction, spec.split_seed, d.num_users, d.num_items);
    out.split_applied = true;
  }
  return out;
}

// Summary of one finished (or failed) training run, stored as run.json.
struct RunRecord {
  std::string label;
  std::string config_hash;
  std::map<std::string, std::string> spec;
  std::filesystem::path dir;
  double seconds = 0.0;
  bool complete = false;
  std::vector<MetricsReport> reports;

  nlohmann::json to_json() const {
    nlohmann::json reps = nlohmann::json::array();
    for (const auto& r : reports) reps.push_back(lgcn::to_json(r));
    return {{"label", label},
            {"config_hash", config_hash},
            {"spec", spec},
            {"seconds", seconds},
            {"complete", complete},
            {"history", "history.csv"},
            {"reports", reps}};
  }

  static RunRecord load(const std::filesystem::path& dir) {
    std::ifstream in(dir / "run.json");
    if (!in) throw DataError(fmt::format("run '{}' has no run.json", dir.string()));
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw DataError(fmt::format("run '{}': {}", dir.string(), e.what()));
    }
    RunRecord r;
    r.dir = dir;
    r.label = j.at("label").get<std::string>();
    r.config_hash = j.at("config_hash").get<std::string>();
    r.spec = j.at("spec").get<std::map<std::string, std::string>>();
    r.seconds = j.at("seconds").get<double>();
    r.complete = j.at("complete").get<bool>();
    for (const auto& rep : j.at("reports")) r.reports.push_back(report_from_json(rep));
    return r;
  }

  const MetricsReport* report_at(int cutoff) const {
    for (const auto& r : reports)
      if (r.cutoff == cutoff) return &r;
    return nullptr;
  }
};

// Reads a history CSV back into its columns.
inline TrainHistory read_history_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("missing history '{}'", path.string()));
  TrainHistory h;
  std::string line;
  if (!std::getline(in, line)) throw DataError(fmt::format("empty history '{}'", path.string()));
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
      if (c == ',') {
        out.push_back(cur);
        cur.clear();
      } else {
        cur.push_back(c);
      }
    }
    out.push_back(cur);
    return out;
  };
  const auto header = split(line);
  if (header.size() < 2 || header[0] != "epoch" || header[1] != "loss")
    throw DataError(fmt::format("'{}' is not a history file", path.string()));
  h.metric_names.assign(header.begin() + 2, header.end());
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != header.size()) throw ParseError(fmt::format("history '{}': ragged row", path.string()), lineno);
    EpochRecord r;
    r.epoch = std::stoi(cells[0]);
    r.loss = std::stod(cells[1]);
    for (std::size_t k = 2; k < cells.size(); ++k)
      r.metrics.push_back(cells[k].empty() ? std::nullopt : std::optional(std::stod(cells[k])));
    h.epochs.push_back(std::move(r));
  }
  return h;
}

}  // namespace lgcn
