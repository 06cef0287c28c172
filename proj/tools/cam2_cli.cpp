// Copyright 2026 The cam2rank Authors
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
// cam2: data generation, training, ablation, ranking and reporting.

#include <CLI11.hpp>

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "cam2/config.hpp"
#include "cam2/dataset.hpp"
#include "cam2/error.hpp"
#include "cam2/eval.hpp"
#include "cam2/trainer.hpp"

namespace fs = std::filesystem;
using namespace cam2;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

std::string variant_list() {
  std::string s;
  for (Variant v : kAllVariants) {
    if (!s.empty()) s += ", ";
    s += std::string(to_string(v));
  }
  return s;
}

RunConfig config_or_default(const std::string& path) {
  if (path.empty()) {
    RunConfig c;
    c.validate();
    return c;
  }
  return load_run_config(path);
}

// The dataset is authoritative for the datagen section; an explicit config
// must agree with it.
void reconcile(RunConfig& config, const Dataset& data, bool explicit_config) {
  if (explicit_config && config_hash(config.datagen) != data.config_hash) {
    throw MismatchError("dataset was generated under a different datagen config (hash " +
                        data.config_hash.substr(0, 12) + ")");
  }
  config.datagen = data.config;
  config.validate();
}

void prepare_dir(const fs::path& dir, bool force) {
  if (fs::exists(dir) && !fs::is_empty(dir)) {
    if (!force) {
      throw ValidationError("output directory " + dir.string() +
                            " is not empty (use --force)");
    }
    fs::remove_all(dir);
  }
  fs::create_directories(dir);
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::trunc);
  out << s;
  if (!out) throw DataError("cannot write " + p.string());
}

void write_config_copy(const fs::path& dir, const RunConfig& c) {
  nlohmann::json j = to_json(c);
  j["datagen_hash"] = config_hash(c.datagen);
  write_text(dir / "config.json", j.dump(2) + "\n");
}

std::vector<MetricsRow> prior_rows(const fs::path& metrics_dir, Variant v,
                                   std::uint64_t seed) {
  std::vector<MetricsRow> out;
  if (!fs::is_directory(metrics_dir)) return out;
  std::vector<RunResult> runs;
  try {
    runs = read_run_artifacts(metrics_dir);
  } catch (const DataError&) {
    return out;
  }
  for (RunResult& r : runs) {
    if (r.variant == to_string(v) && r.seed == seed) out = std::move(r.rows);
  }
  return out;
}

int cmd_gen_data(const std::string& config_path, const fs::path& out, bool force) {
  const RunConfig config = config_or_default(config_path);
  const Dataset data = build_dataset(config.datagen);
  write_dataset(data, out, force);
  std::cout << "wrote " << data.num_days() << " day files (" << data.num_events()
            << " events) to " << out.string() << "\nconfig hash " << data.config_hash
            << "\nschema hash " << data.schema.hash() << "\n";
  return kExitOk;
}

void train_one(const RunConfig& config, const Dataset& data, Variant variant,
               std::uint64_t seed, const fs::path& out, int stop_after,
               const std::optional<fs::path>& resume) {
  const fs::path metrics = out / "metrics";
  std::vector<MetricsRow> before;
  if (resume) before = prior_rows(metrics, variant, seed);

  std::ofstream log(out / "train.log", std::ios::app);
  struct Both : std::streambuf {
    std::streambuf* a;
    std::streambuf* b;
    int overflow(int c) override {
      if (c == EOF) return !EOF;
      a->sputc(static_cast<char>(c));
      b->sputc(static_cast<char>(c));
      return c;
    }
    int sync() override {
      a->pubsync();
      b->pubsync();
      return 0;
    }
  } both;
  both.a = std::cout.rdbuf();
  both.b = log.rdbuf();
  std::ostream tee(&both);

  RunHooks hooks;
  hooks.log = &tee;
  hooks.checkpoint_dir = out / "checkpoints";
  hooks.stop_after_day = stop_after;
  hooks.resume_from = resume;
  RunResult r = run_single(config, data, variant, seed, hooks);
  if (!before.empty()) {
    // Rows of the interrupted part come first; replay and probe already
    // describe the final state.
    before.insert(before.end(), r.rows.begin(), r.rows.end());
    r.rows = std::move(before);
    if (r.ok) {
      r.ne = run_ne(r.rows);
      for (std::size_t t = 0; t < r.ne_task.size(); ++t) {
        double s = 0.0;
        for (const MetricsRow& row : r.rows) s += row.holdout.ne[t];
        r.ne_task[t] = s / static_cast<double>(r.rows.size());
      }
    }
  }
  write_run_artifacts(r, metrics, config.model.num_tasks);
  tee << (r.ok ? "finished " : "stopped ") << to_string(variant) << " seed " << seed;
  if (r.ok) tee << ": mean aggregated holdout NE " << r.ne;
  tee << "\n" << std::flush;
}

int cmd_train(const std::string& config_path, const fs::path& data_dir, const fs::path& out,
              const std::string& variant_name, std::uint64_t seed, int stop_after,
              const std::string& resume, bool control, bool force) {
  RunConfig config = config_or_default(config_path);
  const Variant variant = parse_variant(variant_name);
  if (stop_after < 0) throw ValidationError("--stop-after-day must be >= 1");
  const Dataset data = load_dataset(data_dir);
  reconcile(config, data, !config_path.empty());
  std::optional<fs::path> resume_path;
  if (!resume.empty()) {
    resume_path = resume;
    fs::create_directories(out);
  } else {
    prepare_dir(out, force);
  }
  write_config_copy(out, config);
  train_one(config, data, variant, seed, out, stop_after, resume_path);
  // Same-seed Baseline control for the relative tables.
  if (control && variant != Variant::kBaseline && stop_after == 0) {
    const fs::path probe = out / "metrics" / ("run_baseline_s" + std::to_string(seed) + ".json");
    if (!fs::exists(probe)) {
      train_one(config, data, Variant::kBaseline, seed, out, 0, std::nullopt);
    }
  }
  return kExitOk;
}

int cmd_ablate(const std::string& config_path, const fs::path& data_dir, const fs::path& out,
               std::vector<std::uint64_t> seeds, bool force) {
  RunConfig config = config_or_default(config_path);
  if (seeds.empty()) seeds = config.seeds;
  if (seeds.size() < 5) {
    throw ValidationError("ablate needs at least 5 seeds, got " + std::to_string(seeds.size()));
  }
  const Dataset data = load_dataset(data_dir);
  reconcile(config, data, !config_path.empty());
  prepare_dir(out, force);
  write_config_copy(out, config);
  std::ofstream log(out / "ablate.log");
  const fs::path metrics = out / "metrics";
  AblationResult result;
  for (Variant v : kAllVariants) {
    for (std::uint64_t s : seeds) {
      RunResult r;
      try {
        r = run_single(config, data, v, s, {});
      } catch (const Error& e) {
        r.variant = std::string(to_string(v));
        r.seed = s;
        r.ok = false;
        r.error = e.what();
      }
      const std::string line = std::string(to_string(v)) + " seed " + std::to_string(s) +
                               (r.ok ? ": NE " + std::to_string(r.ne) : ": FAILED " + r.error);
      std::cout << line << std::endl;
      log << line << std::endl;
      write_run_artifacts(r, metrics, config.model.num_tasks);
      result.partial = result.partial || !r.ok;
      result.runs.push_back(std::move(r));
    }
  }
  const nlohmann::json summary = build_summary(result.runs);
  const std::string report = render_report(summary);
  write_text(out / "summary.json", summary.dump(2) + "\n");
  write_text(out / "report.txt", report);
  std::cout << "\n" << report;
  return result.partial ? kExitRuntime : kExitOk;
}

std::vector<std::uint32_t> read_candidates(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw ValidationError("cannot read candidate file " + p.string());
  std::vector<std::uint32_t> items;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto start = line.find_first_not_of(" \t\r");
    if (start == std::string::npos || line[start] == '#') continue;
    const auto end = line.find_first_of(" \t\r", start);
    const std::string tok = line.substr(start, end - start);
    std::uint64_t v = 0;
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc() || res.ptr != tok.data() + tok.size() || v > UINT32_MAX) {
      throw ValidationError(p.string() + ":" + std::to_string(n) + ": bad item id '" + tok + "'");
    }
    items.push_back(static_cast<std::uint32_t>(v));
  }
  if (items.empty()) throw ValidationError("candidate file " + p.string() + " is empty");
  return items;
}

int cmd_rank(const fs::path& checkpoint, const fs::path& data_dir, std::uint32_t user,
             const fs::path& candidates, int k, const std::string& config_path) {
  if (k < 1) throw ValidationError("--k must be >= 1");
  const RunConfig config = config_or_default(config_path);
  const std::vector<std::uint32_t> items = read_candidates(candidates);
  const Dataset data = load_dataset(data_dir);
  const TrainState state = load_checkpoint(checkpoint, data.schema);
  if (state.dataset_hash != data.config_hash) {
    throw MismatchError("checkpoint was trained on another dataset");
  }
  const int day = std::min(state.last_day + 1, static_cast<int>(data.num_days()));
  const Histories history = fold_history(data, day - 1);
  const RankedList list =
      rank_topk(state.model, data, history, data.day(day).norm, day, user, items,
                static_cast<std::size_t>(k), config.eval.combine_weights);
  for (const RankedItem& r : list.items) {
    std::printf("%u\t%.10f\n", r.item, r.score);
  }
  return kExitOk;
}

int cmd_report(const fs::path& metrics_dir, const std::string& out_dir) {
  const std::vector<RunResult> runs = read_run_artifacts(metrics_dir);
  const nlohmann::json summary = build_summary(runs);
  const std::string report = render_report(summary);
  const fs::path out = out_dir.empty() ? metrics_dir : fs::path(out_dir);
  fs::create_directories(out);
  write_text(out / "summary.json", summary.dump(2) + "\n");
  write_text(out / "report.txt", report);
  std::cout << report;
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cam2: conformity-aware multi-task ranking toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::string data_dir;
  std::string out_dir;
  bool force = false;

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic day-partitioned dataset");
  gen->add_option("--config", config_path, "Run config (JSON)");
  gen->add_option("--out", out_dir, "Dataset directory")->required();
  gen->add_flag("--force", force, "Replace a non-empty output directory");

  std::string variant = "proposed";
  std::uint64_t seed = 1;
  int stop_after = 0;
  std::string resume;
  bool no_control = false;
  auto* train = app.add_subcommand("train", "Train one (variant, seed) prequentially");
  train->add_option("--config", config_path, "Run config (JSON)");
  train->add_option("--data", data_dir, "Dataset directory")->required();
  train->add_option("--out", out_dir, "Run directory")->required();
  train->add_option("--variant", variant, "One of: " + variant_list())
      ->check(CLI::Validator(
          [](std::string& v) -> std::string {
            try {
              parse_variant(v);
              return {};
            } catch (const ValidationError& e) {
              return e.what();
            }
          },
          "VARIANT"));
  train->add_option("--seed", seed, "Model/shuffle seed");
  train->add_option("--stop-after-day", stop_after, "Stop after training this day");
  train->add_option("--resume", resume, "Checkpoint to continue from");
  train->add_flag("--no-control", no_control, "Skip the same-seed Baseline control run");
  train->add_flag("--force", force, "Replace a non-empty run directory");

  std::vector<std::uint64_t> seeds;
  auto* ablate = app.add_subcommand("ablate", "Run all five variants over the seed list");
  ablate->add_option("--config", config_path, "Run config (JSON)");
  ablate->add_option("--data", data_dir, "Dataset directory")->required();
  ablate->add_option("--out", out_dir, "Ablation directory")->required();
  ablate->add_option("--seeds", seeds, "Seeds (default: config seeds)")->delimiter(',');
  ablate->add_flag("--force", force, "Replace a non-empty output directory");

  std::string checkpoint;
  std::string candidates;
  std::uint32_t user = 0;
  int k = 10;
  auto* rank = app.add_subcommand("rank", "Rank candidate items for one user");
  rank->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  rank->add_option("--data", data_dir, "Dataset the checkpoint was trained on")->required();
  rank->add_option("--user", user, "User id")->required();
  rank->add_option("--candidates", candidates, "File with one item id per line")->required();
  rank->add_option("--k", k, "Number of items to return");
  rank->add_option("--config", config_path, "Run config (combine weights)");

  std::string metrics_dir;
  auto* report = app.add_subcommand("report", "Render tables from a metrics directory");
  report->add_option("--metrics", metrics_dir, "Metrics directory")->required();
  report->add_option("--out", out_dir, "Where to write report.txt and summary.json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e);
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*gen) return cmd_gen_data(config_path, out_dir, force);
    if (*train) {
      return cmd_train(config_path, data_dir, out_dir, variant, seed, stop_after, resume,
                       !no_control, force);
    }
    if (*ablate) return cmd_ablate(config_path, data_dir, out_dir, seeds, force);
    if (*rank) return cmd_rank(checkpoint, data_dir, user, candidates, k, config_path);
    if (*report) return cmd_report(metrics_dir, out_dir);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
