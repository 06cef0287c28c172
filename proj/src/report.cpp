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
#include <cmath>
#include <cstdio>
#include <map>
#include <set>

#include "cam2/error.hpp"
#include "cam2/eval.hpp"

namespace cam2 {

using nlohmann::json;

namespace {

constexpr const char* kProxyNote =
    "engagement = total positive labels under counterfactual replay (proxy)";

struct SeedMap {
  std::map<std::uint64_t, const RunResult*> ok;
  std::vector<std::uint64_t> failed;
};

std::map<Variant, SeedMap> index_runs(const std::vector<RunResult>& runs) {
  std::map<Variant, SeedMap> by;
  for (const RunResult& r : runs) {
    SeedMap& m = by[parse_variant(r.variant)];
    if (r.ok) {
      m.ok[r.seed] = &r;
    } else {
      m.failed.push_back(r.seed);
    }
  }
  return by;
}

// Median over seeds shared with the Baseline of a per-seed paired delta.
template <typename F>
json paired_median(const SeedMap& runs, const SeedMap* base, F&& value) {
  if (!base) return nullptr;
  std::vector<double> deltas;
  for (const auto& [seed, run] : runs.ok) {
    auto it = base->ok.find(seed);
    if (it == base->ok.end()) continue;
    deltas.push_back(relative_delta_pct(value(*run), value(*it->second)));
  }
  if (deltas.empty()) return nullptr;
  return median(deltas);
}

template <typename F>
json plain_median(const SeedMap& runs, F&& value) {
  std::vector<double> v;
  for (const auto& [_, run] : runs.ok) v.push_back(value(*run));
  if (v.empty()) return nullptr;
  return median(v);
}

std::string cell(const json& v, const char* spec) {
  if (v.is_null()) return "FAILED";
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v.get<double>());
  return buf;
}

std::string pad(std::string s, std::size_t w) {
  if (s.size() < w) s.append(w - s.size(), ' ');
  return s;
}

std::string table(const std::vector<std::string>& header,
                  const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> w(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) w[c] = header[c].size();
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < r.size(); ++c) w[c] = std::max(w[c], r[c].size());
  }
  std::string out;
  auto line = [&](const std::vector<std::string>& r) {
    for (std::size_t c = 0; c < r.size(); ++c) {
      out += c == 0 ? "" : "  ";
      out += pad(r[c], w[c]);
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    out += '\n';
  };
  line(header);
  std::size_t total = 0;
  for (std::size_t c = 0; c < w.size(); ++c) total += w[c] + (c ? 2 : 0);
  out += std::string(total, '-') + '\n';
  for (const auto& r : rows) line(r);
  return out;
}

}  // namespace

json build_summary(const std::vector<RunResult>& runs) {
  if (runs.empty()) throw DataError("no metrics found");
  const auto by = index_runs(runs);
  const SeedMap* base = nullptr;
  if (auto it = by.find(Variant::kBaseline); it != by.end() && !it->second.ok.empty()) {
    base = &it->second;
  }
  std::size_t tasks = 0;
  bool partial = false;
  for (const RunResult& r : runs) {
    if (r.ok) tasks = std::max(tasks, r.ne_task.size());
    partial = partial || !r.ok;
  }

  json t1 = json::array();
  json tail = json::array();
  json t2 = json::array();
  json cohort = json::array();
  json probe = json::array();
  for (const auto& [variant, m] : by) {
    json row;
    row["variant"] = std::string(to_string(variant));
    std::vector<std::uint64_t> seeds;
    for (const auto& [s, _] : m.ok) seeds.push_back(s);
    row["seeds"] = seeds;
    row["failed_seeds"] = m.failed;
    json ne_task = json::array();
    for (std::size_t t = 0; t < tasks; ++t) {
      ne_task.push_back(plain_median(m, [t](const RunResult& r) { return r.ne_task[t]; }));
    }
    row["ne_task_median"] = ne_task;
    row["ne_aggregated_median"] = plain_median(m, [](const RunResult& r) { return r.ne; });
    json per_seed = json::object();
    json deltas = json::object();
    std::vector<double> dv;
    for (const auto& [s, r] : m.ok) {
      per_seed[std::to_string(s)] = r->ne;
      if (base) {
        auto it = base->ok.find(s);
        if (it != base->ok.end()) {
          const double d = relative_delta_pct(r->ne, it->second->ne);
          deltas[std::to_string(s)] = d;
          dv.push_back(d);
        }
      }
    }
    row["ne_aggregated_per_seed"] = per_seed;
    if (base) {
      row["delta_pct_per_seed"] = deltas;
      row["delta_pct_median"] = dv.empty() ? json(nullptr) : json(median(dv));
      std::size_t lower = 0;
      for (double d : dv) lower += d < 0.0 ? 1 : 0;
      row["seeds_lower"] = lower;
      row["seeds_compared"] = dv.size();
      row["sign_test_p"] = sign_test_p(dv);
    }
    row["reference_delta_pct"] = *reference_delta_pct(variant);
    t1.push_back(row);

    const auto has_replay = [](const RunResult& r) { return r.replay.has_value(); };
    SeedMap replayed;
    for (const auto& [s, r] : m.ok) {
      if (has_replay(*r)) replayed.ok[s] = r;
    }
    SeedMap base_replayed;
    if (base) {
      for (const auto& [s, r] : base->ok) {
        if (has_replay(*r)) base_replayed.ok[s] = r;
      }
    }
    const SeedMap* rb = base && !base_replayed.ok.empty() ? &base_replayed : nullptr;
    if (!replayed.ok.empty()) {
      json tr;
      tr["variant"] = std::string(to_string(variant));
      tr["engagements_median"] = plain_median(
          replayed, [](const RunResult& r) { return double(r.replay->engagements); });
      tr["items_q50_median"] = plain_median(
          replayed, [](const RunResult& r) { return double(r.replay->tail.item_counts[0]); });
      tr["items_q75_median"] = plain_median(
          replayed, [](const RunResult& r) { return double(r.replay->tail.item_counts[1]); });
      tr["bottom80_share_median"] = plain_median(replayed, [](const RunResult& r) {
        return r.replay->tail.bottom80_impression_share;
      });
      if (rb) {
        tr["engagements_delta_pct"] = paired_median(replayed, rb, [](const RunResult& r) {
          return double(r.replay->engagements);
        });
        tr["items_q50_delta_pct"] = paired_median(replayed, rb, [](const RunResult& r) {
          return double(r.replay->tail.item_counts[0]);
        });
        tr["items_q75_delta_pct"] = paired_median(replayed, rb, [](const RunResult& r) {
          return double(r.replay->tail.item_counts[1]);
        });
      }
      tail.push_back(tr);

      json ar;
      ar["variant"] = std::string(to_string(variant));
      json rates = json::array();
      json adeltas = json::array();
      for (std::size_t b = 0; b < kAgeBuckets; ++b) {
        const auto rate = [b](const RunResult& r) { return r.replay->age[b].rate(); };
        rates.push_back(plain_median(replayed, rate));
        if (rb) adeltas.push_back(paired_median(replayed, rb, rate));
      }
      ar["rate_median"] = rates;
      if (rb) ar["delta_pct"] = adeltas;
      t2.push_back(ar);

      json cr;
      cr["variant"] = std::string(to_string(variant));
      const auto casual = [](const RunResult& r) { return r.replay->casual.per_user(); };
      const auto regular = [](const RunResult& r) { return r.replay->regular.per_user(); };
      cr["casual_users_median"] = plain_median(
          replayed, [](const RunResult& r) { return double(r.replay->casual.users); });
      cr["casual_per_user_median"] = plain_median(replayed, casual);
      cr["regular_per_user_median"] = plain_median(replayed, regular);
      if (rb) {
        cr["casual_delta_pct"] = paired_median(replayed, rb, casual);
        cr["regular_delta_pct"] = paired_median(replayed, rb, regular);
      }
      cohort.push_back(cr);
    }

    SeedMap probed;
    for (const auto& [s, r] : m.ok) {
      if (r->probe) probed.ok[s] = r;
    }
    if (!probed.ok.empty()) {
      json pr;
      pr["variant"] = std::string(to_string(variant));
      const char* keys[2][2] = {{"r2_conformity_popularity", "r2_conformity_alignment"},
                                {"r2_relevance_popularity", "r2_relevance_alignment"}};
      for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
          pr[keys[i][j]] =
              plain_median(probed, [i, j](const RunResult& r) { return r.probe->r2[i][j]; });
        }
      }
      bool ridge = false;
      for (const auto& [_, r] : probed.ok) ridge = ridge || r->probe->ridge_fallback;
      pr["ridge_fallback"] = ridge;
      probe.push_back(pr);
    }
  }
  return {{"engagement_proxy", kProxyNote},
          {"baseline_present", base != nullptr},
          {"partial", partial},
          {"tasks", tasks},
          {"age_buckets", kAgeBucketNames},
          {"table1", t1},
          {"tail_coverage", tail},
          {"table2", t2},
          {"cohort", cohort},
          {"probe", probe}};
}

std::string render_report(const json& s) {
  const bool base = s.at("baseline_present").get<bool>();
  const std::size_t tasks = s.at("tasks").get<std::size_t>();
  std::string out;

  out += "Offline results: holdout NE (median over seeds";
  out += base ? ", deltas relative to Baseline)\n\n" : ")\n\n";
  {
    std::vector<std::string> h = {"variant", "seeds"};
    for (std::size_t t = 0; t < tasks; ++t) h.push_back("NE task" + std::to_string(t + 1));
    h.push_back("NE aggregated");
    if (base) {
      h.push_back("delta %");
      h.push_back("seeds lower");
      h.push_back("sign test p");
    }
    h.push_back("reference (not a target)");
    std::vector<std::vector<std::string>> rows;
    for (const json& r : s.at("table1")) {
      std::vector<std::string> c = {r.at("variant").get<std::string>(),
                                    std::to_string(r.at("seeds").size())};
      if (!r.at("failed_seeds").empty()) {
        c[1] += " (" + std::to_string(r.at("failed_seeds").size()) + " failed)";
      }
      for (std::size_t t = 0; t < tasks; ++t) {
        c.push_back(cell(r.at("ne_task_median")[t], "%.5f"));
      }
      c.push_back(cell(r.at("ne_aggregated_median"), "%.5f"));
      if (base) {
        c.push_back(cell(r.at("delta_pct_median"), "%+.3f%%"));
        c.push_back(std::to_string(r.at("seeds_lower").get<std::size_t>()) + "/" +
                    std::to_string(r.at("seeds_compared").get<std::size_t>()));
        c.push_back(cell(r.at("sign_test_p"), "%.3f"));
      }
      c.push_back(cell(r.at("reference_delta_pct"), "%+.3f%%"));
      rows.push_back(std::move(c));
    }
    out += table(h, rows);
  }
  if (s.at("partial").get<bool>()) out += "\nWARNING: partial results, some runs failed.\n";

  if (!s.at("tail_coverage").empty()) {
    out += "\nLong-tail coverage under counterfactual replay\n";
    out += std::string("(") + kProxyNote + ")\n\n";
    std::vector<std::string> h = {"variant", "engagements", "items for 50%", "items for 75%",
                                  "bottom-80% impression share"};
    if (base) {
      h.insert(h.end(), {"engagement delta %", "50% items delta %", "75% items delta %"});
    }
    std::vector<std::vector<std::string>> rows;
    for (const json& r : s.at("tail_coverage")) {
      std::vector<std::string> c = {r.at("variant").get<std::string>(),
                                    cell(r.at("engagements_median"), "%.1f"),
                                    cell(r.at("items_q50_median"), "%.1f"),
                                    cell(r.at("items_q75_median"), "%.1f"),
                                    cell(r.at("bottom80_share_median"), "%.4f")};
      if (base && r.contains("engagements_delta_pct")) {
        c.push_back(cell(r.at("engagements_delta_pct"), "%+.2f%%"));
        c.push_back(cell(r.at("items_q50_delta_pct"), "%+.2f%%"));
        c.push_back(cell(r.at("items_q75_delta_pct"), "%+.2f%%"));
      }
      rows.push_back(std::move(c));
    }
    out += table(h, rows);
  }

  if (!s.at("table2").empty()) {
    out += "\nUser engagement metric by item age";
    out += base ? " relative to Baseline\n\n" : "\n\n";
    std::vector<std::string> h = {"variant"};
    for (const json& b : s.at("age_buckets")) h.push_back(b.get<std::string>());
    std::vector<std::vector<std::string>> rows;
    for (const json& r : s.at("table2")) {
      std::vector<std::string> c = {r.at("variant").get<std::string>() + " rate"};
      for (const json& v : r.at("rate_median")) c.push_back(cell(v, "%.4f"));
      rows.push_back(std::move(c));
      if (r.contains("delta_pct")) {
        std::vector<std::string> d = {r.at("variant").get<std::string>() + " delta"};
        for (const json& v : r.at("delta_pct")) d.push_back(cell(v, "%+.2f%%"));
        rows.push_back(std::move(d));
      }
    }
    out += table(h, rows);
  }

  if (!s.at("cohort").empty()) {
    out += "\nCasual-user cohort (active 1-2 days in the frozen window)\n\n";
    std::vector<std::string> h = {"variant", "casual users", "casual eng/user",
                                  "other eng/user"};
    if (base) h.insert(h.end(), {"casual delta %", "other delta %"});
    std::vector<std::vector<std::string>> rows;
    for (const json& r : s.at("cohort")) {
      std::vector<std::string> c = {r.at("variant").get<std::string>(),
                                    cell(r.at("casual_users_median"), "%.1f"),
                                    cell(r.at("casual_per_user_median"), "%.4f"),
                                    cell(r.at("regular_per_user_median"), "%.4f")};
      if (base && r.contains("casual_delta_pct")) {
        c.push_back(cell(r.at("casual_delta_pct"), "%+.2f%%"));
        c.push_back(cell(r.at("regular_delta_pct"), "%+.2f%%"));
      }
      rows.push_back(std::move(c));
    }
    out += table(h, rows);
  }

  if (!s.at("probe").empty()) {
    out += "\nLinear probe R^2 of the causal embeddings\n\n";
    std::vector<std::string> h = {"variant", "e_C -> popularity", "e_R -> popularity",
                                  "e_C -> alignment", "e_R -> alignment"};
    std::vector<std::vector<std::string>> rows;
    for (const json& r : s.at("probe")) {
      std::string v = r.at("variant").get<std::string>();
      if (r.at("ridge_fallback").get<bool>()) v += " (ridge)";
      rows.push_back({v, cell(r.at("r2_conformity_popularity"), "%.4f"),
                      cell(r.at("r2_relevance_popularity"), "%.4f"),
                      cell(r.at("r2_conformity_alignment"), "%.4f"),
                      cell(r.at("r2_relevance_alignment"), "%.4f")});
    }
    out += table(h, rows);
  }
  return out;
}

}  // namespace cam2
