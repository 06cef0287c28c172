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
#include "cam2/dataset.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "cam2/config.hpp"
#include "cam2/error.hpp"
#include "cam2/hash.hpp"

namespace cam2 {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kManifestFormat = "cam2-dataset/1";

void append_double(std::string& out, double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

double parse_double(std::string_view s, const std::string& where) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw DataError(where + ": bad number '" + std::string(s) + "'");
  }
  return v;
}

std::uint64_t parse_uint(std::string_view s, const std::string& where) {
  std::uint64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw DataError(where + ": bad integer '" + std::string(s) + "'");
  }
  return v;
}

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError("missing dataset file: " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + p.string());
  out << content;
  if (!out) throw DataError("write failed: " + p.string());
}

std::string manifest_digest(json manifest) {
  manifest.erase("manifest_sha256");
  return sha256_hex(manifest.dump());
}

std::string render_day(const Dataset& data, const DayData& day) {
  const std::size_t tasks = data.config.num_tasks();
  std::string out;
  out += "# schema_hash\t" + data.schema.hash() + "\n";
  out += "# config_hash\t" + data.config_hash + "\n";
  const auto cols = day_file_columns(data.schema, tasks);
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (i) out += '\t';
    out += cols[i];
  }
  out += '\n';
  for (const Example& e : day.examples) {
    out += std::to_string(e.day);
    out += '\t';
    out += std::to_string(e.user);
    out += '\t';
    out += std::to_string(e.item);
    for (double v : e.raw) {
      out += '\t';
      append_double(out, v);
    }
    out += '\t';
    append_double(out, e.x);
    for (std::uint8_t y : e.labels) {
      out += '\t';
      out += y ? '1' : '0';
    }
    out += '\t';
    append_double(out, e.true_conformity);
    out += '\t';
    append_double(out, e.true_relevance);
    out += '\n';
  }
  return out;
}

DayData parse_day(const Dataset& data, int day, std::string_view text,
                  const std::string& name) {
  const std::size_t tasks = data.config.num_tasks();
  const std::size_t width = data.schema.raw_width();
  const auto cols = day_file_columns(data.schema, tasks);
  DayData out;
  out.day = day;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool saw_header = false;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    const std::string where = name + ":" + std::to_string(line_no);
    if (line.empty()) continue;
    if (line.front() == '#') {
      const auto f = split_tabs(line);
      if (f.size() == 2 && f[0] == "# schema_hash" && f[1] != data.schema.hash()) {
        throw MismatchError(name + " was written under another schema");
      }
      if (f.size() == 2 && f[0] == "# config_hash" && f[1] != data.config_hash) {
        throw MismatchError(name + " was written under another config");
      }
      continue;
    }
    const auto f = split_tabs(line);
    if (f.size() != cols.size()) {
      throw DataError(where + ": expected " + std::to_string(cols.size()) +
                      " fields, got " + std::to_string(f.size()));
    }
    if (!saw_header) {
      for (std::size_t i = 0; i < cols.size(); ++i) {
        if (f[i] != cols[i]) throw DataError(where + ": unexpected column header");
      }
      saw_header = true;
      continue;
    }
    Example e;
    e.day = static_cast<int>(parse_uint(f[0], where));
    if (e.day != day) throw DataError(where + ": event day differs from file day");
    e.user = static_cast<std::uint32_t>(parse_uint(f[1], where));
    e.item = static_cast<std::uint32_t>(parse_uint(f[2], where));
    data.world.user(e.user);
    data.world.item(e.item);
    e.raw.resize(width);
    for (std::size_t i = 0; i < width; ++i) e.raw[i] = parse_double(f[3 + i], where);
    std::size_t c = 3 + width;
    e.x = parse_double(f[c++], where);
    e.labels.resize(tasks);
    for (std::size_t t = 0; t < tasks; ++t) {
      const auto y = parse_uint(f[c++], where);
      if (y > 1) throw DataError(where + ": labels must be 0 or 1");
      e.labels[t] = static_cast<std::uint8_t>(y);
    }
    e.true_conformity = parse_double(f[c++], where);
    e.true_relevance = parse_double(f[c++], where);
    out.examples.push_back(std::move(e));
  }
  if (!saw_header) throw DataError(name + ": missing column header");
  return out;
}

}  // namespace

const DayData& Dataset::day(int d) const {
  if (d < 1 || static_cast<std::size_t>(d) > days.size()) {
    throw DataError("day " + std::to_string(d) + " is not in the dataset (1.." +
                    std::to_string(days.size()) + ")");
  }
  return days[static_cast<std::size_t>(d - 1)];
}

std::size_t Dataset::num_events() const {
  std::size_t n = 0;
  for (const DayData& d : days) n += d.examples.size();
  return n;
}

void finalize_day(DayData& day, const Schema& schema) {
  std::vector<std::vector<double>> raw;
  raw.reserve(day.examples.size());
  for (const Example& e : day.examples) raw.push_back(e.raw);
  day.norm = compute_norm_stats(raw, schema);
  for (std::size_t i = 0; i < day.examples.size(); ++i) {
    day.norm.apply(raw[i]);
    day.examples[i].features = partition(raw[i], schema);
  }
}

Dataset build_dataset(const DatagenConfig& config) {
  config.validate();
  Dataset data;
  data.config = config;
  data.config_hash = config_hash(config);
  data.schema = default_schema(config.topics, config.age_buckets, config.content_types);
  data.world = generate_world(config);
  const std::vector<DayLog> logs = simulate_days(data.world, config.days, config.seed);
  data.days.reserve(logs.size());
  for (const DayLog& log : logs) {
    DayData day;
    day.day = log.day;
    day.examples.reserve(log.events.size());
    for (const InteractionEvent& ev : log.events) {
      Example e;
      e.day = ev.day;
      e.user = ev.user;
      e.item = ev.item;
      e.raw = derive_features(ev, log.history, data.world);
      e.x = derive_x(log.history.users[ev.user]);
      e.labels = ev.labels;
      e.true_conformity = ev.true_conformity;
      e.true_relevance = ev.true_relevance;
      day.examples.push_back(std::move(e));
    }
    finalize_day(day, data.schema);
    data.days.push_back(std::move(day));
  }
  return data;
}

Histories fold_history(const Dataset& data, int through_day) {
  Histories h(data.world.users.size());
  h.items.resize(data.world.items.size());
  for (const DayData& day : data.days) {
    if (day.day > through_day) break;
    std::vector<InteractionEvent> events;
    events.reserve(day.examples.size());
    for (const Example& e : day.examples) {
      InteractionEvent ev;
      ev.day = e.day;
      ev.user = e.user;
      ev.item = e.item;
      ev.labels = e.labels;
      events.push_back(std::move(ev));
    }
    h.apply(data.world, events, day.day);
  }
  return h;
}

std::string day_file_name(int day) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "day_%02d.tsv", day);
  return buf;
}

std::vector<std::string> day_file_columns(const Schema& schema, std::size_t num_tasks) {
  std::vector<std::string> cols = {"day", "user_id", "item_id"};
  for (const std::string& c : schema.raw_column_names()) cols.push_back(c);
  cols.push_back("X");
  for (std::size_t t = 0; t < num_tasks; ++t) cols.push_back("y" + std::to_string(t + 1));
  cols.push_back("true_conformity");
  cols.push_back("true_relevance");
  return cols;
}

json world_to_json(const World& world) {
  json users = json::array();
  for (const UserProfile& u : world.users) {
    users.push_back({{"id", u.id},
                     {"conformity", u.conformity},
                     {"interests", u.interests},
                     {"activity_rate", u.activity_rate},
                     {"age_bucket", u.age_bucket}});
  }
  json items = json::array();
  for (const ItemProfile& it : world.items) {
    items.push_back({{"id", it.id},
                     {"popularity_rank", it.popularity_rank},
                     {"popularity", it.popularity},
                     {"topics", it.topics},
                     {"quality", it.quality},
                     {"birth_day", it.birth_day},
                     {"content_type", it.content_type}});
  }
  return {{"log_pop_mean", world.log_pop_mean},
          {"log_pop_sd", world.log_pop_sd},
          {"top_decile_rank", world.top_decile_rank},
          {"users", users},
          {"items", items}};
}

World world_from_json(const json& j, const DatagenConfig& config) {
  try {
    World w;
    w.config = config;
    w.log_pop_mean = j.at("log_pop_mean").get<double>();
    w.log_pop_sd = j.at("log_pop_sd").get<double>();
    w.top_decile_rank = j.at("top_decile_rank").get<std::size_t>();
    for (const json& u : j.at("users")) {
      UserProfile p;
      p.id = u.at("id").get<std::uint32_t>();
      p.conformity = u.at("conformity").get<double>();
      p.interests = u.at("interests").get<std::vector<double>>();
      p.activity_rate = u.at("activity_rate").get<double>();
      p.age_bucket = u.at("age_bucket").get<int>();
      if (p.id != w.users.size()) throw DataError("world.json: user ids must be dense");
      w.users.push_back(std::move(p));
    }
    for (const json& it : j.at("items")) {
      ItemProfile p;
      p.id = it.at("id").get<std::uint32_t>();
      p.popularity_rank = it.at("popularity_rank").get<std::size_t>();
      p.popularity = it.at("popularity").get<double>();
      p.topics = it.at("topics").get<std::vector<std::uint8_t>>();
      p.quality = it.at("quality").get<double>();
      p.birth_day = it.at("birth_day").get<int>();
      p.content_type = it.at("content_type").get<int>();
      if (p.id != w.items.size()) throw DataError("world.json: item ids must be dense");
      w.items.push_back(std::move(p));
    }
    return w;
  } catch (const json::exception& e) {
    throw DataError(std::string("world.json is malformed: ") + e.what());
  }
}

void write_dataset(const Dataset& data, const fs::path& dir, bool force) {
  if (fs::exists(dir)) {
    if (!fs::is_directory(dir)) throw ValidationError(dir.string() + " is not a directory");
    if (!fs::is_empty(dir)) {
      if (!force) {
        throw ValidationError("output directory " + dir.string() +
                              " is not empty (use --force)");
      }
      fs::remove_all(dir);
    }
  }
  fs::create_directories(dir);

  json files = json::object();
  auto emit = [&](const std::string& name, const std::string& content) {
    write_file(dir / name, content);
    files[name] = sha256_hex(content);
  };
  emit("schema.tsv", data.schema.to_text());
  emit("world.json", world_to_json(data.world).dump());
  json norms = json::array();
  for (const DayData& day : data.days) {
    emit(day_file_name(day.day), render_day(data, day));
    norms.push_back({{"day", day.day}, {"mean", day.norm.mean}, {"sd", day.norm.sd}});
  }
  json manifest = {{"format", kManifestFormat},
                   {"config_hash", data.config_hash},
                   {"schema_hash", data.schema.hash()},
                   {"config", to_json(data.config)},
                   {"days", data.days.size()},
                   {"events", data.num_events()},
                   {"files", files},
                   {"norm_stats", norms}};
  manifest["manifest_sha256"] = manifest_digest(manifest);
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

Dataset load_dataset(const fs::path& dir) {
  const fs::path mpath = dir / "manifest.json";
  if (!fs::exists(mpath)) throw DataError("no manifest.json in " + dir.string());
  json manifest;
  try {
    manifest = json::parse(read_file(mpath));
  } catch (const json::exception& e) {
    throw ChecksumError("manifest.json is unreadable: " + std::string(e.what()));
  }
  if (!manifest.is_object() || !manifest.contains("manifest_sha256") ||
      manifest.value("format", "") != kManifestFormat) {
    throw ChecksumError("manifest.json has an unknown format");
  }
  if (manifest.at("manifest_sha256").get<std::string>() != manifest_digest(manifest)) {
    throw ChecksumError("manifest.json checksum mismatch (tampered?)");
  }

  Dataset data;
  data.config = datagen_from_json(manifest.at("config"));
  data.config.validate();
  data.config_hash = manifest.at("config_hash").get<std::string>();
  if (config_hash(data.config) != data.config_hash) {
    throw MismatchError("manifest config hash does not match its config");
  }

  const json& files = manifest.at("files");
  auto checked = [&](const std::string& name) {
    if (!files.contains(name)) throw DataError("manifest does not list " + name);
    std::string content = read_file(dir / name);
    if (sha256_hex(content) != files.at(name).get<std::string>()) {
      throw ChecksumError(name + " checksum mismatch (tampered?)");
    }
    return content;
  };

  data.schema = Schema::from_text(checked("schema.tsv"));
  if (data.schema.hash() != manifest.at("schema_hash").get<std::string>()) {
    throw MismatchError("schema.tsv hash differs from the manifest");
  }
  try {
    data.world = world_from_json(json::parse(checked("world.json")), data.config);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("world.json: ") + e.what());
  }
  const auto days = manifest.at("days").get<std::size_t>();
  for (std::size_t d = 1; d <= days; ++d) {
    const std::string name = day_file_name(static_cast<int>(d));
    DayData day = parse_day(data, static_cast<int>(d), checked(name), name);
    finalize_day(day, data.schema);
    data.days.push_back(std::move(day));
  }
  return data;
}

Batch make_batch(const Dataset& data, const DayData& day,
                 std::span<const std::size_t> rows) {
  const std::size_t tasks = data.config.num_tasks();
  const std::size_t k = data.config.topics;
  Batch b;
  std::vector<const PartitionedFeatures*> feats;
  feats.reserve(rows.size());
  b.targets.labels = nn::Tensor::matrix(rows.size(), tasks);
  b.targets.topics = nn::Tensor::matrix(rows.size(), k);
  b.targets.x.resize(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const Example& e = day.examples.at(rows[r]);
    feats.push_back(&e.features);
    for (std::size_t t = 0; t < tasks; ++t) b.targets.labels.at(r, t) = e.labels[t];
    const ItemProfile& item = data.world.item(e.item);
    for (std::size_t j = 0; j < k; ++j) b.targets.topics.at(r, j) = item.topics[j];
    b.targets.x[r] = e.x;
  }
  b.features = FeatureBatch::from_rows(data.schema, feats);
  return b;
}

Batch make_batch(const Dataset& data, const DayData& day) {
  std::vector<std::size_t> rows(day.examples.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  return make_batch(data, day, rows);
}

}  // namespace cam2
