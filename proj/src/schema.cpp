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
#include "cam2/schema.hpp"

#include <cmath>
#include <set>
#include <sstream>

#include "cam2/error.hpp"
#include "cam2/hash.hpp"

namespace cam2 {

std::string_view to_string(Encoding e) {
  return e == Encoding::kDense ? "dense" : "categorical";
}
std::string_view to_string(Bucket b) {
  return b == Bucket::kStatistical ? "statistical" : "attribute";
}
std::string_view to_string(Entity e) {
  return e == Entity::kUser ? "user" : "item";
}

Encoding parse_encoding(std::string_view s) {
  if (s == "dense") return Encoding::kDense;
  if (s == "categorical") return Encoding::kCategorical;
  throw ValidationError("unknown feature encoding: " + std::string(s));
}
Bucket parse_bucket(std::string_view s) {
  if (s == "statistical") return Bucket::kStatistical;
  if (s == "attribute") return Bucket::kAttribute;
  throw ValidationError("unknown feature bucket: " + std::string(s));
}
Entity parse_entity(std::string_view s) {
  if (s == "user") return Entity::kUser;
  if (s == "item") return Entity::kItem;
  throw ValidationError("unknown feature entity: " + std::string(s));
}

namespace {

std::size_t idx(Bucket b) { return b == Bucket::kStatistical ? 0 : 1; }

std::string canonical_line(const FeatureSpec& f) {
  std::string s = f.name;
  s += '\t';
  s += to_string(f.encoding);
  s += '\t';
  s += to_string(f.bucket);
  s += '\t';
  s += to_string(f.entity);
  s += '\t' + std::to_string(f.width) + '\t' + std::to_string(f.vocab_size) +
       '\n';
  return s;
}

}  // namespace

Schema validate_schema(std::vector<FeatureSpec> specs) {
  std::set<std::string> seen;
  for (FeatureSpec& f : specs) {
    if (f.name.empty()) throw ValidationError("feature with empty name");
    if (!seen.insert(f.name).second) {
      throw ValidationError("duplicate feature name: " + f.name);
    }
    if (f.encoding == Encoding::kCategorical) {
      if (f.vocab_size < 2) {
        throw ValidationError("categorical feature " + f.name +
                              " needs vocab_size >= 2, got " +
                              std::to_string(f.vocab_size));
      }
      f.width = 1;
    } else {
      if (f.width < 1) {
        throw ValidationError("dense feature " + f.name + " has width 0");
      }
      f.vocab_size = 0;
    }
  }

  Schema s;
  s.specs_ = std::move(specs);
  std::string canonical;
  auto slots = std::make_shared<std::vector<FeatureSlot>>();
  for (std::size_t i = 0; i < s.specs_.size(); ++i) {
    const FeatureSpec& f = s.specs_[i];
    canonical += canonical_line(f);
    s.raw_offsets_.push_back(s.raw_width_);
    s.raw_width_ += f.width;
    FeatureSlot slot{i, f.bucket, f.encoding, 0, f.width};
    if (f.encoding == Encoding::kDense) {
      slot.offset = s.dense_width_[idx(f.bucket)];
      s.dense_width_[idx(f.bucket)] += f.width;
    } else {
      slot.offset = s.categorical_count_[idx(f.bucket)]++;
    }
    slots->push_back(slot);
  }
  s.hash_ = sha256_hex(canonical);
  s.slots_ = std::move(slots);
  return s;
}

std::size_t Schema::dense_width(Bucket b) const { return dense_width_[idx(b)]; }
std::size_t Schema::categorical_count(Bucket b) const {
  return categorical_count_[idx(b)];
}

std::optional<std::size_t> Schema::find(std::string_view name) const {
  for (std::size_t i = 0; i < specs_.size(); ++i) {
    if (specs_[i].name == name) return i;
  }
  return std::nullopt;
}

namespace {

template <typename Pred>
FeatureGroup make_group(const Schema& s, Pred keep) {
  FeatureGroup g;
  for (const FeatureSlot& slot : s.slots()) {
    const FeatureSpec& f = s.features()[slot.feature];
    if (!keep(f)) continue;
    if (f.encoding == Encoding::kDense) {
      for (std::size_t c = 0; c < slot.width; ++c) {
        g.dense.push_back({slot.bucket, slot.offset + c});
      }
    } else {
      g.categorical.push_back({slot.bucket, slot.offset, f.vocab_size, f.name});
    }
  }
  return g;
}

}  // namespace

FeatureGroup Schema::group(Bucket bucket, Entity entity) const {
  return make_group(*this, [&](const FeatureSpec& f) {
    return f.bucket == bucket && f.entity == entity;
  });
}
FeatureGroup Schema::group(Bucket bucket) const {
  return make_group(*this,
                    [&](const FeatureSpec& f) { return f.bucket == bucket; });
}
FeatureGroup Schema::group(Entity entity) const {
  return make_group(*this,
                    [&](const FeatureSpec& f) { return f.entity == entity; });
}
FeatureGroup Schema::all() const {
  return make_group(*this, [](const FeatureSpec&) { return true; });
}

std::vector<std::string> Schema::raw_column_names() const {
  std::vector<std::string> names;
  for (const FeatureSpec& f : specs_) {
    if (f.encoding == Encoding::kDense && f.width > 1) {
      for (std::size_t c = 0; c < f.width; ++c) {
        names.push_back(f.name + "[" + std::to_string(c) + "]");
      }
    } else {
      names.push_back(f.name);
    }
  }
  return names;
}

std::string Schema::to_text() const {
  std::string out = "name\tencoding\tbucket\tentity\twidth\tvocab_size\n";
  for (const FeatureSpec& f : specs_) out += canonical_line(f);
  return out;
}

Schema Schema::from_text(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::vector<FeatureSpec> specs;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (header) {
      header = false;
      if (line.rfind("name\t", 0) == 0) continue;
    }
    std::istringstream fields(line);
    std::string name, enc, bucket, entity, width, vocab;
    if (!std::getline(fields, name, '\t') || !std::getline(fields, enc, '\t') ||
        !std::getline(fields, bucket, '\t') ||
        !std::getline(fields, entity, '\t') ||
        !std::getline(fields, width, '\t') || !std::getline(fields, vocab)) {
      throw ValidationError("malformed schema record: " + line);
    }
    FeatureSpec f;
    f.name = name;
    f.encoding = parse_encoding(enc);
    f.bucket = parse_bucket(bucket);
    f.entity = parse_entity(entity);
    try {
      f.width = std::stoul(width);
      f.vocab_size = std::stoul(vocab);
    } catch (const std::exception&) {
      throw ValidationError("malformed schema record: " + line);
    }
    specs.push_back(std::move(f));
  }
  return validate_schema(std::move(specs));
}

Schema default_schema(std::size_t topics, std::size_t age_buckets,
                      std::size_t content_types) {
  using E = Encoding;
  using B = Bucket;
  using N = Entity;
  return validate_schema({
      {"item_impression_count", E::kDense, B::kStatistical, N::kItem, 1, 0},
      {"item_view_count", E::kDense, B::kStatistical, N::kItem, 1, 0},
      {"item_ctr_est", E::kDense, B::kStatistical, N::kItem, 1, 0},
      {"user_engagement_count", E::kDense, B::kStatistical, N::kUser, 1, 0},
      {"user_social_rate", E::kDense, B::kStatistical, N::kUser, 1, 0},
      {"user_age_bucket", E::kCategorical, B::kAttribute, N::kUser, 1,
       age_buckets},
      {"user_interest_weights", E::kDense, B::kAttribute, N::kUser, topics, 0},
      {"item_topic_flags", E::kDense, B::kAttribute, N::kItem, topics, 0},
      {"item_quality", E::kDense, B::kAttribute, N::kItem, 1, 0},
      {"content_type", E::kCategorical, B::kAttribute, N::kItem, 1,
       content_types},
  });
}

PartitionedFeatures partition(std::span<const double> raw, const Schema& schema) {
  if (raw.size() != schema.raw_width()) {
    throw ValidationError("feature vector has " + std::to_string(raw.size()) +
                          " values, schema expects " +
                          std::to_string(schema.raw_width()));
  }
  PartitionedFeatures out;
  for (Bucket b : {Bucket::kStatistical, Bucket::kAttribute}) {
    FeatureBlock& blk =
        b == Bucket::kStatistical ? out.statistical : out.attribute;
    blk.dense.resize(schema.dense_width(b));
    blk.categorical.resize(schema.categorical_count(b));
  }
  for (const FeatureSlot& slot : schema.slots()) {
    const FeatureSpec& f = schema.features()[slot.feature];
    FeatureBlock& blk =
        slot.bucket == Bucket::kStatistical ? out.statistical : out.attribute;
    const std::size_t off = schema.raw_offset(slot.feature);
    if (f.encoding == Encoding::kDense) {
      std::copy_n(raw.begin() + off, f.width, blk.dense.begin() + slot.offset);
    } else {
      const double v = raw[off];
      if (!(v >= 0.0) || v >= static_cast<double>(f.vocab_size) ||
          v != std::floor(v)) {
        throw IndexError("categorical feature " + f.name + " has value " +
                         std::to_string(v) + " outside vocabulary of size " +
                         std::to_string(f.vocab_size));
      }
      blk.categorical[slot.offset] = static_cast<int>(v);
    }
  }
  out.raw_order = schema.shared_slots();
  return out;
}

std::vector<double> merge(const PartitionedFeatures& features) {
  std::vector<double> raw;
  for (const FeatureSlot& slot : *features.raw_order) {
    const FeatureBlock& blk = features.block(slot.bucket);
    if (slot.encoding == Encoding::kDense) {
      raw.insert(raw.end(), blk.dense.begin() + slot.offset,
                 blk.dense.begin() + slot.offset + slot.width);
    } else {
      raw.push_back(static_cast<double>(blk.categorical[slot.offset]));
    }
  }
  return raw;
}

}  // namespace cam2
