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
#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cam2 {

enum class Encoding { kDense, kCategorical };
// Statistical engagement features feed the conformity module;
// attribute/content features feed the relevance module.
enum class Bucket { kStatistical, kAttribute };
enum class Entity { kUser, kItem };

std::string_view to_string(Encoding e);
std::string_view to_string(Bucket b);
std::string_view to_string(Entity e);
Encoding parse_encoding(std::string_view s);
Bucket parse_bucket(std::string_view s);
Entity parse_entity(std::string_view s);

struct FeatureSpec {
  std::string name;
  Encoding encoding = Encoding::kDense;
  Bucket bucket = Bucket::kStatistical;
  Entity entity = Entity::kUser;
  std::size_t width = 1;       // dense only
  std::size_t vocab_size = 0;  // categorical only

  friend bool operator==(const FeatureSpec&, const FeatureSpec&) = default;
};

// Where one declared feature lives inside its bucket's block.
struct FeatureSlot {
  std::size_t feature = 0;  // index into Schema::features()
  Bucket bucket = Bucket::kStatistical;
  Encoding encoding = Encoding::kDense;
  std::size_t offset = 0;  // dense column, or categorical position
  std::size_t width = 1;
};

// Columns of one (bucket, entity) group, or of the union of groups.
struct FeatureGroup {
  struct Dense {
    Bucket bucket;
    std::size_t column;
  };
  struct Categorical {
    Bucket bucket;
    std::size_t position;
    std::size_t vocab_size;
    std::string name;
  };
  std::vector<Dense> dense;
  std::vector<Categorical> categorical;

  bool empty() const { return dense.empty() && categorical.empty(); }
};

class Schema {
 public:
  const std::vector<FeatureSpec>& features() const { return specs_; }
  const std::string& hash() const { return hash_; }
  std::size_t raw_width() const { return raw_width_; }

  const std::vector<FeatureSlot>& slots() const { return *slots_; }
  std::shared_ptr<const std::vector<FeatureSlot>> shared_slots() const {
    return slots_;
  }
  std::size_t raw_offset(std::size_t feature) const {
    return raw_offsets_[feature];
  }
  std::size_t dense_width(Bucket b) const;
  std::size_t categorical_count(Bucket b) const;

  std::optional<std::size_t> find(std::string_view name) const;

  FeatureGroup group(Bucket bucket, Entity entity) const;
  FeatureGroup group(Bucket bucket) const;
  FeatureGroup group(Entity entity) const;
  FeatureGroup all() const;

  // Names of the raw columns; a dense feature of width w expands into
  // name[0] .. name[w-1].
  std::vector<std::string> raw_column_names() const;

  // One record per line: name, encoding, bucket, entity, width, vocab_size.
  std::string to_text() const;
  static Schema from_text(std::string_view text);

 private:
  friend Schema validate_schema(std::vector<FeatureSpec> specs);

  std::vector<FeatureSpec> specs_;
  std::string hash_;
  std::size_t raw_width_ = 0;
  std::vector<std::size_t> raw_offsets_;
  std::shared_ptr<const std::vector<FeatureSlot>> slots_;
  std::size_t dense_width_[2] = {0, 0};
  std::size_t categorical_count_[2] = {0, 0};
};

// Rejects duplicate names, categoricals with vocab_size < 2 and dense features
// of width 0. The hash is SHA-256 over the canonical text form.
Schema validate_schema(std::vector<FeatureSpec> specs);

// Schema of the synthetic ecosystem generator.
Schema default_schema(std::size_t topics = 8, std::size_t age_buckets = 6,
                      std::size_t content_types = 4);

struct FeatureBlock {
  std::vector<double> dense;
  std::vector<int> categorical;

  friend bool operator==(const FeatureBlock&, const FeatureBlock&) = default;
};

struct PartitionedFeatures {
  FeatureBlock statistical;
  FeatureBlock attribute;
  // Per declared feature, its location in the blocks (shared with the
  // schema) so merge() can restore the raw ordering.
  std::shared_ptr<const std::vector<FeatureSlot>> raw_order;

  const FeatureBlock& block(Bucket b) const {
    return b == Bucket::kStatistical ? statistical : attribute;
  }
};

// Routes each raw feature to its declared bucket, order-preserving within the
// bucket. Categorical values must be integral and inside the vocabulary.
PartitionedFeatures partition(std::span<const double> raw, const Schema& schema);
std::vector<double> merge(const PartitionedFeatures& features);

}  // namespace cam2
