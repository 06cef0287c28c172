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
#include <algorithm>
#include <numeric>
#include <random>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "cam2/error.hpp"
#include "cam2/schema.hpp"

namespace cam2 {
namespace {

std::vector<double> sample_raw(const Schema& s, std::mt19937_64& rng) {
  std::vector<double> raw;
  std::normal_distribution<double> n(0.0, 1.0);
  for (const FeatureSpec& f : s.features()) {
    if (f.encoding == Encoding::kCategorical) {
      raw.push_back(static_cast<double>(rng() % f.vocab_size));
    } else {
      for (std::size_t c = 0; c < f.width; ++c) raw.push_back(n(rng));
    }
  }
  return raw;
}

TEST(Schema, ValidationErrors) {
  EXPECT_THROW(validate_schema({{"a", Encoding::kDense}, {"a", Encoding::kDense}}),
               ValidationError);
  EXPECT_THROW(validate_schema({{"c", Encoding::kCategorical, Bucket::kAttribute,
                                 Entity::kItem, 1, 1}}),
               ValidationError);
  EXPECT_THROW(validate_schema({{"", Encoding::kDense}}), ValidationError);
  EXPECT_THROW(validate_schema({{"w", Encoding::kDense, Bucket::kStatistical,
                                 Entity::kUser, 0, 0}}),
               ValidationError);
}

TEST(Schema, EmptyIsValidWithStableHash) {
  const Schema a = validate_schema({});
  const Schema b = validate_schema({});
  EXPECT_EQ(a.features().size(), 0u);
  EXPECT_EQ(a.raw_width(), 0u);
  EXPECT_EQ(a.hash(), b.hash());
  EXPECT_EQ(a.hash().size(), 64u);
}

TEST(Schema, HashChangesIffAFieldChanges) {
  const std::vector<FeatureSpec> base = {
      {"a", Encoding::kDense, Bucket::kStatistical, Entity::kUser, 1, 0},
      {"b", Encoding::kCategorical, Bucket::kAttribute, Entity::kItem, 1, 4}};
  const std::string h = validate_schema(base).hash();
  EXPECT_EQ(validate_schema(base).hash(), h);
  std::vector<std::vector<FeatureSpec>> variants(6, base);
  variants[0][0].name = "a2";
  variants[1][0].encoding = Encoding::kCategorical;
  variants[1][0].vocab_size = 3;
  variants[2][0].bucket = Bucket::kAttribute;
  variants[3][0].entity = Entity::kItem;
  variants[4][0].width = 2;
  variants[5][1].vocab_size = 5;
  std::set<std::string> seen = {h};
  for (const auto& v : variants) EXPECT_TRUE(seen.insert(validate_schema(v).hash()).second);
}

TEST(DefaultSchema, Buckets) {
  const Schema s = default_schema();
  EXPECT_EQ(s.hash(), default_schema().hash());
  std::size_t stat = 0;
  for (const FeatureSpec& f : s.features()) stat += f.bucket == Bucket::kStatistical;
  EXPECT_EQ(stat, 5u);
  EXPECT_EQ(s.features()[*s.find("item_topic_flags")].bucket, Bucket::kAttribute);
  EXPECT_EQ(s.features()[*s.find("item_impression_count")].bucket, Bucket::kStatistical);
  EXPECT_EQ(s.raw_width(), 5u + 1 + 8 + 8 + 1 + 1);
  EXPECT_EQ(s.dense_width(Bucket::kStatistical), 5u);
  EXPECT_EQ(s.dense_width(Bucket::kAttribute), 17u);
  EXPECT_EQ(s.categorical_count(Bucket::kAttribute), 2u);
  EXPECT_FALSE(s.find("user_id").has_value());
}

TEST(Partition, RoutesByBucketInOrder) {
  const Schema s = validate_schema({
      {"views", Encoding::kDense, Bucket::kStatistical, Entity::kItem, 1, 0},
      {"topic", Encoding::kCategorical, Bucket::kAttribute, Entity::kItem, 1, 3},
      {"emb", Encoding::kDense, Bucket::kAttribute, Entity::kUser, 2, 0},
      {"ctr", Encoding::kDense, Bucket::kStatistical, Entity::kItem, 1, 0},
  });
  const std::vector<double> raw = {10, 2, 0.5, -0.5, 0.25};
  const PartitionedFeatures p = partition(raw, s);
  EXPECT_EQ(p.statistical.dense, (std::vector<double>{10, 0.25}));
  EXPECT_TRUE(p.statistical.categorical.empty());
  EXPECT_EQ(p.attribute.dense, (std::vector<double>{0.5, -0.5}));
  EXPECT_EQ(p.attribute.categorical, (std::vector<int>{2}));
  EXPECT_EQ(merge(p), raw);
}

TEST(Partition, Errors) {
  const Schema s = validate_schema({
      {"topic", Encoding::kCategorical, Bucket::kAttribute, Entity::kItem, 1, 3},
  });
  EXPECT_THROW(partition(std::vector<double>{1, 2}, s), ValidationError);
  EXPECT_THROW(partition(std::vector<double>{3}, s), IndexError);
  EXPECT_THROW(partition(std::vector<double>{-1}, s), IndexError);
  EXPECT_THROW(partition(std::vector<double>{1.5}, s), IndexError);
}

TEST(Partition, BijectionOverRandomSchemas) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<FeatureSpec> specs;
    const std::size_t n = rng() % 9;
    for (std::size_t f = 0; f < n; ++f) {
      FeatureSpec spec;
      spec.name = "f" + std::to_string(f);
      spec.bucket = rng() % 2 ? Bucket::kStatistical : Bucket::kAttribute;
      spec.entity = rng() % 2 ? Entity::kUser : Entity::kItem;
      if (rng() % 2) {
        spec.encoding = Encoding::kCategorical;
        spec.vocab_size = 2 + rng() % 5;
      } else {
        spec.width = 1 + rng() % 3;
      }
      specs.push_back(spec);
    }
    const Schema s = validate_schema(specs);
    const std::vector<double> raw = sample_raw(s, rng);
    const PartitionedFeatures p = partition(raw, s);
    EXPECT_EQ(merge(p), raw);
    EXPECT_EQ(partition(raw, s).statistical, p.statistical);
    std::size_t total = p.statistical.dense.size() + p.statistical.categorical.size() +
                        p.attribute.dense.size() + p.attribute.categorical.size();
    EXPECT_EQ(total, raw.size());
    std::size_t stat_width = 0;
    for (const FeatureSpec& f : specs) {
      if (f.bucket == Bucket::kStatistical) {
        stat_width += f.encoding == Encoding::kDense ? f.width : 1;
      }
    }
    EXPECT_EQ(p.statistical.dense.size() + p.statistical.categorical.size(), stat_width);
  }
}

TEST(Schema, TextRoundTrip) {
  const Schema s = default_schema(5, 3, 2);
  const Schema back = Schema::from_text(s.to_text());
  EXPECT_EQ(back.features(), s.features());
  EXPECT_EQ(back.hash(), s.hash());
  EXPECT_THROW(Schema::from_text("only\ttwo\n"), ValidationError);
}

TEST(Schema, Groups) {
  const Schema s = default_schema();
  const FeatureGroup user_stat = s.group(Bucket::kStatistical, Entity::kUser);
  EXPECT_EQ(user_stat.dense.size(), 2u);
  EXPECT_TRUE(user_stat.categorical.empty());
  const FeatureGroup item_attr = s.group(Bucket::kAttribute, Entity::kItem);
  EXPECT_EQ(item_attr.dense.size(), 9u);
  ASSERT_EQ(item_attr.categorical.size(), 1u);
  EXPECT_EQ(item_attr.categorical[0].name, "content_type");
  EXPECT_EQ(s.all().dense.size(), 22u);
}

}  // namespace
}  // namespace cam2
