// Copyright 2026 The viewalign Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <filesystem>
#include <stdexcept>
#include <string>

#include <gtest/gtest.h>

#include "viewalign/template_model.hpp"

using namespace viewalign;

namespace {

const std::filesystem::path kData = VIEWALIGN_DATA_DIR;

std::vector<Keypoint3d> tetrahedron() {
  return {{0, "a", {0, 0, 0}}, {1, "b", {1, 0, 0}}, {2, "c", {0, 1, 0}}, {3, "d", {0, 0, 1}}};
}

std::map<int, int> parts(int n) {
  std::map<int, int> p;
  for (int i = 0; i < n; ++i) p[i] = 0;
  return p;
}

}  // namespace

TEST(TemplateModel, ShippedTemplatesLoad) {
  const TemplateModel chair = load_template(kData / "templates/chair.json");
  EXPECT_EQ(chair.class_name(), "chair");
  EXPECT_EQ(chair.size(), 10u);
  EXPECT_EQ(chair.edges().size(), 11u);
  EXPECT_EQ(chair.part_names().size(), 3u);

  const TemplateModel table = load_template(kData / "templates/table.json");
  EXPECT_EQ(table.size(), 8u);
  std::set<int> part_ids;
  for (const auto& [id, part] : table.part_labels()) part_ids.insert(part);
  EXPECT_EQ(part_ids.size(), 2u);
}

TEST(TemplateModel, Lookups) {
  const TemplateModel chair = load_template(kData / "templates/chair.json");
  const int id = chair.id_by_name(chair.keypoints()[3].name);
  EXPECT_EQ(id, chair.keypoints()[3].id);
  EXPECT_EQ(chair.index_of(id), 3u);
  EXPECT_TRUE(chair.contains(id));
  EXPECT_FALSE(chair.contains(999));
  EXPECT_THROW(chair.index_of(999), std::out_of_range);
  EXPECT_THROW(chair.id_by_name("no_such_keypoint"), std::out_of_range);
  EXPECT_GT(chair.radius(), 0.0);
}

TEST(TemplateModel, ValidatesConstruction) {
  EXPECT_NO_THROW(TemplateModel("t", tetrahedron(), {{0, 1}}, parts(4)));
  auto dup = tetrahedron();
  dup[3].id = 2;
  EXPECT_THROW(TemplateModel("t", dup, {}, parts(4)), std::invalid_argument);
  EXPECT_THROW(TemplateModel("t", tetrahedron(), {{0, 7}}, parts(4)), std::invalid_argument);
  EXPECT_THROW(TemplateModel("t", tetrahedron(), {{1, 1}}, parts(4)), std::invalid_argument);
  EXPECT_THROW(TemplateModel("t", tetrahedron(), {}, parts(3)), std::invalid_argument);
  auto extra = parts(4);
  extra[9] = 0;
  EXPECT_THROW(TemplateModel("t", tetrahedron(), {}, extra), std::invalid_argument);
}

TEST(TemplateModel, RejectsCoplanarOrTooFewKeypoints) {
  std::vector<Keypoint3d> flat{{0, "", {0, 0, 0}}, {1, "", {1, 0, 0}}, {2, "", {0, 1, 0}}, {3, "", {1, 1, 0}}};
  EXPECT_THROW(TemplateModel("t", flat, {}, parts(4)), std::invalid_argument);
  auto three = tetrahedron();
  three.pop_back();
  EXPECT_THROW(TemplateModel("t", three, {}, parts(3)), std::invalid_argument);
}

TEST(TemplateModel, SerializeRoundTrip) {
  const TemplateModel chair = load_template(kData / "templates/chair.json");
  const std::string text = serialize_template(chair);
  const TemplateModel back = parse_template(text);
  EXPECT_EQ(back.class_name(), chair.class_name());
  EXPECT_EQ(back.edges(), chair.edges());
  EXPECT_EQ(back.part_labels(), chair.part_labels());
  EXPECT_EQ(back.part_names(), chair.part_names());
  ASSERT_EQ(back.size(), chair.size());
  for (std::size_t i = 0; i < chair.size(); ++i) {
    EXPECT_EQ(back.keypoints()[i].id, chair.keypoints()[i].id);
    EXPECT_EQ(back.keypoints()[i].name, chair.keypoints()[i].name);
    EXPECT_EQ(back.keypoints()[i].position, chair.keypoints()[i].position);
  }
  EXPECT_EQ(serialize_template(back), text);
}

TEST(TemplateModel, ParseErrorsAreInvalidArgument) {
  EXPECT_THROW(parse_template("{not json"), std::invalid_argument);
  EXPECT_THROW(parse_template("[]"), std::invalid_argument);
  EXPECT_THROW(parse_template(R"({"format": "other", "version": 1})"), std::invalid_argument);
  EXPECT_THROW(parse_template(R"({"format": "viewalign-template", "version": 2})"), std::invalid_argument);
  EXPECT_THROW(parse_template(R"({"format": "viewalign-template", "version": 1, "class_name": "x"})"),
               std::invalid_argument);
  const std::string typo = R"({"format": "viewalign-template", "version": 1, "class_name": "x",
    "keypoints": [], "edges": [], "colour": 1})";
  EXPECT_THROW(parse_template(typo), std::invalid_argument);
  const std::string bad_type = R"({"format": "viewalign-template", "version": 1, "class_name": "x",
    "keypoints": [{"id": "zero", "xyz": [0, 0, 0], "part": 0}], "edges": []})";
  EXPECT_THROW(parse_template(bad_type), std::invalid_argument);
}

TEST(TemplateModel, LoadMissingFileIsRuntimeError) {
  EXPECT_THROW(load_template(kData / "templates/missing.json"), std::runtime_error);
}

TEST(Keypoints2d, RoundTripAndValidation) {
  const std::map<int, std::array<double, 2>> kps{{0, {1.5, 2.0}}, {7, {30.25, 0.0}}};
  EXPECT_EQ(parse_keypoints_2d(serialize_keypoints_2d(kps)), kps);
  EXPECT_THROW(parse_keypoints_2d(R"({"format": "viewalign-keypoints2d", "version": 1,
    "keypoints": [{"id": 0, "uv": [0, 0]}, {"id": 0, "uv": [1, 1]}]})"),
               std::invalid_argument);
  EXPECT_THROW(parse_keypoints_2d(R"({"format": "viewalign-template", "version": 1, "keypoints": []})"),
               std::invalid_argument);
  EXPECT_THROW(parse_keypoints_2d(R"({"format": "viewalign-keypoints2d", "version": 1,
    "keypoints": [{"id": 0, "uv": [0]}]})"),
               std::invalid_argument);
}
