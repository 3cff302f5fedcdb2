#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "layoutdm/error.hpp"
#include "layoutdm/layout/dataset.hpp"
#include "layoutdm/layout/layout.hpp"
#include "layoutdm/numerics/rng.hpp"

using namespace layoutdm;
using nlohmann::json;

namespace {

void check_box(const Box& b, double cx, double cy, double w, double h, double tol = 1e-12) {
  CHECK(b.cx == doctest::Approx(cx).epsilon(tol));
  CHECK(b.cy == doctest::Approx(cy).epsilon(tol));
  CHECK(b.w == doctest::Approx(w).epsilon(tol));
  CHECK(b.h == doctest::Approx(h).epsilon(tol));
}

Layout labelled(std::string id, std::vector<std::pair<int, Box>> items) {
  Layout l;
  l.id = std::move(id);
  for (auto& [label, box] : items) l.elements.push_back(Element{box, label, std::nullopt});
  return l;
}

json minimal_doc() {
  return {{"canvas", {{"width", 100}, {"height", 50}}},
          {"labels", {"text", "image"}},
          {"layouts", {{{"id", "a"}, {"elements", {{{"label", 1}, {"bbox", {50, 25, 100, 50}}}}}}}}};
}

DataErrorCode parse_error_code(const json& doc, AttributeMode mode = AttributeMode::categorical,
                               std::size_t max_elements = kDefaultMaxElements) {
  try {
    parse_dataset(doc, mode, max_elements);
  } catch (const DataError& e) {
    return e.code();
  }
  FAIL("expected a DataError");
  return DataErrorCode::invalid_argument;
}

}  // namespace

TEST_CASE("normalize_box endpoint and interior cases") {
  const Canvas c{100.0, 200.0};
  check_box(normalize_box({50, 100, 100, 200}, c), 0, 0, 1, 1);
  check_box(normalize_box({0, 0, 0, 0}, c), -1, -1, -1, -1);
  check_box(normalize_box({25, 150, 50, 100}, c), -0.5, 0.5, 0, 0);
}

TEST_CASE("denormalize_box inverts without clamping") {
  const Canvas c{100.0, 200.0};
  check_box(denormalize_box({0, 0, 1, 1}, c), 50, 100, 100, 200);
  CHECK(denormalize_box({1.2, 0, 1, 1}, Canvas{100, 100}).cx == doctest::Approx(110.0).epsilon(1e-12));
}

TEST_CASE("normalize and denormalize are mutual inverses") {
  RngStream s{3, 0};
  const Canvas c{123.0, 77.0};
  for (int i = 0; i < 1000; ++i) {
    const Box raw{c.width * s.uniform(), c.height * s.uniform(), c.width * s.uniform(), c.height * s.uniform()};
    const Box back = denormalize_box(normalize_box(raw, c), c);
    CHECK(std::abs(back.cx - raw.cx) < 1e-12 * c.width);
    CHECK(std::abs(back.h - raw.h) < 1e-12 * c.height);
    const Box model{2 * s.uniform() - 1, 2 * s.uniform() - 1, 2 * s.uniform() - 1, 2 * s.uniform() - 1};
    const Box again = normalize_box(denormalize_box(model, c), c);
    CHECK(std::abs(again.cx - model.cx) < 1e-12);
    CHECK(std::abs(again.w - model.w) < 1e-12);
  }
}

TEST_CASE("normalize_layout names the offending element") {
  Layout l = labelled("page-3", {{0, Box{10, 10, 5, 5}}, {0, Box{10, 10, 500, 5}}});
  try {
    normalize_layout(l, Canvas{100, 100});
    FAIL("expected rejection");
  } catch (const DataError& e) {
    CHECK(e.code() == DataErrorCode::out_of_range);
    CHECK(e.subject() == "page-3#1");
  }
}

TEST_CASE("to_corner_form") {
  const Corners a = to_corner_form({0.5, 0.5, 1, 1});
  CHECK(a.left == 0.0);
  CHECK(a.top == 0.0);
  CHECK(a.center_x == 0.5);
  CHECK(a.center_y == 0.5);
  CHECK(a.right == 1.0);
  CHECK(a.bottom == 1.0);
  const Corners d = to_corner_form({0.5, 0.5, 0, 0});
  CHECK(d.left == 0.5);
  CHECK(d.right == 0.5);
  CHECK(d.top == 0.5);
  CHECK(d.bottom == 0.5);
  const Corners e = to_corner_form({0.25, 0.75, 0.5, 0.5});
  CHECK(e.left == doctest::Approx(0.0));
  CHECK(e.top == doctest::Approx(0.5));
  CHECK(e.center_x == doctest::Approx(0.25));
  CHECK(e.center_y == doctest::Approx(0.75));
  CHECK(e.right == doctest::Approx(0.5));
  CHECK(e.bottom == doctest::Approx(1.0));
}

TEST_CASE("pad_batch shapes and masks") {
  const Layout a = labelled("a", {{0, Box{0.1, 0.2, 0.3, 0.4}}, {1, Box{-0.1, -0.2, -0.3, -0.4}}});
  const Layout b = labelled("b", {{2, Box{0.5, 0.5, 0.5, 0.5}}, {1, Box{0, 0, 0, 0}}, {0, Box{1, 1, 1, 1}}});
  const std::vector<Layout> two{a, b};
  const Batch batch = pad_batch(two);
  CHECK(batch.geometry.shape() == Shape{2, 3, 4});
  CHECK(batch.mask == Mask{1, 1, 0, 1, 1, 1});
  CHECK(batch.valid_count() == 5);
  for (double v : batch.geometry.row(2)) CHECK(v == 0.0);
  CHECK(batch.labels[2] == 0);

  const std::vector<Layout> one{b};
  const Batch single = pad_batch(one);
  CHECK(single.mask == Mask{1, 1, 1});
}

TEST_CASE("pad then unpad reproduces the input layouts") {
  RngStream s{9, 0};
  std::vector<Layout> layouts;
  for (int i = 0; i < 20; ++i) {
    Layout l;
    const std::size_t n = 1 + s.uniform_index(6);
    for (std::size_t k = 0; k < n; ++k) {
      l.elements.push_back(Element{Box{2 * s.uniform() - 1, 2 * s.uniform() - 1, 2 * s.uniform() - 1, 2 * s.uniform() - 1},
                                   static_cast<int>(s.uniform_index(5)), std::nullopt});
    }
    layouts.push_back(l);
  }
  const Batch batch = pad_batch(layouts);
  std::size_t total = 0;
  for (const auto& l : layouts) total += l.size();
  CHECK(batch.valid_count() == total);
  const auto back = unpad_batch(batch);
  REQUIRE(back.size() == layouts.size());
  for (std::size_t i = 0; i < layouts.size(); ++i) CHECK(back[i].elements == layouts[i].elements);
}

TEST_CASE("pad_batch with continuous attributes and error cases") {
  Layout c;
  c.elements.push_back(Element{Box{}, std::vector<double>{1.0, 2.0}, std::nullopt});
  const std::vector<Layout> cont{c, c};
  const Batch b = pad_batch(cont);
  CHECK(b.mode == AttributeMode::continuous);
  CHECK(b.features.shape() == Shape{2, 1, 2});
  CHECK(unpad_batch(b)[1].elements == c.elements);

  const Layout cat = labelled("x", {{0, Box{}}});
  const std::vector<Layout> mixed{c, cat};
  CHECK_THROWS_AS(pad_batch(mixed), DataError);
  CHECK_THROWS_AS(pad_batch(std::vector<Layout>{}), DataError);
  CHECK_THROWS_AS(pad_batch(std::vector<Layout>{Layout{}}), DataError);
}

TEST_CASE("parse_dataset accepts the minimal schema") {
  const Dataset d = parse_dataset(minimal_doc(), AttributeMode::categorical);
  REQUIRE(d.layouts.size() == 1);
  CHECK(d.schema.label_names == std::vector<std::string>{"text", "image"});
  check_box(d.layouts[0].elements[0].geometry, 0, 0, 1, 1);
  CHECK(d.layouts[0].elements[0].label() == 1);
}

TEST_CASE("parse_dataset builds the vocabulary in first-seen order") {
  json doc = {{"canvas", {{"width", 10}, {"height", 10}}},
              {"layouts",
               {{{"id", "p"},
                 {"elements",
                  {{{"label", "title"}, {"bbox", {5, 5, 2, 2}}},
                   {{"label", "body"}, {"bbox", {5, 5, 2, 2}}},
                   {{"label", "title"}, {"bbox", {5, 5, 2, 2}}},
                   {{"label", "figure"}, {"bbox", {5, 5, 2, 2}}}}}}}}};
  const Dataset d = parse_dataset(doc, AttributeMode::categorical);
  CHECK(d.schema.label_names == std::vector<std::string>{"title", "body", "figure"});
  CHECK(d.layouts[0].labels() == std::vector<int>{0, 1, 0, 2});
}

TEST_CASE("parse_dataset distinct errors") {
  SUBCASE("empty layout names the layout") {
    json doc = minimal_doc();
    doc["layouts"].push_back({{"id", "blank"}, {"elements", json::array()}});
    try {
      parse_dataset(doc, AttributeMode::categorical);
      FAIL("expected rejection");
    } catch (const DataError& e) {
      CHECK(e.code() == DataErrorCode::empty_layout);
      CHECK(e.subject() == "blank");
    }
  }
  SUBCASE("too many elements") {
    json doc = minimal_doc();
    json elems = json::array();
    for (int i = 0; i < 4; ++i) elems.push_back({{"label", 0}, {"bbox", {1, 1, 1, 1}}});
    doc["layouts"][0]["elements"] = elems;
    CHECK(parse_error_code(doc, AttributeMode::categorical, 3) == DataErrorCode::too_many_elements);
  }
  SUBCASE("label out of vocabulary") {
    json doc = minimal_doc();
    doc["layouts"][0]["elements"][0]["label"] = 2;
    CHECK(parse_error_code(doc) == DataErrorCode::label_out_of_vocabulary);
    doc["layouts"][0]["elements"][0]["label"] = "chart";
    CHECK(parse_error_code(doc) == DataErrorCode::label_out_of_vocabulary);
  }
  SUBCASE("unknown field") {
    json doc = minimal_doc();
    doc["layouts"][0]["elements"][0]["rotation"] = 3;
    CHECK(parse_error_code(doc) == DataErrorCode::unknown_field);
    json top = minimal_doc();
    top["extra"] = 1;
    CHECK(parse_error_code(top) == DataErrorCode::unknown_field);
  }
  SUBCASE("missing field and bad bbox") {
    json doc = minimal_doc();
    doc.erase("canvas");
    CHECK(parse_error_code(doc) == DataErrorCode::missing_field);
    json bad = minimal_doc();
    bad["layouts"][0]["elements"][0]["bbox"] = {1, 2, 3};
    CHECK(parse_error_code(bad) == DataErrorCode::malformed_json);
    json outside = minimal_doc();
    outside["layouts"][0]["elements"][0]["bbox"] = {101, 2, 3, 4};
    CHECK(parse_error_code(outside) == DataErrorCode::out_of_range);
  }
  SUBCASE("attribute mode mismatch") {
    CHECK(parse_error_code(minimal_doc(), AttributeMode::continuous) == DataErrorCode::attribute_mode_mismatch);
  }
}

TEST_CASE("load_dataset reports io and malformed json") {
  const auto dir = std::filesystem::temp_directory_path();
  try {
    load_dataset(dir / "does-not-exist.json", AttributeMode::categorical);
    FAIL("expected rejection");
  } catch (const DataError& e) {
    CHECK(e.code() == DataErrorCode::io);
  }
  const auto broken = dir / "layoutdm_broken.json";
  std::ofstream(broken) << "{\"canvas\": ";
  try {
    load_dataset(broken, AttributeMode::categorical);
    FAIL("expected rejection");
  } catch (const DataError& e) {
    CHECK(e.code() == DataErrorCode::malformed_json);
  }
  std::filesystem::remove(broken);
}

TEST_CASE("continuous datasets round trip through json") {
  json doc = {{"canvas", {{"width", 20}, {"height", 20}}},
              {"feature_dim", 3},
              {"layouts", {{{"id", "c"}, {"elements", {{{"feature", {0.1, 0.2, 0.3}}, {"bbox", {10, 10, 4, 4}}}}}}}}};
  const Dataset d = parse_dataset(doc, AttributeMode::continuous);
  CHECK(d.schema.feature_dim == 3);
  CHECK(parse_dataset(dataset_to_json(d), AttributeMode::continuous) == d);
  doc["layouts"][0]["elements"][0]["feature"] = {0.1};
  CHECK(parse_error_code(doc, AttributeMode::continuous) == DataErrorCode::shape_mismatch);
}

TEST_CASE("dataset json round trip keeps raw geometry and metadata") {
  Dataset d = parse_dataset(minimal_doc(), AttributeMode::categorical);
  d.layouts[0].elements[0].raw_geometry = Box{1.3, -0.2, 0.5, 0.1};
  d.metadata = {{"note", "generated"}};
  const Dataset back = parse_dataset(dataset_to_json(d), AttributeMode::categorical);
  REQUIRE(back.layouts[0].elements[0].raw_geometry.has_value());
  CHECK(back.layouts[0].elements[0].raw_geometry->cx == doctest::Approx(1.3).epsilon(1e-12));
  CHECK(back.metadata == d.metadata);
}

TEST_CASE("synthetic datasets are a pure function of spec and seed") {
  SyntheticSpec spec;
  const Dataset a = make_synthetic_dataset(spec, 7), b = make_synthetic_dataset(spec, 7);
  CHECK(a == b);
  CHECK(dataset_to_json(a).dump() == dataset_to_json(b).dump());
  CHECK(a.layouts.size() == 512);
  CHECK_FALSE(make_synthetic_dataset(spec, 8) == a);
}

TEST_CASE("grid_by_label places each class at a fixed box") {
  const Dataset d = make_synthetic_dataset(SyntheticSpec{}, 7);
  for (const auto& l : d.layouts) {
    CHECK(l.size() >= 2);
    CHECK(l.size() <= 4);
    std::vector<int> labels = l.labels();
    std::sort(labels.begin(), labels.end());
    CHECK(std::adjacent_find(labels.begin(), labels.end()) == labels.end());
    for (const auto& e : l.elements) CHECK(e.geometry == grid_box(e.label(), 4));
  }
  // Distinct classes never share an edge or center coordinate.
  for (int a = 0; a < 4; ++a) {
    for (int b = a + 1; b < 4; ++b) {
      const Corners ca = to_corner_form(to_unit_frame(grid_box(a, 4)));
      const Corners cb = to_corner_form(to_unit_frame(grid_box(b, 4)));
      const auto xa = ca.as_array(), xb = cb.as_array();
      for (std::size_t k = 0; k < 6; ++k) CHECK(std::abs(xa[k] - xb[k]) > 1e-3);
    }
  }
}

TEST_CASE("random_boxes stay inside the canvas") {
  SyntheticSpec spec;
  spec.rule = SyntheticRule::random_boxes;
  spec.num_layouts = 200;
  spec.max_elements = 8;
  const Dataset d = make_synthetic_dataset(spec, 1);
  for (const auto& l : d.layouts) {
    for (const auto& e : l.elements) {
      const auto g = e.geometry.as_array();
      for (double v : g) {
        CHECK(v >= -1.0);
        CHECK(v <= 1.0);
      }
      const Corners c = to_corner_form(to_unit_frame(e.geometry));
      CHECK(c.left >= -1e-12);
      CHECK(c.right <= 1.0 + 1e-12);
      CHECK(c.top >= -1e-12);
      CHECK(c.bottom <= 1.0 + 1e-12);
    }
  }
}

TEST_CASE("synthetic spec validation") {
  SyntheticSpec spec;
  spec.num_classes = 0;
  CHECK_THROWS_AS(make_synthetic_dataset(spec, 0), DataError);
  spec = SyntheticSpec{};
  spec.min_elements = 5;
  spec.max_elements = 4;
  CHECK_THROWS_AS(make_synthetic_dataset(spec, 0), DataError);
  CHECK_THROWS(parse_synthetic_rule("spiral"));
}
