#include <doctest.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <numbers>

#include "cipher/geometry.hpp"
#include "support.hpp"

using namespace cipher;
using namespace cipher::geometry;
using testing_support::repo_data_path;

namespace {

const gcode::Codebook& codebook() {
  static const gcode::Codebook cb = gcode::load_codebook(repo_data_path("codebook.json"));
  return cb;
}

double last_e(const gcode::Program& prog) {
  double e = 0.0;
  for (const auto& c : prog.commands) {
    if (c.name() == "G1" && c.has('E')) e = *c.get('E');
  }
  return e;
}

}  // namespace

TEST_CASE("primitives are templated on the scalar") {
  auto c = circle<float>(2.0f);
  auto o = c.outline();
  CHECK(o.cols() == kCircleSegments + 1);
  CHECK((o.col(0) - o.col(kCircleSegments)).norm() == 0.0f);
  CHECK(polyline_length(o) == doctest::Approx(2.0 * kCircleSegments * 2.0 * std::sin(std::numbers::pi / kCircleSegments)));
  auto r = rectangle(4.0, 2.0, Pose2<double>{1.0, 1.0, std::numbers::pi / 2});
  CHECK(r.min_feature() == 2.0);
  CHECK(r.bounds().sizes().x() == doctest::Approx(2.0));
  CHECK(regular_polygon(6, 1.0).min_feature() == doctest::Approx(std::sqrt(3.0)));
  CHECK_THROWS_AS(circle(-1.0), GeometryError);
  CHECK_THROWS_AS(regular_polygon(2, 1.0), GeometryError);
}

TEST_CASE("cone prints end to end") {
  auto t0 = std::chrono::steady_clock::now();
  auto r = run_pipeline("Print a cone with radius 10 and height 10", codebook());
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  REQUIRE(r.program.has_value());
  CHECK(r.printed());
  CHECK(r.validation.ok());
  CHECK(*r.branch == Branch::PrimitiveBranch);
  CHECK(r.toolpath->layers.size() == 50);
  CHECK(r.toolpath->layers.back().z == doctest::Approx(10.0).epsilon(1e-7));
  CHECK(r.replay->position.z() == doctest::Approx(10.0).epsilon(1e-7));
  CHECK(secs < 5.0);

  // Layer i samples radius 10 (1 - 0.2 i / 10) as a 64-gon.
  double length = 0.0;
  for (int i = 0; i < 50; ++i) {
    double radius = 10.0 * (1.0 - 0.2 * i / 10.0);
    length += 2.0 * kCircleSegments * radius * std::sin(std::numbers::pi / kCircleSegments);
  }
  double expected_e = length * 0.2 * 0.4 / (std::numbers::pi * 0.875 * 0.875);
  CHECK(last_e(*r.program) == doctest::Approx(expected_e).epsilon(1e-5));
  CHECK(r.replay->e_position == doctest::Approx(expected_e).epsilon(1e-5));
}

TEST_CASE("extrusion formula") {
  CHECK(extrusion_for(100.0, 0.2, 0.4, 1.75) == doctest::Approx(100.0 * 0.08 / (std::numbers::pi * 0.765625)));
}

TEST_CASE("sphere needs support") {
  auto r = run_pipeline("make a sphere of radius 10", codebook());
  CHECK(r.printed());
  CHECK(r.manufacturability.count(ViolationKind::Overhang) >= 1);
  bool warned = false;
  for (const auto& w : r.toolpath->warnings) warned |= w.rfind("needs support", 0) == 0;
  CHECK(warned);
  // A cylinder and a cone are self-supporting.
  CHECK(run_pipeline("print a cylinder", codebook()).manufacturability.ok());
  CHECK(run_pipeline("print a cone", codebook()).manufacturability.count(ViolationKind::Overhang) == 0);
}

TEST_CASE("thin features are flagged") {
  auto comp = compose({Element{cylinder(0.3, 5.0), Eigen::Vector3d(50, 50, 0), 0.0},
                       Element{box(10, 10, 5), Eigen::Vector3d(100, 100, 0), 0.0}});
  auto rep = manufacturability_check(comp);
  REQUIRE(rep.count(ViolationKind::MinFeature) == 1);
  const auto& v = rep.violations.front();
  CHECK(v.element == 0);
  CHECK(v.message.find("0.8 mm") != std::string::npos);
  CHECK(v.layers == 25);
}

TEST_CASE("complexity gate") {
  GeometryRequest req{"make it", RequestKind::Geometric, std::nullopt, false};
  Decomposition four{"x", {"a", "b", "c", "d"}};
  Decomposition five{"x", {"a", "b", "c", "d", "e"}};
  CHECK(complexity_gate(req, four) == Branch::PrimitiveBranch);
  CHECK(complexity_gate(req, five) == Branch::GeneratorBranch);

  CHECK(decompose("a rocket")->size() == 3);
  CHECK(decompose("a llama please")->size() > kMaxPrimitives);
  CHECK_FALSE(decompose("nothing here").has_value());

  CannedShapeGenerator gen;
  auto r = run_pipeline("print a llama", codebook(), {}, nullptr, &gen);
  CHECK(*r.branch == Branch::GeneratorBranch);
  CHECK_FALSE(r.program.has_value());
  REQUIRE(r.mesh.has_value());
  CHECK(r.mesh->faces.cols() == 4);
}

TEST_CASE("request classification") {
  CHECK(classify_request("Print a house").kind == RequestKind::Geometric);
  CHECK(classify_request("please make a cube").kind == RequestKind::Geometric);
  CHECK(classify_request("What causes warping in ABS?").kind == RequestKind::NonGeometric);
  CHECK(classify_request("Is there any error?").kind == RequestKind::NonGeometric);
}

TEST_CASE("registry round trip and reuse") {
  UsefulFunctionRegistry reg;
  auto first = run_pipeline("print a cylinder with radius 6 and height 8", codebook(), {}, &reg);
  CHECK(first.printed());
  REQUIRE(reg.find("make_cylinder") != nullptr);
  CHECK(reg.find("make_cylinder")->descriptor["radius"] == 6.0);

  auto again = run_pipeline("print a cylinder", codebook(), {}, &reg);
  CHECK(again.status.rfind("reused make_cylinder", 0) == 0);
  CHECK(again.toolpath->layers.size() == 40);

  auto path = (std::filesystem::temp_directory_path() / "cipher_registry_test.json").string();
  reg.save(path);
  CHECK(UsefulFunctionRegistry::load(path) == reg);
  std::filesystem::remove(path);

  reg.register_function("make_bad", "x", {{"shape", "cube"}}, {false, true, "bad"});
  CHECK(reg.contains("make_bad"));
  CHECK(reg.find("make_bad") == nullptr);
  CHECK(reg.reusable().size() == 1);
}

TEST_CASE("stacking layers matches a frustum") {
  auto stacked = stack_layers([](double z) { return circle(10.0 - 0.5 * z); }, 10.0, 0.2);
  Solid f = frustum(circle(10.0), 10.0, Eigen::Vector2d(0.5, 0.5));
  for (double z : {0.0, 1.0, 4.4, 9.8}) {
    auto a = stacked.elements[0].cross_section(z);
    auto b = f.cross_section(z);
    REQUIRE(a.size() == 1);
    REQUIRE(b.size() == 1);
    CHECK(a[0].radius == doctest::Approx(b[0].radius));
  }
  CHECK(layer_count(10.0, 0.2) == 50);
  CHECK(layer_count(0.1, 0.2) == 1);
  CHECK_THROWS_AS(stack_layers([](double z) { return circle(5.0 - z); }, 10.0, 0.2), GeometryError);
}

TEST_CASE("build volume is enforced") {
  CHECK_THROWS_AS(compose({Element{cylinder(10, 300), Eigen::Vector3d(110, 110, 0), 0.0}}), GeometryError);
  CHECK_THROWS_AS(compose({Element{box(10, 10, 10), Eigen::Vector3d(2, 110, 0), 0.0}}), GeometryError);
  auto ok = compose({Element{box(10, 10, 10), Eigen::Vector3d(110, 110, 0), 0.0}});
  CHECK(ok.extents().isApprox(Eigen::Vector3d(10, 10, 10)));
}

TEST_CASE("multi-element shapes slice") {
  for (const char* text : {"print a rocket", "build a house", "make a snowman", "print a table", "make an i-beam",
                           "print a pyramid", "print a hexagonal prism", "print a helix", "print a cube"}) {
    CAPTURE(text);
    auto r = run_pipeline(text, codebook());
    CHECK(r.printed());
  }
}
