#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <json.hpp>

#include "cipher/gcode.hpp"
#include "cipher/printer.hpp"

namespace cipher::geometry {

class GeometryError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr int kCircleSegments = 64;

template <typename Scalar>
using Point2 = Eigen::Matrix<Scalar, 2, 1>;

// Closed polyline, one point per column, last column equal to the first.
template <typename Scalar>
using Outline = Eigen::Matrix<Scalar, 2, Eigen::Dynamic>;

using Polyline = Outline<double>;

enum class Shape2D { Circle, Rectangle, RegularPolygon };

template <typename Scalar>
struct Pose2 {
  Scalar x = 0;
  Scalar y = 0;
  Scalar rotation = 0;  // radians, counter-clockwise
};

template <typename Scalar = double>
struct Primitive2D {
  Shape2D shape = Shape2D::Circle;
  Scalar radius = 0;        // Circle
  Scalar width = 0;         // Rectangle, along local x
  Scalar height = 0;        // Rectangle, along local y
  int sides = 0;            // RegularPolygon
  Scalar circumradius = 0;  // RegularPolygon
  Pose2<Scalar> pose;

  Point2<Scalar> center() const { return {pose.x, pose.y}; }

  // Narrowest cross dimension: circle diameter, shorter rectangle side,
  // polygon inscribed diameter.
  Scalar min_feature() const {
    switch (shape) {
      case Shape2D::Circle: return 2 * radius;
      case Shape2D::Rectangle: return std::min(width, height);
      case Shape2D::RegularPolygon:
        return 2 * circumradius * std::cos(std::numbers::pi_v<Scalar> / static_cast<Scalar>(sides));
    }
    return 0;
  }

  bool degenerate(Scalar eps = Scalar(1e-9)) const {
    switch (shape) {
      case Shape2D::Circle: return radius <= eps;
      case Shape2D::Rectangle: return width <= eps || height <= eps;
      case Shape2D::RegularPolygon: return circumradius <= eps;
    }
    return true;
  }

  Outline<Scalar> outline(int segments = kCircleSegments) const {
    Outline<Scalar> local;
    switch (shape) {
      case Shape2D::Circle: {
        local.resize(2, segments + 1);
        for (int k = 0; k < segments; ++k) {
          Scalar a = 2 * std::numbers::pi_v<Scalar> * static_cast<Scalar>(k) / static_cast<Scalar>(segments);
          local.col(k) << radius * std::cos(a), radius * std::sin(a);
        }
        break;
      }
      case Shape2D::Rectangle: {
        local.resize(2, 5);
        Scalar hw = width / 2, hh = height / 2;
        local.col(0) << -hw, -hh;
        local.col(1) << hw, -hh;
        local.col(2) << hw, hh;
        local.col(3) << -hw, hh;
        break;
      }
      case Shape2D::RegularPolygon: {
        local.resize(2, sides + 1);
        for (int k = 0; k < sides; ++k) {
          Scalar a = 2 * std::numbers::pi_v<Scalar> * static_cast<Scalar>(k) / static_cast<Scalar>(sides);
          local.col(k) << circumradius * std::cos(a), circumradius * std::sin(a);
        }
        break;
      }
    }
    const Eigen::Index last = local.cols() - 1;
    Eigen::Matrix<Scalar, 2, 2> rot;
    rot << std::cos(pose.rotation), -std::sin(pose.rotation), std::sin(pose.rotation), std::cos(pose.rotation);
    Outline<Scalar> world = (rot * local.leftCols(last)).colwise() + center();
    Outline<Scalar> closed(2, last + 1);
    closed.leftCols(last) = world;
    closed.col(last) = world.col(0);
    return closed;
  }

  // Axis-aligned 2D bounds of the exact shape (analytic for circles).
  Eigen::AlignedBox<Scalar, 2> bounds() const {
    Eigen::AlignedBox<Scalar, 2> box;
    if (shape == Shape2D::Circle) {
      box.extend(center() - Point2<Scalar>::Constant(radius));
      box.extend(center() + Point2<Scalar>::Constant(radius));
      return box;
    }
    auto o = outline();
    for (Eigen::Index i = 0; i < o.cols(); ++i) box.extend(Point2<Scalar>(o.col(i)));
    return box;
  }
};

using Primitive = Primitive2D<double>;

// params: Circle {radius}; Rectangle {width, height}; RegularPolygon
// {sides, circumradius}.
template <typename Scalar = double>
Primitive2D<Scalar> make_primitive(Shape2D shape, std::span<const Scalar> params, Pose2<Scalar> pose = {}) {
  auto need = [&](std::size_t n) {
    if (params.size() != n) throw GeometryError("wrong number of primitive parameters");
    for (Scalar p : params) {
      if (!(p > 0) || !std::isfinite(static_cast<double>(p))) throw GeometryError("primitive dimensions must be positive");
    }
  };
  Primitive2D<Scalar> p;
  p.shape = shape;
  p.pose = pose;
  switch (shape) {
    case Shape2D::Circle:
      need(1);
      p.radius = params[0];
      break;
    case Shape2D::Rectangle:
      need(2);
      p.width = params[0];
      p.height = params[1];
      break;
    case Shape2D::RegularPolygon:
      need(2);
      if (params[0] < 3 || params[0] != std::floor(params[0])) throw GeometryError("polygon needs an integer >= 3 sides");
      p.sides = static_cast<int>(params[0]);
      p.circumradius = params[1];
      break;
  }
  return p;
}

template <typename Scalar>
Primitive2D<Scalar> circle(Scalar radius, Pose2<Scalar> pose = {}) {
  const Scalar params[] = {radius};
  return make_primitive<Scalar>(Shape2D::Circle, params, pose);
}

template <typename Scalar>
Primitive2D<Scalar> rectangle(Scalar width, Scalar height, Pose2<Scalar> pose = {}) {
  const Scalar params[] = {width, height};
  return make_primitive<Scalar>(Shape2D::Rectangle, params, pose);
}

template <typename Scalar>
Primitive2D<Scalar> regular_polygon(int sides, Scalar circumradius, Pose2<Scalar> pose = {}) {
  const Scalar params[] = {static_cast<Scalar>(sides), circumradius};
  return make_primitive<Scalar>(Shape2D::RegularPolygon, params, pose);
}

template <typename Derived>
typename Derived::Scalar polyline_length(const Eigen::MatrixBase<Derived>& pts) {
  typename Derived::Scalar total(0);
  for (Eigen::Index i = 1; i < pts.cols(); ++i) total += (pts.col(i) - pts.col(i - 1)).norm();
  return total;
}

// ---------------------------------------------------------------------------
// Solids and compositions

enum class SolidKind { Prism, Frustum, Sphere, Stack };

// One element of a composition in its local frame (base at z = 0, xy
// centred on the local origin unless the base pose says otherwise).
struct Solid {
  SolidKind kind = SolidKind::Prism;
  Primitive base;                               // Prism, Frustum
  double height = 0.0;                          // Prism, Frustum, Stack
  Eigen::Vector2d top_scale{1.0, 1.0};          // Frustum, per axis of the base
  Eigen::Vector2d scale_origin{0.0, 0.0};       // Frustum, fixed point of the taper
  double sphere_radius = 0.0;                   // Sphere
  std::vector<Primitive> layers;                // Stack, one per layer
  double layer_height = 0.0;                    // Stack
  int array_count = 1;                          // polar copies about local z
  std::string label;

  double extent_z() const { return kind == SolidKind::Sphere ? 2.0 * sphere_radius : height; }
  // Cross-section primitives at local height z, empty outside the solid.
  std::vector<Primitive> cross_section(double z) const;
};

Solid prism(const Primitive& base, double height, std::string label = "prism");
Solid frustum(const Primitive& base, double height, Eigen::Vector2d top_scale,
              Eigen::Vector2d scale_origin = Eigen::Vector2d::Zero(), std::string label = "frustum");
Solid cone(double radius, double height);
Solid cylinder(double radius, double height);
Solid box(double width, double depth, double height);
Solid sphere(double radius);

struct Element {
  Solid solid;
  Eigen::Vector3d offset = Eigen::Vector3d::Zero();
  double rotation = 0.0;  // radians about z

  std::vector<Primitive> cross_section(double z) const;  // world frame
  Eigen::AlignedBox3d bounds() const;
};

struct Composition3D {
  std::vector<Element> elements;
  Eigen::AlignedBox3d bounding_box;

  Eigen::Vector3d extents() const { return bounding_box.sizes(); }
};

using Profile = std::function<Primitive(double z)>;

// One primitive per layer at z = i * layer_height, i in [0, ceil(height /
// layer_height)).
Composition3D stack_layers(const Profile& profile, double height, double layer_height);

// Union of placed elements; bounds recomputed and checked against the build
// volume (origin corner at 0).
Composition3D compose(std::vector<Element> elements,
                      const Eigen::Vector3d& build_volume = Eigen::Vector3d(220.0, 220.0, 250.0));

int layer_count(double height, double layer_height);

// ---------------------------------------------------------------------------
// Manufacturability

struct ManufacturingRules {
  double min_feature = 0.8;        // mm
  double max_overhang_deg = 45.0;  // from vertical
  double layer_height = 0.2;
};

enum class ViolationKind { MinFeature, Overhang };

struct Violation {
  ViolationKind kind;
  std::size_t element;
  double first_z;
  double last_z;
  std::size_t layers;
  std::string message;
};

struct ManufacturabilityReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
  std::size_t count(ViolationKind kind) const;
};

ManufacturabilityReport manufacturability_check(const Composition3D& comp, const ManufacturingRules& rules = {});

// ---------------------------------------------------------------------------
// Toolpaths and G-code

struct ToolpathLayer {
  double z;  // nozzle height, top of the layer
  std::vector<Polyline> polylines;
};

struct Toolpath {
  std::vector<ToolpathLayer> layers;
  double layer_height = 0.2;
  double line_width = 0.4;
  double filament_diameter = 1.75;
  std::vector<std::string> warnings;

  double total_length() const;
};

// Perimeter-only slicing: layer i samples every element at z = i * h and
// prints at nozzle height (i + 1) * h. Empty layers are skipped.
Toolpath slice_to_toolpath(const Composition3D& comp, double layer_height, double line_width,
                           double filament_diameter = 1.75);

// Filament length for a bead of the given length: L * h * w / (pi (d/2)^2).
double extrusion_for(double length, double layer_height, double line_width, double filament_diameter);

struct EmitConfig {
  double hotend_temp = 200.0;
  int fan_pwm = 255;
  double travel_feed = 3000.0;  // mm/min
  double print_feed = 1200.0;
};

gcode::Program toolpath_to_gcode(const Toolpath& tp, const EmitConfig& cfg = {});

// ---------------------------------------------------------------------------
// Requests, decomposition and the complexity gate

enum class RequestKind { Geometric, NonGeometric };

struct GeometryRequest {
  std::string text;
  RequestKind kind = RequestKind::NonGeometric;
  std::optional<int> complexity;  // primitive count, Geometric only
  bool has_image = false;
};

// Components of a shape. A polar array of identical parts counts once.
struct Decomposition {
  std::string shape;
  std::vector<std::string> components;

  int size() const { return static_cast<int>(components.size()); }
};

std::optional<Decomposition> decompose(const std::string& text);

GeometryRequest classify_request(const std::string& text, bool has_image = false);

enum class Branch { PrimitiveBranch, GeneratorBranch };

inline constexpr int kMaxPrimitives = 4;

Branch complexity_gate(const GeometryRequest& request, const Decomposition& decomposition);

struct TriangleMesh {
  Eigen::Matrix3Xd vertices;
  Eigen::Matrix3Xi faces;
};

class ShapeGenerator {
 public:
  virtual ~ShapeGenerator() = default;
  virtual TriangleMesh generate(const GeometryRequest& request) = 0;
};

// Returns a unit tetrahedron for any request. Test fixture only.
class CannedShapeGenerator final : public ShapeGenerator {
 public:
  TriangleMesh generate(const GeometryRequest& request) override;
};

// Builds the composition for a primitive-branch shape. `descriptor` is
// {"shape": name, ...dimensions}; missing dimensions take library defaults.
// Elements are centred at `center` on the bed.
Composition3D build_shape(const nlohmann::json& descriptor,
                          const Eigen::Vector2d& center = Eigen::Vector2d(110.0, 110.0),
                          const Eigen::Vector3d& build_volume = Eigen::Vector3d(220.0, 220.0, 250.0));

// Shape name plus any "radius 12", "height 30" style dimensions in the text.
nlohmann::json descriptor_from_text(const std::string& text, const Decomposition& decomposition);

// ---------------------------------------------------------------------------
// Useful-functions registry

struct UsefulFunction {
  std::string name;
  std::string request_text;
  nlohmann::json descriptor;
  bool validated = false;

  friend bool operator==(const UsefulFunction&, const UsefulFunction&) = default;
};

struct ValidationOutcome {
  bool program_ok = false;
  bool replay_ok = false;
  std::string detail;
};

class UsefulFunctionRegistry {
 public:
  // Stores the entry; it is reusable only when both checks passed.
  const UsefulFunction& register_function(const std::string& name, const std::string& request_text,
                                          const nlohmann::json& descriptor, const ValidationOutcome& outcome);

  const UsefulFunction* find(const std::string& name) const;  // validated only
  std::vector<const UsefulFunction*> reusable() const;
  std::size_t size() const { return entries_.size(); }
  bool contains(const std::string& name) const { return entries_.count(name) != 0; }

  nlohmann::json to_json() const;
  static UsefulFunctionRegistry from_json(const nlohmann::json& j);
  void save(const std::string& path) const;
  static UsefulFunctionRegistry load(const std::string& path);

  friend bool operator==(const UsefulFunctionRegistry&, const UsefulFunctionRegistry&) = default;

 private:
  std::map<std::string, UsefulFunction> entries_;
};

// ---------------------------------------------------------------------------
// End-to-end primitive branch

struct PipelineOptions {
  double layer_height = 0.2;
  double line_width = 0.4;
  double filament_diameter = 1.75;
  EmitConfig emit;
  PrinterConfig printer;
  ManufacturingRules rules;
};

struct PipelineResult {
  GeometryRequest request;
  std::optional<Decomposition> decomposition;
  std::optional<Branch> branch;
  nlohmann::json descriptor;
  std::optional<Composition3D> composition;
  std::optional<Toolpath> toolpath;
  std::optional<gcode::Program> program;
  gcode::ValidationReport validation;
  std::optional<FirmwareSnapshot> replay;
  std::string replay_error;
  ManufacturabilityReport manufacturability;
  std::optional<TriangleMesh> mesh;  // generator branch only
  std::string status;

  bool printed() const { return program.has_value() && validation.ok() && replay.has_value(); }
};

PipelineResult run_pipeline(const std::string& text, const gcode::Codebook& codebook, const PipelineOptions& opts = {},
                            UsefulFunctionRegistry* registry = nullptr, ShapeGenerator* generator = nullptr);

}  // namespace cipher::geometry
