#include "cipher/geometry.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <regex>

#include "cipher/text.hpp"

namespace cipher::geometry {

namespace {

constexpr double kZEps = 1e-9;

Primitive rotated_about_origin(Primitive p, double angle) {
  if (angle == 0.0) return p;
  Eigen::Rotation2Dd rot(angle);
  Eigen::Vector2d c = rot * p.center();
  p.pose.x = c.x();
  p.pose.y = c.y();
  p.pose.rotation += angle;
  return p;
}

Primitive translated(Primitive p, const Eigen::Vector2d& by) {
  p.pose.x += by.x();
  p.pose.y += by.y();
  return p;
}

// Scales dimensions per axis of the primitive and moves its centre towards
// `origin` by the same factors. No validation: zero sizes are allowed.
Primitive scaled(Primitive p, const Eigen::Vector2d& s, const Eigen::Vector2d& origin) {
  switch (p.shape) {
    case Shape2D::Circle: p.radius *= s.x(); break;
    case Shape2D::Rectangle:
      p.width *= s.x();
      p.height *= s.y();
      break;
    case Shape2D::RegularPolygon: p.circumradius *= s.x(); break;
  }
  Eigen::Vector2d c = origin + (p.center() - origin).cwiseProduct(s);
  p.pose.x = c.x();
  p.pose.y = c.y();
  return p;
}

std::vector<Primitive> with_array(const Primitive& p, int count) {
  std::vector<Primitive> out;
  for (int k = 0; k < count; ++k) {
    out.push_back(rotated_about_origin(p, 2.0 * std::numbers::pi * k / count));
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

std::vector<Primitive> Solid::cross_section(double z) const {
  if (z < -kZEps || z >= extent_z() - kZEps) return {};
  z = std::max(z, 0.0);
  std::optional<Primitive> p;
  switch (kind) {
    case SolidKind::Prism: p = base; break;
    case SolidKind::Frustum: {
      double t = z / height;
      Eigen::Vector2d s = Eigen::Vector2d::Ones() + (top_scale - Eigen::Vector2d::Ones()) * t;
      p = scaled(base, s, scale_origin);
      break;
    }
    case SolidKind::Sphere: {
      double d = z - sphere_radius;
      double r2 = sphere_radius * sphere_radius - d * d;
      if (r2 > 0.0) {
        Primitive c;
        c.shape = Shape2D::Circle;
        c.radius = std::sqrt(r2);
        p = c;
      }
      break;
    }
    case SolidKind::Stack: {
      auto i = static_cast<std::size_t>(std::floor(z / layer_height + kZEps));
      if (i < layers.size()) p = layers[i];
      break;
    }
  }
  if (!p || p->degenerate()) return {};
  return with_array(*p, array_count);
}

Solid prism(const Primitive& base, double height, std::string label) {
  if (!(height > 0.0)) throw GeometryError("prism height must be positive");
  Solid s;
  s.kind = SolidKind::Prism;
  s.base = base;
  s.height = height;
  s.label = std::move(label);
  return s;
}

Solid frustum(const Primitive& base, double height, Eigen::Vector2d top_scale, Eigen::Vector2d scale_origin,
              std::string label) {
  if (!(height > 0.0)) throw GeometryError("frustum height must be positive");
  if ((top_scale.array() < 0.0).any()) throw GeometryError("frustum scale must be non-negative");
  Solid s;
  s.kind = SolidKind::Frustum;
  s.base = base;
  s.height = height;
  s.top_scale = top_scale;
  s.scale_origin = scale_origin;
  s.label = std::move(label);
  return s;
}

Solid cone(double radius, double height) {
  return frustum(circle(radius), height, Eigen::Vector2d::Zero(), Eigen::Vector2d::Zero(), "cone");
}

Solid cylinder(double radius, double height) { return prism(circle(radius), height, "cylinder"); }

Solid box(double width, double depth, double height) { return prism(rectangle(width, depth), height, "box"); }

Solid sphere(double radius) {
  if (!(radius > 0.0)) throw GeometryError("sphere radius must be positive");
  Solid s;
  s.kind = SolidKind::Sphere;
  s.sphere_radius = radius;
  s.label = "sphere";
  return s;
}

std::vector<Primitive> Element::cross_section(double z) const {
  std::vector<Primitive> out = solid.cross_section(z - offset.z());
  for (auto& p : out) p = translated(rotated_about_origin(p, rotation), offset.head<2>());
  return out;
}

Eigen::AlignedBox3d Element::bounds() const {
  std::vector<Primitive> samples;
  switch (solid.kind) {
    case SolidKind::Prism: samples.push_back(solid.base); break;
    case SolidKind::Frustum:
      samples.push_back(solid.base);
      samples.push_back(scaled(solid.base, solid.top_scale, solid.scale_origin));
      break;
    case SolidKind::Sphere: {
      Primitive c;
      c.shape = Shape2D::Circle;
      c.radius = solid.sphere_radius;
      samples.push_back(c);
      break;
    }
    case SolidKind::Stack: samples = solid.layers; break;
  }
  Eigen::AlignedBox2d xy;
  for (const auto& s : samples) {
    for (const auto& copy : with_array(s, solid.array_count)) {
      Primitive world = translated(rotated_about_origin(copy, rotation), offset.head<2>());
      xy.extend(world.bounds());
    }
  }
  Eigen::AlignedBox3d box;
  box.extend(Eigen::Vector3d(xy.min().x(), xy.min().y(), offset.z()));
  box.extend(Eigen::Vector3d(xy.max().x(), xy.max().y(), offset.z() + solid.extent_z()));
  return box;
}

int layer_count(double height, double layer_height) {
  if (!(height > 0.0) || !(layer_height > 0.0)) throw GeometryError("height and layer height must be positive");
  return std::max(1, static_cast<int>(std::ceil(height / layer_height - kZEps)));
}

Composition3D stack_layers(const Profile& profile, double height, double layer_height) {
  int n = layer_count(height, layer_height);
  Solid s;
  s.kind = SolidKind::Stack;
  s.layer_height = layer_height;
  s.height = n * layer_height;
  s.label = "stack";
  for (int i = 0; i < n; ++i) {
    double z = i * layer_height;
    Primitive p;
    try {
      p = profile(z);
    } catch (const GeometryError& e) {
      throw GeometryError("degenerate profile at z=" + format_real(z) + ": " + e.what());
    }
    if (p.degenerate()) throw GeometryError("degenerate profile at z=" + format_real(z));
    s.layers.push_back(p);
  }
  Composition3D comp;
  comp.elements.push_back({std::move(s), Eigen::Vector3d::Zero(), 0.0});
  comp.bounding_box = comp.elements.front().bounds();
  return comp;
}

Composition3D compose(std::vector<Element> elements, const Eigen::Vector3d& build_volume) {
  if (elements.empty()) throw GeometryError("composition needs at least one element");
  Composition3D comp;
  Eigen::AlignedBox3d volume(Eigen::Vector3d::Zero(), build_volume);
  for (std::size_t i = 0; i < elements.size(); ++i) {
    Eigen::AlignedBox3d b = elements[i].bounds();
    Eigen::AlignedBox3d grown(volume.min().array() - kZEps, volume.max().array() + kZEps);
    if (!grown.contains(b)) {
      throw GeometryError("element " + std::to_string(i) + " (" + elements[i].solid.label +
                          ") lies outside the printable volume");
    }
    comp.bounding_box.extend(b);
  }
  comp.elements = std::move(elements);
  return comp;
}

// ---------------------------------------------------------------------------
// Manufacturability

namespace {

bool point_in_polygon(const Eigen::Vector2d& p, const Polyline& poly) {
  bool inside = false;
  for (Eigen::Index i = 0, j = poly.cols() - 1; i < poly.cols(); j = i++) {
    Eigen::Vector2d a = poly.col(i), b = poly.col(j);
    if ((a.y() > p.y()) != (b.y() > p.y())) {
      double x = (b.x() - a.x()) * (p.y() - a.y()) / (b.y() - a.y()) + a.x();
      if (p.x() < x) inside = !inside;
    }
  }
  return inside;
}

double segment_distance(const Eigen::Vector2d& p, const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  Eigen::Vector2d ab = b - a;
  double len2 = ab.squaredNorm();
  double t = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
  return (a + t * ab - p).norm();
}

double distance_to_region(const Eigen::Vector2d& p, const std::vector<Polyline>& region) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& poly : region) {
    if (point_in_polygon(p, poly)) return 0.0;
    for (Eigen::Index i = 1; i < poly.cols(); ++i) {
      best = std::min(best, segment_distance(p, poly.col(i - 1), poly.col(i)));
    }
  }
  return best;
}

struct Aggregate {
  double first_z = 0.0;
  double last_z = 0.0;
  std::size_t layers = 0;
};

}  // namespace

std::size_t ManufacturabilityReport::count(ViolationKind kind) const {
  std::size_t n = 0;
  for (const auto& v : violations) n += v.kind == kind;
  return n;
}

ManufacturabilityReport manufacturability_check(const Composition3D& comp, const ManufacturingRules& rules) {
  const double h = rules.layer_height;
  const double allowed = h * std::tan(rules.max_overhang_deg * std::numbers::pi / 180.0) + 1e-6;
  const int n = layer_count(comp.bounding_box.max().z(), h);

  std::map<std::pair<int, std::size_t>, Aggregate> found;
  auto note = [&](ViolationKind kind, std::size_t element, double z) {
    auto& a = found[{static_cast<int>(kind), element}];
    if (a.layers == 0) a.first_z = z;
    a.last_z = z;
    ++a.layers;
  };

  std::vector<Polyline> below;
  for (int i = 0; i < n; ++i) {
    double z = i * h;
    std::vector<Polyline> here;
    for (std::size_t e = 0; e < comp.elements.size(); ++e) {
      for (const auto& prim : comp.elements[e].cross_section(z)) {
        if (prim.min_feature() < rules.min_feature) note(ViolationKind::MinFeature, e, z);
        Polyline outline = prim.outline();
        if (z > kZEps) {
          double worst = 0.0;
          for (Eigen::Index k = 0; k + 1 < outline.cols(); ++k) {
            worst = std::max(worst, distance_to_region(outline.col(k), below));
          }
          if (worst > allowed) note(ViolationKind::Overhang, e, z);
        }
        here.push_back(std::move(outline));
      }
    }
    below = std::move(here);
  }

  auto um = [](double z) { return format_real(std::round(z * 1e6) / 1e6); };
  ManufacturabilityReport report;
  for (const auto& [key, a] : found) {
    auto kind = static_cast<ViolationKind>(key.first);
    const std::string& label = comp.elements[key.second].solid.label;
    std::string what = kind == ViolationKind::MinFeature
                           ? "feature thinner than " + format_real(rules.min_feature) + " mm"
                           : "unsupported overhang beyond " + format_real(rules.max_overhang_deg) + " deg";
    report.violations.push_back({kind, key.second, a.first_z, a.last_z, a.layers,
                                 what + " on element " + std::to_string(key.second) + " (" + label + ") from z=" +
                                     um(a.first_z) + " to z=" + um(a.last_z)});
  }
  return report;
}

// ---------------------------------------------------------------------------
// Slicing and emission

double Toolpath::total_length() const {
  double total = 0.0;
  for (const auto& layer : layers) {
    for (const auto& p : layer.polylines) total += polyline_length(p);
  }
  return total;
}

double extrusion_for(double length, double layer_height, double line_width, double filament_diameter) {
  double r = filament_diameter / 2.0;
  return length * (layer_height * line_width) / (std::numbers::pi * r * r);
}

Toolpath slice_to_toolpath(const Composition3D& comp, double layer_height, double line_width,
                           double filament_diameter) {
  if (!(layer_height > 0.0) || !(line_width > 0.0) || !(filament_diameter > 0.0)) {
    throw GeometryError("layer height, line width and filament diameter must be positive");
  }
  Toolpath tp;
  tp.layer_height = layer_height;
  tp.line_width = line_width;
  tp.filament_diameter = filament_diameter;

  const int n = layer_count(comp.bounding_box.max().z(), layer_height);
  for (int i = 0; i < n; ++i) {
    double z = i * layer_height;
    ToolpathLayer layer{(i + 1) * layer_height, {}};
    for (const auto& e : comp.elements) {
      for (const auto& prim : e.cross_section(z)) layer.polylines.push_back(prim.outline());
    }
    if (!layer.polylines.empty()) tp.layers.push_back(std::move(layer));
  }
  if (tp.layers.empty()) throw GeometryError("composition has an empty cross-section at every layer");

  ManufacturingRules rules;
  rules.layer_height = layer_height;
  for (const auto& v : manufacturability_check(comp, rules).violations) {
    if (v.kind == ViolationKind::Overhang) tp.warnings.push_back("needs support: " + v.message);
  }
  return tp;
}

gcode::Program toolpath_to_gcode(const Toolpath& tp, const EmitConfig& cfg) {
  using gcode::make_command;
  gcode::Program prog;
  prog.source_name = "toolpath";
  auto& out = prog.commands;

  out.push_back(make_command('G', 28));
  out.push_back(make_command('M', 104, {{'S', cfg.hotend_temp}}));
  out.push_back(make_command('M', 109, {{'S', cfg.hotend_temp}}));
  out.push_back(make_command('M', 106, {{'S', static_cast<double>(cfg.fan_pwm)}}));
  out.push_back(make_command('G', 92, {{'E', 0.0}}));

  double e = 0.0;
  for (std::size_t li = 0; li < tp.layers.size(); ++li) {
    const auto& layer = tp.layers[li];
    bool first_in_layer = true;
    for (const auto& poly : layer.polylines) {
      auto travel = make_command('G', 0, {{'X', poly(0, 0)}, {'Y', poly(1, 0)}, {'Z', layer.z}, {'F', cfg.travel_feed}});
      if (first_in_layer) travel.comment = "layer " + std::to_string(li);
      first_in_layer = false;
      out.push_back(std::move(travel));
      for (Eigen::Index k = 1; k < poly.cols(); ++k) {
        double len = (poly.col(k) - poly.col(k - 1)).norm();
        double de = extrusion_for(len, tp.layer_height, tp.line_width, tp.filament_diameter);
        if (!std::isfinite(de)) throw GeometryError("non-finite extrusion on layer " + std::to_string(li));
        e += de;
        gcode::Params params{{'X', poly(0, k)}, {'Y', poly(1, k)}, {'E', e}};
        if (k == 1) params['F'] = cfg.print_feed;
        out.push_back(make_command('G', 1, std::move(params)));
      }
    }
  }
  out.push_back(make_command('M', 104, {{'S', 0.0}}));
  out.push_back(make_command('M', 106, {{'S', 0.0}}));
  return prog;
}

// ---------------------------------------------------------------------------
// Requests

namespace {

struct ShapeEntry {
  std::string name;
  std::vector<std::string> aliases;
  std::vector<std::string> components;
};

const std::vector<ShapeEntry>& shape_library() {
  static const std::vector<ShapeEntry> lib = {
      {"cone", {"cone"}, {"cone"}},
      {"cylinder", {"cylinder", "rod", "puck"}, {"cylinder"}},
      {"cube", {"cube", "box", "block"}, {"box"}},
      {"sphere", {"sphere", "ball"}, {"sphere"}},
      {"pyramid", {"pyramid"}, {"square frustum"}},
      {"hexagonal prism", {"hexagonal prism", "hex prism", "hexagon"}, {"hexagonal prism"}},
      {"helix", {"helix", "twisted tower", "twisted prism"}, {"twisted rectangle stack"}},
      {"rocket", {"rocket"}, {"cylinder body", "cone nose", "fin array"}},
      {"house", {"house"}, {"box walls", "prism roof"}},
      {"snowman", {"snowman"}, {"sphere base", "sphere body", "sphere head"}},
      {"table", {"table"}, {"box top", "leg array"}},
      {"i-beam", {"i-beam", "i beam", "ibeam"}, {"box flange", "box web", "box flange"}},
      {"llama", {"llama", "alpaca"}, {"body", "neck", "head", "legs", "ears", "tail"}},
      {"sunglasses", {"sunglasses", "glasses"}, {"lens", "lens", "bridge", "temple", "temple"}},
      {"dog", {"dog", "puppy"}, {"body", "head", "legs", "tail", "ears"}},
  };
  return lib;
}

bool starts_with(std::string_view s, std::string_view prefix) { return s.substr(0, prefix.size()) == prefix; }

}  // namespace

std::optional<Decomposition> decompose(const std::string& text) {
  std::string lower = to_lower(text);
  const ShapeEntry* best = nullptr;
  std::size_t best_pos = std::string::npos;
  for (const auto& entry : shape_library()) {
    for (const auto& alias : entry.aliases) {
      std::regex word("\\b" + alias + "s?\\b");
      std::smatch m;
      if (std::regex_search(lower, m, word)) {
        auto pos = static_cast<std::size_t>(m.position(0));
        // Longer aliases win ties at the same position ("hexagonal prism").
        if (!best || pos < best_pos) {
          best = &entry;
          best_pos = pos;
        }
      }
    }
  }
  if (!best) return std::nullopt;
  return Decomposition{best->name, best->components};
}

GeometryRequest classify_request(const std::string& text, bool has_image) {
  static const std::vector<std::string> kPolite = {"please ", "could you ", "can you ", "would you ",
                                                   "i want you to ", "i'd like you to ", "i would like you to "};
  static const std::vector<std::string> kVerbs = {"print",   "3d print", "make",   "build",  "create",
                                                  "fabricate", "produce", "manufacture", "model", "design",
                                                  "generate"};
  GeometryRequest req;
  req.text = text;
  req.has_image = has_image;

  std::string s = to_lower(trim(text));
  for (bool stripped = true; stripped;) {
    stripped = false;
    for (const auto& p : kPolite) {
      if (starts_with(s, p)) {
        s = s.substr(p.size());
        stripped = true;
      }
    }
  }
  for (const auto& v : kVerbs) {
    if (starts_with(s, v) && (s.size() == v.size() || !std::isalpha(static_cast<unsigned char>(s[v.size()])))) {
      req.kind = RequestKind::Geometric;
      break;
    }
  }
  if (req.kind == RequestKind::Geometric) {
    if (auto d = decompose(text)) req.complexity = d->size();
  }
  return req;
}

Branch complexity_gate(const GeometryRequest& request, const Decomposition& decomposition) {
  if (request.has_image) return Branch::GeneratorBranch;
  return decomposition.size() <= kMaxPrimitives ? Branch::PrimitiveBranch : Branch::GeneratorBranch;
}

TriangleMesh CannedShapeGenerator::generate(const GeometryRequest&) {
  TriangleMesh m;
  m.vertices.resize(3, 4);
  m.vertices << 0, 1, 0, 0,
                0, 0, 1, 0,
                0, 0, 0, 1;
  m.faces.resize(3, 4);
  m.faces << 0, 0, 0, 1,
             2, 1, 3, 2,
             1, 3, 2, 3;
  return m;
}

// ---------------------------------------------------------------------------
// Shape library builders

nlohmann::json descriptor_from_text(const std::string& text, const Decomposition& decomposition) {
  static const std::regex kDim(
      R"(\b(radius|diameter|height|width|depth|size|side|length)\s*(?:of|=|:)?\s*(\d+(?:\.\d+)?)\s*(?:mm)?)",
      std::regex::icase);
  nlohmann::json d = {{"shape", decomposition.shape}};
  std::string s = to_lower(text);
  for (std::sregex_iterator it(s.begin(), s.end(), kDim), end; it != end; ++it) {
    std::string key = (*it)[1].str();
    double v = std::stod((*it)[2].str());
    if (key == "diameter") {
      d["radius"] = v / 2.0;
    } else if (key == "side" || key == "length") {
      d["size"] = v;
    } else {
      d[key] = v;
    }
  }
  return d;
}

Composition3D build_shape(const nlohmann::json& descriptor, const Eigen::Vector2d& center,
                          const Eigen::Vector3d& build_volume) {
  const std::string shape = descriptor.value("shape", "");
  auto dim = [&](const char* key, double fallback) {
    double v = descriptor.value(key, fallback);
    if (!(v > 0.0)) throw GeometryError(std::string("dimension ") + key + " must be positive");
    return v;
  };
  auto at = [&](double z) { return Eigen::Vector3d(center.x(), center.y(), z); };

  std::vector<Element> elements;
  if (shape == "cone") {
    elements.push_back({cone(dim("radius", 10.0), dim("height", 10.0)), at(0), 0.0});
  } else if (shape == "cylinder") {
    elements.push_back({cylinder(dim("radius", 10.0), dim("height", 20.0)), at(0), 0.0});
  } else if (shape == "cube") {
    double size = dim("size", 20.0);
    elements.push_back({box(dim("width", size), dim("depth", size), dim("height", size)), at(0), 0.0});
  } else if (shape == "sphere") {
    elements.push_back({sphere(dim("radius", 10.0)), at(0), 0.0});
  } else if (shape == "pyramid") {
    double size = dim("size", 20.0);
    elements.push_back({frustum(rectangle(size, size), dim("height", 15.0), Eigen::Vector2d::Zero(),
                                Eigen::Vector2d::Zero(), "pyramid"),
                        at(0), 0.0});
  } else if (shape == "hexagonal prism") {
    elements.push_back({prism(regular_polygon(6, dim("radius", 10.0)), dim("height", 15.0), "hexagonal prism"), at(0), 0.0});
  } else if (shape == "helix") {
    double height = dim("height", 20.0), h = dim("layer_height", 0.2);
    double w = dim("width", 20.0), d = dim("depth", 8.0);
    double turn = descriptor.value("turn_deg", 90.0) * std::numbers::pi / 180.0;
    auto comp = stack_layers([&](double z) { return rectangle(w, d, Pose2<double>{0.0, 0.0, turn * z / height}); },
                             height, h);
    Element e = comp.elements.front();
    e.solid.label = "twisted stack";
    e.offset = at(0);
    elements.push_back(std::move(e));
  } else if (shape == "rocket") {
    double r = dim("radius", 8.0), body = dim("height", 40.0);
    double nose = descriptor.value("nose_height", body / 2.0);
    double fin_len = descriptor.value("fin_length", 10.0), fin_t = descriptor.value("fin_thickness", 2.0);
    double fin_h = descriptor.value("fin_height", body * 0.375);
    elements.push_back({cylinder(r, body), at(0), 0.0});
    elements.push_back({cone(r, nose), at(body), 0.0});
    Solid fins = frustum(rectangle(fin_len, fin_t, Pose2<double>{r + fin_len / 2.0, 0.0, 0.0}), fin_h,
                         Eigen::Vector2d(0.0, 1.0), Eigen::Vector2d(r, 0.0), "fin array");
    fins.array_count = 3;
    elements.push_back({fins, at(0), 0.0});
  } else if (shape == "house") {
    double w = dim("width", 30.0), d = dim("depth", 30.0), h = dim("height", 20.0);
    elements.push_back({box(w, d, h), at(0), 0.0});
    elements.push_back({frustum(rectangle(w, d), descriptor.value("roof_height", 12.0), Eigen::Vector2d(0.0, 1.0),
                                Eigen::Vector2d::Zero(), "roof"),
                        at(h), 0.0});
  } else if (shape == "snowman") {
    double r = dim("radius", 10.0);
    elements.push_back({sphere(r), at(0), 0.0});
    elements.push_back({sphere(0.7 * r), at(1.8 * r), 0.0});
    elements.push_back({sphere(0.5 * r), at(3.0 * r), 0.0});
  } else if (shape == "table") {
    double w = dim("width", 40.0), h = dim("height", 30.0), leg = descriptor.value("leg", 3.0);
    double top = descriptor.value("top_thickness", 3.0);
    elements.push_back({box(w, w, top), at(h), 0.0});
    double c = w / 2.0 - leg / 2.0;
    Solid legs = prism(rectangle(leg, leg, Pose2<double>{c, c, 0.0}), h, "leg array");
    legs.array_count = 4;
    elements.push_back({legs, at(0), 0.0});
  } else if (shape == "i-beam") {
    double w = dim("width", 30.0), d = dim("depth", 10.0), h = dim("height", 20.0), t = descriptor.value("thickness", 3.0);
    elements.push_back({box(w, d, t), at(0), 0.0});
    elements.push_back({box(t, d, h), at(t), 0.0});
    elements.push_back({box(w, d, t), at(t + h), 0.0});
  } else {
    throw GeometryError("no primitive construction for shape '" + shape + "'");
  }
  return compose(std::move(elements), build_volume);
}

// ---------------------------------------------------------------------------
// Registry

const UsefulFunction& UsefulFunctionRegistry::register_function(const std::string& name,
                                                                 const std::string& request_text,
                                                                 const nlohmann::json& descriptor,
                                                                 const ValidationOutcome& outcome) {
  if (entries_.count(name)) throw GeometryError("useful function '" + name + "' already registered");
  UsefulFunction f{name, request_text, descriptor, outcome.program_ok && outcome.replay_ok};
  return entries_.emplace(name, std::move(f)).first->second;
}

const UsefulFunction* UsefulFunctionRegistry::find(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end() || !it->second.validated) return nullptr;
  return &it->second;
}

std::vector<const UsefulFunction*> UsefulFunctionRegistry::reusable() const {
  std::vector<const UsefulFunction*> out;
  for (const auto& [name, f] : entries_) {
    if (f.validated) out.push_back(&f);
  }
  return out;
}

nlohmann::json UsefulFunctionRegistry::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& [name, f] : entries_) {
    arr.push_back({{"name", f.name}, {"request_text", f.request_text}, {"descriptor", f.descriptor},
                   {"validated", f.validated}});
  }
  return {{"functions", arr}};
}

UsefulFunctionRegistry UsefulFunctionRegistry::from_json(const nlohmann::json& j) {
  UsefulFunctionRegistry reg;
  try {
    for (const auto& e : j.at("functions")) {
      UsefulFunction f{e.at("name").get<std::string>(), e.value("request_text", ""), e.value("descriptor", nlohmann::json::object()),
                       e.value("validated", false)};
      if (!reg.entries_.emplace(f.name, f).second) throw GeometryError("duplicate function " + f.name);
    }
  } catch (const nlohmann::json::exception& e) {
    throw GeometryError(std::string("malformed registry: ") + e.what());
  }
  return reg;
}

void UsefulFunctionRegistry::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw GeometryError("cannot write registry " + path);
  out << to_json().dump(2) << '\n';
}

UsefulFunctionRegistry UsefulFunctionRegistry::load(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const std::exception& e) {
    throw GeometryError(std::string("cannot load registry: ") + e.what());
  }
  return from_json(j);
}

// ---------------------------------------------------------------------------
// Pipeline

PipelineResult run_pipeline(const std::string& text, const gcode::Codebook& codebook, const PipelineOptions& opts,
                            UsefulFunctionRegistry* registry, ShapeGenerator* generator) {
  PipelineResult r;
  r.request = classify_request(text);
  if (r.request.kind != RequestKind::Geometric) {
    r.status = "not a geometric request";
    return r;
  }
  r.decomposition = decompose(text);
  if (!r.decomposition) {
    r.branch = Branch::GeneratorBranch;
  } else {
    r.branch = complexity_gate(r.request, *r.decomposition);
  }
  if (*r.branch == Branch::GeneratorBranch) {
    r.status = "routed to the shape generator";
    if (generator) r.mesh = generator->generate(r.request);
    return r;
  }

  r.descriptor = descriptor_from_text(text, *r.decomposition);
  const std::string fn_name = "make_" + r.decomposition->shape;
  if (registry && r.descriptor.size() == 1) {
    if (const auto* f = registry->find(fn_name)) {
      r.descriptor = f->descriptor;
      r.status = "reused " + fn_name + "; ";
    }
  }
  if (r.decomposition->shape == "helix") r.descriptor["layer_height"] = opts.layer_height;

  const Eigen::Vector2d center = opts.printer.build_volume.head<2>() / 2.0;
  r.composition = build_shape(r.descriptor, center, opts.printer.build_volume);
  r.toolpath = slice_to_toolpath(*r.composition, opts.layer_height, opts.line_width, opts.filament_diameter);
  r.program = toolpath_to_gcode(*r.toolpath, opts.emit);
  r.program->source_name = fn_name;
  r.validation = gcode::validate_program(*r.program, codebook);

  try {
    VirtualPrinter printer(opts.printer);
    r.replay = run_program(printer, *r.program).final_state;
  } catch (const std::exception& e) {
    r.replay_error = e.what();
  }

  ManufacturingRules rules = opts.rules;
  rules.layer_height = opts.layer_height;
  r.manufacturability = manufacturability_check(*r.composition, rules);

  if (registry && !registry->contains(fn_name)) {
    registry->register_function(fn_name, text, r.descriptor,
                                {r.validation.ok(), r.replay.has_value(), r.replay_error});
  }
  r.status += r.printed() ? "printed" : "failed validation";
  return r;
}

}  // namespace cipher::geometry
