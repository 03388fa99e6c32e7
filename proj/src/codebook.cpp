#include <cmath>
#include <set>

#include <json.hpp>

#include "cipher/gcode.hpp"
#include "cipher/text.hpp"

namespace cipher::gcode {

using nlohmann::json;

bool is_command_name(std::string_view name) {
  if (name.size() < 2) return false;
  if (name[0] != 'G' && name[0] != 'M') return false;
  for (std::size_t i = 1; i < name.size(); ++i) {
    if (name[i] < '0' || name[i] > '9') return false;
  }
  return true;
}

const CommandDescriptor* Codebook::find(const std::string& name) const {
  auto it = entries.find(name);
  return it == entries.end() ? nullptr : &it->second;
}

const std::vector<CommandDescriptor>& dialect() {
  static const std::vector<CommandDescriptor> table = {
      {"G0", "Linear move without extrusion", "https://marlinfw.org/docs/gcode/G000-G001.html", "", "XYZEF", "", {}},
      {"G1", "Linear move", "https://marlinfw.org/docs/gcode/G000-G001.html", "", "XYZEF", "", {}},
      {"G28", "Auto home", "https://marlinfw.org/docs/gcode/G028.html", "", "XYZ", "", {}},
      {"G92", "Set position", "https://marlinfw.org/docs/gcode/G092.html", "", "XYZE", "", {}},
      {"M104", "Set hotend temperature", "https://marlinfw.org/docs/gcode/M104.html", "", "ST", "S", {}},
      {"M106", "Set fan speed", "https://marlinfw.org/docs/gcode/M106.html", "", "SP", "", {}},
      {"M109", "Wait for hotend temperature", "https://marlinfw.org/docs/gcode/M109.html", "", "ST", "S", {}},
      {"M220", "Set feedrate percentage", "https://marlinfw.org/docs/gcode/M220.html", "", "S", "S", {}},
      {"M221", "Set flow percentage", "https://marlinfw.org/docs/gcode/M221.html", "", "ST", "S", {}},
  };
  return table;
}

const CommandDescriptor* dialect_find(const std::string& name) {
  for (const auto& d : dialect()) {
    if (d.name == name) return &d;
  }
  return nullptr;
}

namespace {

std::string letters_field(const json& value, const std::string& key, const std::string& name) {
  if (!value.contains(key)) return {};
  std::string out;
  const auto& v = value.at(key);
  if (v.is_string()) {
    out = v.get<std::string>();
  } else if (v.is_array()) {
    for (const auto& e : v) out += e.get<std::string>();
  } else {
    throw CodebookError("entry " + name + ": '" + key + "' must be a string or array");
  }
  for (auto& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

Codebook parse_codebook(std::string_view json_text) {
  Codebook book;
  std::set<std::string> seen;
  json::parser_callback_t on_event = [&](int depth, json::parse_event_t event, json& parsed) {
    if (event == json::parse_event_t::key && depth == 1) {
      auto key = parsed.get<std::string>();
      if (!seen.insert(key).second) {
        book.load_warnings.push_back("duplicate codebook key " + key + ": last definition wins");
      }
    }
    return true;
  };

  json doc;
  try {
    doc = json::parse(json_text.begin(), json_text.end(), on_event);
  } catch (const json::parse_error& e) {
    throw CodebookError(std::string("malformed codebook JSON: ") + e.what());
  }
  if (!doc.is_object()) throw CodebookError("codebook root must be a JSON object");

  for (const auto& [key, value] : doc.items()) {
    if (!is_command_name(key)) throw CodebookError("invalid command name '" + key + "'");
    if (!value.is_object()) throw CodebookError("entry " + key + " must be an object");
    if (!value.contains("brief") || !value["brief"].is_string() ||
        value["brief"].get<std::string>().empty()) {
      throw CodebookError("entry " + key + " is missing a brief");
    }
    CommandDescriptor d;
    d.name = key;
    d.brief = value["brief"].get<std::string>();
    d.url = value.value("url", "");
    d.usage_notes = value.value("usage_notes", "");
    d.params = letters_field(value, "params", key);
    d.required = letters_field(value, "required", key);
    book.entries[key] = std::move(d);
  }
  return book;
}

Codebook load_codebook(const std::string& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const std::runtime_error& e) {
    throw CodebookError(e.what());
  }
  return parse_codebook(text);
}

std::size_t ValidationReport::count(IssueKind kind) const {
  std::size_t n = 0;
  for (const auto& i : issues) n += i.kind == kind;
  return n;
}

const char* to_string(IssueKind kind) {
  switch (kind) {
    case IssueKind::UnknownCommand: return "unknown-command";
    case IssueKind::MissingParameter: return "missing-required-parameter";
    case IssueKind::OutOfDialectParameter: return "out-of-dialect-parameter";
    case IssueKind::NonFiniteValue: return "non-finite-value";
    case IssueKind::NegativeZ: return "negative-z";
    case IssueKind::DecreasingZ: return "decreasing-z";
  }
  return "?";
}

ValidationReport validate_program(const Program& prog, const Codebook& codebook) {
  static constexpr std::string_view kCanonical = "XYZEFSTP";
  ValidationReport report;
  double last_z = 0.0;

  for (std::size_t idx = 0; idx < prog.commands.size(); ++idx) {
    const Command& cmd = prog.commands[idx];
    const std::string name = cmd.name();
    const CommandDescriptor* desc = dialect_find(name);
    if (!desc) desc = codebook.find(name);
    if (!desc) {
      report.issues.push_back({idx, IssueKind::UnknownCommand, name + " is not in the dialect or codebook"});
      continue;
    }

    std::string_view allowed = desc->params.empty() ? kCanonical : std::string_view(desc->params);
    for (const auto& [letter, value] : cmd.params) {
      if (allowed.find(letter) == std::string_view::npos) {
        report.issues.push_back({idx, IssueKind::OutOfDialectParameter,
                                 name + " does not take parameter " + std::string(1, letter)});
      }
      if (!std::isfinite(value)) {
        report.issues.push_back({idx, IssueKind::NonFiniteValue,
                                 name + " parameter " + std::string(1, letter) + " is not finite"});
      }
    }
    for (char req : desc->required) {
      if (!cmd.has(req)) {
        report.issues.push_back({idx, IssueKind::MissingParameter,
                                 name + " requires parameter " + std::string(1, req)});
      }
    }

    if (name == "G28") {
      if (cmd.params.empty() || cmd.has('Z')) last_z = 0.0;
    } else if (name == "G92") {
      if (auto z = cmd.get('Z')) last_z = *z;
      else if (cmd.params.empty()) last_z = 0.0;
    } else if (name == "G0" || name == "G1") {
      if (auto z = cmd.get('Z'); z && std::isfinite(*z)) {
        if (*z < 0.0) {
          report.issues.push_back({idx, IssueKind::NegativeZ, name + " moves below Z=0"});
        } else if (*z < last_z) {
          report.issues.push_back({idx, IssueKind::DecreasingZ,
                                   "Z decreases from " + format_real(last_z) + " to " + format_real(*z)});
        }
        last_z = *z;
      }
    }
  }
  return report;
}

}  // namespace cipher::gcode
