#include "cipher/printer.hpp"

#include <algorithm>
#include <cmath>

namespace cipher {

namespace {
constexpr double kBoundsEps = 1e-9;
}

nlohmann::json to_json(const FirmwareSnapshot& s) {
  return {
      {"x", s.position.x()},
      {"y", s.position.y()},
      {"z", s.position.z()},
      {"e", s.e_position},
      {"flow_multiplier", s.flow_multiplier},
      {"feed_multiplier", s.feed_multiplier},
      {"feedrate", s.feedrate},
      {"hotend_target", s.hotend_target},
      {"hotend_actual", s.hotend_actual},
      {"fan_pwm", s.fan_pwm},
      {"commanded_e", s.commanded_e},
      {"effective_e", s.effective_e},
  };
}

VirtualPrinter::VirtualPrinter(const PrinterConfig& cfg) : cfg_(cfg), gain_(cfg.plant_gain) {
  if (!(cfg.build_volume.array() > 0.0).all() || !cfg.build_volume.allFinite()) {
    throw PrinterError(PrinterErrorKind::InvalidConfig, "build volume components must be positive");
  }
  if (!(cfg.initial_flow > 0.0) || !std::isfinite(cfg.initial_flow)) {
    throw PrinterError(PrinterErrorKind::InvalidConfig, "initial flow must be positive");
  }
  if (!(cfg.plant_gain > 0.0) || !std::isfinite(cfg.plant_gain)) {
    throw PrinterError(PrinterErrorKind::InvalidConfig, "plant gain must be positive");
  }
  if (cfg.thermal_rate < 0.0) {
    throw PrinterError(PrinterErrorKind::InvalidConfig, "thermal rate must be non-negative");
  }
  state_.flow_multiplier = cfg.initial_flow;
  state_.hotend_actual = cfg.ambient_temp;
}

double VirtualPrinter::observed_flow() const {
  if (!extruded_since_flow_change_) {
    throw PrinterError(PrinterErrorKind::NoObservation, "no extrusion since the last flow change");
  }
  return state_.flow_multiplier * gain_;
}

void VirtualPrinter::settle_thermal() {
  double goal = state_.hotend_target > 0.0 ? state_.hotend_target : cfg_.ambient_temp;
  double diff = goal - state_.hotend_actual;
  double step = std::min(std::abs(diff), cfg_.thermal_rate);
  state_.hotend_actual += diff >= 0.0 ? step : -step;
}

void VirtualPrinter::apply(const gcode::Command& cmd) {
  auto require_s = [&](const char* what) {
    auto s = cmd.get('S');
    if (!s) throw PrinterError(PrinterErrorKind::InvalidParameter, cmd.name() + " requires S (" + what + ")");
    return *s;
  };

  settle_thermal();

  if (cmd.letter == 'G') {
    switch (cmd.number) {
      case 0:
      case 1:
        move(cmd);
        return;
      case 28: {
        bool all = !cmd.has('X') && !cmd.has('Y') && !cmd.has('Z');
        for (int axis = 0; axis < 3; ++axis) {
          if (all || cmd.has("XYZ"[axis])) {
            state_.position[axis] = 0.0;
            offset_[axis] = 0.0;
          }
        }
        return;
      }
      case 92: {
        bool all = cmd.params.empty();
        for (int axis = 0; axis < 3; ++axis) {
          char letter = "XYZ"[axis];
          if (all || cmd.has(letter)) {
            double logical = all ? 0.0 : *cmd.get(letter);
            double physical = state_.position[axis] + offset_[axis];
            offset_[axis] = physical - logical;
            state_.position[axis] = logical;
          }
        }
        if (all || cmd.has('E')) {
          state_.e_position = all ? 0.0 : *cmd.get('E');
        }
        return;
      }
      default:
        break;
    }
  } else {
    switch (cmd.number) {
      case 104:
        state_.hotend_target = require_s("target temperature");
        return;
      case 109:
        state_.hotend_target = require_s("target temperature");
        state_.hotend_actual = state_.hotend_target;
        return;
      case 106: {
        double s = cmd.get('S').value_or(255.0);
        state_.fan_pwm = static_cast<int>(std::lround(std::clamp(s, 0.0, 255.0)));
        return;
      }
      case 220: {
        double s = require_s("feed percentage");
        if (!(s > 0.0)) throw PrinterError(PrinterErrorKind::InvalidParameter, "M220 S must be positive");
        state_.feed_multiplier = s;
        return;
      }
      case 221: {
        double s = require_s("flow percentage");
        if (!(s > 0.0)) throw PrinterError(PrinterErrorKind::InvalidParameter, "M221 S must be positive");
        state_.flow_multiplier = s;
        extruded_since_flow_change_ = false;
        return;
      }
      default:
        break;
    }
  }
  throw PrinterError(PrinterErrorKind::Unsupported, "unsupported command " + cmd.name());
}

void VirtualPrinter::move(const gcode::Command& cmd) {
  Eigen::Vector3d target = state_.position;
  for (int axis = 0; axis < 3; ++axis) {
    if (auto v = cmd.get("XYZ"[axis])) target[axis] = *v;
  }
  if (!target.allFinite()) throw PrinterError(PrinterErrorKind::InvalidParameter, "non-finite move target");
  Eigen::Vector3d physical = target + offset_;
  if ((physical.array() < -kBoundsEps).any() ||
      (physical.array() > cfg_.build_volume.array() + kBoundsEps).any()) {
    throw PrinterError(PrinterErrorKind::OutOfBounds, "move outside build volume");
  }
  if (auto f = cmd.get('F')) {
    if (!(*f > 0.0)) throw PrinterError(PrinterErrorKind::InvalidParameter, "feedrate must be positive");
    state_.feedrate = *f;
  }
  state_.position = target;

  if (auto e = cmd.get('E')) {
    if (!std::isfinite(*e)) throw PrinterError(PrinterErrorKind::InvalidParameter, "non-finite E");
    double delta = *e - state_.e_position;
    state_.e_position = *e;
    state_.commanded_e += delta;
    state_.effective_e += delta * state_.flow_multiplier / 100.0 * gain_;
    if (delta != 0.0) {
      extruded_since_flow_change_ = true;
      if (cfg_.gain_drift != 0.0) gain_ *= 1.0 + cfg_.gain_drift;
    }
  }
}

RunResult run_program(VirtualPrinter& printer, const gcode::Program& prog) {
  RunResult result;
  result.trace.reserve(prog.size());
  for (std::size_t i = 0; i < prog.commands.size(); ++i) {
    try {
      printer.apply(prog.commands[i]);
    } catch (const PrinterError& e) {
      throw RunError(i, e.what());
    }
    result.trace.push_back(printer.snapshot());
  }
  result.final_state = printer.snapshot();
  return result;
}

std::string trace_to_jsonl(const std::vector<FirmwareSnapshot>& trace) {
  std::string out;
  for (const auto& s : trace) {
    out += to_json(s).dump();
    out += '\n';
  }
  return out;
}

}  // namespace cipher
