#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "cipher/gcode.hpp"

namespace cipher {

struct PrinterConfig {
  Eigen::Vector3d build_volume{220.0, 220.0, 250.0};
  double initial_flow = 100.0;
  double plant_gain = 1.0;
  double thermal_rate = 5.0;   // hotend approach per applied command, degC
  double ambient_temp = 25.0;
  // Multiplicative gain drift per extruding move (0 disables).
  double gain_drift = 0.0;
};

enum class PrinterErrorKind { InvalidConfig, InvalidParameter, OutOfBounds, Unsupported, NoObservation };

class PrinterError : public std::runtime_error {
 public:
  PrinterError(PrinterErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  PrinterErrorKind kind() const { return kind_; }

 private:
  PrinterErrorKind kind_;
};

// What the firmware reports about itself. The plant gain is deliberately
// absent.
struct FirmwareSnapshot {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  double e_position = 0.0;
  double flow_multiplier = 100.0;
  double feed_multiplier = 100.0;
  double feedrate = 1500.0;  // mm/min, last F
  double hotend_target = 0.0;
  double hotend_actual = 25.0;
  int fan_pwm = 0;
  double commanded_e = 0.0;
  double effective_e = 0.0;

  friend bool operator==(const FirmwareSnapshot&, const FirmwareSnapshot&) = default;
};

nlohmann::json to_json(const FirmwareSnapshot& s);

class VirtualPrinter {
 public:
  explicit VirtualPrinter(const PrinterConfig& cfg = {});

  void apply(const gcode::Command& cmd);

  FirmwareSnapshot snapshot() const { return state_; }
  const PrinterConfig& config() const { return cfg_; }

  double flow_multiplier() const { return state_.flow_multiplier; }
  const Eigen::Vector3d& position() const { return state_.position; }
  double commanded_e() const { return state_.commanded_e; }
  double effective_e() const { return state_.effective_e; }

  // True effective flow in percent, flow_multiplier * plant_gain. Requires an
  // extruding move since the last flow change.
  double observed_flow() const;
  bool has_observation() const { return extruded_since_flow_change_; }

  // Test and harness access to the hidden plant. Never part of a snapshot.
  double plant_gain() const { return gain_; }

 private:
  void move(const gcode::Command& cmd);
  void settle_thermal();

  PrinterConfig cfg_;
  FirmwareSnapshot state_;
  Eigen::Vector3d offset_ = Eigen::Vector3d::Zero();  // logical = physical - offset
  double e_offset_ = 0.0;
  double gain_;
  bool extruded_since_flow_change_ = false;
};

struct RunResult {
  FirmwareSnapshot final_state;
  std::vector<FirmwareSnapshot> trace;
};

class RunError : public std::runtime_error {
 public:
  RunError(std::size_t index, const std::string& what)
      : std::runtime_error("command " + std::to_string(index) + ": " + what), index_(index) {}
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

RunResult run_program(VirtualPrinter& printer, const gcode::Program& prog);

std::string trace_to_jsonl(const std::vector<FirmwareSnapshot>& trace);

}  // namespace cipher
