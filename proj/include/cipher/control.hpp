#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "cipher/gcode.hpp"
#include "cipher/perception.hpp"
#include "cipher/printer.hpp"

namespace cipher::control {

class ControlError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Measured timings of the agent loop. Reported alongside results; never
// slept on.
struct LatencyModel {
  double perceive_s = 1.5;
  double perceive_sd = 0.8;
  double act_s = 0.8;
  double act_sd = 0.4;
  double correction_hz = 2.3;
  double correction_hz_sd = 1.2;
};

struct ControlEpisode {
  perception::FlowObservation observation;
  double target = 100.0;
  gcode::Command command;  // the emitted M221
  double post_flow = 0.0;
  double residual = 0.0;   // |post_flow - target|
  // Residual of the unrounded correction under the same observation.
  double ideal_residual = 0.0;

  friend bool operator==(const ControlEpisode&, const ControlEpisode&) = default;
};

enum class FirmwareSource { Snapshot, Synthesized };

struct EpisodeOptions {
  double target = 100.0;
  perception::EstimatorNoiseModel estimator_noise;
  FirmwareSource firmware_source = FirmwareSource::Snapshot;
  perception::EstimatorNoiseModel belief_noise = {perception::NoiseDistribution::Uniform, 17.52, 28.89};
  std::uint64_t seed = 0;
  // Use this estimate instead of drawing one from the estimator.
  std::optional<double> estimate_override;
};

// Firmware belief centred on the estimate, clamped to >= 1.
double synthesize_firmware_belief(double estimate, const perception::EstimatorNoiseModel& noise,
                                  std::uint64_t seed);

// M221 S{N}, N = round(firmware * target / estimate), N >= 1.
gcode::Command compute_correction(double estimate, double firmware, double target);

ControlEpisode run_episode(VirtualPrinter& printer, const EpisodeOptions& opts);

struct BenchmarkConfig {
  int n = 100;
  double range_lo = 30.0;
  double range_hi = 300.0;
  double target = 100.0;
  // Synthesized follows the (estimate, firmware) pair protocol: estimates
  // are sampled, beliefs drawn around them, and the printer runs at the
  // believed multiplier with unit gain. Snapshot samples ground-truth flows,
  // realises them as plant gains and reads the belief from the firmware.
  FirmwareSource mode = FirmwareSource::Synthesized;
  perception::EstimatorNoiseModel estimator_noise;
  perception::EstimatorNoiseModel belief_noise = {perception::NoiseDistribution::Uniform, 17.52, 28.89};
  std::uint64_t seed = 0;
};

struct BenchmarkReport {
  int n = 0;
  double control_mae = 0.0;
  double control_std = 0.0;
  // MAE of the unrounded correction: the error the estimate alone imposes.
  double floor_mae = 0.0;
  double added_error = 0.0;      // control_mae - floor_mae
  double added_error_std = 0.0;  // std of per-episode (residual - ideal_residual)
  double estimator_mae = 0.0;    // mean |estimate - truth|
  double max_gain = 0.0;
  LatencyModel latency;
  std::vector<ControlEpisode> episodes;
};

BenchmarkReport run_benchmark(const BenchmarkConfig& cfg);

nlohmann::json to_json(const BenchmarkReport& report, bool include_episodes = false);

}  // namespace cipher::control
