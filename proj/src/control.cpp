#include "cipher/control.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "cipher/evaluation.hpp"

namespace cipher::control {

using perception::ErrorSampler;

double synthesize_firmware_belief(double estimate, const perception::EstimatorNoiseModel& noise,
                                  std::uint64_t seed) {
  if (!(estimate > 0.0)) throw ControlError("estimate must be positive");
  std::mt19937_64 rng(seed);
  return std::max(1.0, estimate + ErrorSampler(noise).draw(rng));
}

gcode::Command compute_correction(double estimate, double firmware, double target) {
  if (!(estimate > 0.0) || !(firmware > 0.0) || !(target > 0.0)) {
    throw ControlError("correction inputs must be positive");
  }
  double n = std::max(1.0, std::round(firmware * target / estimate));
  return gcode::make_command('M', 221, {{'S', n}});
}

ControlEpisode run_episode(VirtualPrinter& printer, const EpisodeOptions& opts) {
  ControlEpisode ep;
  ep.target = opts.target;
  ep.observation.truth = printer.observed_flow();
  ep.observation.estimate = opts.estimate_override
                                ? *opts.estimate_override
                                : perception::synthetic_estimate(ep.observation.truth, opts.estimator_noise, opts.seed);
  ep.observation.firmware = opts.firmware_source == FirmwareSource::Snapshot
                                ? printer.flow_multiplier()
                                : synthesize_firmware_belief(ep.observation.estimate, opts.belief_noise,
                                                             opts.seed ^ 0x9e3779b97f4a7c15ull);

  ep.command = compute_correction(ep.observation.estimate, ep.observation.firmware, opts.target);
  printer.apply(ep.command);
  // One short extrusion so the corrected flow becomes observable.
  printer.apply(gcode::make_command('G', 1, {{'E', printer.snapshot().e_position + 1.0}}));

  ep.post_flow = printer.observed_flow();
  ep.residual = std::abs(ep.post_flow - opts.target);
  double ideal_multiplier = ep.observation.firmware * opts.target / ep.observation.estimate;
  ep.ideal_residual = std::abs(ideal_multiplier * printer.plant_gain() - opts.target);
  return ep;
}

namespace {

std::vector<double> sample_distinct(std::mt19937_64& rng, int n, double lo, double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::set<double> seen;
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(n));
  while (static_cast<int>(out.size()) < n) {
    double v = d(rng);
    if (seen.insert(v).second) out.push_back(v);
  }
  return out;
}

}  // namespace

BenchmarkReport run_benchmark(const BenchmarkConfig& cfg) {
  if (cfg.n < 1) throw ControlError("benchmark needs n >= 1");
  if (!(cfg.range_lo > 0.0) || !(cfg.range_hi > cfg.range_lo)) throw ControlError("empty sampling range");

  std::mt19937_64 rng(cfg.seed);
  std::vector<double> values = sample_distinct(rng, cfg.n, cfg.range_lo, cfg.range_hi);

  BenchmarkReport report;
  report.n = cfg.n;
  report.episodes.reserve(values.size());

  std::vector<evaluation::RegressionSample> control, ideal, estimator, added;
  for (double v : values) {
    std::uint64_t episode_seed = rng();
    PrinterConfig pc;
    EpisodeOptions opts;
    opts.target = cfg.target;
    opts.estimator_noise = cfg.estimator_noise;
    opts.firmware_source = FirmwareSource::Snapshot;
    opts.seed = episode_seed;

    if (cfg.mode == FirmwareSource::Synthesized) {
      pc.initial_flow = synthesize_firmware_belief(v, cfg.belief_noise, episode_seed);
      pc.plant_gain = 1.0;
      opts.estimate_override = v;
    } else {
      pc.initial_flow = 100.0;
      pc.plant_gain = v / 100.0;
    }

    VirtualPrinter printer(pc);
    printer.apply(gcode::make_command('G', 1, {{'E', 1.0}}));
    report.max_gain = std::max(report.max_gain, printer.plant_gain());

    ControlEpisode ep = run_episode(printer, opts);
    control.push_back({ep.target, ep.post_flow});
    ideal.push_back({0.0, ep.ideal_residual});
    estimator.push_back({ep.observation.truth, ep.observation.estimate});
    added.push_back({0.0, ep.residual - ep.ideal_residual});
    report.episodes.push_back(std::move(ep));
  }

  auto c = evaluation::mae(control);
  report.control_mae = c.mean;
  report.control_std = c.std;
  report.floor_mae = evaluation::mae(ideal).mean;
  report.added_error = report.control_mae - report.floor_mae;
  // Signed per-episode differences: spread around the mean, not |.|.
  double mean_added = 0.0;
  for (const auto& s : added) mean_added += s.y_hat;
  mean_added /= static_cast<double>(added.size());
  double var = 0.0;
  for (const auto& s : added) var += (s.y_hat - mean_added) * (s.y_hat - mean_added);
  report.added_error_std = std::sqrt(var / static_cast<double>(added.size()));
  report.estimator_mae = evaluation::mae(estimator).mean;
  return report;
}

nlohmann::json to_json(const BenchmarkReport& r, bool include_episodes) {
  nlohmann::json j = {
      {"n", r.n},
      {"control_mae", r.control_mae},
      {"control_std", r.control_std},
      {"floor_mae", r.floor_mae},
      {"added_error", r.added_error},
      {"added_error_std", r.added_error_std},
      {"estimator_mae", r.estimator_mae},
      {"max_gain", r.max_gain},
      {"latency_model",
       {{"perceive_s", r.latency.perceive_s},
        {"perceive_sd", r.latency.perceive_sd},
        {"act_s", r.latency.act_s},
        {"act_sd", r.latency.act_sd},
        {"correction_hz", r.latency.correction_hz},
        {"correction_hz_sd", r.latency.correction_hz_sd}}},
  };
  if (include_episodes) {
    auto& arr = j["episodes"] = nlohmann::json::array();
    for (const auto& ep : r.episodes) {
      arr.push_back({{"truth", ep.observation.truth},
                     {"estimate", ep.observation.estimate},
                     {"firmware", ep.observation.firmware},
                     {"command", gcode::serialize_command(ep.command)},
                     {"post_flow", ep.post_flow},
                     {"residual", ep.residual},
                     {"ideal_residual", ep.ideal_residual}});
    }
  }
  return j;
}

}  // namespace cipher::control
