#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cipher::perception {

enum class FlowClass { UnderExtrusion = 0, GoodExtrusion = 1, OverExtrusion = 2 };

// Band: <90 under, [90,110] good, >110 over (captions and default alignment).
// StrictHundred: <100 under, ==100 good, >100 over.
enum class ClassRule { Band, StrictHundred };

const char* to_string(FlowClass c);

class PerceptionError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

FlowClass classify_flow(double value, ClassRule rule = ClassRule::Band);

struct FlowObservation {
  double truth;     // plant's observed flow
  double estimate;  // process-expert output
  double firmware;  // printer belief (flow multiplier)

  friend bool operator==(const FlowObservation&, const FlowObservation&) = default;
};

// ---------------------------------------------------------------------------
// Captions

struct Caption {
  std::string general;
  std::string quantitative;
  std::string qualitative;

  std::string text() const { return general + " " + quantitative + " " + qualitative; }
  friend bool operator==(const Caption&, const Caption&) = default;
};

// Quantitative templates carry exactly one "{value}" placeholder and no other
// digits.
struct TemplatePools {
  std::vector<std::string> general;
  std::vector<std::string> quantitative;
  std::vector<std::string> under;
  std::vector<std::string> good;
  std::vector<std::string> over;

  void validate() const;
};

const TemplatePools& default_template_pools();
TemplatePools parse_template_pools(std::string_view json_text);
TemplatePools load_template_pools(const std::string& path);

Caption synthesize_caption(double value, std::optional<FlowClass> class_override, std::uint64_t seed,
                           const TemplatePools& pools = default_template_pools());

// First number adjacent to a percent marker ("%", "percent") or preceded by a
// flow keyword in the same sentence.
double extract_flow_value(std::string_view text);

FlowClass extract_qualitative_class(std::string_view text);

bool alignment_check(double value, std::string_view text, ClassRule rule = ClassRule::Band);

// ---------------------------------------------------------------------------
// Log-space regression target: 30 -> -1, 300 -> +1.

double encode_log(double value);
double decode_log(double y);

// ---------------------------------------------------------------------------
// Synthetic process expert

enum class NoiseDistribution { FoldedGaussian, Uniform };

struct EstimatorNoiseModel {
  NoiseDistribution distribution = NoiseDistribution::FoldedGaussian;
  double target_mae = 17.52;
  // Error magnitudes are bounded by target_mae + dispersion (folded Gaussian
  // only). Non-positive or infinite means unbounded.
  double dispersion = 28.89;

  static EstimatorNoiseModel zero() { return {NoiseDistribution::FoldedGaussian, 0.0, 0.0}; }
  double error_bound() const;
};

// Draws signed errors whose mean magnitude equals target_mae.
class ErrorSampler {
 public:
  explicit ErrorSampler(const EstimatorNoiseModel& model);

  double draw(std::mt19937_64& rng) const;
  double sigma() const { return sigma_; }

 private:
  EstimatorNoiseModel model_;
  double sigma_ = 0.0;
  double bound_ = 0.0;
};

inline constexpr double kEstimateMin = 1.0;
inline constexpr double kEstimateMax = 1000.0;

double synthetic_estimate(double truth, const EstimatorNoiseModel& noise, std::uint64_t seed);

}  // namespace cipher::perception
