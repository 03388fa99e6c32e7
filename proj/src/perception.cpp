#include "cipher/perception.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <limits>
#include <charconv>
#include <cmath>
#include <numbers>
#include <regex>

#include <json.hpp>

#include "cipher/text.hpp"

namespace cipher::perception {

const char* to_string(FlowClass c) {
  switch (c) {
    case FlowClass::UnderExtrusion: return "under-extrusion";
    case FlowClass::GoodExtrusion: return "good extrusion";
    case FlowClass::OverExtrusion: return "over-extrusion";
  }
  return "?";
}

FlowClass classify_flow(double value, ClassRule rule) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw PerceptionError("flow value must be positive and finite");
  }
  double lo = rule == ClassRule::Band ? 90.0 : 100.0;
  double hi = rule == ClassRule::Band ? 110.0 : 100.0;
  if (value < lo) return FlowClass::UnderExtrusion;
  if (value > hi) return FlowClass::OverExtrusion;
  return FlowClass::GoodExtrusion;
}

// ---------------------------------------------------------------------------
// Templates

namespace {

constexpr std::string_view kValueSlot = "{value}";

std::size_t count_occurrences(std::string_view s, std::string_view needle) {
  std::size_t n = 0;
  for (auto pos = s.find(needle); pos != std::string_view::npos; pos = s.find(needle, pos + 1)) ++n;
  return n;
}

bool has_digit(std::string_view s) {
  for (char c : s) {
    if (c >= '0' && c <= '9') return true;
  }
  return false;
}

std::string fill_value(std::string_view tmpl, double value) {
  std::string out(tmpl);
  auto pos = out.find(kValueSlot);
  out.replace(pos, kValueSlot.size(), format_real(value));
  return out;
}

}  // namespace

void TemplatePools::validate() const {
  auto non_empty = [](const std::vector<std::string>& pool, const char* name) {
    if (pool.empty()) throw PerceptionError(std::string("empty template pool: ") + name);
  };
  non_empty(general, "general");
  non_empty(quantitative, "quantitative");
  non_empty(under, "qualitative.under");
  non_empty(good, "qualitative.good");
  non_empty(over, "qualitative.over");

  for (const auto& t : general) {
    if (has_digit(t)) throw PerceptionError("general template contains a digit: " + t);
  }
  for (const auto& t : quantitative) {
    if (count_occurrences(t, kValueSlot) != 1) {
      throw PerceptionError("quantitative template needs exactly one {value}: " + t);
    }
    if (has_digit(t)) throw PerceptionError("quantitative template contains a digit: " + t);
    if (extract_flow_value(fill_value(t, 123.5)) != 123.5) {
      throw PerceptionError("quantitative template does not round-trip its value: " + t);
    }
  }
  auto check_class = [](const std::vector<std::string>& pool, FlowClass expected) {
    for (const auto& t : pool) {
      if (has_digit(t)) throw PerceptionError("qualitative template contains a digit: " + t);
      if (extract_qualitative_class(t) != expected) {
        throw PerceptionError("qualitative template names the wrong class: " + t);
      }
    }
  };
  check_class(under, FlowClass::UnderExtrusion);
  check_class(good, FlowClass::GoodExtrusion);
  check_class(over, FlowClass::OverExtrusion);
}

const TemplatePools& default_template_pools() {
  static const TemplatePools pools = [] {
    TemplatePools p;
    p.general = {
        "This image shows the nozzle of a printer depositing material.",
        "A close-up view of the extruder nozzle during printing.",
        "The printer is laying down a new line of filament.",
        "The camera captures the hot end as material is deposited.",
        "An endoscope view of the nozzle while the part is being printed.",
    };
    p.quantitative = {
        "The flow rate is currently set at {value}%.",
        "Material is being extruded at {value}% of the nominal flow rate.",
        "The extrusion flow rate reads {value}%.",
        "A flow rate of {value} percent is applied to the extruder.",
        "The printer is depositing filament at a flow rate of {value}%.",
        "Current flowrate: {value}%.",
    };
    p.under = {
        "The print is showing signs of under-extrusion.",
        "This indicates under-extrusion.",
        "Too little material is being deposited, which is under-extrusion.",
        "The extruder is under-extruding.",
        "Gaps between the lines suggest under extrusion.",
    };
    p.good = {
        "This is good extrusion.",
        "The deposited lines indicate good extrusion.",
        "The material flow corresponds to nominal extrusion.",
        "Layers are consistent, showing good extrusion.",
        "The bead width is even, a sign of good extrusion.",
    };
    p.over = {
        "The print is showing signs of over-extrusion.",
        "Excess material points to over-extrusion.",
        "The extruder is over-extruding.",
        "Blobs on the surface suggest over extrusion.",
        "This indicates over-extrusion.",
    };
    p.validate();
    return p;
  }();
  return pools;
}

TemplatePools parse_template_pools(std::string_view json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw PerceptionError(std::string("malformed template JSON: ") + e.what());
  }
  TemplatePools p;
  try {
    p.general = doc.at("general").get<std::vector<std::string>>();
    p.quantitative = doc.at("quantitative").get<std::vector<std::string>>();
    const auto& q = doc.at("qualitative");
    p.under = q.at("under").get<std::vector<std::string>>();
    p.good = q.at("good").get<std::vector<std::string>>();
    p.over = q.at("over").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw PerceptionError(std::string("template file schema: ") + e.what());
  }
  p.validate();
  return p;
}

TemplatePools load_template_pools(const std::string& path) { return parse_template_pools(read_file(path)); }

Caption synthesize_caption(double value, std::optional<FlowClass> class_override, std::uint64_t seed,
                           const TemplatePools& pools) {
  FlowClass cls = class_override ? *class_override : classify_flow(value);
  if (pools.general.empty() || pools.quantitative.empty() || pools.under.empty() || pools.good.empty() ||
      pools.over.empty()) {
    throw PerceptionError("empty template pool");
  }
  std::mt19937_64 rng(seed);
  auto pick = [&rng](const std::vector<std::string>& pool) -> const std::string& {
    std::uniform_int_distribution<std::size_t> d(0, pool.size() - 1);
    return pool[d(rng)];
  };
  Caption c;
  c.general = pick(pools.general);
  c.quantitative = fill_value(pick(pools.quantitative), value);
  switch (cls) {
    case FlowClass::UnderExtrusion: c.qualitative = pick(pools.under); break;
    case FlowClass::GoodExtrusion: c.qualitative = pick(pools.good); break;
    case FlowClass::OverExtrusion: c.qualitative = pick(pools.over); break;
  }
  return c;
}

// ---------------------------------------------------------------------------
// Extraction

double extract_flow_value(std::string_view text) {
  static const std::regex kNumber(R"((\d+(?:\.\d+)?))");
  static const std::regex kPercentAfter(R"(^\s*(%|percent\b))", std::regex::icase);
  static const std::regex kFlowBefore(R"(flow)", std::regex::icase);
  constexpr std::size_t kKeywordWindow = 40;

  std::string s(text);
  for (std::sregex_iterator it(s.begin(), s.end(), kNumber), end; it != end; ++it) {
    auto pos = static_cast<std::size_t>(it->position(0));
    auto len = static_cast<std::size_t>(it->length(0));
    // Skip digits glued to a word, e.g. "M221" or "PLA2".
    if (pos > 0 && std::isalpha(static_cast<unsigned char>(s[pos - 1]))) continue;

    bool percent = std::regex_search(s.cbegin() + static_cast<std::ptrdiff_t>(pos + len), s.cend(),
                                     kPercentAfter);
    bool keyword = false;
    if (!percent) {
      std::size_t from = pos > kKeywordWindow ? pos - kKeywordWindow : 0;
      std::string before = s.substr(from, pos - from);
      auto stop = before.find_last_of(".!?");
      // A '.' that is part of a number is not a sentence break.
      while (stop != std::string::npos && stop + 1 < before.size() &&
             std::isdigit(static_cast<unsigned char>(before[stop + 1]))) {
        stop = stop == 0 ? std::string::npos : before.find_last_of(".!?", stop - 1);
      }
      if (stop != std::string::npos) before = before.substr(stop + 1);
      keyword = std::regex_search(before, kFlowBefore);
    }
    if (percent || keyword) {
      double v = 0.0;
      auto [p, ec] = std::from_chars(s.data() + pos, s.data() + pos + len, v, std::chars_format::fixed);
      if (ec == std::errc{}) return v;
    }
  }
  throw PerceptionError("no flow value found in text");
}

FlowClass extract_qualitative_class(std::string_view text) {
  static const std::array<std::pair<FlowClass, std::regex>, 3> kPatterns = {{
      {FlowClass::UnderExtrusion, std::regex(R"(\bunder[\s-]?extru(sion|ding|ded|de)\b)", std::regex::icase)},
      {FlowClass::GoodExtrusion,
       std::regex(R"(\b(good|nominal|normal|optimal|proper)[\s-]?extru(sion|ding)\b)", std::regex::icase)},
      {FlowClass::OverExtrusion, std::regex(R"(\bover[\s-]?extru(sion|ding|ded|de)\b)", std::regex::icase)},
  }};
  std::string s(text);
  std::optional<FlowClass> found;
  for (const auto& [cls, re] : kPatterns) {
    if (std::regex_search(s, re)) {
      if (found) throw PerceptionError("text names more than one extrusion class");
      found = cls;
    }
  }
  if (!found) throw PerceptionError("text names no extrusion class");
  return *found;
}

bool alignment_check(double value, std::string_view text, ClassRule rule) {
  return classify_flow(value, rule) == extract_qualitative_class(text);
}

// ---------------------------------------------------------------------------
// Codec

double encode_log(double value) {
  if (!(value > 0.0) || !std::isfinite(value)) throw PerceptionError("encode_log needs a positive value");
  return 2.0 * std::log10(value / 30.0) - 1.0;
}

double decode_log(double y) { return 30.0 * std::pow(10.0, (y + 1.0) / 2.0); }

// ---------------------------------------------------------------------------
// Noise

double EstimatorNoiseModel::error_bound() const {
  if (distribution == NoiseDistribution::Uniform) return 2.0 * target_mae;
  if (!(dispersion > 0.0) || !std::isfinite(dispersion)) return std::numeric_limits<double>::infinity();
  return target_mae + dispersion;
}

namespace {

// Mean of |X| for X ~ N(0, sigma^2) conditioned on |X| <= b.
double truncated_folded_mean(double sigma, double b) {
  if (!std::isfinite(b)) return sigma * std::sqrt(2.0 / std::numbers::pi);
  double a = b / sigma;
  double mass = std::erf(a / std::numbers::sqrt2);
  return sigma * std::sqrt(2.0 / std::numbers::pi) * (1.0 - std::exp(-0.5 * a * a)) / mass;
}

}  // namespace

ErrorSampler::ErrorSampler(const EstimatorNoiseModel& model) : model_(model), bound_(model.error_bound()) {
  if (!(model.target_mae >= 0.0) || !std::isfinite(model.target_mae)) {
    throw PerceptionError("target MAE must be finite and non-negative");
  }
  if (model.target_mae == 0.0 || model.distribution == NoiseDistribution::Uniform) return;
  if (!std::isfinite(bound_)) {
    sigma_ = model.target_mae * std::sqrt(std::numbers::pi / 2.0);
    return;
  }
  // Truncated mean rises monotonically from 0 to b/2 as sigma grows.
  if (model.target_mae >= bound_ / 2.0) {
    throw PerceptionError("target MAE must be below half the error bound");
  }
  double lo = 1e-9 * bound_, hi = 1.0;
  while (truncated_folded_mean(hi, bound_) < model.target_mae) hi *= 2.0;
  for (int i = 0; i < 200; ++i) {
    double mid = 0.5 * (lo + hi);
    (truncated_folded_mean(mid, bound_) < model.target_mae ? lo : hi) = mid;
  }
  sigma_ = 0.5 * (lo + hi);
}

double ErrorSampler::draw(std::mt19937_64& rng) const {
  if (model_.target_mae == 0.0) return 0.0;
  std::bernoulli_distribution sign;
  double magnitude = 0.0;
  if (model_.distribution == NoiseDistribution::Uniform) {
    magnitude = std::uniform_real_distribution<double>(0.0, bound_)(rng);
  } else {
    std::normal_distribution<double> normal(0.0, sigma_);
    do {
      magnitude = std::abs(normal(rng));
    } while (magnitude > bound_);
  }
  return sign(rng) ? magnitude : -magnitude;
}

double synthetic_estimate(double truth, const EstimatorNoiseModel& noise, std::uint64_t seed) {
  if (!(truth > 0.0)) throw PerceptionError("truth must be positive");
  std::mt19937_64 rng(seed);
  double e = truth + ErrorSampler(noise).draw(rng);
  return std::clamp(e, kEstimateMin, kEstimateMax);
}

}  // namespace cipher::perception
