#include <doctest.h>

#include <cmath>
#include <random>

#include "cipher/perception.hpp"
#include "cipher/text.hpp"
#include "support.hpp"

using namespace cipher;
using namespace cipher::perception;

TEST_CASE("classify_flow bands") {
  CHECK(classify_flow(85) == FlowClass::UnderExtrusion);
  CHECK(classify_flow(100) == FlowClass::GoodExtrusion);
  CHECK(classify_flow(115) == FlowClass::OverExtrusion);
  CHECK(classify_flow(90) == FlowClass::GoodExtrusion);
  CHECK(classify_flow(110) == FlowClass::GoodExtrusion);
  CHECK(classify_flow(99, ClassRule::StrictHundred) == FlowClass::UnderExtrusion);
  CHECK(classify_flow(100, ClassRule::StrictHundred) == FlowClass::GoodExtrusion);
  CHECK_THROWS_AS(classify_flow(0), PerceptionError);
  CHECK_THROWS_AS(classify_flow(-3), PerceptionError);
}

TEST_CASE("classify_flow is monotone") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> d(1.0, 400.0);
  for (int i = 0; i < 5000; ++i) {
    double a = d(rng), b = d(rng);
    if (a > b) std::swap(a, b);
    CHECK(static_cast<int>(classify_flow(a)) <= static_cast<int>(classify_flow(b)));
  }
}

TEST_CASE("captions are deterministic and name the right class") {
  auto c = synthesize_caption(300, std::nullopt, 7);
  CHECK(extract_qualitative_class(c.qualitative) == FlowClass::OverExtrusion);
  CHECK(extract_flow_value(c.quantitative) == 300.0);
  CHECK(synthesize_caption(300, std::nullopt, 7) == c);
  auto forced = synthesize_caption(300, FlowClass::UnderExtrusion, 7);
  CHECK(extract_qualitative_class(forced.qualitative) == FlowClass::UnderExtrusion);

  TemplatePools empty;
  CHECK_THROWS_AS(synthesize_caption(100, std::nullopt, 1, empty), PerceptionError);
}

TEST_CASE("caption inverse over a random corpus") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> d(30.0, 300.0);
  for (int i = 0; i < 1000; ++i) {
    double v = std::round(d(rng) * 100.0) / 100.0;
    auto c = synthesize_caption(v, std::nullopt, rng());
    REQUIRE(extract_flow_value(c.text()) == v);
    REQUIRE(extract_qualitative_class(c.text()) == classify_flow(v));
    REQUIRE(alignment_check(v, c.text()));
  }
}

TEST_CASE("template pools load and validate") {
  auto pools = load_template_pools(testing_support::repo_data_path("caption_templates.json"));
  CHECK(pools.quantitative.size() >= 5);
  CHECK(pools.general.size() >= 5);
  CHECK_THROWS_AS(parse_template_pools(R"({"general": []})"), PerceptionError);
  CHECK_THROWS_AS(parse_template_pools(
                      R"({"general": ["a"], "quantitative": ["Flow is 5 {value}%."],
                          "qualitative": {"under": ["under-extrusion"], "good": ["good extrusion"],
                                          "over": ["over-extrusion"]}})"),
                  PerceptionError);
  CHECK_THROWS_AS(parse_template_pools(
                      R"({"general": ["a"], "quantitative": ["Flow is {value}%."],
                          "qualitative": {"under": ["over-extrusion"], "good": ["good extrusion"],
                                          "over": ["over-extrusion"]}})"),
                  PerceptionError);
}

TEST_CASE("extract_flow_value") {
  CHECK(extract_flow_value("The flow rate is currently set at 300%.") == 300.0);
  CHECK(extract_flow_value("flow rate of 92.5 percent") == 92.5);
  CHECK(extract_flow_value("Use M221 to set flow to 87") == 87.0);
  CHECK(extract_flow_value("Layer 3 of 40. The part runs at 120 % flow.") == 120.0);
  CHECK_THROWS_AS(extract_flow_value("no numbers here"), PerceptionError);
  CHECK_THROWS_AS(extract_flow_value("layer 12 done"), PerceptionError);
}

TEST_CASE("extract_qualitative_class") {
  CHECK(extract_qualitative_class("material is over-extruding") == FlowClass::OverExtrusion);
  CHECK(extract_qualitative_class("under-extrusion detected") == FlowClass::UnderExtrusion);
  CHECK(extract_qualitative_class("nominal extrusion") == FlowClass::GoodExtrusion);
  CHECK_THROWS_AS(extract_qualitative_class("under-extrusion or over-extrusion"), PerceptionError);
  CHECK_THROWS_AS(extract_qualitative_class("looks fine"), PerceptionError);
  CHECK(alignment_check(80, "clear under-extrusion"));
  CHECK_FALSE(alignment_check(80, "clear over-extrusion"));
}

TEST_CASE("log codec anchors and round trip") {
  CHECK(encode_log(30) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(encode_log(300) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(encode_log(94.8683)) < 1e-4);
  CHECK_THROWS_AS(encode_log(0), PerceptionError);
  for (int i = 0; i <= 10000; ++i) {
    double v = 30.0 + 270.0 * i / 10000.0;
    REQUIRE(std::abs(decode_log(encode_log(v)) - v) / v <= 1e-9);
  }
}

TEST_CASE("synthetic estimate calibration") {
  EstimatorNoiseModel zero = EstimatorNoiseModel::zero();
  CHECK(synthetic_estimate(123.0, zero, 4) == 123.0);
  EstimatorNoiseModel calibrated;
  CHECK(synthetic_estimate(100.0, calibrated, 9) == synthetic_estimate(100.0, calibrated, 9));

  std::mt19937_64 rng(2024);
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) sum += std::abs(synthetic_estimate(100.0, calibrated, rng()) - 100.0);
  CHECK(sum / n == doctest::Approx(17.52).epsilon(0.02));

  // Monte-Carlo MAE of the uniform model as well.
  EstimatorNoiseModel uni{NoiseDistribution::Uniform, 10.0, 0.0};
  ErrorSampler s(uni);
  double u = 0.0;
  for (int i = 0; i < n; ++i) u += std::abs(s.draw(rng));
  CHECK(u / n == doctest::Approx(10.0).epsilon(0.02));
}

TEST_CASE("estimates are clamped") {
  EstimatorNoiseModel big{NoiseDistribution::Uniform, 500.0, 0.0};
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    double e = synthetic_estimate(2.0, big, seed);
    CHECK(e >= 1.0);
    CHECK(e <= 1000.0);
  }
}
