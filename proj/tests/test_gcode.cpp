#include <doctest.h>

#include <random>

#include "cipher/gcode.hpp"
#include "cipher/text.hpp"
#include "support.hpp"

using namespace cipher;
using namespace cipher::gcode;

namespace {

Command parse_command(std::string_view line) { return std::get<Command>(parse_line(line)); }

}  // namespace

TEST_CASE("parse_line reads words, parameters and comments") {
  auto c = parse_command("G1 X10 Y-2.5 E0.1 F1200 ; perimeter");
  CHECK(c.name() == "G1");
  CHECK(c.get('X') == 10.0);
  CHECK(c.get('Y') == -2.5);
  CHECK(c.get('E') == 0.1);
  CHECK(c.get('F') == 1200.0);
  CHECK(c.comment == "perimeter");

  CHECK(std::holds_alternative<Blank>(parse_line("   ")));
  CHECK(std::get<CommentOnly>(parse_line("; hello ")).text == "hello");
  CHECK(parse_command("m221 s95").name() == "M221");
  CHECK(parse_command("G1X10Y20").get('Y') == 20.0);
  CHECK(parse_command("G28\r").params.empty());
}

TEST_CASE("parse_line rejects malformed input with a kind") {
  auto kind_of = [](std::string_view line) {
    try {
      parse_line(line);
    } catch (const ParseError& e) {
      return static_cast<int>(e.kind());
    }
    return -1;
  };
  CHECK(kind_of("G1 X") == static_cast<int>(ParseErrorKind::MalformedParameter));
  CHECK(kind_of("G1 X1.2.3") == static_cast<int>(ParseErrorKind::MalformedParameter));
  CHECK(kind_of("G X1") == static_cast<int>(ParseErrorKind::MalformedNumber));
  CHECK(kind_of("Q1 X1") == static_cast<int>(ParseErrorKind::UnknownLetter));
  CHECK(kind_of("G1 X1 X2") == static_cast<int>(ParseErrorKind::DuplicateParameter));
  CHECK(kind_of("G1 @5") == static_cast<int>(ParseErrorKind::MalformedParameter));
  CHECK(kind_of("G1 Xnan") >= 0);
}

TEST_CASE("parse_program carries the failing line number") {
  try {
    parse_program("G28\nG1 X1\nG1 X1 X1\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
  auto p = parse_program("G28\n\n; only comment\nM104 S200\n");
  CHECK(p.size() == 2);
}

TEST_CASE("serialization uses canonical parameter order") {
  auto c = make_command('G', 1, {{'F', 1200.0}, {'E', 0.5}, {'Y', 2.0}, {'X', 1.0}});
  CHECK(serialize_command(c) == "G1 X1 Y2 E0.5 F1200");
  c.comment = "edge";
  CHECK(serialize_command(c) == "G1 X1 Y2 E0.5 F1200 ; edge");
  CHECK(parameter_rank('X') < parameter_rank('P'));
  CHECK(parameter_rank('P') < parameter_rank('A'));
}

TEST_CASE("round trip on randomized commands") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 10000; ++i) {
    Command c = testing_support::random_command(rng);
    std::string text = serialize_command(c);
    Command back = parse_command(text);
    REQUIRE(back == c);
    REQUIRE(serialize_command(back) == text);
  }
}

TEST_CASE("golden file survives parse and serialize byte for byte") {
  std::string text = read_file(testing_support::data_path("golden_200.gcode"));
  auto prog = parse_program(text, "golden");
  CHECK(prog.size() == 200);
  CHECK(serialize_program(prog) == text);
}

TEST_CASE("codebook parsing") {
  auto cb = parse_codebook(R"({"M221": {"brief": "flow", "params": "ST", "required": ["S"]},
                               "M290": {"brief": "babystep", "usage_notes": "Z in mm"}})");
  REQUIRE(cb.size() == 2);
  CHECK(cb.find("M221")->required == "S");
  CHECK(cb.find("M290")->usage_notes == "Z in mm");
  CHECK(cb.find("G1") == nullptr);

  CHECK_THROWS_AS(parse_codebook(R"({"X1": {"brief": "bad"}})"), CodebookError);
  CHECK_THROWS_AS(parse_codebook(R"({"G1": {}})"), CodebookError);
  CHECK_THROWS_AS(parse_codebook("{not json"), CodebookError);

  auto dup = parse_codebook(R"({"G1": {"brief": "first"}, "G1": {"brief": "second"}})");
  CHECK(dup.find("G1")->brief == "second");
  CHECK(dup.load_warnings.size() == 1);

  auto shipped = load_codebook(testing_support::repo_data_path("codebook.json"));
  CHECK(shipped.size() >= 30);
  CHECK(shipped.find("M999") == nullptr);
}

TEST_CASE("validation flags each issue kind") {
  Codebook cb = parse_codebook(R"({"M290": {"brief": "babystep", "params": "XYZSP"}})");
  auto check = [&](std::string_view text) { return validate_program(parse_program(text), cb); };

  CHECK(check("G28\nG1 Z0.2 X1 E1\nG1 Z0.4\nM290 Z-0.05\n").ok());
  CHECK(check("M999\n").count(IssueKind::UnknownCommand) == 1);
  CHECK(check("M221\n").count(IssueKind::MissingParameter) == 1);
  CHECK(check("M104 X5 S200\n").count(IssueKind::OutOfDialectParameter) == 1);
  CHECK(check("G1 Z-1\n").count(IssueKind::NegativeZ) == 1);
  CHECK(check("G1 Z2\nG1 Z1\n").count(IssueKind::DecreasingZ) == 1);
  CHECK(check("G1 Z2\nG28\nG1 Z1\n").ok());
  CHECK(check("G1 Z2\nG92 Z0.5\nG1 Z1\n").ok());

  Program p{{make_command('G', 1, {{'X', std::numeric_limits<double>::infinity()}})}, ""};
  CHECK(validate_program(p, cb).count(IssueKind::NonFiniteValue) == 1);
}
