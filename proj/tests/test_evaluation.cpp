#include <doctest.h>

#include <set>

#include "cipher/evaluation.hpp"
#include "support.hpp"

using namespace cipher::evaluation;

TEST_CASE("mean absolute error") {
  std::vector<RegressionSample> s = {{100, 110}, {100, 90}, {50, 80}, {200, 200}};
  auto m = mae(s);
  CHECK(m.mean == doctest::Approx(12.5));
  // |errors| = 10 10 30 0, population std about 12.5
  CHECK(m.std == doctest::Approx(std::sqrt((6.25 + 6.25 + 306.25 + 156.25) / 4.0)));
  CHECK_THROWS_AS(mae(std::vector<RegressionSample>{}), MetricError);
}

TEST_CASE("token recall") {
  CHECK(token_recall("the cat", {"the cat sat"}) == doctest::Approx(2.0 / 3.0));
  CHECK(token_recall("the cat sat", {"the cat sat"}) == doctest::Approx(1.0));
  CHECK(token_recall("dog", {"the cat sat", "a dog"}) == doctest::Approx(0.5));
  // Multiset matching: one "the" in the prediction covers one of two.
  CHECK(token_recall("the", {"the the"}) == doctest::Approx(0.5));
}

TEST_CASE("CIDEr against an independent computation") {
  const std::vector<std::vector<std::string>> docs = {
      {"the cat sat on the mat"}, {"a dog ran in the park"}, {"the cat ran home", "a cat is at home"}};
  CiderCorpus corpus(docs, 4);
  CHECK(corpus.documents() == 3);
  CHECK(corpus.idf("the") == 0.0);
  CHECK(corpus.idf("cat") == doctest::Approx(std::log(1.5)));
  CHECK(corpus.idf("unseen") == doctest::Approx(std::log(3.0)));

  struct Row {
    const char* candidate;
    std::size_t doc;
    double n1, n2, n4;
  };
  const Row rows[] = {
      {"the cat ran on the mat", 0, 0.800196987829, 0.658331438630, 0.391665719315},
      {"a cat ran home", 2, 0.771535578843, 0.655445675658, 0.390222837829},
      {"the dog sat in the park", 1, 0.829194403261, 0.614597201630, 0.369798600815},
  };
  for (const auto& r : rows) {
    CAPTURE(r.candidate);
    CHECK(cider({r.candidate, docs[r.doc], 1}, CiderWeighting::TfIdf, &corpus) == doctest::Approx(r.n1).epsilon(1e-9));
    CHECK(cider({r.candidate, docs[r.doc], 2}, CiderWeighting::TfIdf, &corpus) == doctest::Approx(r.n2).epsilon(1e-9));
    CHECK(cider({r.candidate, docs[r.doc], 4}, CiderWeighting::TfIdf, &corpus) == doctest::Approx(r.n4).epsilon(1e-9));
  }
  CHECK(cider({"the cat sat on the mat", docs[0], 4}, CiderWeighting::TfIdf, &corpus) == doctest::Approx(1.0));
  CHECK(cider({"zebra quokka", docs[0], 4}, CiderWeighting::TfIdf, &corpus) == 0.0);
  CHECK(cider({"the cat sat", {"the cat sat"}, 3}, CiderWeighting::RawFrequency) == doctest::Approx(1.0));
  CHECK_THROWS_AS(cider({"x", {}, 4}), MetricError);
}

TEST_CASE("alignment ratio") {
  std::vector<AlignmentSample> s = {{150, "The flow is 150%. This is over-extrusion."},
                                    {70, "The flow is 70%. This is good extrusion."},
                                    {100, "Flow sits at 100 percent, which is good extrusion."},
                                    {50, "No class words here."}};
  CHECK(alignment_ratio(s) == doctest::Approx(0.5));
}

TEST_CASE("Elo updates") {
  CHECK(elo_expected(1200, 1400) == doctest::Approx(0.240253073).epsilon(1e-9));
  CHECK(elo_expected(1200, 1200) == 0.5);
  EloRating a{"a"}, b{"b"};
  elo_match(a, b, 1.0);
  CHECK(a.rating == doctest::Approx(1208.0));
  CHECK(b.rating == doctest::Approx(1192.0));
  elo_match(a, b, 0.5);
  CHECK(a.rating + b.rating == doctest::Approx(2400.0));
  CHECK(a.rating < 1208.0);
}

TEST_CASE("tournaments") {
  std::vector<TournamentItem> items;
  for (int i = 0; i < 20; ++i) {
    items.push_back({"q" + std::to_string(i), "", {{"strong", "S"}, {"weak", "W"}, {"mid", "M"}}});
  }
  Judge dominant = [](const std::string&, const std::string& a, const std::string& b) {
    auto rank = [](const std::string& s) { return s == "S" ? 2 : s == "M" ? 1 : 0; };
    if (rank(a) == rank(b)) return Verdict::Draw;
    return rank(a) > rank(b) ? Verdict::A : Verdict::B;
  };
  auto rep = run_tournament({"strong", "weak", "mid"}, items, dominant, 10, 3);
  CHECK(rep.row("strong").mean > rep.row("mid").mean);
  CHECK(rep.row("mid").mean > rep.row("weak").mean);
  CHECK(rep.row("strong").per_round.size() == 10);
  CHECK(rep.matches == 200);
  double total = 0.0;
  for (const auto& r : rep.rows) total += r.mean;
  CHECK(total == doctest::Approx(3600.0));

  Judge draw = [](const std::string&, const std::string&, const std::string&) { return Verdict::Draw; };
  auto flat = run_tournament({"strong", "weak", "mid"}, items, draw, 5, 3);
  for (const auto& r : flat.rows) {
    CHECK(r.mean == doctest::Approx(1200.0));
    CHECK(r.std == doctest::Approx(0.0));
  }

  auto again = run_tournament({"strong", "weak", "mid"}, items, dominant, 10, 3);
  CHECK(again.to_csv() == rep.to_csv());
  CHECK(rep.to_csv().rfind("competitor", 0) == 0);
  CHECK(rep.to_json()["ratings"].size() == 3);
}

TEST_CASE("lexical judge and item file") {
  CHECK(lexical_judge("ABS prints at 240 C", "ABS at 240 C", "no idea") == Verdict::A);
  CHECK(lexical_judge("ABS prints at 240 C", "nothing", "ABS prints at 240") == Verdict::B);
  CHECK(lexical_judge("ABS", "x", "y") == Verdict::Draw);
  auto items = load_tournament_items(testing_support::repo_data_path("tournament_items.jsonl"));
  CHECK(items.size() == 5);
}

TEST_CASE("emergent-behaviour scenarios") {
  auto s = generate_scenarios(100, 7);
  CHECK(s.size() == 100);
  std::set<Material> materials;
  std::size_t healthy = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    CHECK(s[i].flow_rate == 100.0);
    materials.insert(s[i].material);
    healthy += s[i].healthy();
    for (std::size_t j = 0; j < i; ++j) CHECK_FALSE(s[i] == s[j]);
  }
  CHECK(materials.size() >= 3);
  CHECK(healthy > 0);
  CHECK(healthy < s.size());
  CHECK(generate_scenarios(100, 7) == s);

  Scenario abs;
  abs.material = Material::ABS;
  abs.nozzle_temp = 240.0;
  CHECK(abs.healthy());
  abs.nozzle_temp = 220.0;
  CHECK_FALSE(abs.healthy_temperature());
  CHECK(abs.describe().find("ABS") != std::string::npos);
}
