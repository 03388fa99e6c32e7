#include <doctest.h>

#include <algorithm>
#include <random>
#include <sstream>
#include <thread>

#include "cipher/rag.hpp"
#include "support.hpp"

#include <httplib.h>
#include <json.hpp>

using namespace cipher;
using namespace cipher::rag;
using testing_support::repo_data_path;

namespace {

std::string random_sentence(std::mt19937_64& rng) {
  static const char* words[] = {"nozzle", "bed",    "layer",  "flow",   "fan",     "retraction", "stringing",
                                "warp",   "PLA",    "ABS",    "PETG",   "TPU",     "temperature", "speed",
                                "bridge", "infill", "wall",   "seam",   "filament", "extruder",  "cooling",
                                "first",  "adhesion", "clog", "gap",    "heat",    "creep",      "ooze"};
  std::uniform_int_distribution<std::size_t> w(0, std::size(words) - 1);
  std::uniform_int_distribution<int> len(4, 14);
  std::string s;
  for (int i = len(rng); i > 0; --i) s += std::string(words[w(rng)]) + " ";
  return s + std::to_string(rng() % 100000);
}

FactStore synthetic_store(std::size_t n, const EmbeddingProvider& p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::ostringstream jsonl;
  for (std::size_t i = 0; i < n; ++i) {
    nlohmann::json j = {{"id", "f" + std::to_string(i)}, {"text", random_sentence(rng)}, {"topic", "t"}};
    jsonl << j.dump() << '\n';
  }
  return ingest_jsonl(jsonl.str(), p);
}

std::vector<std::pair<double, std::string>> brute_force(const FactStore& store, const Eigen::VectorXd& q) {
  std::vector<std::pair<double, std::string>> all;
  for (const auto& f : store.facts()) {
    double c = f.embedding.dot(q) / (f.embedding.norm() * q.norm());
    all.emplace_back(c, f.fact.id);
  }
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  return all;
}

}  // namespace

TEST_CASE("trigram embedder") {
  TrigramEmbedder e;
  auto a = e.embed("Nozzle  Temperature");
  CHECK(a.size() == TrigramEmbedder::kDimension);
  CHECK(a.norm() == doctest::Approx(1.0));
  CHECK(a == e.embed("nozzle temperature"));
  CHECK(cosine_similarity(a, e.embed("nozzle temperature")) == doctest::Approx(1.0));
  CHECK(cosine_similarity(a, e.embed("nozzle temp")) > cosine_similarity(a, e.embed("bed adhesion")));
  CHECK_THROWS_AS(e.embed("   "), RagError);
}

TEST_CASE("cosine similarity") {
  Eigen::VectorXd a(2), b(2), c(2), d(3);
  a << 1, 0;
  b << 0, 1;
  c << -2, 0;
  d << 1, 0, 0;
  CHECK(cosine_similarity(a, b) == doctest::Approx(0.0));
  CHECK(cosine_similarity(a, c) == doctest::Approx(-1.0));
  CHECK(cosine_similarity(a, a * 5) == doctest::Approx(1.0));
  CHECK_THROWS_AS(cosine_similarity(a, d), RagError);
  CHECK_THROWS_AS(cosine_similarity(a, Eigen::VectorXd::Zero(2)), RagError);
}

TEST_CASE("ingest validation names the line") {
  TrigramEmbedder e;
  auto message_for = [&](const std::string& text) {
    try {
      ingest_jsonl(text, e);
    } catch (const RagError& err) {
      return std::string(err.what());
    }
    return std::string();
  };
  CHECK(message_for("{\"id\":\"a\",\"text\":\"x y\"}\n{oops\n").find("line 2") != std::string::npos);
  CHECK(message_for("{\"text\":\"x\"}\n").find("missing id") != std::string::npos);
  CHECK(message_for("{\"id\":\"a\",\"text\":\"\"}\n").find("line 1") != std::string::npos);
  CHECK(message_for("{\"id\":\"a\",\"text\":\"abc\"}\n{\"id\":\"a\",\"text\":\"def\"}\n").find("duplicate") !=
        std::string::npos);
  CHECK(message_for("{\"id\":\"a\",\"text\":\"abc\",\"embedding\":[1,2]}\n{\"id\":\"b\",\"text\":\"d\",\"embedding\":[1,2,3]}\n")
            .find("dimension") != std::string::npos);
  CHECK(message_for("{\"id\":\"a\",\"text\":\"abc\",\"embedding\":[\"x\"]}\n").find("embedding") != std::string::npos);
}

TEST_CASE("re-ingesting a dump reproduces the store") {
  TrigramEmbedder e;
  auto store = ingest_facts(repo_data_path("facts_sample.jsonl"), e);
  CHECK(store.size() == 24);
  auto again = ingest_jsonl(store.dump_jsonl(), e);
  CHECK(again.dump_jsonl() == store.dump_jsonl());
  auto dump = store.dump_jsonl();
  CHECK_THROWS_AS(ingest_jsonl(dump, e, std::move(store)), RagError);
}

TEST_CASE("top-n matches a brute-force scan") {
  TrigramEmbedder e;
  std::mt19937_64 rng(99);
  for (std::size_t n : {std::size_t{10}, std::size_t{100}, std::size_t{3930}}) {
    auto store = synthetic_store(n, e, n);
    CHECK(store.size() == n);
    for (int q = 0; q < 5; ++q) {
      auto query = e.embed(random_sentence(rng));
      auto oracle = brute_force(store, query);
      auto got = store.search(query, {5, std::nullopt});
      REQUIRE(got.size() == std::min<std::size_t>(5, n));
      for (std::size_t i = 0; i < got.size(); ++i) {
        CHECK(got[i].fact.id == oracle[i].second);
        CHECK(got[i].similarity == doctest::Approx(oracle[i].first).epsilon(1e-12));
      }
    }
    // Self-query returns the fact itself at similarity 1.
    const auto& probe = store[n / 2];
    auto self = store.search(probe.embedding, {1, std::nullopt});
    CHECK(self[0].similarity == doctest::Approx(1.0));
    CHECK(e.embed(self[0].fact.text) == probe.embedding);
  }
}

TEST_CASE("threshold and validation") {
  TrigramEmbedder e;
  auto store = ingest_facts(repo_data_path("facts_sample.jsonl"), e);
  auto all = retrieve_top_n("ABS warping and bed adhesion", store, {24, std::nullopt}, e);
  REQUIRE(all.size() == 24);
  const double cut = all[11].similarity;
  auto hits = retrieve_top_n("ABS warping and bed adhesion", store, {24, cut}, e);
  for (const auto& h : hits) CHECK(h.similarity >= cut);
  CHECK(hits.size() >= 12);
  CHECK(hits.size() < 24);
  CHECK_THROWS_AS(store.search(e.embed("x y z"), {0, std::nullopt}), RagError);
  CHECK_THROWS_AS(store.search(Eigen::VectorXd::Ones(3), {5, std::nullopt}), RagError);
  auto prompt = augment_prompt("why does ABS warp?", hits);
  CHECK(prompt.find("why does ABS warp?") != std::string::npos);
  CHECK(prompt.find("1. ") != std::string::npos);
}

TEST_CASE("codebook retrieval finds the flow command") {
  TrigramEmbedder e;
  auto cb = gcode::load_codebook(repo_data_path("codebook.json"));
  embed_codebook(cb, e);
  for (const auto& [name, d] : cb.entries) CHECK(d.embedding.has_value());
  CHECK(retrieve_gcode_command("adjust the extrusion flow percentage", cb, e).name == "M221");
  CHECK(retrieve_gcode_command("set the hotend temperature", cb, e).name.rfind("M10", 0) == 0);
}

TEST_CASE("remote embedder against a local server") {
  httplib::Server server;
  server.Post("/v1/embeddings", [](const httplib::Request& req, httplib::Response& res) {
    auto body = nlohmann::json::parse(req.body);
    std::string input = body["input"];
    if (input == "broken") {
      res.set_content("{\"nothing\":1}", "application/json");
      return;
    }
    nlohmann::json out = {{"data", {{{"embedding", {static_cast<double>(input.size()), 1.0, 0.0}}}}}};
    res.set_content(out.dump(), "application/json");
  });
  int port = server.bind_to_any_port("127.0.0.1");
  std::thread t([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  RemoteEmbedderConfig cfg{"http://127.0.0.1:" + std::to_string(port) + "/v1/embeddings", "test-model", "", 5.0};
  RemoteEmbedder remote(cfg);
  auto v = remote.embed("abcd");
  REQUIRE(v.size() == 3);
  CHECK(v[0] == 4.0);
  CHECK(remote.name() == "remote:test-model");
  CHECK_THROWS_AS(remote.embed("broken"), RagError);

  server.stop();
  t.join();

  CHECK_THROWS_AS(remote.embed("abcd"), RagError);
  CHECK_THROWS_AS(RemoteEmbedder(RemoteEmbedderConfig{}), RagError);
}
