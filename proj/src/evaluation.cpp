#include "cipher/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <tuple>

#include "cipher/perception.hpp"
#include "cipher/text.hpp"

namespace cipher::evaluation {

MeanStd mean_std(std::span<const double> values) {
  if (values.empty()) throw MetricError("mean of an empty sample");
  double sum = 0.0;
  for (double v : values) sum += v;
  double mean = sum / static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  return {mean, std::sqrt(var / static_cast<double>(values.size()))};
}

MeanStd mae(std::span<const RegressionSample> samples) {
  if (samples.empty()) throw MetricError("MAE of an empty sample");
  std::vector<double> abs_err;
  abs_err.reserve(samples.size());
  for (const auto& s : samples) abs_err.push_back(std::abs(s.y_hat - s.y));
  return mean_std(abs_err);
}

// ---------------------------------------------------------------------------

double token_recall(const RecallInput& input) {
  if (input.reference_tokens.empty()) throw MetricError("recall needs at least one reference");
  std::map<std::string, int> predicted;
  for (const auto& t : input.prediction_tokens) ++predicted[t];

  double best = 0.0;
  for (const auto& ref : input.reference_tokens) {
    if (ref.empty()) throw MetricError("reference with zero tokens");
    std::map<std::string, int> available = predicted;
    std::size_t correct = 0;
    for (const auto& t : ref) {
      auto it = available.find(t);
      if (it != available.end() && it->second > 0) {
        --it->second;
        ++correct;
      }
    }
    best = std::max(best, static_cast<double>(correct) / static_cast<double>(ref.size()));
  }
  return best;
}

double token_recall(const std::string& prediction, const std::vector<std::string>& references) {
  RecallInput in;
  in.prediction_tokens = tokenize(prediction);
  for (const auto& r : references) in.reference_tokens.push_back(tokenize(r));
  return token_recall(in);
}

// ---------------------------------------------------------------------------

std::map<std::string, double> ngram_counts(const std::vector<std::string>& tokens, int n) {
  std::map<std::string, double> counts;
  if (n < 1 || tokens.size() < static_cast<std::size_t>(n)) return counts;
  for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= tokens.size(); ++i) {
    std::string g = tokens[i];
    for (int k = 1; k < n; ++k) {
      g += ' ';
      g += tokens[i + static_cast<std::size_t>(k)];
    }
    counts[g] += 1.0;
  }
  return counts;
}

CiderCorpus::CiderCorpus(const std::vector<std::vector<std::string>>& reference_sets, int n_max)
    : documents_(reference_sets.size()), n_max_(n_max) {
  for (const auto& set : reference_sets) {
    std::set<std::string> in_doc;
    for (const auto& ref : set) {
      auto tokens = tokenize(ref);
      for (int n = 1; n <= n_max; ++n) {
        for (const auto& [g, c] : ngram_counts(tokens, n)) in_doc.insert(g);
      }
    }
    for (const auto& g : in_doc) ++df_[g];
  }
}

double CiderCorpus::idf(const std::string& ngram) const {
  auto it = df_.find(ngram);
  double df = it == df_.end() ? 0.0 : static_cast<double>(it->second);
  return std::log(static_cast<double>(documents_) / std::max(1.0, df));
}

namespace {

double weighted_cosine(const std::map<std::string, double>& a, const std::map<std::string, double>& b,
                       CiderWeighting weighting, const CiderCorpus& corpus) {
  auto weight = [&](const std::string& g) { return weighting == CiderWeighting::TfIdf ? corpus.idf(g) : 1.0; };
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (const auto& [g, c] : a) {
    double w = c * weight(g);
    na += w * w;
    if (auto it = b.find(g); it != b.end()) dot += w * it->second * weight(g);
  }
  for (const auto& [g, c] : b) {
    double w = c * weight(g);
    nb += w * w;
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace

double cider(const CiderInput& input, CiderWeighting weighting, const CiderCorpus* corpus) {
  if (input.references.empty()) throw MetricError("CIDEr needs at least one reference");
  if (input.n_max < 1) throw MetricError("CIDEr needs n_max >= 1");
  auto cand = tokenize(input.candidate);
  if (cand.empty()) throw MetricError("empty CIDEr candidate");

  CiderCorpus local;
  if (!corpus) {
    local = CiderCorpus({input.references}, input.n_max);
    corpus = &local;
  }
  std::vector<std::vector<std::string>> refs;
  for (const auto& r : input.references) {
    refs.push_back(tokenize(r));
    if (refs.back().empty()) throw MetricError("empty CIDEr reference");
  }

  double total = 0.0;
  for (int n = 1; n <= input.n_max; ++n) {
    auto gc = ngram_counts(cand, n);
    double sum = 0.0;
    for (const auto& r : refs) sum += weighted_cosine(gc, ngram_counts(r, n), weighting, *corpus);
    total += sum / static_cast<double>(refs.size());
  }
  return total / static_cast<double>(input.n_max);
}

// ---------------------------------------------------------------------------

double alignment_ratio(std::span<const AlignmentSample> samples) {
  if (samples.empty()) throw MetricError("alignment over an empty sample");
  std::size_t correct = 0;
  for (const auto& s : samples) {
    try {
      correct += perception::alignment_check(s.value, s.text);
    } catch (const perception::PerceptionError&) {
      // No single class in the text counts as misaligned.
    }
  }
  return static_cast<double>(correct) / static_cast<double>(samples.size());
}

// ---------------------------------------------------------------------------

double elo_expected(double r, double r_opp) { return 1.0 / (1.0 + std::pow(10.0, (r_opp - r) / 400.0)); }

double elo_update(double rating, double outcome, double opp_rating, double k) {
  if (outcome != 0.0 && outcome != 0.5 && outcome != 1.0) throw MetricError("Elo outcome must be 0, 0.5 or 1");
  if (!(k > 0.0)) throw MetricError("Elo k must be positive");
  return rating + k * (outcome - elo_expected(rating, opp_rating));
}

void elo_match(EloRating& a, EloRating& b, double outcome_a) {
  double ra = a.rating, rb = b.rating;
  a.rating = elo_update(ra, outcome_a, rb, a.k);
  b.rating = elo_update(rb, 1.0 - outcome_a, ra, b.k);
}

const RatingRow& TournamentReport::row(const std::string& competitor) const {
  for (const auto& r : rows) {
    if (r.competitor == competitor) return r;
  }
  throw MetricError("unknown competitor " + competitor);
}

std::string TournamentReport::to_csv() const {
  std::ostringstream out;
  out << "competitor,elo_mean,elo_std";
  std::size_t rounds = rows.empty() ? 0 : rows.front().per_round.size();
  for (std::size_t i = 0; i < rounds; ++i) out << ",round_" << (i + 1);
  out << '\n';
  for (const auto& r : rows) {
    out << r.competitor << ',' << format_real(r.mean) << ',' << format_real(r.std);
    for (double v : r.per_round) out << ',' << format_real(v);
    out << '\n';
  }
  return out.str();
}

nlohmann::json TournamentReport::to_json() const {
  nlohmann::json j;
  j["matches"] = matches;
  j["skipped"] = skipped;
  auto& arr = j["ratings"] = nlohmann::json::array();
  for (const auto& r : rows) {
    arr.push_back({{"competitor", r.competitor}, {"mean", r.mean}, {"std", r.std}, {"rounds", r.per_round}});
  }
  return j;
}

TournamentReport run_tournament(const std::vector<std::string>& competitors,
                                const std::vector<TournamentItem>& items, const Judge& judge, int rounds,
                                std::uint64_t seed) {
  if (competitors.size() < 2) throw MetricError("tournament needs at least two competitors");
  if (rounds < 1) throw MetricError("tournament needs at least one round");
  if (!judge) throw MetricError("tournament needs a judge");

  TournamentReport report;
  std::vector<std::vector<double>> finals(competitors.size());

  for (int round = 0; round < rounds; ++round) {
    std::mt19937_64 rng(seed * 1000003ull + static_cast<std::uint64_t>(round));
    std::vector<EloRating> ratings;
    for (const auto& c : competitors) ratings.push_back({c, kEloInitial, kEloK});

    std::vector<std::size_t> order(items.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);

    for (std::size_t idx : order) {
      const auto& item = items[idx];
      std::vector<std::size_t> eligible;
      for (std::size_t c = 0; c < competitors.size(); ++c) {
        if (item.answers.count(competitors[c])) eligible.push_back(c);
      }
      if (eligible.size() < 2) {
        report.skipped.push_back("round " + std::to_string(round + 1) + ", item " + std::to_string(idx) +
                                 ": fewer than two answers");
        continue;
      }
      std::shuffle(eligible.begin(), eligible.end(), rng);
      std::size_t a = eligible[0], b = eligible[1];
      Verdict v;
      try {
        v = judge(item.question, item.answers.at(competitors[a]), item.answers.at(competitors[b]));
      } catch (const std::exception& e) {
        report.skipped.push_back("round " + std::to_string(round + 1) + ", item " + std::to_string(idx) +
                                 ": judge failed: " + e.what());
        continue;
      }
      double outcome = v == Verdict::A ? 1.0 : v == Verdict::B ? 0.0 : 0.5;
      elo_match(ratings[a], ratings[b], outcome);
      ++report.matches;
    }
    for (std::size_t c = 0; c < competitors.size(); ++c) finals[c].push_back(ratings[c].rating);
  }

  for (std::size_t c = 0; c < competitors.size(); ++c) {
    auto ms = mean_std(finals[c]);
    report.rows.push_back({competitors[c], ms.mean, ms.std, finals[c]});
  }
  return report;
}

Verdict lexical_judge(const std::string& reference, const std::string& answer_a, const std::string& answer_b) {
  auto score = [&](const std::string& answer) {
    if (tokenize(answer).empty()) return 0.0;
    return token_recall(answer, {reference});
  };
  double sa = score(answer_a), sb = score(answer_b);
  if (sa > sb) return Verdict::A;
  if (sb > sa) return Verdict::B;
  return Verdict::Draw;
}

std::vector<TournamentItem> load_tournament_items(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MetricError("cannot open items file " + path);
  std::vector<TournamentItem> items;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      TournamentItem item;
      item.question = j.at("question").get<std::string>();
      item.reference = j.value("reference", "");
      item.answers = j.at("answers").get<std::map<std::string, std::string>>();
      items.push_back(std::move(item));
    } catch (const nlohmann::json::exception& e) {
      throw MetricError("items line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return items;
}

// ---------------------------------------------------------------------------

const char* to_string(Material m) {
  switch (m) {
    case Material::PLA: return "PLA";
    case Material::ABS: return "ABS";
    case Material::TPU: return "TPU";
    case Material::PETG: return "PETG";
  }
  return "?";
}

double nominal_temperature(Material m) {
  switch (m) {
    case Material::PLA: return 200.0;
    case Material::ABS: return 240.0;
    case Material::TPU: return 220.0;
    case Material::PETG: return 235.0;
  }
  return 200.0;
}

bool Scenario::healthy_temperature() const {
  return std::abs(nozzle_temp - nominal_temperature(material)) <= kHealthyTempBand;
}

bool Scenario::healthy_feed() const { return std::abs(feed_rate - 100.0) <= 10.0; }

bool Scenario::healthy_z_offset() const { return std::abs(z_offset) <= 0.05 + 1e-12; }

std::string Scenario::describe() const {
  std::ostringstream out;
  out << "Material: " << to_string(material) << ". Nozzle temperature: " << format_real(nozzle_temp)
      << " C. Feed rate: " << format_real(feed_rate) << "%. Z offset: " << format_real(z_offset)
      << " mm. Flow rate: " << format_real(flow_rate) << "%.";
  return out.str();
}

nlohmann::json to_json(const Scenario& s) {
  return {{"material", to_string(s.material)},
          {"nozzle_temp", s.nozzle_temp},
          {"feed_rate", s.feed_rate},
          {"z_offset", s.z_offset},
          {"flow_rate", s.flow_rate},
          {"healthy", s.healthy()}};
}

std::vector<Scenario> generate_scenarios(int n, std::uint64_t seed) {
  if (n < 0) throw MetricError("scenario count must be non-negative");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> material(0, 3);
  std::bernoulli_distribution coin(0.5);
  std::bernoulli_distribution mostly(0.6);
  std::uniform_int_distribution<int> temp_jitter(-5, 5);
  std::uniform_int_distribution<int> temp_fault(15, 45);
  std::uniform_int_distribution<int> feed(40, 160);
  std::uniform_int_distribution<int> z_hundredths(-30, 40);

  std::set<std::tuple<int, double, double, double>> seen;
  std::vector<Scenario> out;
  while (static_cast<int>(out.size()) < n) {
    Scenario s;
    s.material = static_cast<Material>(material(rng));
    double nominal = nominal_temperature(s.material);
    if (coin(rng)) {
      s.nozzle_temp = nominal + temp_jitter(rng);
    } else {
      s.nozzle_temp = nominal + (coin(rng) ? 1 : -1) * temp_fault(rng);
    }
    s.feed_rate = mostly(rng) ? 100.0 : static_cast<double>(feed(rng));
    s.z_offset = mostly(rng) ? 0.0 : z_hundredths(rng) / 100.0;
    s.flow_rate = 100.0;
    if (seen.emplace(static_cast<int>(s.material), s.nozzle_temp, s.feed_rate, s.z_offset).second) {
      out.push_back(s);
    }
  }
  return out;
}

}  // namespace cipher::evaluation
