#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace cipher::evaluation {

class MetricError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Regression

struct RegressionSample {
  double y;      // ground truth
  double y_hat;  // prediction
};

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population
};

MeanStd mae(std::span<const RegressionSample> samples);
MeanStd mean_std(std::span<const double> values);

// ---------------------------------------------------------------------------
// Language recall

struct RecallInput {
  std::vector<std::string> prediction_tokens;
  std::vector<std::vector<std::string>> reference_tokens;
};

// Multiset-matched tokens over reference length, best over references.
double token_recall(const RecallInput& input);
double token_recall(const std::string& prediction, const std::vector<std::string>& references);

// ---------------------------------------------------------------------------
// CIDEr

enum class CiderWeighting { TfIdf, RawFrequency };

// Document frequencies over a corpus of reference sets (one set per image /
// item). IDF(g) = log(N / max(1, df(g))).
class CiderCorpus {
 public:
  CiderCorpus() = default;
  CiderCorpus(const std::vector<std::vector<std::string>>& reference_sets, int n_max = 4);

  double idf(const std::string& ngram) const;
  std::size_t documents() const { return documents_; }
  int n_max() const { return n_max_; }

 private:
  std::map<std::string, std::size_t> df_;
  std::size_t documents_ = 0;
  int n_max_ = 4;
};

struct CiderInput {
  std::string candidate;
  std::vector<std::string> references;
  int n_max = 4;
};

// Per order n: mean over references of the cosine between weighted n-gram
// vectors. Final score: mean over n = 1..n_max. Without a corpus the
// references of this input form a single-document corpus (TfIdf then zeroes
// every shared n-gram; pass a corpus or use RawFrequency).
double cider(const CiderInput& input, CiderWeighting weighting = CiderWeighting::TfIdf,
             const CiderCorpus* corpus = nullptr);

// n-grams of one order, joined with single spaces.
std::map<std::string, double> ngram_counts(const std::vector<std::string>& tokens, int n);

// ---------------------------------------------------------------------------
// Alignment

struct AlignmentSample {
  double value;
  std::string text;
};

double alignment_ratio(std::span<const AlignmentSample> samples);

// ---------------------------------------------------------------------------
// Elo

inline constexpr double kEloInitial = 1200.0;
inline constexpr double kEloK = 16.0;

struct EloRating {
  std::string competitor;
  double rating = kEloInitial;
  double k = kEloK;
};

double elo_expected(double r, double r_opp);

// outcome: 1 win, 0.5 draw, 0 loss.
double elo_update(double rating, double outcome, double opp_rating, double k = kEloK);

// Updates both players from a's perspective.
void elo_match(EloRating& a, EloRating& b, double outcome_a);

enum class Verdict { A, B, Draw };

using Judge = std::function<Verdict(const std::string& question, const std::string& answer_a,
                                    const std::string& answer_b)>;

struct TournamentItem {
  std::string question;
  std::string reference;  // optional, used by lexical judges
  std::map<std::string, std::string> answers;  // competitor -> answer
};

struct RatingRow {
  std::string competitor;
  double mean = kEloInitial;
  double std = 0.0;
  std::vector<double> per_round;
};

struct TournamentReport {
  std::vector<RatingRow> rows;  // in competitor input order
  std::size_t matches = 0;
  std::vector<std::string> skipped;  // judge failures, one message each

  const RatingRow& row(const std::string& competitor) const;
  std::string to_csv() const;
  nlohmann::json to_json() const;
};

// Each round starts every competitor at 1200 and judges one random blind
// pair per item (item order shuffled). Rounds are independent; the table
// reports mean and population std of the final ratings across rounds.
TournamentReport run_tournament(const std::vector<std::string>& competitors,
                                const std::vector<TournamentItem>& items, const Judge& judge, int rounds,
                                std::uint64_t seed);

// Picks the answer with the higher token recall against the item reference
// (or question when no reference); ties are draws.
Verdict lexical_judge(const std::string& reference, const std::string& answer_a, const std::string& answer_b);

std::vector<TournamentItem> load_tournament_items(const std::string& path);

// ---------------------------------------------------------------------------
// Emergent-behaviour scenarios

enum class Material { PLA, ABS, TPU, PETG };

const char* to_string(Material m);
double nominal_temperature(Material m);

struct Scenario {
  double nozzle_temp = 200.0;  // degC
  double feed_rate = 100.0;    // percent
  double z_offset = 0.0;       // mm
  Material material = Material::PLA;
  double flow_rate = 100.0;

  bool healthy_temperature() const;
  bool healthy_feed() const;
  bool healthy_z_offset() const;
  bool healthy() const { return healthy_temperature() && healthy_feed() && healthy_z_offset(); }
  std::string describe() const;

  friend bool operator==(const Scenario&, const Scenario&) = default;
};

inline constexpr double kHealthyTempBand = 5.0;

std::vector<Scenario> generate_scenarios(int n, std::uint64_t seed);

nlohmann::json to_json(const Scenario& s);

}  // namespace cipher::evaluation
