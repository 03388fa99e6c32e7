#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "cipher/gcode.hpp"

namespace cipher::rag {

class RagError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual Eigen::VectorXd embed(std::string_view text) const = 0;
  virtual std::string name() const = 0;
};

// Hashed character-trigram frequencies, L2-normalised. Text is lowercased,
// whitespace runs collapse to one space, and one space pads each end.
class TrigramEmbedder final : public EmbeddingProvider {
 public:
  static constexpr int kDimension = 256;

  Eigen::VectorXd embed(std::string_view text) const override;
  std::string name() const override { return "local-trigram-256"; }
};

struct RemoteEmbedderConfig {
  std::string endpoint;  // full URL of the embeddings route
  std::string model;
  std::string api_key;
  double timeout_s = 30.0;

  // EMBED_ENDPOINT, EMBED_MODEL, EMBED_API_KEY.
  static std::optional<RemoteEmbedderConfig> from_env();
};

// Speaks the common embeddings shape: {"model", "input"} in, either
// {"data":[{"embedding":[...]}]} or {"embedding":[...]} out.
class RemoteEmbedder final : public EmbeddingProvider {
 public:
  explicit RemoteEmbedder(RemoteEmbedderConfig cfg);
  Eigen::VectorXd embed(std::string_view text) const override;
  std::string name() const override { return "remote:" + cfg_.model; }

 private:
  RemoteEmbedderConfig cfg_;
};

// Remote provider when EMBED_ENDPOINT is set, local trigram fallback
// otherwise.
std::unique_ptr<EmbeddingProvider> provider_from_env();

double cosine_similarity(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b);

struct Fact {
  std::string id;
  std::string text;
  std::string topic;
  friend bool operator==(const Fact&, const Fact&) = default;
};

struct EmbeddedFact {
  Fact fact;
  Eigen::VectorXd embedding;
};

struct RetrievalConfig {
  int top_n = 5;
  std::optional<double> min_similarity;
};

struct Retrieved {
  Fact fact;
  double similarity;
};

class FactStore {
 public:
  void add(EmbeddedFact f);

  std::size_t size() const { return facts_.size(); }
  bool empty() const { return facts_.empty(); }
  Eigen::Index dimension() const { return dimension_; }
  const EmbeddedFact& operator[](std::size_t i) const { return facts_[i]; }
  const std::vector<EmbeddedFact>& facts() const { return facts_; }

  // Exhaustive scan; descending similarity, ties by ascending id.
  std::vector<Retrieved> search(const Eigen::VectorXd& query, const RetrievalConfig& cfg) const;

  // JSONL with embeddings, one fact per line, in insertion order.
  std::string dump_jsonl() const;

 private:
  std::vector<EmbeddedFact> facts_;
  std::vector<double> norms_;
  std::map<std::string, std::size_t> index_;
  Eigen::Index dimension_ = 0;
};

Eigen::VectorXd embed_text(std::string_view text, const EmbeddingProvider& provider);

// Records: {"id", "text", "topic", "embedding"?}. Missing embeddings are
// computed with the provider.
FactStore ingest_jsonl(std::string_view text, const EmbeddingProvider& provider, FactStore store = {});
FactStore ingest_facts(const std::string& path, const EmbeddingProvider& provider);

std::vector<Retrieved> retrieve_top_n(std::string_view query, const FactStore& store, const RetrievalConfig& cfg,
                                      const EmbeddingProvider& provider);

std::string augment_prompt(std::string_view query, const std::vector<Retrieved>& retrieved);

// Embeds "brief usage_notes" for every entry lacking an embedding.
void embed_codebook(gcode::Codebook& codebook, const EmbeddingProvider& provider);

const gcode::CommandDescriptor& retrieve_gcode_command(std::string_view reasoning, const gcode::Codebook& codebook,
                                                       const EmbeddingProvider& provider);

}  // namespace cipher::rag
