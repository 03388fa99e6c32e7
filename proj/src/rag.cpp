#include "cipher/rag.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>

#include <json.hpp>

#include "cipher/http.hpp"
#include "cipher/text.hpp"

namespace cipher::rag {

using nlohmann::json;

Eigen::VectorXd TrigramEmbedder::embed(std::string_view text) const {
  std::string norm = " ";
  bool in_space = true;
  for (char c : text) {
    auto u = static_cast<unsigned char>(c);
    if (std::isspace(u)) {
      if (!in_space) norm.push_back(' ');
      in_space = true;
    } else {
      norm.push_back(static_cast<char>(std::tolower(u)));
      in_space = false;
    }
  }
  if (norm.size() == 1) throw RagError("cannot embed empty text");
  if (norm.back() != ' ') norm.push_back(' ');

  Eigen::VectorXd v = Eigen::VectorXd::Zero(kDimension);
  for (std::size_t i = 0; i + 3 <= norm.size(); ++i) {
    v[static_cast<Eigen::Index>(fnv1a64(std::string_view(norm).substr(i, 3)) % kDimension)] += 1.0;
  }
  return v / v.norm();
}

std::optional<RemoteEmbedderConfig> RemoteEmbedderConfig::from_env() {
  const char* endpoint = std::getenv("EMBED_ENDPOINT");
  if (!endpoint || !*endpoint) return std::nullopt;
  RemoteEmbedderConfig cfg;
  cfg.endpoint = endpoint;
  if (const char* m = std::getenv("EMBED_MODEL")) cfg.model = m;
  if (const char* k = std::getenv("EMBED_API_KEY")) cfg.api_key = k;
  return cfg;
}

RemoteEmbedder::RemoteEmbedder(RemoteEmbedderConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.endpoint.empty()) throw RagError("remote embedder needs an endpoint");
  if (!(cfg_.timeout_s > 0.0)) throw RagError("remote embedder timeout must be positive");
}

Eigen::VectorXd RemoteEmbedder::embed(std::string_view text) const {
  if (trim(text).empty()) throw RagError("cannot embed empty text");
  json body = {{"model", cfg_.model}, {"input", std::string(text)}};
  Headers headers;
  if (!cfg_.api_key.empty()) headers.emplace_back("Authorization", "Bearer " + cfg_.api_key);
  std::string response;
  try {
    response = http_post_json(cfg_.endpoint, body.dump(), headers, cfg_.timeout_s);
  } catch (const HttpError& e) {
    throw RagError(std::string("embedding provider unreachable: ") + e.what());
  }
  std::vector<double> values;
  try {
    auto j = json::parse(response);
    const json& emb = j.contains("data") ? j.at("data").at(0).at("embedding") : j.at("embedding");
    values = emb.get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw RagError(std::string("malformed embedding response: ") + e.what());
  }
  if (values.empty()) throw RagError("embedding provider returned an empty vector");
  Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
  if (!v.allFinite()) throw RagError("embedding provider returned non-finite values");
  return v;
}

std::unique_ptr<EmbeddingProvider> provider_from_env() {
  if (auto cfg = RemoteEmbedderConfig::from_env()) return std::make_unique<RemoteEmbedder>(*cfg);
  return std::make_unique<TrigramEmbedder>();
}

double cosine_similarity(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b) {
  if (a.size() != b.size()) throw RagError("cosine of vectors with different dimensions");
  double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) throw RagError("cosine of a zero vector");
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

Eigen::VectorXd embed_text(std::string_view text, const EmbeddingProvider& provider) {
  if (trim(text).empty()) throw RagError("cannot embed empty text");
  return provider.embed(text);
}

// ---------------------------------------------------------------------------

void FactStore::add(EmbeddedFact f) {
  if (f.fact.text.empty()) throw RagError("fact " + f.fact.id + " has empty text");
  if (index_.count(f.fact.id)) throw RagError("duplicate fact id " + f.fact.id);
  if (!f.embedding.allFinite() || f.embedding.size() == 0) throw RagError("fact " + f.fact.id + " has a bad embedding");
  if (facts_.empty()) {
    dimension_ = f.embedding.size();
  } else if (f.embedding.size() != dimension_) {
    throw RagError("fact " + f.fact.id + " has dimension " + std::to_string(f.embedding.size()) + ", store has " +
                   std::to_string(dimension_));
  }
  double norm = f.embedding.norm();
  if (norm == 0.0) throw RagError("fact " + f.fact.id + " has a zero embedding");

  norms_.push_back(norm);
  index_[f.fact.id] = facts_.size();
  facts_.push_back(std::move(f));
}

std::vector<Retrieved> FactStore::search(const Eigen::VectorXd& query, const RetrievalConfig& cfg) const {
  if (cfg.top_n < 1) throw RagError("top_n must be at least 1");
  if (facts_.empty()) return {};
  if (query.size() != dimension_) throw RagError("query dimension does not match the store");
  double qn = query.norm();
  if (qn == 0.0) throw RagError("zero query vector");

  std::vector<std::pair<double, std::size_t>> scored(facts_.size());
  for (std::size_t i = 0; i < facts_.size(); ++i) {
    scored[i] = {std::clamp(facts_[i].embedding.dot(query) / (norms_[i] * qn), -1.0, 1.0), i};
  }
  auto better = [this](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return facts_[a.second].fact.id < facts_[b.second].fact.id;
  };
  std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(cfg.top_n), scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k), scored.end(), better);

  std::vector<Retrieved> out;
  for (std::size_t i = 0; i < k; ++i) {
    if (cfg.min_similarity && scored[i].first < *cfg.min_similarity) break;
    out.push_back({facts_[scored[i].second].fact, scored[i].first});
  }
  return out;
}

std::string FactStore::dump_jsonl() const {
  std::string out;
  for (const auto& f : facts_) {
    json j = {{"id", f.fact.id}, {"text", f.fact.text}, {"topic", f.fact.topic}};
    j["embedding"] = std::vector<double>(f.embedding.data(), f.embedding.data() + f.embedding.size());
    out += j.dump();
    out += '\n';
  }
  return out;
}

FactStore ingest_jsonl(std::string_view text, const EmbeddingProvider& provider, FactStore store) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    auto nl = text.find('\n');
    std::string_view line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (line.empty()) continue;

    auto fail = [&](const std::string& why) {
      return RagError("fact file line " + std::to_string(line_no) + ": " + why);
    };
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw fail(std::string("malformed JSON: ") + e.what());
    }
    if (!j.is_object()) throw fail("record is not an object");
    if (!j.contains("id") || !j["id"].is_string()) throw fail("record missing id");
    if (!j.contains("text") || !j["text"].is_string() || j["text"].get<std::string>().empty()) {
      throw fail("record missing text");
    }
    EmbeddedFact f;
    f.fact.id = j["id"].get<std::string>();
    f.fact.text = j["text"].get<std::string>();
    f.fact.topic = j.value("topic", "");
    if (j.contains("embedding")) {
      std::vector<double> values;
      try {
        values = j["embedding"].get<std::vector<double>>();
      } catch (const json::exception&) {
        throw fail("embedding is not an array of numbers");
      }
      f.embedding = Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
    } else {
      f.embedding = embed_text(f.fact.text, provider);
    }
    try {
      store.add(std::move(f));
    } catch (const RagError& e) {
      throw fail(e.what());
    }
  }
  return store;
}

FactStore ingest_facts(const std::string& path, const EmbeddingProvider& provider) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const std::runtime_error& e) {
    throw RagError(e.what());
  }
  return ingest_jsonl(text, provider);
}

std::vector<Retrieved> retrieve_top_n(std::string_view query, const FactStore& store, const RetrievalConfig& cfg,
                                      const EmbeddingProvider& provider) {
  if (store.empty()) return {};
  return store.search(embed_text(query, provider), cfg);
}

std::string augment_prompt(std::string_view query, const std::vector<Retrieved>& retrieved) {
  if (retrieved.empty()) return std::string(query);
  std::string out = "Relevant facts:\n";
  for (std::size_t i = 0; i < retrieved.size(); ++i) {
    out += std::to_string(i + 1) + ". " + retrieved[i].fact.text + "\n";
  }
  out += "\n";
  out += query;
  return out;
}

namespace {

std::string descriptor_text(const gcode::CommandDescriptor& d) {
  return d.usage_notes.empty() ? d.brief : d.brief + " " + d.usage_notes;
}

}  // namespace

void embed_codebook(gcode::Codebook& codebook, const EmbeddingProvider& provider) {
  for (auto& [name, d] : codebook.entries) {
    if (!d.embedding) d.embedding = embed_text(descriptor_text(d), provider);
  }
}

const gcode::CommandDescriptor& retrieve_gcode_command(std::string_view reasoning, const gcode::Codebook& codebook,
                                                       const EmbeddingProvider& provider) {
  if (codebook.empty()) throw RagError("empty codebook");
  Eigen::VectorXd q = embed_text(reasoning, provider);
  const gcode::CommandDescriptor* best = nullptr;
  double best_sim = -2.0;
  for (const auto& [name, d] : codebook.entries) {
    Eigen::VectorXd e = d.embedding ? *d.embedding : embed_text(descriptor_text(d), provider);
    double s = cosine_similarity(q, e);
    if (s > best_sim) {
      best_sim = s;
      best = &d;
    }
  }
  return *best;
}

}  // namespace cipher::rag
