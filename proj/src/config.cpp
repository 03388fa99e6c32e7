#include "cipher/config.hpp"

#include <cstdlib>

#include <toml.hpp>

#include "cipher/text.hpp"

namespace cipher {

namespace {

double positive(const toml::table& t, std::string_view key, double fallback, std::string_view section) {
  double v = t[key].value_or(fallback);
  if (!(v > 0.0)) throw ConfigError("[" + std::string(section) + "] " + std::string(key) + " must be positive");
  return v;
}

}  // namespace

AppConfig parse_config(std::string_view toml_text) {
  toml::table root;
  try {
    root = toml::parse(toml_text);
  } catch (const toml::parse_error& e) {
    std::string where = e.source().begin ? " at line " + std::to_string(e.source().begin.line) : "";
    throw ConfigError("config" + where + ": " + std::string(e.description()));
  }

  AppConfig cfg;
  if (auto* chat = root["chat"].as_table()) {
    agent::ChatClientConfig c;
    c.endpoint_url = (*chat)["endpoint"].value_or(std::string{});
    c.model = (*chat)["model"].value_or(c.model);
    c.temperature = (*chat)["temperature"].value_or(c.temperature);
    c.timeout_s = positive(*chat, "timeout_s", c.timeout_s, "chat");
    if (c.temperature < 0.0) throw ConfigError("[chat] temperature must be non-negative");
    if (!c.endpoint_url.empty()) cfg.chat = c;
  }
  if (auto* emb = root["embedding"].as_table()) {
    rag::RemoteEmbedderConfig e;
    e.endpoint = (*emb)["endpoint"].value_or(std::string{});
    e.model = (*emb)["model"].value_or(std::string{});
    e.timeout_s = positive(*emb, "timeout_s", e.timeout_s, "embedding");
    if (!e.endpoint.empty()) cfg.embedding = e;
  }
  if (auto* noise = root["noise"].as_table()) {
    std::string dist = to_lower((*noise)["distribution"].value_or(std::string("folded-gaussian")));
    if (dist == "folded-gaussian" || dist == "gaussian-folded") {
      cfg.noise.distribution = perception::NoiseDistribution::FoldedGaussian;
    } else if (dist == "uniform") {
      cfg.noise.distribution = perception::NoiseDistribution::Uniform;
    } else {
      throw ConfigError("[noise] unknown distribution '" + dist + "'");
    }
    cfg.noise.target_mae = (*noise)["target_mae"].value_or(cfg.noise.target_mae);
    cfg.noise.dispersion = (*noise)["dispersion"].value_or(cfg.noise.dispersion);
    if (cfg.noise.target_mae < 0.0 || cfg.noise.dispersion < 0.0) throw ConfigError("[noise] values must be non-negative");
  }
  if (auto* pr = root["printer"].as_table()) {
    if (auto* bv = (*pr)["build_volume"].as_array()) {
      if (bv->size() != 3) throw ConfigError("[printer] build_volume needs three numbers");
      for (std::size_t i = 0; i < 3; ++i) {
        auto v = (*bv)[i].value<double>();
        if (!v || !(*v > 0.0)) throw ConfigError("[printer] build_volume entries must be positive numbers");
        cfg.printer.build_volume[static_cast<Eigen::Index>(i)] = *v;
      }
    }
    cfg.printer.initial_flow = positive(*pr, "initial_flow", cfg.printer.initial_flow, "printer");
    cfg.printer.plant_gain = positive(*pr, "plant_gain", cfg.printer.plant_gain, "printer");
    cfg.printer.thermal_rate = positive(*pr, "thermal_rate", cfg.printer.thermal_rate, "printer");
    cfg.printer.ambient_temp = (*pr)["ambient_temp"].value_or(cfg.printer.ambient_temp);
    cfg.printer.gain_drift = (*pr)["gain_drift"].value_or(cfg.printer.gain_drift);
  }
  return cfg;
}

AppConfig load_config(const std::string& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const std::runtime_error& e) {
    throw ConfigError(e.what());
  }
  return parse_config(text);
}

void AppConfig::apply_env() {
  if (auto env = agent::ChatClientConfig::from_env()) {
    if (chat) {
      chat->endpoint_url = env->endpoint_url;
      if (std::getenv("CHAT_MODEL")) chat->model = env->model;
      chat->api_key = env->api_key;
    } else {
      chat = env;
    }
  } else if (chat) {
    if (const char* k = std::getenv("CHAT_API_KEY")) chat->api_key = k;
  }
  if (auto env = rag::RemoteEmbedderConfig::from_env()) {
    if (embedding) {
      embedding->endpoint = env->endpoint;
      if (std::getenv("EMBED_MODEL")) embedding->model = env->model;
      embedding->api_key = env->api_key;
    } else {
      embedding = env;
    }
  } else if (embedding) {
    if (const char* k = std::getenv("EMBED_API_KEY")) embedding->api_key = k;
  }
}

}  // namespace cipher
