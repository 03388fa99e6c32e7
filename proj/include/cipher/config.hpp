#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "cipher/chat.hpp"
#include "cipher/perception.hpp"
#include "cipher/printer.hpp"
#include "cipher/rag.hpp"

namespace cipher {

class ConfigError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// TOML sections: [chat], [embedding], [noise], [printer]. API keys are never
// read from the file; they come from CHAT_API_KEY / EMBED_API_KEY.
struct AppConfig {
  std::optional<agent::ChatClientConfig> chat;
  std::optional<rag::RemoteEmbedderConfig> embedding;
  perception::EstimatorNoiseModel noise;
  PrinterConfig printer;

  // Environment endpoints override the file.
  void apply_env();
};

AppConfig parse_config(std::string_view toml_text);
AppConfig load_config(const std::string& path);

}  // namespace cipher
