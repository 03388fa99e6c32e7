#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "cipher/agent.hpp"
#include "cipher/config.hpp"
#include "cipher/control.hpp"
#include "cipher/evaluation.hpp"
#include "cipher/gcode.hpp"
#include "cipher/geometry.hpp"
#include "cipher/printer.hpp"
#include "cipher/rag.hpp"
#include "cipher/text.hpp"

using namespace cipher;
using nlohmann::json;

namespace {

const std::string kData = CIPHER_DATA_DIR;

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

std::unique_ptr<rag::EmbeddingProvider> make_embedder(const AppConfig& cfg) {
  if (cfg.embedding) return std::make_unique<rag::RemoteEmbedder>(*cfg.embedding);
  return std::make_unique<rag::TrigramEmbedder>();
}

std::unique_ptr<agent::ChatClient> make_chat(const AppConfig& cfg) {
  if (cfg.chat) return std::make_unique<agent::HttpChatClient>(*cfg.chat);
  return std::make_unique<agent::RuleChatClient>();
}

rag::FactStore load_store(const std::string& path, const rag::EmbeddingProvider& provider) {
  return rag::ingest_facts(path, provider);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Printer agent toolkit: G-code, virtual printer, control loop, retrieval, geometry and evaluation."};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::uint64_t seed = 0;
  app.add_option("--config", config_path, "TOML config file");
  app.add_option("--seed", seed, "Random seed");

  // simulate
  auto* sim = app.add_subcommand("simulate", "Run a G-code file on the virtual printer");
  std::string sim_file, sim_trace;
  std::optional<double> sim_gain, sim_flow;
  sim->add_option("file", sim_file, "G-code file")->required()->check(CLI::ExistingFile);
  sim->add_option("--trace", sim_trace, "Write one firmware snapshot per line (JSONL)");
  sim->add_option("--gain", sim_gain, "Hidden plant gain");
  sim->add_option("--flow", sim_flow, "Initial flow multiplier (percent)");

  // control-bench
  auto* bench = app.add_subcommand("control-bench", "Closed-loop flow correction benchmark");
  control::BenchmarkConfig bench_cfg;
  std::optional<double> noise_mae, noise_dispersion;
  std::string bench_json, bench_mode = "synthesized";
  bool bench_episodes = false;
  bench->add_option("--n", bench_cfg.n, "Episodes")->check(CLI::PositiveNumber);
  bench->add_option("--noise-mae", noise_mae, "Estimator mean absolute error (percent)");
  bench->add_option("--dispersion", noise_dispersion, "Estimator error dispersion (percent)");
  bench->add_option("--target", bench_cfg.target, "Target flow (percent)");
  bench->add_option("--mode", bench_mode, "Firmware value source")->check(CLI::IsMember({"synthesized", "snapshot"}));
  bench->add_option("--json", bench_json, "Write the report as JSON");
  bench->add_flag("--episodes", bench_episodes, "Include per-episode records in the JSON");

  // elo
  auto* elo = app.add_subcommand("elo", "Pairwise Elo tournament over answer sets");
  std::string elo_competitors, elo_items = kData + "/tournament_items.jsonl", elo_csv, elo_json, elo_judge = "lexical";
  int elo_rounds = 3;
  elo->add_option("--competitors", elo_competitors, "Comma-separated competitor names")->required();
  elo->add_option("--items", elo_items, "Items JSONL")->check(CLI::ExistingFile);
  elo->add_option("--rounds", elo_rounds, "Independent rounds")->check(CLI::PositiveNumber);
  elo->add_option("--judge", elo_judge, "Judge")->check(CLI::IsMember({"lexical", "chat"}));
  elo->add_option("--csv", elo_csv, "Write the table as CSV");
  elo->add_option("--json", elo_json, "Write the table as JSON");

  // geometry
  auto* geo = app.add_subcommand("geometry", "Turn a shape request into validated G-code");
  std::string geo_text, geo_out, geo_registry;
  geometry::PipelineOptions geo_opts;
  geo->add_option("text", geo_text, "Request, e.g. \"print a cone\"")->required();
  geo->add_option("--layer-height", geo_opts.layer_height, "Layer height (mm)")->check(CLI::PositiveNumber);
  geo->add_option("--line-width", geo_opts.line_width, "Line width (mm)")->check(CLI::PositiveNumber);
  geo->add_option("--out", geo_out, "Write the G-code here");
  geo->add_option("--registry", geo_registry, "Useful-function registry JSON (read and updated)");

  // rag
  auto* ragc = app.add_subcommand("rag", "Fact store ingestion and retrieval");
  ragc->require_subcommand(1);
  auto* ingest = ragc->add_subcommand("ingest", "Embed a facts JSONL file into a store");
  std::string ingest_file, store_path = "facts_store.jsonl";
  ingest->add_option("file", ingest_file, "Facts JSONL")->required()->check(CLI::ExistingFile);
  ingest->add_option("--store", store_path, "Output store (JSONL with embeddings)");
  auto* query = ragc->add_subcommand("query", "Retrieve the nearest facts");
  std::string query_text, query_store = kData + "/facts_sample.jsonl";
  int query_n = 5;
  query->add_option("text", query_text, "Query")->required();
  query->add_option("--n", query_n, "Number of facts")->check(CLI::PositiveNumber);
  query->add_option("--store", query_store, "Store or facts JSONL")->check(CLI::ExistingFile);

  // gcode validate
  auto* gc = app.add_subcommand("gcode", "G-code utilities");
  gc->require_subcommand(1);
  auto* validate = gc->add_subcommand("validate", "Validate a G-code file against the dialect and codebook");
  std::string validate_file, codebook_path = kData + "/codebook.json";
  validate->add_option("file", validate_file, "G-code file")->required()->check(CLI::ExistingFile);
  validate->add_option("--codebook", codebook_path, "Codebook JSON")->check(CLI::ExistingFile);

  // agent ask
  auto* ag = app.add_subcommand("agent", "Route a request through the agent");
  ag->require_subcommand(1);
  auto* askc = ag->add_subcommand("ask", "Ask the agent");
  std::string ask_text, ask_facts = kData + "/facts_sample.jsonl", ask_audit, ask_codebook = kData + "/codebook.json";
  std::optional<double> ask_gain;
  askc->add_option("text", ask_text, "Request")->required();
  askc->add_option("--facts", ask_facts, "Facts JSONL")->check(CLI::ExistingFile);
  askc->add_option("--codebook", ask_codebook, "Codebook JSON")->check(CLI::ExistingFile);
  askc->add_option("--audit", ask_audit, "Append audit records (JSONL) here");
  askc->add_option("--gain", ask_gain, "Hidden plant gain of the simulated printer");

  CLI11_PARSE(app, argc, argv);

  try {
    AppConfig cfg = config_path.empty() ? AppConfig{} : load_config(config_path);
    cfg.apply_env();

    if (*sim) {
      PrinterConfig pc = cfg.printer;
      if (sim_gain) pc.plant_gain = *sim_gain;
      if (sim_flow) pc.initial_flow = *sim_flow;
      VirtualPrinter printer(pc);
      auto prog = gcode::load_program(sim_file);
      auto result = run_program(printer, prog);
      if (!sim_trace.empty()) write_file(sim_trace, trace_to_jsonl(result.trace));
      std::cout << to_json(result.final_state).dump(2) << '\n';
    } else if (*bench) {
      bench_cfg.seed = seed;
      bench_cfg.estimator_noise = cfg.noise;
      bench_cfg.belief_noise.target_mae = cfg.noise.target_mae;
      bench_cfg.belief_noise.dispersion = cfg.noise.dispersion;
      if (noise_mae) bench_cfg.estimator_noise.target_mae = bench_cfg.belief_noise.target_mae = *noise_mae;
      if (noise_dispersion) bench_cfg.estimator_noise.dispersion = bench_cfg.belief_noise.dispersion = *noise_dispersion;
      bench_cfg.mode = bench_mode == "snapshot" ? control::FirmwareSource::Snapshot : control::FirmwareSource::Synthesized;
      auto report = control::run_benchmark(bench_cfg);
      auto r4 = [](double v) { return format_real(std::round(v * 1e4) / 1e4); };
      std::cout << "episodes        " << report.n << '\n'
                << "control MAE     " << r4(report.control_mae) << " +/- " << r4(report.control_std) << '\n'
                << "floor MAE       " << r4(report.floor_mae) << '\n'
                << "added error     " << r4(report.added_error) << " +/- " << r4(report.added_error_std) << '\n'
                << "estimator MAE   " << r4(report.estimator_mae) << '\n'
                << "max gain        " << r4(report.max_gain) << '\n';
      if (!bench_json.empty()) write_file(bench_json, control::to_json(report, bench_episodes).dump(2) + "\n");
    } else if (*elo) {
      std::vector<std::string> competitors;
      std::stringstream ss(elo_competitors);
      for (std::string c; std::getline(ss, c, ',');) {
        if (!trim(c).empty()) competitors.emplace_back(trim(c));
      }
      auto items = evaluation::load_tournament_items(elo_items);
      std::unique_ptr<agent::ChatClient> client;
      evaluation::Judge judge;
      if (elo_judge == "chat") {
        if (!cfg.chat) throw std::runtime_error("the chat judge needs CHAT_ENDPOINT or a [chat] endpoint");
        client = make_chat(cfg);
        judge = agent::make_chat_judge(*client);
      } else {
        std::map<std::string, std::string> references;
        for (const auto& it : items) references[it.question] = it.reference.empty() ? it.question : it.reference;
        judge = [references](const std::string& q, const std::string& a, const std::string& b) {
          return evaluation::lexical_judge(references.at(q), a, b);
        };
      }
      auto report = evaluation::run_tournament(competitors, items, judge, elo_rounds, seed);
      std::cout << report.to_csv();
      for (const auto& s : report.skipped) std::cerr << "skipped: " << s << '\n';
      if (!elo_csv.empty()) write_file(elo_csv, report.to_csv());
      if (!elo_json.empty()) write_file(elo_json, report.to_json().dump(2) + "\n");
    } else if (*geo) {
      auto codebook = gcode::load_codebook(codebook_path);
      geo_opts.printer = cfg.printer;
      geometry::UsefulFunctionRegistry registry;
      if (!geo_registry.empty() && std::ifstream(geo_registry)) registry = geometry::UsefulFunctionRegistry::load(geo_registry);
      auto r = geometry::run_pipeline(geo_text, codebook, geo_opts, &registry);
      std::cout << "branch: "
                << (!r.branch ? "none" : *r.branch == geometry::Branch::PrimitiveBranch ? "primitive" : "generator")
                << "\nstatus: " << r.status << '\n';
      if (r.decomposition) {
        std::cout << "components (" << r.decomposition->size() << "):";
        for (const auto& c : r.decomposition->components) std::cout << ' ' << c << ';';
        std::cout << '\n';
      }
      if (r.program) {
        std::cout << "layers: " << r.toolpath->layers.size() << "\ncommands: " << r.program->size() << '\n';
        for (const auto& issue : r.validation.issues) std::cout << "invalid: " << issue.message << '\n';
        for (const auto& v : r.manufacturability.violations) std::cout << "warning: " << v.message << '\n';
        if (!r.replay_error.empty()) std::cout << "replay failed: " << r.replay_error << '\n';
        if (!geo_out.empty()) write_file(geo_out, gcode::serialize_program(*r.program));
      }
      if (!geo_registry.empty()) registry.save(geo_registry);
      return r.program && !r.printed() ? 1 : 0;
    } else if (*ingest) {
      auto provider = make_embedder(cfg);
      auto store = load_store(ingest_file, *provider);
      write_file(store_path, store.dump_jsonl());
      std::cout << "ingested " << store.size() << " facts into " << store_path << '\n';
    } else if (*query) {
      auto provider = make_embedder(cfg);
      auto store = load_store(query_store, *provider);
      rag::RetrievalConfig rc;
      rc.top_n = query_n;
      for (const auto& r : rag::retrieve_top_n(query_text, store, rc, *provider)) {
        std::cout << format_real(std::round(r.similarity * 1e4) / 1e4) << '\t' << r.fact.id << '\t' << r.fact.text
                  << '\n';
      }
    } else if (*validate) {
      auto codebook = gcode::load_codebook(codebook_path);
      auto prog = gcode::load_program(validate_file);
      auto report = gcode::validate_program(prog, codebook);
      for (const auto& issue : report.issues) {
        std::cout << validate_file << ": command " << issue.index << ": " << gcode::to_string(issue.kind) << ": "
                  << issue.message << '\n';
      }
      std::cout << (report.ok() ? "ok" : std::to_string(report.issues.size()) + " issue(s)") << '\n';
      return report.ok() ? 0 : 1;
    } else if (*askc) {
      auto provider = make_embedder(cfg);
      auto codebook = gcode::load_codebook(ask_codebook);
      rag::embed_codebook(codebook, *provider);
      auto store = load_store(ask_facts, *provider);
      auto client = make_chat(cfg);
      std::ofstream audit_file;
      std::unique_ptr<agent::AuditLog> audit;
      if (!ask_audit.empty()) {
        audit_file.open(ask_audit, std::ios::app);
        if (!audit_file) throw std::runtime_error("cannot open audit log " + ask_audit);
        audit = std::make_unique<agent::AuditLog>(audit_file);
      }
      agent::AgentContext ctx;
      ctx.codebook = &codebook;
      ctx.store = &store;
      ctx.provider = provider.get();
      ctx.client = client.get();
      ctx.audit = audit.get();
      ctx.printer = cfg.printer;
      if (ask_gain) ctx.printer.plant_gain = *ask_gain;
      ctx.noise = cfg.noise;
      ctx.geometry.printer = cfg.printer;
      ctx.seed = seed;
      auto response = agent::handle({ask_text, std::nullopt, std::nullopt}, ctx);
      std::cout << response.to_json().dump(2) << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
