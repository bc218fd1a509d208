// pentarag: command-line front end (ingest, simulate, report, export-triples,
// gen-dataset, serve).

#include <CLI11.hpp>

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "pentarag/config.hpp"
#include "pentarag/jsonl.hpp"
#include "pentarag/service.hpp"
#include "pentarag/simulator.hpp"

namespace fs = std::filesystem;
using namespace pentarag;

namespace {

Service* g_service = nullptr;

void on_signal(int) {
  if (g_service) g_service->stop();
}

int cmd_ingest(const std::string& config_path, const std::string& input, std::string snapshot_dir, bool lenient) {
  ServiceConfig config = load_service_config(config_path);
  if (snapshot_dir.empty()) snapshot_dir = config.snapshot_dir;
  if (snapshot_dir.empty()) throw Error(ErrorCode::kConfigError, "no snapshot directory given");
  auto embedder = make_embedder(config.embedder);
  const fs::path kb_dir = fs::path(snapshot_dir) / "kb";
  MainKnowledgeBase kb = MainKnowledgeBase::snapshot_exists(kb_dir) ? MainKnowledgeBase::load(kb_dir)
                                                                    : MainKnowledgeBase(embedder->dimension());
  auto stats = kb.ingest_file(input, *embedder, lenient);
  for (const auto& w : stats.warnings) std::cerr << "warning: " << w << '\n';
  kb.save(kb_dir);
  std::cout << "ingested " << stats.parsed << " passages (" << stats.skipped << " skipped); kb size " << kb.size()
            << '\n';
  return 0;
}

int cmd_gen_dataset(std::size_t size, std::uint64_t seed, double known, const std::string& out_dir) {
  auto ds = synthetic_dataset(size, seed, known);
  fs::create_directories(out_dir);
  {
    std::ofstream out(fs::path(out_dir) / "dataset.jsonl", std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIoError, "cannot write " + out_dir);
    write_jsonl(out, ds.items);
  }
  {
    std::ofstream out(fs::path(out_dir) / "corpus.jsonl", std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIoError, "cannot write " + out_dir);
    for (std::size_t i = 0; i < ds.items.size(); ++i) {
      out << Json{{"id", "p" + std::to_string(i)},
                  {"text", ds.items[i].context},
                  {"source", "dataset"},
                  {"answer", ds.items[i].answer}}
                 .dump()
          << '\n';
    }
  }
  ds.pretrained.save(fs::path(out_dir) / "table.jsonl");
  std::cout << "wrote " << ds.items.size() << " items and " << ds.pretrained.size() << " known facts to " << out_dir
            << '\n';
  return 0;
}

int cmd_simulate(const std::string& config_path, const std::string& out_dir, std::optional<std::size_t> sessions,
                 std::optional<std::size_t> queries, std::optional<std::uint64_t> seed) {
  ServiceConfig config = load_service_config(config_path);
  if (sessions) config.simulation.n_sessions = *sessions;
  if (queries) config.simulation.queries_per_session = *queries;
  if (seed) config.simulation.seed = *seed;
  config.simulation.validate();

  auto dataset = load_dataset_source(config.dataset);
  auto embedder = make_embedder(config.embedder);
  MainKnowledgeBase kb(embedder->dimension());
  ingest_dataset(kb, dataset.items, *embedder);
  std::unique_ptr<GenerationBackend> backend;
  if (config.backend.kind == "stub" && config.backend.knowledge_table.empty()) {
    backend = std::make_unique<StubBackend>(std::move(dataset.pretrained));
  } else {
    backend = make_backend(config.backend);
  }
  auto logs = run_simulation(config.simulation, config.router, *embedder, *backend, kb, dataset.items,
                             config.cost_model);
  auto paths = write_session_logs(logs, out_dir);
  std::cout << "wrote " << paths.size() << " session logs of " << config.simulation.queries_per_session
            << " queries to " << out_dir << '\n';
  return 0;
}

int cmd_report(const std::string& config_path, const std::string& log_dir, const std::string& out_dir) {
  ServiceConfig config = load_service_config(config_path);
  auto logs = read_session_logs(log_dir);
  if (logs.empty()) throw Error(ErrorCode::kEmptyTrace, "no session_*.jsonl files in " + log_dir);
  std::vector<std::vector<LogEntry>> sessions;
  for (auto& l : logs) sessions.push_back(std::move(l.entries));
  auto files = write_report(sessions, config.cost_model, out_dir);
  std::cout << "wrote " << files.warmup_csv.string() << ", " << files.boxplot_csv.string() << ", "
            << files.outliers_csv.string() << ", " << files.usage_csv.string() << ", "
            << files.summary_json.string() << '\n';
  return 0;
}

int cmd_export(const std::string& log_path, const std::string& out_path) {
  std::vector<LogEntry> entries;
  if (fs::is_directory(log_path)) {
    for (auto& l : read_session_logs(log_path)) {
      entries.insert(entries.end(), std::make_move_iterator(l.entries.begin()),
                     std::make_move_iterator(l.entries.end()));
    }
  } else {
    entries = read_session_log(log_path).entries;
  }
  auto triples = export_triples(entries);
  std::ofstream out(out_path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + out_path);
  write_jsonl(out, triples);
  std::cout << "exported " << triples.size() << " triples to " << out_path << '\n';
  return 0;
}

int cmd_serve(const std::string& config_path) {
  Service service(load_service_config(config_path));
  int port = service.bind();
  g_service = &service;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cerr << "pentarag: listening on port " << port << " (kb size " << service.kb().size() << ")\n";
  service.run();
  g_service = nullptr;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Five-layer cached retrieval service and simulator"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("-c,--config", config_path, "JSON configuration file")->check(CLI::ExistingFile);

  std::string input, snapshot_dir, out, log_dir;
  bool lenient = false;
  auto* ingest = app.add_subcommand("ingest", "Embed a passages JSONL file into the knowledge-base snapshot");
  ingest->add_option("input", input, "{\"id\",\"text\",\"source\"} per line")->required();
  ingest->add_option("-s,--snapshot-dir", snapshot_dir, "Snapshot directory (overrides config)");
  ingest->add_flag("--lenient", lenient, "Skip malformed lines instead of failing");

  std::size_t size = 2000;
  std::uint64_t gen_seed = 7;
  double known = 0.1;
  auto* gen = app.add_subcommand("gen-dataset", "Write a synthetic QA dataset, corpus and knowledge table");
  gen->add_option("-n,--size", size, "Number of questions");
  gen->add_option("--seed", gen_seed);
  gen->add_option("--known-fraction", known, "Share of questions the stub model knows")->check(CLI::Range(0.0, 1.0));
  gen->add_option("-o,--out", out, "Output directory")->required();

  std::optional<std::size_t> sessions, queries;
  std::optional<std::uint64_t> sim_seed;
  std::string sim_out;
  auto* sim = app.add_subcommand("simulate", "Run the multi-session replay simulation");
  sim->add_option("-o,--out", sim_out, "Directory for session_*.jsonl logs")->required();
  sim->add_option("--sessions", sessions);
  sim->add_option("--queries", queries);
  sim->add_option("--seed", sim_seed);

  std::string report_out;
  auto* report = app.add_subcommand("report", "Write warm-up, latency and usage reports from session logs");
  report->add_option("logs", log_dir, "Directory with session_*.jsonl")->required();
  report->add_option("-o,--out", report_out, "Output directory")->required();

  std::string log_path, triples_out;
  auto* exp = app.add_subcommand("export-triples", "Write (question, context, answer) triples from logs");
  exp->add_option("log", log_path, "Session log file or directory")->required();
  exp->add_option("-o,--out", triples_out, "Output JSONL")->required();

  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  auto* print_config = app.add_subcommand("print-config", "Print the effective configuration");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) return cmd_ingest(config_path, input, snapshot_dir, lenient);
    if (*gen) return cmd_gen_dataset(size, gen_seed, known, out);
    if (*sim) return cmd_simulate(config_path, sim_out, sessions, queries, sim_seed);
    if (*report) return cmd_report(config_path, log_dir, report_out);
    if (*exp) return cmd_export(log_path, triples_out);
    if (*serve) return cmd_serve(config_path);
    if (*print_config) {
      std::cout << service_config_to_json(load_service_config(config_path)).dump(2) << '\n';
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "pentarag: " << error_code_name(e.code()) << ": " << e.detail() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "pentarag: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
