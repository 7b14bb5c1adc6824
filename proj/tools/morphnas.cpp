#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "morphnas/control/server.hpp"
#include "morphnas/engine/engine.hpp"
#include "morphnas/hresnet/checkpoint.hpp"
#include "morphnas/hresnet/export.hpp"

namespace fs = std::filesystem;
using namespace morphnas;
using engine::json;

namespace {

std::atomic<engine::Engine<float>*> g_engine{nullptr};

extern "C" void on_interrupt(int) {
  if (auto* e = g_engine.load()) e->request_stop();
  // A second interrupt terminates immediately.
  std::signal(SIGINT, SIG_DFL);
  std::signal(SIGTERM, SIG_DFL);
}

std::string timestamp() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  localtime_r(&t, &tm);
  char buf[16];
  std::strftime(buf, sizeof buf, "%H:%M:%S", &tm);
  return buf;
}

engine::RunConfig read_config(const fs::path& path) {
  json doc;
  try {
    doc = json::parse(read_file_text(path));
  } catch (const json::exception& e) {
    throw InvalidArgument(path.string() + ": " + e.what());
  }
  return engine::config_from_json(doc);
}

json read_run_file(const fs::path& dir) {
  const auto path = dir / "run.json";
  if (!fs::exists(path)) throw Error("no run.json in " + dir.string());
  try {
    return json::parse(read_file_text(path));
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

/// A run directory, or the directory holding a checkpoint file.
fs::path run_dir_of(const fs::path& p) { return fs::is_directory(p) ? p : p.parent_path(); }

/// The newest checkpoint recorded for a run directory, or the file itself.
fs::path checkpoint_of(const fs::path& p) {
  if (!fs::is_directory(p)) return p;
  const auto ckpt = read_run_file(p).at("state").at("checkpoint").get<std::string>();
  if (ckpt.empty()) throw Error("run in " + p.string() + " has no checkpoint yet");
  return p / ckpt;
}

struct RunOptions {
  std::string config;
  std::string data;
  std::string meta_file;
  std::string out_dir;
  std::string serve;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> max_iterations;
  bool print_config = false;
  bool quiet = false;
};

int drive(engine::Engine<float>& eng, const RunOptions& o, bool fresh) {
  std::unique_ptr<control::ControlServer> server;
  if (!o.serve.empty()) {
    const auto [host, port] = control::parse_bind_address(o.serve);
    server = std::make_unique<control::ControlServer>(eng.publisher(), eng.paths().meta_file);
    const int bound = server->start(host, port);
    std::cerr << "control API listening on http://" << host << ":" << bound << "\n";
  }
  if (!o.quiet) eng.set_log_sink([](const std::string& line) { std::cerr << "[" << timestamp() << "] " << line << "\n"; });
  if (fresh) eng.init_fresh();
  else eng.resume();

  g_engine.store(&eng);
  std::signal(SIGINT, on_interrupt);
  std::signal(SIGTERM, on_interrupt);
  const auto reason = eng.run(o.max_iterations);
  g_engine.store(nullptr);
  std::signal(SIGINT, SIG_DFL);
  std::signal(SIGTERM, SIG_DFL);

  const auto& h = eng.history();
  std::cout << "stopped: " << engine::to_string(reason) << "\n";
  std::cout << "iterations: " << eng.next_iteration() - 1 << ", epochs: " << eng.epoch()
            << ", params: " << count_params(eng.network()) << ", depth: " << depth(eng.network(), eng.config().search.depth_floor)
            << "\n";
  if (!h.empty()) {
    const auto& e = h.back();
    std::cout << "train loss " << engine::format_real(e.train_loss);
    if (e.train_accuracy) std::cout << " accuracy " << engine::format_real(*e.train_accuracy);
    std::cout << " | test loss " << engine::format_real(e.test_loss);
    if (e.test_accuracy) std::cout << " accuracy " << engine::format_real(*e.test_accuracy);
    std::cout << "\n";
  }
  if (!eng.last_checkpoint().empty()) std::cout << "checkpoint: " << eng.last_checkpoint().string() << "\n";
  return 0;
}

int cmd_run(RunOptions o) {
  engine::RunConfig cfg = o.config.empty() ? engine::RunConfig{} : read_config(o.config);
  if (o.seed) cfg.meta.seed = *o.seed;
  if (o.max_iterations) cfg.search.max_iterations = *o.max_iterations;
  if (!o.data.empty()) cfg.dataset.dir = o.data;
  if (o.print_config) {
    std::cout << engine::to_json(cfg).dump(2) << "\n";
    return 0;
  }
  if (o.config.empty()) throw InvalidArgument("run: a config file is required (or use --print-config)");
  const fs::path out = o.out_dir.empty() ? fs::path("runs") / fs::path(o.config).stem() : fs::path(o.out_dir);
  if (fs::exists(out / "run.json"))
    throw Error(out.string() + " already holds a run; use `morphnas resume " + out.string() + "` or another --out-dir");
  auto data = engine::load_datasets<float>(cfg.dataset);
  engine::Engine<float> eng(cfg, std::move(data.train), std::move(data.test), {out, o.meta_file});
  return drive(eng, o, true);
}

int cmd_resume(const std::string& target, RunOptions o) {
  const fs::path dir = run_dir_of(target);
  const json run = read_run_file(dir);
  if (!fs::is_directory(target)) {
    const auto latest = run.at("state").at("checkpoint").get<std::string>();
    if (fs::path(target).filename() != latest)
      throw InvalidArgument("resume: only the newest checkpoint (" + latest + ") can be resumed");
  }
  engine::RunConfig cfg = engine::config_from_json(run.at("config"));
  if (!o.data.empty()) cfg.dataset.dir = o.data;
  auto data = engine::load_datasets<float>(cfg.dataset);
  engine::Engine<float> eng(cfg, std::move(data.train), std::move(data.test), {dir, o.meta_file});
  return drive(eng, o, false);
}

int cmd_eval(const std::string& target, const std::string& config, const std::string& data_dir,
             const std::string& split) {
  const fs::path ckpt = checkpoint_of(target);
  engine::RunConfig cfg;
  if (!config.empty()) cfg = read_config(config);
  else if (fs::exists(run_dir_of(target) / "run.json"))
    cfg = engine::config_from_json(read_run_file(run_dir_of(target)).at("config"));
  else
    throw InvalidArgument("eval: no run.json next to the checkpoint; pass --config");
  const auto net = load_checkpoint<float>(ckpt);
  auto data = engine::load_datasets<float>(cfg.dataset, data_dir);
  auto report = [&](const char* name, const data::Dataset<float>& d) {
    if (net.input_dim() != d.input_dim() || net.output_dim() != d.output_dim())
      throw ShapeError("eval: checkpoint does not match the " + std::string(name) + " set dimensions");
    const auto m = engine::evaluate(net, d, cfg.training.eval_batch_size);
    std::cout << name << ": loss " << engine::format_real(m.loss);
    if (m.accuracy) std::cout << " accuracy " << engine::format_real(*m.accuracy);
    std::cout << " (" << d.size() << " samples)\n";
  };
  std::cout << "checkpoint " << ckpt.string() << ": " << count_params(net) << " params, depth "
            << depth(net, cfg.search.depth_floor) << "\n";
  if (split == "train" || split == "both") report("train", data.train);
  if (split == "test" || split == "both") report("test", data.test);
  return 0;
}

int cmd_export(const std::string& target, const std::string& format, const std::string& output) {
  std::string text;
  if (format == "arch-json") {
    std::size_t floor = engine::SearchConfig{}.depth_floor;
    if (fs::exists(run_dir_of(target) / "run.json"))
      floor = engine::config_from_json(read_run_file(run_dir_of(target)).at("config")).search.depth_floor;
    text = export_architecture(load_checkpoint<float>(checkpoint_of(target)), floor).dump(2) + "\n";
  } else {
    const json run = read_run_file(run_dir_of(target));
    std::vector<engine::HistoryEvent> events;
    for (const auto& e : run.at("history")) events.push_back(engine::history_event_from_json(e));
    text = engine::history_csv(events);
  }
  if (output.empty() || output == "-") std::cout << text;
  else write_file_atomic(output, text);
  return 0;
}

void add_engine_flags(CLI::App* app, RunOptions& o) {
  app->add_option("--data", o.data, "Dataset directory (MNIST IDX files)");
  app->add_option("--meta-file", o.meta_file, "Meta-parameter file to watch (default: <out-dir>/meta.json)");
  app->add_option("--serve", o.serve, "Serve the control API on host:port (port 0 picks one)");
  app->add_option("--max-iterations", o.max_iterations, "Total iteration budget of the run");
  app->add_flag("-q,--quiet", o.quiet, "Only print the final summary");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Grow-and-prune architecture search over hierarchical residual networks"};
  app.require_subcommand(1);

  RunOptions run_opts;
  auto* run = app.add_subcommand("run", "Start a new run from a config file");
  run->add_option("config", run_opts.config, "JSON config file")->check(CLI::ExistingFile);
  run->add_option("--out-dir", run_opts.out_dir, "Output directory (default: runs/<config name>)");
  run->add_option("--seed", run_opts.seed, "Override meta.seed");
  run->add_flag("--print-config", run_opts.print_config, "Print the effective config with every default and exit");
  add_engine_flags(run, run_opts);

  RunOptions resume_opts;
  std::string resume_target;
  auto* resume = app.add_subcommand("resume", "Continue a run from its output directory or newest checkpoint");
  resume->add_option("run", resume_target, "Run directory or checkpoint file")->required()->check(CLI::ExistingPath);
  add_engine_flags(resume, resume_opts);

  std::string eval_target, eval_config, eval_data, eval_split = "both";
  auto* eval = app.add_subcommand("eval", "Print loss and accuracy of a checkpoint");
  eval->add_option("checkpoint", eval_target, "Checkpoint file or run directory")->required()->check(CLI::ExistingPath);
  eval->add_option("--config", eval_config, "Config describing the dataset (default: the run's)")->check(CLI::ExistingFile);
  eval->add_option("--data", eval_data, "Dataset directory (MNIST IDX files)");
  eval->add_option("--split", eval_split, "Which split to evaluate")->check(CLI::IsMember({"train", "test", "both"}));

  std::string export_target, export_format, export_output;
  auto* exp = app.add_subcommand("export", "Write the architecture document or the history table");
  exp->add_option("source", export_target, "Checkpoint file or run directory")->required()->check(CLI::ExistingPath);
  exp->add_option("--format", export_format, "arch-json | history-csv")
      ->required()
      ->check(CLI::IsMember({"arch-json", "history-csv"}));
  exp->add_option("-o,--output", export_output, "Output file (default: stdout)");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return cmd_run(run_opts);
    if (*resume) return cmd_resume(resume_target, resume_opts);
    if (*eval) return cmd_eval(eval_target, eval_config, eval_data, eval_split);
    if (*exp) return cmd_export(export_target, export_format, export_output);
  } catch (const engine::CheckpointError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
