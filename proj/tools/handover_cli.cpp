// Command-line front end: gen-data, train, eval, study, serve.
//
// Exit codes: 0 success, 1 usage error, 2 runtime failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "handover/config.hpp"
#include "handover/dataset.hpp"
#include "handover/evaluation.hpp"
#include "handover/report.hpp"
#include "handover/session.hpp"
#include "handover/study.hpp"
#include "handover/training.hpp"
#include "handover/ws_server.hpp"

namespace fs = std::filesystem;
using namespace handover;

namespace {

struct Flags {
  std::optional<std::uint64_t> seed;
  std::string config_path;
  std::string grid;
  std::string out;
  // gen-data
  std::optional<int> count;
  // train / eval / study / serve
  std::string data;
  std::string model;
  std::optional<int> epochs;
  std::optional<double> lr;
  std::string mode;
  std::optional<int> trials;
  std::string cells;
  std::string format;
  bool oracle = false;
  std::optional<int> port;
};

RunConfig resolve(const Flags& f) {
  RunConfig cfg;
  if (!f.config_path.empty()) apply_config_file(cfg, f.config_path);
  if (f.seed) cfg.seed = *f.seed;
  if (!f.grid.empty()) {
    const auto [n, m] = parse_grid_dims(f.grid);
    cfg.trial.grid.n = n;
    cfg.trial.grid.m = m;
  }
  if (f.count) cfg.data_count = *f.count;
  if (f.epochs) cfg.train.epochs = *f.epochs;
  if (f.lr) cfg.train.learning_rate = *f.lr;
  if (!f.mode.empty()) cfg.study_mode = f.mode;
  if (f.trials) cfg.study_trials = *f.trials;
  if (!f.cells.empty()) {
    if (f.cells.find(':') == std::string::npos) {
      cfg.study_cell_count = std::stoi(f.cells);
      cfg.study_cells.clear();
    } else {
      cfg.study_cells = f.cells;
    }
  }
  if (f.port) cfg.serve_port = *f.port;
  cfg.train.seed = cfg.seed;
  cfg.validate();
  return cfg;
}

void print_config(const std::string& command, const RunConfig& cfg) {
  std::cout << "# " << command << " seed=" << cfg.seed << "\n"
            << "# resolved config (replay with --config):\n"
            << config_snapshot(cfg) << "\n";
}

/// Adopts the model's grid unless one was given explicitly, then checks they agree.
void reconcile_grid(RunConfig& cfg, const IntentModel& model, bool grid_given) {
  if (!grid_given) {
    cfg.trial.grid = model.grid();
    return;
  }
  if (cfg.trial.grid.n != model.grid().n || cfg.trial.grid.m != model.grid().m) {
    throw Error(ErrorCode::GridMismatch, "model was trained on a different grid");
  }
  cfg.trial.grid = model.grid();
}

int cmd_gen_data(const Flags& f) {
  const RunConfig cfg = resolve(f);
  print_config("gen-data", cfg);
  const fs::path out = f.out.empty() ? "data.jsonl" : f.out;
  gen_dataset(cfg.data_count, cfg.trial.grid, cfg.trial.sim, cfg.seed, out);
  std::cout << "wrote " << cfg.data_count << " trajectories to " << out.string() << "\n";
  return 0;
}

int cmd_train(const Flags& f) {
  RunConfig cfg = resolve(f);
  print_config("train", cfg);
  auto data = read_dataset(f.data);
  if (data.empty()) throw Error(ErrorCode::EmptyDataset, "dataset " + f.data + " is empty");
  for (const auto& t : data) {
    if (!(t.grid == data.front().grid)) throw Error(ErrorCode::GridMismatch, "dataset mixes grids");
  }
  const GridSpec grid = data.front().grid;
  const auto held = static_cast<std::size_t>(cfg.holdout_fraction * static_cast<double>(data.size()));
  const std::size_t n_train = data.size() - held;
  std::vector<TrainingSequence> seqs;
  for (std::size_t i = 0; i < n_train; ++i) {
    seqs.push_back(to_training_sequence(data[i], cfg.trial.plane, cfg.trial.labels));
  }
  std::cout << "training on " << n_train << " trajectories, " << held << " held out\n";
  auto result = train(seqs, grid, cfg.train, Exec::Parallel, [](int epoch, double loss) {
    std::printf("epoch %3d  loss %.6f\n", epoch + 1, loss);
    std::fflush(stdout);
  });
  const fs::path out = f.out.empty() ? "model.bin" : f.out;
  result.model.save(out);
  std::cout << "saved model to " << out.string() << "\n";
  if (held > 0) {
    std::span<const HumanTrajectory> test(data.data() + n_train, held);
    const auto ev = evaluate(result.model, test, cfg.trial.plane, cfg.trial.arbitration);
    std::printf("held-out decision error %.3f grids, final-quarter top-1 %.3f\n",
                ev.mean_decision_euclid, ev.final_quarter_top1);
  }
  return 0;
}

int cmd_eval(const Flags& f) {
  RunConfig cfg = resolve(f);
  const auto model = IntentModel::load(f.model);
  reconcile_grid(cfg, model, !f.grid.empty());
  print_config("eval", cfg);
  const auto data = read_dataset(f.data);
  for (const auto& t : data) {
    if (!(t.grid == model.grid())) throw Error(ErrorCode::GridMismatch, "dataset grid differs from the model");
  }
  const auto ev = evaluate(model, data, cfg.trial.plane, cfg.trial.arbitration);
  nlohmann::ordered_json j = {{"trajectories", data.size()},
                              {"mean_decision_dx", ev.mean_decision_dx},
                              {"mean_decision_dy", ev.mean_decision_dy},
                              {"mean_decision_euclid", ev.mean_decision_euclid},
                              {"mean_decision_meters", ev.mean_decision_meters},
                              {"final_quarter_top1", ev.final_quarter_top1},
                              {"decided_fraction", ev.decided_fraction}};
  const std::string text = j.dump(2) + "\n";
  std::cout << text;
  if (!f.out.empty()) {
    std::ofstream os(f.out, std::ios::binary | std::ios::trunc);
    if (!(os << text)) throw Error(ErrorCode::IoFailure, "cannot write " + f.out);
  }
  return 0;
}

int cmd_study(const Flags& f) {
  RunConfig cfg = resolve(f);
  std::optional<IntentModel> model;
  if (!f.model.empty()) {
    model = IntentModel::load(f.model);
    reconcile_grid(cfg, *model, !f.grid.empty());
  }
  print_config("study", cfg);
  auto study = study_config(cfg);
  PredictorFactory predictors;
  if (f.oracle) {
    predictors = oracle_predictors(cfg.trial.labels);
  } else if (model) {
    predictors = model_predictors(*model);
  }
  auto report = run_study(study, predictors);
  report.config_snapshot = config_snapshot(cfg);

  const fs::path out = f.out.empty() ? "study.json" : f.out;
  ReportFormat format = ReportFormat::Json;
  if (!f.format.empty()) {
    format = parse_report_format(f.format);
  } else if (out.extension() == ".csv") {
    format = ReportFormat::Csv;
  }
  export_report(report, out, format);

  int failures = 0;
  for (const auto& t : report.trials) failures += t.result.error.empty() ? 0 : 1;
  std::printf("%zu trials (%d failed), report written to %s\n", report.trials.size(), failures,
              out.string().c_str());
  if (report.overall) {
    const auto& o = *report.overall;
    std::printf("mean response gain %.4f s, start-to-grab gain %.4f s, preemptive faster on %.1f%%",
                o.response_gain.mean, o.grab_gain.mean, 100.0 * o.grab_win.mean);
    if (o.p_grab) std::printf(", p = %.3g", *o.p_grab);
    std::printf("\n");
  }
  return 0;
}

int cmd_serve(const Flags& f) {
  RunConfig cfg = resolve(f);
  std::shared_ptr<const IntentModel> model;
  if (!f.model.empty()) {
    model = std::make_shared<IntentModel>(IntentModel::load(f.model));
    reconcile_grid(cfg, *model, !f.grid.empty());
  }
  print_config("serve", cfg);
  auto sessions = std::make_shared<SessionManager>(model, cfg.trial, cfg.seed);
  ServerConfig sc;
  sc.port = static_cast<std::uint16_t>(cfg.serve_port);
  sc.default_mode = model ? Mode::Preemptive : Mode::Reactive;
  sc.stop_on_signals = true;
  WsServer server(sessions, sc);
  server.start();
  std::cout << "listening on ws://" << sc.address << ":" << server.port() << " ("
            << to_string(sc.default_mode) << " by default)" << std::endl;
  server.wait();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Preemptive handover engine: data generation, training, evaluation, studies, live service"};
  app.require_subcommand(1);
  Flags f;

  auto shared = [&f](CLI::App* sub) {
    sub->add_option("--seed", f.seed, "Base seed for every random stream");
    sub->add_option("--config", f.config_path, "Flat JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--grid", f.grid, "Grid dimensions NxM");
    sub->add_option("--out", f.out, "Output path");
  };

  auto* gen = app.add_subcommand("gen-data", "Generate synthetic trajectories (JSON Lines)");
  shared(gen);
  gen->add_option("--count", f.count, "Number of trajectories");

  auto* tr = app.add_subcommand("train", "Train the intent model on a dataset");
  shared(tr);
  tr->add_option("--data", f.data, "Dataset path")->required();
  tr->add_option("--epochs", f.epochs, "Training epochs");
  tr->add_option("--lr", f.lr, "Adam learning rate");

  auto* ev = app.add_subcommand("eval", "Decision-time error of a model on a dataset");
  shared(ev);
  ev->add_option("--data", f.data, "Dataset path")->required();
  ev->add_option("--model", f.model, "Model path")->required();

  auto* st = app.add_subcommand("study", "Paired reactive vs preemptive study");
  shared(st);
  st->add_option("--mode", f.mode, "reactive|preemptive|both")
      ->check(CLI::IsMember({"reactive", "preemptive", "both"}));
  st->add_option("--trials", f.trials, "Seeds per cell");
  st->add_option("--cells", f.cells, "Cell count, or an explicit list x:y,x:y");
  st->add_option("--model", f.model, "Model path (preemptive mode)");
  st->add_flag("--oracle", f.oracle, "Use the oracle predictor instead of a model");
  st->add_option("--format", f.format, "json|csv (default from the --out extension)")
      ->check(CLI::IsMember({"json", "csv"}));

  auto* sv = app.add_subcommand("serve", "WebSocket service for live sessions");
  shared(sv);
  sv->add_option("--port", f.port, "TCP port");
  sv->add_option("--model", f.model, "Model path (enables preemptive sessions)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(f);
    if (tr->parsed()) return cmd_train(f);
    if (ev->parsed()) return cmd_eval(f);
    if (st->parsed()) return cmd_study(f);
    if (sv->parsed()) return cmd_serve(f);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
