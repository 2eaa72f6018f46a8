// wm: simulate, infer, score and plot object-based world models.

#include "wm/metrics.hpp"
#include "wm/pipeline.hpp"
#include "wm/plot.hpp"

#include "CLI11.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace wm;

namespace {

enum Exit { kOk = 0, kFailure = 1, kUsage = 2, kData = 3, kUnsupported = 4 };

int log_level() {
  const char* v = std::getenv("WM_LOG");
  if (!v) return 0;
  const std::string s(v);
  return s == "debug" ? 2 : s == "info" ? 1 : 0;
}

void log(int level, const std::string& msg) {
  if (log_level() >= level) std::cerr << (level == 2 ? "[debug] " : "[info] ") << msg << '\n';
}

// Errors in data files map to exit 3 rather than 2.
template <class F>
auto as_data(F&& f) {
  try {
    return f();
  } catch (const InvalidInput& e) {
    throw DataInconsistency(e.what());
  }
}

Dataset read_data(const std::string& path) {
  return as_data([&] { return load_dataset(path); });
}

ModelConfig read_config(const std::string& path, const Dataset& data) {
  ModelConfig cfg = load_model_config(path);
  as_data([&] {
    data.check_against(cfg);
    return 0;
  });
  return resolve_world_volume(std::move(cfg), data);
}

GroundTruth read_truth(const std::string& path, const Dataset& data) {
  return as_data([&] { return truth_from_json(read_json_file(path), data); });
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InvalidInput("cannot create " + dir + ": " + ec.message());
}

struct SimulateArgs {
  std::string preset;
  std::string config;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_simulate(const SimulateArgs& a) {
  SimConfig sim;
  if (!a.config.empty()) {
    Json j = read_json_file(a.config);
    sim = sim_config_from_json(j);
    sim.seed = a.seed;
  } else {
    sim = sim_preset(a.preset.empty() ? "sim-default" : a.preset, a.seed);
  }
  sim.validate();
  const Simulation s = simulate(sim);
  ensure_dir(a.out);
  std::ostringstream ds;
  write_dataset_jsonl(ds, s.data);
  write_text_file((fs::path(a.out) / "dataset.jsonl").string(), ds.str());
  write_text_file((fs::path(a.out) / "truth.json").string(), dump(truth_to_json(s.truth, s.data)));
  write_text_file((fs::path(a.out) / "model.json").string(),
                  dump(model_config_to_json(inference_config(sim))));
  write_text_file((fs::path(a.out) / "sim.json").string(), dump(sim_config_to_json(sim)));
  int fps = 0;
  for (const auto& v : s.truth.sources)
    for (int src : v) fps += src == 0;
  const auto per_epoch = labels_per_epoch(s.data, s.truth.labels());
  std::cout << "epochs " << s.data.num_epochs() << "\nviews " << s.data.num_views()
            << "\ndetections " << s.data.num_obs() << "\nfalse_positives " << fps << "\nobjects "
            << s.truth.objects.size() << "\nobjects_per_epoch";
  for (int t = 1; t <= s.data.num_epochs(); ++t) {
    int alive = 0;
    for (const auto& o : s.truth.objects) alive += o.birth <= t && t <= o.death;
    std::cout << ' ' << alive;
  }
  std::cout << "\ndetected_objects_per_epoch";
  for (int n : per_epoch) std::cout << ' ' << n;
  std::cout << '\n';
  return kOk;
}

struct InferArgs {
  std::string data, config, truth, out, dump_payoffs, payoff = "forward";
  InferOptions opt;
  bool wall_time = false;
};

int cmd_infer(InferArgs a) {
  validate(a.opt);
  const Dataset data = read_data(a.data);
  const ModelConfig cfg = read_config(a.config, data);
  std::optional<GroundTruth> truth;
  if (!a.truth.empty()) truth = read_truth(a.truth, data);
  if (a.payoff == "forward") a.opt.icm.kind = PayoffKind::Forward;
  else if (a.payoff != "exact") throw InvalidInput("unknown payoff kind '" + a.payoff + "'");
  if (!a.dump_payoffs.empty()) {
    ensure_dir(a.dump_payoffs);
    a.opt.icm.dump_dir = a.dump_payoffs;
  }
  log(1, "infer " + a.opt.algo + " on " + std::to_string(data.num_obs()) + " detections");
  const auto t0 = std::chrono::steady_clock::now();
  const InferResult r = infer(data, cfg, a.opt);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  log(1, "MAP log score " + std::to_string(r.score) + " after " + std::to_string(secs) + " s");

  ensure_dir(a.out);
  std::ostringstream as;
  write_assignments_jsonl(as, data, r.labels);
  write_text_file((fs::path(a.out) / "assignments.jsonl").string(), as.str());
  const WorldState st = state_from_labels(data, cfg, r.labels);
  write_text_file((fs::path(a.out) / "tracks.json").string(), dump(tracks_to_json(track_reports(st))));
  const Json report = run_report(r, data, truth ? &*truth : nullptr,
                                 a.wall_time ? std::optional<double>(secs) : std::nullopt);
  write_text_file((fs::path(a.out) / "report.json").string(), dump(report));
  std::cout << "map_log_score " << Json(r.score).dump() << '\n';
  return kOk;
}

struct ScoreArgs {
  std::string data, config, assignments, truth;
};

int cmd_score(const ScoreArgs& a) {
  const Dataset data = read_data(a.data);
  const ModelConfig cfg = read_config(a.config, data);
  std::ifstream in(a.assignments);
  if (!in) throw DataInconsistency("cannot open " + a.assignments);
  const std::vector<TrackId> labels = as_data([&] { return read_assignments_jsonl(in, data); });
  const WorldState st = as_data([&] { return state_from_labels(data, cfg, labels); });
  Json j;
  j["log_score"] = global_log_score(st);
  if (!a.truth.empty()) j["accuracy"] = accuracy_json(data, labels, read_truth(a.truth, data));
  std::cout << dump(j);
  return kOk;
}

struct PlotArgs {
  std::string tracks, data, truth, out, title;
  int from = 1, to = INT_MAX;
};

int cmd_plot(const PlotArgs& a) {
  const std::vector<TrackReport> tracks = as_data([&] { return tracks_from_json(read_json_file(a.tracks)); });
  std::optional<Dataset> data;
  std::optional<GroundTruth> truth;
  if (!a.data.empty()) data = read_data(a.data);
  if (!a.truth.empty()) {
    if (!data) throw InvalidInput("--truth needs --data");
    truth = read_truth(a.truth, *data);
  }
  PlotOptions po{a.from, a.to, a.title};
  const std::string svg = render_svg(tracks, data ? &*data : nullptr, truth ? &*truth : nullptr, po);
  write_text_file(a.out, svg);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Object-based world models from multi-view detections"};
  app.require_subcommand(1);

  SimulateArgs sa;
  auto* sim = app.add_subcommand("simulate", "generate a dataset and its ground truth");
  auto* preset = sim->add_option("--preset", sa.preset, "sim-default | robot-style");
  sim->add_option("--config", sa.config, "simulation config JSON")->excludes(preset);
  sim->add_option("--seed", sa.seed, "random seed");
  sim->add_option("-o,--out", sa.out, "output directory")->required();

  InferArgs ia;
  auto* inf = app.add_subcommand("infer", "infer associations and tracks");
  inf->add_option("--data", ia.data, "dataset.jsonl")->required();
  inf->add_option("--config", ia.config, "model config JSON")->required();
  inf->add_option("--algo", ia.opt.algo, "gibbs | icm | mcmcda | icm-mcmc");
  inf->add_option("--seed", ia.opt.seed, "random seed");
  inf->add_option("--sweeps", ia.opt.sweeps, "Gibbs sweeps or ICM sweep cap");
  inf->add_option("--samples", ia.opt.samples, "MCMCDA samples");
  inf->add_option("--chains", ia.opt.chains, "independent chains run concurrently");
  inf->add_option("--truth", ia.truth, "truth.json for accuracy in the report");
  inf->add_option("--payoff", ia.payoff, "ICM payoff: forward | exact");
  inf->add_option("--dump-payoffs", ia.dump_payoffs, "directory for ICM payoff CSVs");
  inf->add_flag("--wall-time", ia.wall_time, "record wall time in report.json");
  inf->add_option("-o,--out", ia.out, "output directory")->required();

  ScoreArgs sc;
  auto* score = app.add_subcommand("score", "score an assignment");
  score->add_option("--data", sc.data, "dataset.jsonl")->required();
  score->add_option("--config", sc.config, "model config JSON")->required();
  score->add_option("--assignments", sc.assignments, "assignments.jsonl")->required();
  score->add_option("--truth", sc.truth, "truth.json");

  PlotArgs pa;
  auto* plot = app.add_subcommand("plot", "render tracks as SVG");
  plot->add_option("--tracks", pa.tracks, "tracks.json")->required();
  plot->add_option("--data", pa.data, "dataset.jsonl");
  plot->add_option("--truth", pa.truth, "truth.json");
  plot->add_option("--from", pa.from, "first epoch");
  plot->add_option("--to", pa.to, "last epoch");
  plot->add_option("--title", pa.title, "title");
  plot->add_option("-o,--out", pa.out, "output SVG")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*sim) return cmd_simulate(sa);
    if (*inf) return cmd_infer(ia);
    if (*score) return cmd_score(sc);
    return cmd_plot(pa);
  } catch (const DataInconsistency& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  } catch (const Unsupported& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUnsupported;
  } catch (const InvalidInput& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
}
