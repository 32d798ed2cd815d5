// roverplan: generate datasets, train and evaluate planners, plan and render.
//
// Exit codes: 0 success, 2 usage, 3 generation failure, 4 numeric abort,
// 5 checkpoint/dataset fingerprint mismatch, 1 anything else.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json_config.hpp"
#include "roverplan/checkpoint.hpp"
#include "roverplan/dataset_io.hpp"
#include "roverplan/eval.hpp"
#include "roverplan/planner.hpp"
#include "roverplan/terrain.hpp"
#include "roverplan/training.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace roverplan;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitGeneration = 3;
constexpr int kExitNumeric = 4;
constexpr int kExitFingerprint = 5;

bool g_verbose = false;

void verbose(const std::string& line) {
  if (g_verbose) std::cerr << line << '\n';
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out << text;
  if (!text.empty() && text.back() != '\n') out << '\n';
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---- gen ----

struct GenOptions {
  std::string kind = "grid";
  int count = 100;
  int size = 16;
  double density = 0.2;
  int craters = 6;
  double radius_min = 2.0;
  double radius_max = 6.0;
  double test_fraction = kDefaultTestFraction;
  std::uint64_t seed = 0;
  std::string out;
};

void add_gen(CLI::App& app, GenOptions& o) {
  app.add_option("--kind", o.kind, "grid or crater")->check(CLI::IsMember({"grid", "crater"}));
  app.add_option("--count", o.count, "number of maps")->check(CLI::PositiveNumber);
  app.add_option("--size", o.size, "map height and width")->check(CLI::Range(4, 4096));
  app.add_option("--density", o.density, "obstacle probability (grid)")->check(CLI::Range(0.0, 1.0));
  app.add_option("--craters", o.craters, "craters per scene (crater)")->check(CLI::NonNegativeNumber);
  app.add_option("--radius-min", o.radius_min, "smallest crater radius");
  app.add_option("--radius-max", o.radius_max, "largest crater radius");
  app.add_option("--test-fraction", o.test_fraction, "share of maps held out")
      ->check(CLI::Range(0.0, 1.0));
  app.add_option("--seed", o.seed, "generator and split seed");
  app.add_option("--out", o.out, "dataset directory")->required();
}

int run_gen(const GenOptions& o) {
  std::vector<MapRecord> records;
  records.reserve(static_cast<std::size_t>(o.count));
  for (int i = 0; i < o.count; ++i) {
    const std::uint64_t seed = derive_seed(o.seed, static_cast<std::uint64_t>(i));
    if (o.kind == "grid") {
      records.push_back(make_record(generate_map(seed, o.size, o.size, o.density)));
    } else {
      records.push_back(make_record(
          render_crater_scene(seed, o.size, o.size, o.craters, {o.radius_min, o.radius_max})));
    }
  }
  const Dataset ds = build_dataset(std::move(records), o.seed, o.test_fraction);

  GeneratorInfo info;
  info.kind = o.kind;
  info.height = info.width = o.size;
  info.density = o.kind == "grid" ? o.density : 0.0;
  info.craters = o.kind == "crater" ? o.craters : 0;
  info.radius_min = o.kind == "crater" ? o.radius_min : 0.0;
  info.radius_max = o.kind == "crater" ? o.radius_max : 0.0;
  info.seed = o.seed;

  // Build next to the target and swap it in, so a failed run never leaves a half dataset.
  const fs::path out(o.out);
  if (fs::exists(out) && !fs::is_empty(out) && !fs::exists(out / kManifestName)) {
    throw UsageError(out.string() + " exists and is not a dataset directory");
  }
  const fs::path staging = out.string() + ".partial";
  fs::remove_all(staging);
  save_dataset(staging, ds, info);
  fs::remove_all(out);
  fs::rename(staging, out);
  std::printf("wrote %zu maps (%zu train / %zu test entries, %zu dropped) to %s\n",
              ds.maps.size(), ds.entry_count(Split::Train), ds.entry_count(Split::Test),
              ds.dropped_maps, out.string().c_str());
  return 0;
}

// ---- shared model / policy options ----

struct ModelOptions {
  std::string arch = "dbcnn";
  std::string checkpoint;
  std::string model_json;
  int action = 0;
};

void add_model_options(CLI::App& app, ModelOptions& o) {
  app.add_option("--arch", o.arch, "dbcnn, vin, resnet, dcnn, or the stubs oracle, constant, random")
      ->check(CLI::IsMember({"dbcnn", "vin", "resnet", "dcnn", "oracle", "constant", "random"}));
  app.add_option("--checkpoint", o.checkpoint, "trained parameters");
  app.add_option("--model", o.model_json, "model.json (default: next to the checkpoint)");
  app.add_option("--action", o.action, "action of the constant stub")->check(CLI::Range(0, 7));
}

struct LoadedPolicy {
  std::unique_ptr<Model> model;
  std::unique_ptr<Policy> policy;
};

void check_dataset_shape(const ModelSpec& spec, const Dataset& ds) {
  for (const auto& rec : ds.maps) {
    if (rec.height() != spec.height || rec.width() != spec.width ||
        rec.channel_count() != spec.channels) {
      throw FingerprintError("dataset maps are " + std::to_string(rec.height()) + "x" +
                             std::to_string(rec.width()) + "x" +
                             std::to_string(rec.channel_count()) + " but the model expects " +
                             std::to_string(spec.height) + "x" + std::to_string(spec.width) +
                             "x" + std::to_string(spec.channels));
    }
  }
}

LoadedPolicy load_policy(const ModelOptions& o, const Dataset& ds, std::uint64_t seed) {
  LoadedPolicy lp;
  if (o.arch == "oracle") {
    lp.policy = std::make_unique<OraclePolicy>();
    return lp;
  }
  if (o.arch == "constant") {
    lp.policy = std::make_unique<ConstantPolicy>(o.action);
    return lp;
  }
  if (o.arch == "random") {
    lp.policy = std::make_unique<UniformRandomPolicy>(seed);
    return lp;
  }
  if (o.checkpoint.empty()) throw UsageError("--checkpoint is required for --arch " + o.arch);
  const fs::path model_path =
      o.model_json.empty() ? fs::path(o.checkpoint).parent_path() / "model.json" : fs::path(o.model_json);
  ModelSpec spec = ModelSpec::from_json(read_text(model_path));
  spec.arch = parse_arch(o.arch);  // a mismatch surfaces as a fingerprint error on load
  check_dataset_shape(spec, ds);
  lp.model = build_model(spec, 0);
  load_into(o.checkpoint, *lp.model);
  lp.policy = std::make_unique<ModelPolicy>(*lp.model);
  return lp;
}

// ---- train ----

struct TrainCliOptions {
  std::string arch = "dbcnn";
  std::string data;
  std::string out;
  Hyperparams hyper{};
  std::string l2_mode = "squared";
  int l1 = 4;
  int l2 = 4;
  int k_vin = 80;
  int d = 10;
  bool coord_augment = false;
  int checkpoint_every = 0;
  std::string resume;
  int start_epoch = 0;
};

void add_train(CLI::App& app, TrainCliOptions& o) {
  app.add_option("--arch", o.arch, "architecture")
      ->check(CLI::IsMember({"dbcnn", "vin", "resnet", "dcnn"}));
  app.add_option("--data", o.data, "dataset directory")->required();
  app.add_option("--out", o.out, "run directory")->required();
  app.add_option("--epochs", o.hyper.epochs, "training epochs");
  app.add_option("--lr", o.hyper.learning_rate, "SGD learning rate");
  app.add_option("--lambda", o.hyper.lambda, "L2 weight");
  app.add_option("--batch", o.hyper.batch_size, "minimum samples per batch");
  app.add_option("--seed", o.hyper.seed, "initialization and shuffling seed");
  app.add_option("--l2-mode", o.l2_mode, "squared or norm")->check(CLI::IsMember({"squared", "norm"}));
  app.add_option("--l1", o.l1, "row downsampling (1, 2, 4)");
  app.add_option("--l2", o.l2, "column downsampling (1, 2, 4)");
  app.add_option("--k-vin", o.k_vin, "VIN iterations");
  app.add_option("--d", o.d, "feature width D");
  app.add_flag("--coord-augment", o.coord_augment, "append normalized coordinates to the head");
  app.add_option("--checkpoint-every", o.checkpoint_every, "epochs between checkpoints (0: final only)");
  app.add_option("--resume", o.resume, "checkpoint to continue from");
  app.add_option("--start-epoch", o.start_epoch, "epochs already completed by --resume");
}

ordered_json train_echo(const TrainCliOptions& o) {
  ordered_json j;
  j["command"] = "train";
  j["arch"] = o.arch;
  j["data"] = o.data;
  j["out"] = o.out;
  j["epochs"] = o.hyper.epochs;
  j["lr"] = o.hyper.learning_rate;
  j["lambda"] = o.hyper.lambda;
  j["batch"] = o.hyper.batch_size;
  j["seed"] = o.hyper.seed;
  j["l2-mode"] = o.l2_mode;
  j["l1"] = o.l1;
  j["l2"] = o.l2;
  j["k-vin"] = o.k_vin;
  j["d"] = o.d;
  j["coord-augment"] = o.coord_augment;
  j["checkpoint-every"] = o.checkpoint_every;
  if (!o.resume.empty()) {
    j["resume"] = o.resume;
    j["start-epoch"] = o.start_epoch;
  }
  return j;
}

int run_train(TrainCliOptions o) {
  o.hyper.l2_mode = parse_l2_mode(o.l2_mode);
  o.hyper.validate();
  const Dataset ds = load_dataset(o.data);
  if (ds.maps.empty()) throw UsageError("dataset " + o.data + " is empty");

  ModelSpec spec;
  spec.arch = parse_arch(o.arch);
  spec.height = ds.maps.front().height();
  spec.width = ds.maps.front().width();
  spec.channels = ds.maps.front().channel_count();
  spec.l1 = o.l1;
  spec.l2 = o.l2;
  spec.k_vin = o.k_vin;
  spec.feature_width = o.d;
  spec.coord_augment = o.coord_augment;
  check_dataset_shape(spec, ds);
  auto model = build_model(spec, derive_seed(o.hyper.seed, 0x1417));
  if (!o.resume.empty()) load_into(o.resume, *model);

  const fs::path out(o.out);
  fs::create_directories(out);
  write_text(out / "run.json", train_echo(o).dump(2));
  write_text(out / "model.json", spec.to_json());

  std::ofstream log(out / "train.log", o.resume.empty() ? std::ios::trunc : std::ios::app);
  TrainOptions opts;
  opts.start_epoch = o.start_epoch;
  opts.checkpoint_dir = out;
  opts.checkpoint_every = o.checkpoint_every;
  opts.on_epoch = [&](const EpochReport& r) {
    const std::string line = format_log_line(r);
    std::printf("%s\n", line.c_str());
    std::fflush(stdout);
    log << line << '\n' << std::flush;
    if (r.clamped > 0) verbose("epoch " + std::to_string(r.epoch) + ": " +
                               std::to_string(r.clamped) + " label probabilities clamped");
  };
  verbose("training " + o.arch + " with " + std::to_string(model->params().scalar_count()) +
          " parameters on " + std::to_string(ds.entry_count(Split::Train)) + " samples");
  train(*model, ds, o.hyper, opts);
  return 0;
}

// ---- eval ----

struct EvalOptions {
  ModelOptions model;
  std::string data;
  std::string out;
  std::uint64_t seed = 0;
  int starts_per_map = kDefaultStartsPerMap;
};

void add_eval(CLI::App& app, EvalOptions& o) {
  add_model_options(app, o.model);
  app.add_option("--data", o.data, "dataset directory")->required();
  app.add_option("--out", o.out, "report directory")->required();
  app.add_option("--seed", o.seed, "start sampling seed");
  app.add_option("--starts-per-map", o.starts_per_map, "rollouts per map for SR")
      ->check(CLI::PositiveNumber);
}

int run_eval(const EvalOptions& o) {
  const Dataset ds = load_dataset(o.data);
  const LoadedPolicy lp = load_policy(o.model, ds, o.seed);
  MetricsReport report = evaluate(*lp.policy, ds, o.seed, o.starts_per_map, worker_count());
  report.arch = o.model.arch;
  const fs::path out(o.out);
  fs::create_directories(out);
  ordered_json echo{{"command", "eval"}, {"arch", o.model.arch}, {"data", o.data},
                    {"out", o.out},      {"seed", o.seed},       {"starts-per-map", o.starts_per_map}};
  if (!o.model.checkpoint.empty()) echo["checkpoint"] = o.model.checkpoint;
  write_text(out / "run.json", echo.dump(2));
  write_text(out / "metrics.json", report.to_json());
  std::printf("%s\n", report.to_json().c_str());
  return 0;
}

// ---- plan ----

struct PlanOptions {
  ModelOptions model;
  std::string data;
  std::string out;
  std::size_t map_id = 0;
  std::vector<std::string> starts;
  std::string starts_file;
  std::uint64_t seed = 0;
};

void add_plan(CLI::App& app, PlanOptions& o) {
  add_model_options(app, o.model);
  app.add_option("--data", o.data, "dataset directory")->required();
  app.add_option("--out", o.out, "output directory")->required();
  app.add_option("--map", o.map_id, "map id within the dataset");
  app.add_option("--start", o.starts, "start cell as row,col (repeatable)");
  app.add_option("--starts-file", o.starts_file, "file with one 'row col' start per line");
  app.add_option("--seed", o.seed, "seed for the random stub");
}

Coord parse_cell(const std::string& text) {
  std::string s = text;
  for (char& c : s) {
    if (c == ',') c = ' ';
  }
  std::istringstream in(s);
  Coord c{-1, -1};
  if (!(in >> c.row >> c.col)) throw UsageError("cannot parse cell '" + text + "'");
  std::string rest;
  if (in >> rest) throw UsageError("cannot parse cell '" + text + "'");
  return c;
}

int run_plan(const PlanOptions& o) {
  const Dataset ds = load_dataset(o.data);
  if (o.map_id >= ds.maps.size()) throw UsageError("--map out of range");
  const MapRecord& rec = ds.maps[o.map_id];
  std::vector<Coord> starts;
  for (const auto& s : o.starts) starts.push_back(parse_cell(s));
  if (!o.starts_file.empty()) {
    std::istringstream in(read_text(o.starts_file));
    std::string line;
    while (std::getline(in, line)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
      starts.push_back(parse_cell(line));
    }
  }
  if (starts.empty()) throw UsageError("give at least one --start or a --starts-file");

  const LoadedPolicy lp = load_policy(o.model, ds, o.seed);
  std::vector<Trajectory> trajectories;
  if (starts.size() == 1 && o.starts_file.empty()) {
    trajectories.push_back(lp.model ? plan(*lp.model, rec, starts.front())
                                    : plan(*lp.policy, rec, starts.front()));
  } else {
    trajectories = plan_multi(*lp.policy, rec, starts);
  }
  if (lp.model) verbose("forward passes: " + std::to_string(lp.model->forward_passes()));

  const fs::path out(o.out);
  fs::create_directories(out);
  write_text(out / "trajectories.json", trajectories_to_json(o.map_id, rec.map, trajectories));
  export_trajectory_overlay(rec, trajectories, out / "overlay.ppm");
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    const auto& t = trajectories[i];
    std::printf("start (%d,%d): %s in %zu steps\n", t.cells.front().row, t.cells.front().col,
                std::string(to_string(t.outcome)).c_str(), t.steps());
  }
  return 0;
}

// ---- viz ----

struct VizOptions {
  ModelOptions model;
  std::string data;
  std::string out;
  std::vector<std::size_t> maps{0};
  bool overlay = false;
  int starts_per_map = 0;
  std::uint64_t seed = 0;
};

void add_viz(CLI::App& app, VizOptions& o) {
  add_model_options(app, o.model);
  app.add_option("--data", o.data, "dataset directory")->required();
  app.add_option("--out", o.out, "image directory")->required();
  app.add_option("--map", o.maps, "map ids to render");
  app.add_flag("--overlay", o.overlay, "paint obstacle cells black on value maps");
  app.add_option("--starts-per-map", o.starts_per_map, "also render this many rollouts per map");
  app.add_option("--seed", o.seed, "start sampling seed");
}

int run_viz(const VizOptions& o) {
  const Dataset ds = load_dataset(o.data);
  const LoadedPolicy lp = load_policy(o.model, ds, o.seed);
  const fs::path out(o.out);
  fs::create_directories(out);
  for (std::size_t id : o.maps) {
    if (id >= ds.maps.size()) throw UsageError("--map " + std::to_string(id) + " out of range");
    const MapRecord& rec = ds.maps[id];
    char name[48];
    std::snprintf(name, sizeof name, "value_%06zu.pgm", id);
    export_value_map(*lp.policy, rec, out / name, o.overlay, &std::cerr);
    if (o.starts_per_map > 0) {
      const auto starts = sample_starts(rec, static_cast<std::size_t>(o.starts_per_map),
                                        derive_seed(o.seed, id));
      const auto trajectories = plan_multi(*lp.policy, rec, starts);
      std::snprintf(name, sizeof name, "paths_%06zu.ppm", id);
      export_trajectory_overlay(rec, trajectories, out / name);
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learned global path planning: datasets, training, evaluation, rollouts"};
  app.require_subcommand(1);
  app.add_flag("-v,--verbose", g_verbose, "diagnostics on stderr");
  app.set_config("--config", "", "JSON file with subcommand option values; flags override it");
  app.config_formatter(std::make_shared<tools::JsonConfig>(&app));
  app.allow_config_extras(CLI::config_extras_mode::error);

  GenOptions gen;
  TrainCliOptions tr;
  EvalOptions ev;
  PlanOptions pl;
  VizOptions vz;
  auto* gen_cmd = app.add_subcommand("gen", "generate a dataset");
  auto* train_cmd = app.add_subcommand("train", "train a network");
  auto* eval_cmd = app.add_subcommand("eval", "accuracy and success-rate report");
  auto* plan_cmd = app.add_subcommand("plan", "roll out trajectories on one map");
  auto* viz_cmd = app.add_subcommand("viz", "value maps and trajectory overlays");
  add_gen(*gen_cmd, gen);
  add_train(*train_cmd, tr);
  add_eval(*eval_cmd, ev);
  add_plan(*plan_cmd, pl);
  add_viz(*viz_cmd, vz);
  for (auto* sub : {gen_cmd, train_cmd, eval_cmd, plan_cmd, viz_cmd}) {
    sub->fallthrough();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*gen_cmd) return run_gen(gen);
    if (*train_cmd) return run_train(tr);
    if (*eval_cmd) return run_eval(ev);
    if (*plan_cmd) return run_plan(pl);
    if (*viz_cmd) return run_viz(vz);
  } catch (const GenerationError& e) {
    std::cerr << "generation failed: " << e.what() << '\n';
    return kExitGeneration;
  } catch (const NumericError& e) {
    std::cerr << "numeric abort: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const FingerprintError& e) {
    std::cerr << "fingerprint mismatch: " << e.what() << '\n';
    return kExitFingerprint;
  } catch (const UsageError& e) {
    std::cerr << "usage: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return kExitUsage;
}
