// Command-line front end: gen-data, train, eval, viz, grad-check.

#include "iris/config.hpp"
#include "iris/loss_checks.hpp"
#include "iris/runtime.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace iris;

namespace {

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config_path, "Flat key = value configuration file")->check(CLI::ExistingFile);
  app->add_option("--set", c.overrides, "Override one key, e.g. --set train.n_iter=500")->take_all();
}

ConfigBundle load_bundle(const Common& c, const std::vector<std::string>& extra = {}) {
  ConfigBundle b;
  if (!c.config_path.empty()) apply_config_file(b, c.config_path);
  apply_overrides(b, c.overrides);
  apply_overrides(b, extra);
  finalize(b);
  return b;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

// Writes next to the target and renames, so a failure leaves no partial file.
void write_atomically(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  write_text(tmp, text);
  fs::rename(tmp, path);
}

std::vector<SavedCheckpoint> load_run(const fs::path& where) {
  std::vector<fs::path> files;
  if (fs::is_directory(where)) {
    for (const auto& e : fs::directory_iterator(where))
      if (e.path().extension() == ".irc") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw std::runtime_error("no checkpoints (*.irc) in " + where.string());
  } else {
    if (!fs::exists(where)) throw std::runtime_error("checkpoint not found: " + where.string());
    files.push_back(where);
  }
  std::vector<SavedCheckpoint> out;
  for (const fs::path& f : files) {
    SavedCheckpoint s;
    s.path = f;
    s.checkpoint = load_checkpoint(f);
    const std::string stem = f.stem().string();
    const auto us = stem.find_last_of('_');
    if (us != std::string::npos && stem.size() > us + 1 &&
        std::all_of(stem.begin() + static_cast<long>(us) + 1, stem.end(), ::isdigit))
      s.iter = std::stoll(stem.substr(us + 1));
    out.push_back(std::move(s));
  }
  return out;
}

std::string variant_of(const std::vector<SavedCheckpoint>& run) {
  return to_string(ModelSet::from_checkpoint(run.front().checkpoint).variant);
}

int cmd_gen_data(const Common& c, const std::string& out, double filter_best) {
  const ConfigBundle b = load_bundle(c);
  TrajectoryDataset ds = generate_dataset(b.gen);
  if (filter_best > 0.0) ds = filter_best_fraction(ds, filter_best);
  save_dataset(ds, out);
  write_text(out + ".json", gen_config_json(b.gen));
  std::cout << "wrote " << ds.size() << " trajectories (mean length " << ds.mean_length() << ") to " << out << "\n";
  return 0;
}

int cmd_train(const Common& c, const std::string& data, const std::string& variant, const std::string& out) {
  std::vector<std::string> extra;
  if (!variant.empty()) extra.push_back("train.variant=" + variant);
  const ConfigBundle b = load_bundle(c, extra);
  const TrajectoryDataset ds = load_dataset(data);
  write_text(fs::path(out) / "config.txt", dump_config(b));
  const TrainResult r = train(ds, b.train, fs::path(out));
  std::cout << "trained " << to_string(b.train.variant) << " for " << b.train.n_iter << " iterations; "
            << r.checkpoints.size() << " checkpoints in " << out << "\n";
  return 0;
}

int cmd_eval(const Common& c, const std::vector<std::string>& runs, const std::string& data, const std::string& out) {
  const ConfigBundle b = load_bundle(c);
  std::vector<std::vector<SavedCheckpoint>> loaded;
  for (const std::string& r : runs) loaded.push_back(load_run(r));
  const std::size_t n_seeds = b.eval.seeds.size();
  if (loaded.size() != 1 && loaded.size() != n_seeds)
    throw std::runtime_error("give one run, or one run per evaluation seed (" + std::to_string(n_seeds) + ")");
  std::optional<TrajectoryDataset> dataset;
  if (!data.empty()) dataset = load_dataset(data);

  const std::string variant = variant_of(loaded.front());
  std::vector<SeedResult> seeds;
  for (std::size_t i = 0; i < n_seeds; ++i) {
    const auto& run = loaded.size() == 1 ? loaded.front() : loaded[i];
    if (variant_of(run) != variant) throw std::runtime_error("runs mix variants");
    seeds.push_back(evaluate_run(run, b.eval, b.eval.seeds[i]));
  }
  const EvalReport report = aggregate(variant, std::move(seeds));
  std::optional<EvalSummary> dataset_row;
  if (dataset) dataset_row = dataset_summary(*dataset, b.eval.gamma);
  const std::string json = report_json(report, b.eval, dump_config(b), dataset_row);
  write_atomically(out, json);
  std::cout << variant << ": success " << report.success_rate.mean << " +- " << report.success_rate.std;
  if (report.mean_success_length)
    std::cout << ", length " << report.mean_success_length->mean << " +- " << report.mean_success_length->std;
  std::cout << ", return " << report.mean_return.mean << "\nreport: " << out << "\n";
  return 0;
}

int cmd_viz(const Common& c, const std::vector<std::string>& runs, const std::string& data, const std::string& out,
            int episodes) {
  ConfigBundle b = load_bundle(c);
  b.eval.n_episodes = episodes;
  const TrajectoryDataset ds = load_dataset(data);
  fs::create_directories(out);
  std::map<std::string, std::vector<EpisodeRecord>> records;
  for (const std::string& r : runs) {
    const auto run = load_run(r);
    // Visualize the run's best checkpoint under the first evaluation seed.
    const SeedResult best = evaluate_run(run, b.eval, b.eval.seeds.front());
    const auto it = std::find_if(run.begin(), run.end(),
                                 [&](const SavedCheckpoint& s) { return s.iter == best.best_result().iter; });
    const ModelSet models = ModelSet::from_checkpoint(it->checkpoint);
    auto eps = run_episodes([&] { return make_controller(models, b.eval.control); }, b.eval, b.eval.seeds.front());
    std::string name = to_string(models.variant);
    while (records.count(name)) name += "_";
    for (std::size_t e = 0; e < eps.size(); ++e) {
      if (eps[e].goal_log.empty()) continue;
      std::ofstream log(fs::path(out) / (name + "_goals_" + std::to_string(e) + ".csv"));
      write_goal_log_csv(log, eps[e].goal_log);
    }
    records[name] = std::move(eps);
  }
  export_trajectories(records, ds, out);
  std::cout << "wrote " << (fs::path(out) / "overlay.svg").string() << " and rollouts.csv\n";
  return 0;
}

int cmd_grad_check(int instances, double tolerance) {
  bool ok = true;
  nn::GradCheckOptions opts;
  opts.tolerance = tolerance;
  for (TrainingLoss loss : kAllTrainingLosses) {
    double worst = 0.0;
    std::size_t checked = 0, skipped = 0, failures = 0;
    for (int i = 0; i < instances; ++i) {
      const nn::GradCheckReport r = check_training_loss(loss, static_cast<std::uint64_t>(i), opts);
      worst = std::max(worst, r.max_rel_error);
      checked += r.checked;
      skipped += r.skipped_kinks;
      failures += r.failures.size();
    }
    ok = ok && failures == 0;
    std::cout << to_string(loss) << ": " << (failures == 0 ? "ok" : "FAILED") << "  max_rel_error=" << worst
              << "  checked=" << checked << "  skipped_kinks=" << skipped << "  failures=" << failures << "\n";
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  configure_allocator();
  CLI::App app{"Offline goal-conditioned imitation with value-selected goals on Graph Reach"};
  app.require_subcommand(1);

  Common gen_c, train_c, eval_c, viz_c;
  std::string gen_out, train_data, train_variant, train_out, eval_data, eval_out, viz_data, viz_out;
  std::vector<std::string> eval_runs, viz_runs;
  double filter_best = 0.0;
  int grad_instances = 20, viz_episodes = 5;
  double grad_tol = 1e-4;
  bool print_keys = false;

  auto* gen = app.add_subcommand("gen-data", "Generate a Graph Reach demonstration dataset");
  add_common(gen, gen_c);
  gen->add_option("--out", gen_out, "Dataset file to write")->required();
  gen->add_option("--filter-best", filter_best, "Keep only the shortest FRAC of the demos")
      ->check(CLI::Range(0.0, 1.0).description("in (0, 1]"));

  auto* tr = app.add_subcommand("train", "Train one variant offline from a dataset file");
  add_common(tr, train_c);
  tr->add_option("--data", train_data, "Dataset file")->required()->check(CLI::ExistingFile);
  tr->add_option("--variant", train_variant, "iris, iris_no_goal_vae, iris_no_q, bc, bc_rnn or bcq");
  tr->add_option("--out", train_out, "Run directory for checkpoints and metrics.csv")->required();

  auto* ev = app.add_subcommand("eval", "Evaluate checkpoints with the best-checkpoint protocol");
  add_common(ev, eval_c);
  ev->add_option("--run", eval_runs, "Run directory or checkpoint file; one, or one per eval seed")
      ->required()
      ->take_all();
  ev->add_option("--data", eval_data, "Dataset file for the dataset reference row")->check(CLI::ExistingFile);
  ev->add_option("--out", eval_out, "JSON report to write")->required();

  auto* vz = app.add_subcommand("viz", "Export rollouts of each run's best checkpoint as CSV and SVG");
  add_common(vz, viz_c);
  vz->add_option("--run", viz_runs, "Run directory or checkpoint file (repeatable)")->required()->take_all();
  vz->add_option("--data", viz_data, "Dataset file")->required()->check(CLI::ExistingFile);
  vz->add_option("--out", viz_out, "Output directory")->required();
  vz->add_option("--episodes", viz_episodes, "Rollouts per run")->check(CLI::PositiveNumber);

  auto* gc = app.add_subcommand("grad-check", "Finite-difference check of the four training losses");
  gc->add_option("--instances", grad_instances, "Random instances per loss")->check(CLI::PositiveNumber);
  gc->add_option("--tolerance", grad_tol, "Maximum relative error");

  auto* keys = app.add_subcommand("config-keys", "List every configuration key with its default");
  keys->callback([&] { print_keys = true; });

  CLI11_PARSE(app, argc, argv);
  try {
    if (*gen) {
      if (gen->count("--filter-best") && !(filter_best > 0.0)) throw ConfigError("--filter-best must be in (0, 1]");
      return cmd_gen_data(gen_c, gen_out, filter_best);
    }
    if (*tr) return cmd_train(train_c, train_data, train_variant, train_out);
    if (*ev) return cmd_eval(eval_c, eval_runs, eval_data, eval_out);
    if (*vz) return cmd_viz(viz_c, viz_runs, viz_data, viz_out, viz_episodes);
    if (*gc) return cmd_grad_check(grad_instances, grad_tol);
    if (print_keys) {
      std::cout << dump_config(ConfigBundle{});
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
