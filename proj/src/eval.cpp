#include "iris/eval.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace iris {

void validate(const EvalConfig& c) {
  if (c.n_episodes < 1) throw std::invalid_argument("n_episodes must be at least 1");
  if (c.h_max < 1) throw std::invalid_argument("h_max must be positive");
  if (!(c.gamma >= 0.0 && c.gamma < 1.0)) throw std::invalid_argument("gamma must lie in [0, 1)");
  if (c.seeds.empty()) throw std::invalid_argument("at least one evaluation seed is required");
  validate(c.control);
}

double absorbing_return(const std::vector<double>& rewards, bool success, double gamma) {
  double ret = 0.0;
  double discount = 1.0;
  for (double r : rewards) {
    ret += discount * r;
    discount *= gamma;
  }
  if (success) ret += discount / (1.0 - gamma);
  return ret;
}

EpisodeRecord rollout(GraphReachEnv& env, Controller& controller, int h_max, double gamma, Rng& rng) {
  EpisodeRecord rec;
  rec.states.push_back(env.reset());
  controller.reset();
  for (int t = 0; t < h_max; ++t) {
    const Vec a = controller.act(rec.states.back(), rng);
    const StepResult res = env.step(a);
    rec.actions.push_back(a);
    rec.states.push_back(res.state);
    rec.rewards.push_back(res.reward);
    if (res.success) {
      rec.success = true;
      break;
    }
    if (res.done) break;
  }
  rec.goal_log = controller.goal_log();
  rec.discounted_return = absorbing_return(rec.rewards, rec.success, gamma);
  return rec;
}

EvalSummary summarize(const std::vector<EpisodeRecord>& episodes) {
  EvalSummary s;
  s.n_episodes = static_cast<int>(episodes.size());
  if (episodes.empty()) return s;
  int successes = 0;
  double length = 0.0;
  double ret = 0.0;
  for (const EpisodeRecord& e : episodes) {
    if (e.success) {
      ++successes;
      length += e.length();
    }
    ret += e.discounted_return;
  }
  s.success_rate = static_cast<double>(successes) / static_cast<double>(episodes.size());
  if (successes > 0) s.mean_success_length = length / successes;
  s.mean_return = ret / static_cast<double>(episodes.size());
  return s;
}

MeanStd mean_std(const std::vector<double>& values) {
  MeanStd out;
  if (values.empty()) return out;
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - out.mean) * (v - out.mean);
  out.std = std::sqrt(ss / static_cast<double>(values.size()));
  return out;
}

Rng episode_rng(std::uint64_t seed, int episode) {
  return derive_rng(splitmix64(seed ^ 0x6576616c5f726e67ULL), static_cast<std::uint64_t>(episode));
}

std::vector<EpisodeRecord> run_episodes(const ControllerFactory& factory, const EvalConfig& config,
                                        std::uint64_t seed) {
  validate(config);
  std::vector<EpisodeRecord> records(static_cast<std::size_t>(config.n_episodes));
  GraphReachConfig env_cfg = config.env;
  env_cfg.h_max = config.h_max;
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic, 1)
  for (int i = 0; i < config.n_episodes; ++i) {
    try {
      GraphReachEnv env(env_cfg);
      auto controller = factory();
      Rng rng = episode_rng(seed, i);
      records[static_cast<std::size_t>(i)] = rollout(env, *controller, config.h_max, config.gamma, rng);
    } catch (...) {
#pragma omp critical
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return records;
}

std::size_t best_checkpoint(const std::vector<CheckpointResult>& results) {
  if (results.empty()) throw std::invalid_argument("no checkpoints to choose from");
  auto length = [](const CheckpointResult& r) {
    return r.summary.mean_success_length.value_or(std::numeric_limits<double>::infinity());
  };
  std::size_t best = 0;
  for (std::size_t i = 1; i < results.size(); ++i) {
    const double a = results[i].summary.success_rate, b = results[best].summary.success_rate;
    if (a > b || (a == b && length(results[i]) < length(results[best]))) best = i;
  }
  return best;
}

SeedResult evaluate_run(const std::vector<SavedCheckpoint>& checkpoints, const EvalConfig& config,
                        std::uint64_t seed) {
  if (checkpoints.empty()) throw std::invalid_argument("no checkpoints to evaluate");
  SeedResult out;
  out.seed = seed;
  for (const SavedCheckpoint& c : checkpoints) {
    if (c.iter == 0 && checkpoints.size() > 1) continue;
    const ModelSet models = ModelSet::from_checkpoint(c.checkpoint);
    const auto factory = [&] { return make_controller(models, config.control); };
    CheckpointResult r;
    r.iter = c.iter;
    r.path = c.path.string();
    r.hash = checkpoint_hash(c.checkpoint);
    r.summary = summarize(run_episodes(factory, config, seed));
    out.checkpoints.push_back(std::move(r));
  }
  out.best = best_checkpoint(out.checkpoints);
  return out;
}

EvalReport aggregate(std::string variant, std::vector<SeedResult> seeds) {
  EvalReport rep;
  rep.variant = std::move(variant);
  rep.seeds = std::move(seeds);
  std::vector<double> success, length, ret;
  bool all_lengths = true;
  for (const SeedResult& s : rep.seeds) {
    const EvalSummary& b = s.best_result().summary;
    success.push_back(b.success_rate);
    ret.push_back(b.mean_return);
    if (b.mean_success_length)
      length.push_back(*b.mean_success_length);
    else
      all_lengths = false;
  }
  rep.success_rate = mean_std(success);
  rep.mean_return = mean_std(ret);
  if (all_lengths && !length.empty()) rep.mean_success_length = mean_std(length);
  return rep;
}

EvalSummary dataset_summary(const TrajectoryDataset& dataset, double gamma) {
  std::vector<EpisodeRecord> episodes;
  for (const Trajectory& t : dataset.trajectories()) {
    EpisodeRecord e;
    e.actions.resize(static_cast<std::size_t>(t.length()));
    for (Eigen::Index k = 0; k < t.rewards.size(); ++k) e.rewards.push_back(t.rewards[k]);
    e.success = !e.rewards.empty() && e.rewards.back() == 1.0;
    e.discounted_return = absorbing_return(e.rewards, e.success, gamma);
    episodes.push_back(std::move(e));
  }
  return summarize(episodes);
}

namespace {

nlohmann::json summary_json(const EvalSummary& s) {
  nlohmann::json j;
  j["n_episodes"] = s.n_episodes;
  j["success_rate"] = s.success_rate;
  j["mean_success_length"] = s.mean_success_length ? nlohmann::json(*s.mean_success_length) : nlohmann::json();
  j["mean_return"] = s.mean_return;
  return j;
}

nlohmann::json mean_std_json(const MeanStd& m) { return {{"mean", m.mean}, {"std", m.std}}; }

std::string hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace

std::string report_json(const EvalReport& report, const EvalConfig& config, const std::string& config_echo,
                        const std::optional<EvalSummary>& dataset_row) {
  nlohmann::json j;
  j["variant"] = report.variant;
  if (dataset_row) j["dataset"] = summary_json(*dataset_row);
  j["success_rate"] = mean_std_json(report.success_rate);
  j["mean_success_length"] =
      report.mean_success_length ? mean_std_json(*report.mean_success_length) : nlohmann::json();
  j["mean_return"] = mean_std_json(report.mean_return);
  nlohmann::json seeds = nlohmann::json::array();
  for (const SeedResult& s : report.seeds) {
    nlohmann::json sj;
    sj["seed"] = s.seed;
    sj["best_iter"] = s.best_result().iter;
    sj["best_checkpoint_hash"] = hex(s.best_result().hash);
    sj["best"] = summary_json(s.best_result().summary);
    nlohmann::json cks = nlohmann::json::array();
    for (const CheckpointResult& c : s.checkpoints) {
      nlohmann::json cj = summary_json(c.summary);
      cj["iter"] = c.iter;
      cj["path"] = c.path;
      cj["hash"] = hex(c.hash);
      cks.push_back(std::move(cj));
    }
    sj["checkpoints"] = std::move(cks);
    seeds.push_back(std::move(sj));
  }
  j["seeds"] = std::move(seeds);
  nlohmann::json cfg;
  cfg["n_episodes"] = config.n_episodes;
  cfg["h_max"] = config.h_max;
  cfg["gamma"] = config.gamma;
  cfg["seeds"] = config.seeds;
  cfg["n_goals"] = config.control.n_goals;
  cfg["M"] = config.control.M;
  cfg["T"] = config.control.T;
  cfg["score_with_target"] = config.control.score_with_target;
  cfg["bc_rnn_window_reset"] = config.control.bc_rnn_window_reset;
  // "key = value" lines of the full configuration.
  nlohmann::json echo = nlohmann::json::object();
  std::istringstream lines(config_echo);
  for (std::string line; std::getline(lines, line);) {
    const auto eq = line.find(" = ");
    if (eq != std::string::npos) echo[line.substr(0, eq)] = line.substr(eq + 3);
  }
  cfg["settings"] = std::move(echo);
  j["config"] = std::move(cfg);
  return j.dump(2) + "\n";
}

SvgPoint to_svg(double x, double y) { return {x * kSvgSize, (1.0 - y) * kSvgSize}; }

void export_trajectories(const std::map<std::string, std::vector<EpisodeRecord>>& records,
                         const TrajectoryDataset& dataset, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream csv(dir / "rollouts.csv", std::ios::trunc);
  if (!csv) throw std::runtime_error("cannot write " + (dir / "rollouts.csv").string());
  csv.precision(9);
  csv << "policy,episode,step,x,y\n";
  for (const auto& [name, eps] : records)
    for (std::size_t e = 0; e < eps.size(); ++e)
      for (std::size_t k = 0; k < eps[e].states.size(); ++k)
        csv << name << ',' << e << ',' << k << ',' << eps[e].states[k][0] << ',' << eps[e].states[k][1] << '\n';

  static const char* kColors[] = {"#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  std::ostringstream svg;
  svg.precision(6);
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " << kSvgSize << ' ' << kSvgSize << "\" width=\""
      << kSvgSize << "\" height=\"" << kSvgSize << "\">\n";
  svg << "<style>.dataset{stroke:#999;stroke-opacity:0.35;stroke-width:1;fill:none}"
      << ".rollout{stroke-width:2;fill:none}</style>\n";
  svg << "<rect x=\"0\" y=\"0\" width=\"" << kSvgSize << "\" height=\"" << kSvgSize << "\" fill=\"white\"/>\n";
  auto polyline = [&](const std::string& cls, const std::string& extra, auto&& point_at, std::size_t n) {
    svg << "<polyline class=\"" << cls << "\"" << extra << " points=\"";
    for (std::size_t k = 0; k < n; ++k) {
      const SvgPoint p = point_at(k);
      svg << (k ? " " : "") << p.x << ',' << p.y;
    }
    svg << "\"/>\n";
  };
  const std::size_t n_data = std::min<std::size_t>(50, dataset.size());
  for (std::size_t i = 0; i < n_data; ++i) {
    const MatF& s = dataset.trajectories()[i].states;
    polyline("dataset", "", [&](std::size_t k) { return to_svg(s(0, k), s(1, k)); },
             static_cast<std::size_t>(s.cols()));
  }
  std::size_t color = 0;
  for (const auto& [name, eps] : records) {
    const std::string extra = " data-policy=\"" + name + "\" stroke=\"" + kColors[color++ % 6] + "\"";
    for (std::size_t e = 0; e < std::min<std::size_t>(5, eps.size()); ++e) {
      const auto& st = eps[e].states;
      polyline("rollout policy-" + name, extra, [&](std::size_t k) { return to_svg(st[k][0], st[k][1]); }, st.size());
    }
  }
  const GraphReachConfig env;
  const SvgPoint start = to_svg(env.start_x, env.start_y);
  const SvgPoint goal = to_svg(env.goal_x, env.goal_y);
  svg << "<circle class=\"start\" cx=\"" << start.x << "\" cy=\"" << start.y << "\" r=\"8\" fill=\"#2ca02c\"/>\n";
  svg << "<circle class=\"goal\" cx=\"" << goal.x << "\" cy=\"" << goal.y << "\" r=\"" << env.goal_radius * kSvgSize
      << "\" fill=\"#d62728\" fill-opacity=\"0.4\"/>\n";
  svg << "</svg>\n";
  std::ofstream out(dir / "overlay.svg", std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + (dir / "overlay.svg").string());
  out << svg.str();
}

std::vector<double> nearest_distances(const std::vector<Vec>& queries, const std::vector<Vec>& reference) {
  if (reference.empty()) throw std::invalid_argument("empty reference set");
  std::vector<double> out(queries.size());
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < queries.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (const Vec& r : reference) best = std::min(best, (queries[i] - r).squaredNorm());
    out[i] = std::sqrt(best);
  }
  return out;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("percentile of an empty set");
  if (q < 0.0 || q > 100.0) throw std::invalid_argument("percentile must lie in [0, 100]");
  std::sort(values.begin(), values.end());
  const double pos = q / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

std::vector<Vec> all_states(const TrajectoryDataset& dataset) {
  std::vector<Vec> out;
  for (const Trajectory& t : dataset.trajectories())
    for (Eigen::Index k = 0; k < t.states.cols(); ++k) out.push_back(t.states.col(k).cast<double>());
  return out;
}

std::vector<Vec> all_states(const std::vector<EpisodeRecord>& episodes) {
  std::vector<Vec> out;
  for (const EpisodeRecord& e : episodes) out.insert(out.end(), e.states.begin(), e.states.end());
  return out;
}

}  // namespace iris
