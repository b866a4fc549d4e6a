#include "iris/config.hpp"

#include <json.hpp>

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace iris {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* first = text.data();
  const char* last = first + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || text.empty())
    throw ConfigError("invalid value '" + text + "' for " + key);
  return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError("invalid boolean '" + text + "' for " + key + " (use true/false)");
}

template <typename T>
std::vector<T> parse_list(const std::string& key, const std::string& text) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(parse_number<T>(key, item));
  }
  return out;
}

std::string format(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}
std::string format(int v) { return std::to_string(v); }
std::string format(std::uint64_t v) { return std::to_string(v); }
std::string format(bool v) { return v ? "true" : "false"; }
template <typename T>
std::string format(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

struct Entry {
  std::string key;
  std::function<void(ConfigBundle&, const std::string&)> set;
  std::function<std::string(const ConfigBundle&)> get;
};

template <typename T>
Entry number(std::string key, T ConfigBundle::*section, auto member) {
  return {key,
          [key, section, member](ConfigBundle& b, const std::string& v) {
            using V = std::decay_t<decltype((b.*section).*member)>;
            if constexpr (std::is_same_v<V, bool>)
              (b.*section).*member = parse_bool(key, v);
            else
              (b.*section).*member = parse_number<V>(key, v);
          },
          [section, member](const ConfigBundle& b) { return format((b.*section).*member); }};
}

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = [] {
    using B = ConfigBundle;
    std::vector<Entry> t;
    t.push_back(number("gen.n_demos", &B::gen, &DemoGenConfig::n_demos));
    t.push_back(number("gen.grid_n", &B::gen, &DemoGenConfig::grid_n));
    t.push_back(number("gen.detour_prob", &B::gen, &DemoGenConfig::detour_prob));
    t.push_back(number("gen.max_depth", &B::gen, &DemoGenConfig::max_depth));
    t.push_back(number("gen.depth_multiplier", &B::gen, &DemoGenConfig::depth_multiplier));
    t.push_back({"gen.detour_rows",
                 [](B& b, const std::string& v) { b.gen.detour_rows = parse_list<int>("gen.detour_rows", v); },
                 [](const B& b) { return format(b.gen.detour_rows); }});
    t.push_back(number("gen.eta_min", &B::gen, &DemoGenConfig::eta_min));
    t.push_back(number("gen.eta_max", &B::gen, &DemoGenConfig::eta_max));
    t.push_back(number("gen.noise_sigma", &B::gen, &DemoGenConfig::noise_sigma));
    t.push_back(number("gen.capture_radius", &B::gen, &DemoGenConfig::capture_radius));
    t.push_back(number("gen.max_retries", &B::gen, &DemoGenConfig::max_retries));
    t.push_back(number("gen.seed", &B::gen, &DemoGenConfig::seed));
    // Environment geometry shared by generation and evaluation.
    t.push_back({"env.a_max", [](B& b, const std::string& v) { b.gen.env.a_max = parse_number<double>("env.a_max", v); },
                 [](const B& b) { return format(b.gen.env.a_max); }});
    t.push_back({"env.goal_radius",
                 [](B& b, const std::string& v) { b.gen.env.goal_radius = parse_number<double>("env.goal_radius", v); },
                 [](const B& b) { return format(b.gen.env.goal_radius); }});
    t.push_back({"env.h_max", [](B& b, const std::string& v) { b.gen.env.h_max = parse_number<int>("env.h_max", v); },
                 [](const B& b) { return format(b.gen.env.h_max); }});

    t.push_back({"train.variant", [](B& b, const std::string& v) {
                   try {
                     b.train.variant = parse_variant(v);
                   } catch (const std::invalid_argument& e) {
                     throw ConfigError(e.what());
                   }
                 },
                 [](const B& b) { return to_string(b.train.variant); }});
    t.push_back(number("train.T", &B::train, &TrainConfig::T));
    t.push_back(number("train.batch_size", &B::train, &TrainConfig::batch_size));
    t.push_back(number("train.n_iter", &B::train, &TrainConfig::n_iter));
    t.push_back(number("train.gamma", &B::train, &TrainConfig::gamma));
    t.push_back(number("train.M", &B::train, &TrainConfig::M));
    t.push_back(number("train.beta_g", &B::train, &TrainConfig::beta_g));
    t.push_back(number("train.beta_a", &B::train, &TrainConfig::beta_a));
    t.push_back(number("train.lr_policy", &B::train, &TrainConfig::lr_policy));
    t.push_back(number("train.lr_goal", &B::train, &TrainConfig::lr_goal));
    t.push_back(number("train.lr_action", &B::train, &TrainConfig::lr_action));
    t.push_back(number("train.lr_q", &B::train, &TrainConfig::lr_q));
    t.push_back(number("train.adam_beta1", &B::train, &TrainConfig::adam_beta1));
    t.push_back(number("train.adam_beta2", &B::train, &TrainConfig::adam_beta2));
    t.push_back(number("train.adam_eps", &B::train, &TrainConfig::adam_eps));
    t.push_back(number("train.tau", &B::train, &TrainConfig::tau));
    t.push_back(number("train.seed", &B::train, &TrainConfig::seed));
    t.push_back(number("train.checkpoint_every", &B::train, &TrainConfig::checkpoint_every));
    t.push_back(number("train.log_every", &B::train, &TrainConfig::log_every));
    t.push_back(number("train.q_all_transitions", &B::train, &TrainConfig::q_all_transitions));
    t.push_back(number("train.hidden", &B::train, &TrainConfig::hidden));
    t.push_back(number("train.goal_latent", &B::train, &TrainConfig::goal_latent));
    t.push_back(number("train.action_latent", &B::train, &TrainConfig::action_latent));
    t.push_back(number("train.update_policy", &B::train, &TrainConfig::update_policy));
    t.push_back(number("train.update_goal", &B::train, &TrainConfig::update_goal));
    t.push_back(number("train.update_action", &B::train, &TrainConfig::update_action));
    t.push_back(number("train.update_q", &B::train, &TrainConfig::update_q));

    t.push_back(number("eval.n_episodes", &B::eval, &EvalConfig::n_episodes));
    t.push_back(number("eval.h_max", &B::eval, &EvalConfig::h_max));
    t.push_back(number("eval.gamma", &B::eval, &EvalConfig::gamma));
    t.push_back({"eval.seeds",
                 [](B& b, const std::string& v) { b.eval.seeds = parse_list<std::uint64_t>("eval.seeds", v); },
                 [](const B& b) { return format(b.eval.seeds); }});
    t.push_back({"control.n_goals",
                 [](B& b, const std::string& v) { b.eval.control.n_goals = parse_number<int>("control.n_goals", v); },
                 [](const B& b) { return format(b.eval.control.n_goals); }});
    t.push_back({"control.M", [](B& b, const std::string& v) { b.eval.control.M = parse_number<int>("control.M", v); },
                 [](const B& b) { return format(b.eval.control.M); }});
    t.push_back({"control.score_with_target",
                 [](B& b, const std::string& v) {
                   b.eval.control.score_with_target = parse_bool("control.score_with_target", v);
                 },
                 [](const B& b) { return format(b.eval.control.score_with_target); }});
    t.push_back({"control.bc_rnn_window_reset",
                 [](B& b, const std::string& v) {
                   b.eval.control.bc_rnn_window_reset = parse_bool("control.bc_rnn_window_reset", v);
                 },
                 [](const B& b) { return format(b.eval.control.bc_rnn_window_reset); }});
    return t;
  }();
  return table;
}

}  // namespace

void set_config_value(ConfigBundle& bundle, const std::string& key, const std::string& value) {
  for (const Entry& e : entries())
    if (e.key == key) {
      e.set(bundle, value);
      return;
    }
  throw ConfigError("unknown config key '" + key + "'");
}

void apply_config_text(ConfigBundle& bundle, const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
    try {
      set_config_value(bundle, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

void apply_config_file(ConfigBundle& bundle, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  apply_config_text(bundle, ss.str(), path.string());
}

void apply_overrides(ConfigBundle& bundle, const std::vector<std::string>& assignments) {
  for (const std::string& a : assignments) {
    const auto eq = a.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + a + "' is not key=value");
    set_config_value(bundle, trim(a.substr(0, eq)), trim(a.substr(eq + 1)));
  }
}

void finalize(ConfigBundle& b) {
  b.gen.env.grid_n = b.gen.grid_n;
  b.gen.min_length = b.train.T;
  b.eval.env = b.gen.env;
  b.eval.control.T = b.train.T;
  try {
    validate(b.gen);
    validate(b.train);
    validate(b.eval);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("invalid configuration: ") + e.what());
  }
}

std::string dump_config(const ConfigBundle& bundle) {
  std::string out;
  for (const Entry& e : entries()) out += e.key + " = " + e.get(bundle) + "\n";
  return out;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const Entry& e : entries()) keys.push_back(e.key);
  return keys;
}

std::string gen_config_json(const DemoGenConfig& g) {
  nlohmann::json j;
  j["n_demos"] = g.n_demos;
  j["grid_n"] = g.grid_n;
  j["detour_prob"] = g.detour_prob;
  j["max_depth"] = g.max_depth;
  j["depth_multiplier"] = g.depth_multiplier;
  j["detour_rows"] = g.detour_rows;
  j["eta_min"] = g.eta_min;
  j["eta_max"] = g.eta_max;
  j["noise_sigma"] = g.noise_sigma;
  j["capture_radius"] = g.capture_radius;
  j["min_length"] = g.min_length;
  j["max_retries"] = g.max_retries;
  j["seed"] = g.seed;
  j["env"] = {{"start", {g.env.start_x, g.env.start_y}}, {"goal", {g.env.goal_x, g.env.goal_y}},
              {"grid_n", g.env.grid_n},                  {"a_max", g.env.a_max},
              {"goal_radius", g.env.goal_radius},        {"h_max", g.env.h_max}};
  return j.dump(2) + "\n";
}

}  // namespace iris
