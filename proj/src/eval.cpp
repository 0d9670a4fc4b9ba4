// Copyright 2026 The lanechange Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "lanechange/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

namespace lanechange {

namespace fs = std::filesystem;

namespace {

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return std::string(s);
}

double to_double(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  try {
    const double d = std::stod(v, &pos);
    if (pos == v.size()) return d;
  } catch (const std::exception&) {
  }
  throw ConfigError("config: '" + key + "' expects a number, got '" + v + "'");
}

template <class I>
I to_int(const std::string& key, const std::string& v) {
  I out{};
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError("config: '" + key + "' expects an integer, got '" + v + "'");
  }
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true") return true;
  if (v == "0" || v == "false") return false;
  throw ConfigError("config: '" + key + "' expects 0/1/true/false, got '" + v + "'");
}

struct ConfigKey {
  const char* name;
  const char* doc;
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define LC_DOUBLE(NAME, DOC, FIELD)                                                              \
  ConfigKey {                                                                                    \
    NAME, DOC, [](RunConfig& c, const std::string& k, const std::string& v) { c.FIELD = to_double(k, v); }, \
        [](const RunConfig& c) { return fmt(c.FIELD); }                                          \
  }
#define LC_INT(NAME, DOC, FIELD, TYPE)                                                           \
  ConfigKey {                                                                                    \
    NAME, DOC, [](RunConfig& c, const std::string& k, const std::string& v) { c.FIELD = to_int<TYPE>(k, v); }, \
        [](const RunConfig& c) { return std::to_string(c.FIELD); }                               \
  }
#define LC_BOOL(NAME, DOC, FIELD)                                                                \
  ConfigKey {                                                                                    \
    NAME, DOC, [](RunConfig& c, const std::string& k, const std::string& v) { c.FIELD = to_bool(k, v); }, \
        [](const RunConfig& c) { return std::string(c.FIELD ? "1" : "0"); }                      \
  }

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = {
      LC_DOUBLE("gamma", "discount factor", trainer.gamma),
      LC_DOUBLE("learning_rate", "Adam step size for both Q networks", trainer.learning_rate),
      LC_INT("batch_size", "minibatch size (= demo_batch + explore_batch)", trainer.batch_size, int),
      LC_INT("demo_batch", "demonstration samples per batch (n1)", trainer.demo_batch, int),
      LC_INT("explore_batch", "exploration samples per batch (n2)", trainer.explore_batch, int),
      LC_INT("episodes", "training episodes (E2)", trainer.episodes, int),
      LC_INT("demo_episodes", "demonstration episodes loaded into the demo buffer (E1)", trainer.demo_episodes, int),
      LC_INT("buffer_capacity", "capacity of each replay buffer", trainer.buffer_capacity, std::size_t),
      LC_DOUBLE("epsilon_init", "initial exploration rate", trainer.epsilon.init),
      LC_DOUBLE("epsilon_cutoff", "final exploration rate", trainer.epsilon.cutoff),
      LC_INT("epsilon_horizon", "episodes of linear epsilon decay", trainer.epsilon.decay_horizon, int),
      LC_INT("checkpoint_every", "episodes between checkpoints (0 disables)", trainer.checkpoint_every, int),
      LC_BOOL("dueling_mean", "Q = V + A - mean A (1) or Q = V + A (0)", trainer.dueling_mean),
      LC_INT("max_steps", "decision steps per episode", env.max_steps, int),
      LC_DOUBLE("reward_w1", "weight of the lane-change reward", env.weights.w1),
      LC_DOUBLE("reward_w2", "weight of the collision reward", env.weights.w2),
      LC_DOUBLE("reward_w3", "weight of the front TTC penalty", env.weights.w3),
      LC_DOUBLE("reward_w4", "weight of the rear TTC penalty", env.weights.w4),
      LC_DOUBLE("goal_distance", "exit position in meters", env.road.goal_distance),
      LC_INT("surrounding_count", "surrounding vehicles", env.traffic.surrounding_count, int),
      LC_DOUBLE("bc_learning_rate", "behavior-cloning Adam step size", bc.learning_rate),
      LC_INT("bc_batch_size", "behavior-cloning minibatch size", bc.batch_size, int),
      LC_INT("bc_max_epochs", "behavior-cloning epoch limit", bc.max_epochs, int),
      LC_INT("bc_patience", "epochs without validation improvement before stopping", bc.patience, int),
      LC_DOUBLE("bc_validation_fraction", "fraction of demo episodes held out", bc.validation_fraction),
      LC_INT("eval_runs", "evaluation rollouts per policy", eval_runs, int),
      LC_INT("eval_seed", "base seed of evaluation rollouts", eval_seed, std::uint64_t),
  };
  return keys;
}

#undef LC_DOUBLE
#undef LC_INT
#undef LC_BOOL

void check(const RunConfig& c) {
  try {
    c.trainer.validate();
    c.env.road.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (c.env.max_steps <= 0) throw ConfigError("config: max_steps must be positive");
  if (c.bc.batch_size <= 0 || c.bc.max_epochs <= 0 || c.bc.patience <= 0 || !(c.bc.learning_rate > 0.0)) {
    throw ConfigError("config: behavior-cloning settings must be positive");
  }
  if (!(c.bc.validation_fraction >= 0.0 && c.bc.validation_fraction < 1.0)) {
    throw ConfigError("config: bc_validation_fraction must lie in [0, 1)");
  }
  if (c.eval_runs < 0) throw ConfigError("config: eval_runs must be non-negative");
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  return out;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

// Inputs of a transition list, N × kObservationSize.
std::vector<float> stack_inputs(const std::vector<const Transition*>& items) {
  std::vector<float> out(items.size() * kObservationSize);
  for (std::size_t i = 0; i < items.size(); ++i) {
    observation_to_input(items[i]->s, std::span<float>(out.data() + i * kObservationSize, kObservationSize));
  }
  return out;
}

struct CeStats {
  double loss = 0.0;
  double accuracy = 0.0;
};

// Mean cross-entropy and accuracy of `p` on precomputed inputs.
CeStats ce_stats(const NetworkParams<float>& p, const std::vector<float>& inputs, const std::vector<int>& labels) {
  CeStats s;
  const int n = static_cast<int>(labels.size());
  if (n == 0) return s;
  constexpr int kChunk = 64;
  int correct = 0;
  for (int start = 0; start < n; start += kChunk) {
    const int b = std::min(kChunk, n - start);
    const auto logits = forward_batch<float>(
        p, std::span<const float>(inputs.data() + static_cast<std::size_t>(start) * kObservationSize,
                                  static_cast<std::size_t>(b) * kObservationSize),
        b);
    const auto probs = softmax_rows(logits);
    for (int i = 0; i < b; ++i) {
      const int y = labels[start + i];
      s.loss -= std::log(std::max(probs[i][y], 1e-300));
      if (argmax<float>(std::span<const float>(logits.data() + i * kActionCount, kActionCount)) == y) ++correct;
    }
  }
  s.loss /= n;
  s.accuracy = static_cast<double>(correct) / n;
  return s;
}

void write_trace(const fs::path& p, const std::vector<TraceSample>& trace) {
  auto out = open_out(p);
  out << "time,lateral_pos,lateral_speed,longitudinal_pos,speed\n";
  for (const auto& t : trace) {
    out << fmt(t.time) << ',' << fmt(t.lateral_pos) << ',' << fmt(t.lateral_speed) << ','
        << fmt(t.longitudinal_pos) << ',' << fmt(t.speed) << '\n';
  }
}

std::map<std::string, std::string> read_kv(const fs::path& p) {
  std::ifstream in(p);
  std::map<std::string, std::string> kv;
  for (std::string line; std::getline(in, line);) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

std::string seed_dir_name(std::uint64_t seed) { return "seed_" + std::to_string(seed); }

}  // namespace

// ---------------------------------------------------------------------------

std::string_view strategy_name(StrategyKind k) {
  switch (k) {
    case StrategyKind::Proposed: return "proposed";
    case StrategyKind::VanillaD3QN: return "vanilla";
    case StrategyKind::ImitationIL: return "il";
  }
  return "?";
}

StrategyKind strategy_from_name(std::string_view name) {
  if (name == "proposed") return StrategyKind::Proposed;
  if (name == "vanilla") return StrategyKind::VanillaD3QN;
  if (name == "il") return StrategyKind::ImitationIL;
  throw std::invalid_argument("unknown strategy '" + std::string(name) + "'");
}

RunConfig parse_config(std::istream& in, RunConfig base) {
  const auto& keys = config_keys();
  int lineno = 0;
  for (std::string line; std::getline(in, line);) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    const auto it = std::find_if(keys.begin(), keys.end(), [&](const ConfigKey& k) { return key == k.name; });
    if (it == keys.end()) throw ConfigError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    it->set(base, key, value);
  }
  check(base);
  return base;
}

RunConfig load_config(const fs::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  return parse_config(in, std::move(base));
}

void write_config(std::ostream& out, const RunConfig& cfg) {
  for (const auto& k : config_keys()) out << k.name << " = " << k.get(cfg) << '\n';
}

std::string config_reference() {
  std::ostringstream os;
  const RunConfig defaults;
  for (const auto& k : config_keys()) os << k.name << " (default " << k.get(defaults) << "): " << k.doc << '\n';
  return os.str();
}

// ---------------------------------------------------------------------------

std::vector<double> rolling_rate(const std::vector<bool>& events, int window) {
  if (window <= 0) throw std::invalid_argument("window must be positive");
  std::vector<double> out(events.size());
  int count = 0;
  for (std::size_t e = 0; e < events.size(); ++e) {
    count += events[e] ? 1 : 0;
    if (e >= static_cast<std::size_t>(window) && events[e - window]) --count;
    const std::size_t n = std::min<std::size_t>(e + 1, window);
    out[e] = 100.0 * count / static_cast<double>(n);
  }
  return out;
}

Aggregate aggregate(const std::vector<std::vector<double>>& series) {
  Aggregate a;
  if (series.empty()) return a;
  std::size_t len = series.front().size();
  for (const auto& s : series) len = std::min(len, s.size());
  a.mean.resize(len);
  a.stddev.resize(len);
  std::vector<double> col(series.size());
  for (std::size_t i = 0; i < len; ++i) {
    for (std::size_t k = 0; k < series.size(); ++k) col[k] = series[k][i];
    a.mean[i] = mean_of(col);
    a.stddev[i] = std_of(col);
  }
  return a;
}

CurveSet make_curves(const std::vector<std::uint64_t>& seeds, const std::vector<std::vector<EpisodeMetrics>>& metrics,
                     int window) {
  CurveSet c;
  c.seeds = seeds;
  for (const auto& rows : metrics) {
    std::vector<double> r, l;
    std::vector<bool> col;
    for (const auto& m : rows) {
      r.push_back(m.reward);
      l.push_back(m.final_lateral);
      col.push_back(m.collision);
    }
    c.reward.push_back(std::move(r));
    c.final_lateral.push_back(std::move(l));
    c.collision_rate.push_back(rolling_rate(col, window));
  }
  c.reward_agg = aggregate(c.reward);
  c.lateral_agg = aggregate(c.final_lateral);
  c.collision_agg = aggregate(c.collision_rate);
  return c;
}

// ---------------------------------------------------------------------------

std::vector<std::array<double, kActionCount>> softmax_rows(std::span<const float> logits) {
  if (logits.size() % kActionCount != 0) throw std::invalid_argument("softmax_rows: ragged logits");
  std::vector<std::array<double, kActionCount>> out(logits.size() / kActionCount);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const float* z = logits.data() + i * kActionCount;
    const double mx = *std::max_element(z, z + kActionCount);
    double sum = 0.0;
    for (int a = 0; a < kActionCount; ++a) sum += out[i][a] = std::exp(static_cast<double>(z[a]) - mx);
    for (int a = 0; a < kActionCount; ++a) out[i][a] /= sum;
  }
  return out;
}

BcResult train_behavior_cloning(const std::vector<std::vector<Transition>>& episodes, std::uint64_t seed,
                                const BcConfig& cfg, const Architecture& arch) {
  std::size_t total = 0;
  for (const auto& ep : episodes) total += ep.size();
  if (total == 0) throw std::invalid_argument("behavior cloning needs at least one demonstration");

  Rng rng(derive_seed(seed, 0));
  std::vector<std::size_t> order(episodes.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.uniform_int(i)]);
  const std::size_t n_val =
      episodes.size() < 2 ? 0 : std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(cfg.validation_fraction * episodes.size())));

  std::vector<const Transition*> train_items, val_items;
  for (std::size_t k = 0; k < order.size(); ++k) {
    auto& dst = k < n_val ? val_items : train_items;
    for (const auto& t : episodes[order[k]]) dst.push_back(&t);
  }
  if (train_items.empty()) std::swap(train_items, val_items);

  std::vector<int> train_y, val_y;
  for (const auto* t : train_items) train_y.push_back(t->a);
  for (const auto* t : val_items) val_y.push_back(t->a);
  const std::vector<float> train_x = stack_inputs(train_items);
  const std::vector<float> val_x = stack_inputs(val_items);

  BcResult res;
  res.train_samples = static_cast<int>(train_y.size());
  res.validation_samples = static_cast<int>(val_y.size());
  res.degenerate = std::all_of(train_y.begin(), train_y.end(), [&](int a) { return a == train_y.front(); }) &&
                   std::all_of(val_y.begin(), val_y.end(), [&](int a) { return a == train_y.front(); });
  if (res.degenerate) std::cerr << "behavior cloning: demonstrations contain a single action\n";

  NetworkParams<float> p = init_params<float>(arch, derive_seed(seed, 1));
  AdamState<float> opt(p.size(), cfg.learning_rate);
  NetworkParams<float> best = p;
  const auto& vx = val_items.empty() ? train_x : val_x;
  const auto& vy = val_items.empty() ? train_y : val_y;
  double best_loss = ce_stats(p, vx, vy).loss;
  int since_best = 0;

  std::vector<std::size_t> idx(train_y.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<float> batch_x;
  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.uniform_int(i)]);
    for (std::size_t start = 0; start < idx.size(); start += cfg.batch_size) {
      const int b = static_cast<int>(std::min<std::size_t>(cfg.batch_size, idx.size() - start));
      batch_x.resize(static_cast<std::size_t>(b) * kObservationSize);
      for (int i = 0; i < b; ++i) {
        std::copy_n(train_x.data() + idx[start + i] * kObservationSize, kObservationSize,
                    batch_x.data() + static_cast<std::size_t>(i) * kObservationSize);
      }
      ForwardCache<float> cache;
      const auto logits = forward_batch<float>(p, batch_x, b, &cache);
      const auto probs = softmax_rows(logits);
      std::vector<float> d_logits(logits.size());
      for (int i = 0; i < b; ++i) {
        const int y = train_y[idx[start + i]];
        for (int a = 0; a < kActionCount; ++a) {
          d_logits[i * kActionCount + a] = static_cast<float>((probs[i][a] - (a == y ? 1.0 : 0.0)) / b);
        }
      }
      const auto grads = backward_from_output<float>(p, cache, d_logits);
      optimize_step<float>(p, grads, opt);
    }
    res.epochs = epoch + 1;
    const double loss = ce_stats(p, vx, vy).loss;
    if (!std::isfinite(loss)) throw NumericError("behavior cloning: non-finite validation loss");
    if (loss < best_loss) {
      best_loss = loss;
      best = p;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  res.params = std::move(best);
  res.best_validation_loss = best_loss;
  res.train_accuracy = ce_stats(res.params, train_x, train_y).accuracy;
  res.validation_accuracy = val_items.empty() ? res.train_accuracy : ce_stats(res.params, val_x, val_y).accuracy;
  return res;
}

// ---------------------------------------------------------------------------

std::uint64_t evaluation_seed(std::uint64_t base, int run) {
  return derive_seed(base, 3'000'000ULL + static_cast<std::uint64_t>(run));
}

EvalReport summarize(const std::vector<EvalRun>& runs) {
  EvalReport r;
  r.n_runs = static_cast<int>(runs.size());
  if (runs.empty()) return r;
  int collisions = 0, successes = 0;
  std::vector<double> speeds;
  for (const auto& run : runs) {
    collisions += run.outcome == Outcome::Collision;
    successes += run.outcome == Outcome::Success;
    speeds.push_back(run.traffic_mean_speed);
  }
  r.collision_rate = 100.0 * collisions / r.n_runs;
  r.success_rate = 100.0 * successes / r.n_runs;
  r.traffic_speed_mean = mean_of(speeds);
  r.traffic_speed_std = std_of(speeds);
  return r;
}

EvalResult evaluate(const NetworkParams<float>& policy, int runs, std::uint64_t base_seed, const EnvConfig& env_cfg,
                    bool record_traces) {
  EnvConfig cfg = env_cfg;
  cfg.record_trace = record_traces;
  Env env(cfg);
  EvalResult res;
  for (int k = 0; k < runs; ++k) {
    EvalRun run;
    run.run = k;
    run.seed = evaluation_seed(base_seed, k);
    Observation obs = env.reset(run.seed);
    while (!env.done()) {
      const QValues q = forward(policy, obs);
      const StepResult s = env.step(action_from_code(argmax<float>(q)));
      run.reward += s.reward.total;
      obs = s.observation;
    }
    run.outcome = env.outcome();
    run.steps = env.steps();
    run.traffic_mean_speed = env.mean_traffic_speed();
    run.final_lateral = env.world().ego().lateral_pos;
    if (record_traces) run.trace = env.trace();
    res.runs.push_back(std::move(run));
  }
  res.report = summarize(res.runs);
  return res;
}

void write_eval_report(std::ostream& out, const EvalReport& r) {
  out << "collision_rate,success_rate,traffic_speed_mean,traffic_speed_std,n_runs\n"
      << fmt(r.collision_rate) << ',' << fmt(r.success_rate) << ',' << fmt(r.traffic_speed_mean) << ','
      << fmt(r.traffic_speed_std) << ',' << r.n_runs << '\n';
}

void write_eval(const fs::path& dir, const EvalResult& result) {
  fs::create_directories(dir / "traces");
  {
    auto out = open_out(dir / "eval_runs.csv");
    out << "run,seed,outcome,reward,steps,traffic_mean_speed,final_lateral\n";
    for (const auto& r : result.runs) {
      out << r.run << ',' << r.seed << ',' << outcome_name(r.outcome) << ',' << fmt(r.reward) << ',' << r.steps << ','
          << fmt(r.traffic_mean_speed) << ',' << fmt(r.final_lateral) << '\n';
    }
  }
  {
    auto out = open_out(dir / "eval_report.csv");
    write_eval_report(out, result.report);
  }
  for (const auto& r : result.runs) {
    if (!r.trace.empty()) write_trace(dir / "traces" / ("run_" + std::to_string(r.run) + ".csv"), r.trace);
  }
}

// ---------------------------------------------------------------------------

std::vector<std::uint64_t> parse_seed_list(std::string_view text) {
  auto parse_one = [](std::string_view s) {
    const std::string t = trim(s);
    std::uint64_t v = 0;
    const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || ec != std::errc() || p != t.data() + t.size()) {
      throw std::invalid_argument("bad seed '" + t + "'");
    }
    return v;
  };
  std::vector<std::uint64_t> out;
  const auto range = text.find("..");
  if (range != std::string_view::npos) {
    const auto lo = parse_one(text.substr(0, range));
    const auto hi = parse_one(text.substr(range + 2));
    if (hi < lo) throw std::invalid_argument("empty seed range");
    for (auto s = lo; s <= hi; ++s) out.push_back(s);
    return out;
  }
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = std::min(text.find(',', start), text.size());
    out.push_back(parse_one(text.substr(start, comma - start)));
    start = comma + 1;
  }
  return out;
}

StrategyRun train_strategy(const TrainOptions& options) {
  const RunConfig& base = options.config;
  check(base);
  if (options.seeds.empty()) throw ConfigError("no seeds given");
  const bool needs_demos = options.kind != StrategyKind::VanillaD3QN;
  if (needs_demos && !options.demo_file) {
    throw ConfigError(std::string(strategy_name(options.kind)) + " needs a demo file");
  }

  // Demonstrations are validated by replay once and shared read-only.
  std::vector<std::vector<Transition>> demo_episodes;
  if (needs_demos) {
    if (!fs::exists(*options.demo_file)) throw ConfigError("demo file not found: " + options.demo_file->string());
    auto episodes = load_demo_file(*options.demo_file);
    const auto rep = validate_demos(episodes, base.env.traffic);
    if (!rep.ok) throw DemoFormatError("demo file failed replay validation: " + rep.problems.front());
    const std::size_t use = base.trainer.demo_episodes > 0
                                ? std::min<std::size_t>(episodes.size(), base.trainer.demo_episodes)
                                : episodes.size();
    for (std::size_t k = 0; k < use; ++k) demo_episodes.push_back(to_transitions(episodes[k]));
  }

  fs::create_directories(options.out_dir);
  {
    auto out = open_out(options.out_dir / "config.txt");
    write_config(out, base);
  }
  {
    auto out = open_out(options.out_dir / "run.txt");
    out << "strategy=" << strategy_name(options.kind) << '\n' << "seeds=";
    for (std::size_t i = 0; i < options.seeds.size(); ++i) out << (i ? "," : "") << options.seeds[i];
    out << '\n' << "episodes=" << base.trainer.episodes << '\n';
    out << "demo_file=" << (needs_demos ? options.demo_file->string() : std::string("none")) << '\n';
    out << "demo_episodes_loaded=" << demo_episodes.size() << '\n';
  }

  std::mutex log_mutex;
  auto log = [&](const std::string& msg) {
    if (!options.log) return;
    std::lock_guard<std::mutex> lock(log_mutex);
    options.log(msg);
  };

  StrategyRun result;
  result.kind = options.kind;
  result.seeds.resize(options.seeds.size());

  auto run_seed = [&](std::size_t index) {
    SeedRun& sr = result.seeds[index];
    sr.seed = options.seeds[index];
    const fs::path dir = options.out_dir / seed_dir_name(sr.seed);
    fs::create_directories(dir);

    if (options.kind == StrategyKind::ImitationIL) {
      BcResult bc = train_behavior_cloning(demo_episodes, sr.seed, base.bc, base.trainer.arch);
      {
        auto out = open_out(dir / "bc.txt");
        out << "train_accuracy=" << fmt(bc.train_accuracy) << '\n'
            << "validation_accuracy=" << fmt(bc.validation_accuracy) << '\n'
            << "best_validation_loss=" << fmt(bc.best_validation_loss) << '\n'
            << "epochs=" << bc.epochs << '\n'
            << "train_samples=" << bc.train_samples << '\n'
            << "validation_samples=" << bc.validation_samples << '\n'
            << "degenerate=" << (bc.degenerate ? 1 : 0) << '\n'
            << "env_steps=0\n";
      }
      save_checkpoint(dir / "policy.bin", bc.params, bc.epochs);
      sr.policy = bc.params;
      log("il seed " + std::to_string(sr.seed) + ": train accuracy " + fmt(bc.train_accuracy));
      sr.bc = std::move(bc);
    } else {
      TrainerConfig tc = base.trainer;
      tc.seed = sr.seed;
      if (options.kind == StrategyKind::VanillaD3QN) {
        tc.demo_batch = 0;
        tc.explore_batch = tc.batch_size;
        tc.demo_episodes = 0;
      }
      Trainer trainer(tc, base.env);
      fs::create_directories(dir / "checkpoints");
      trainer.set_checkpoint_dir(dir / "checkpoints");
      if (options.batch_observer) {
        trainer.set_batch_observer([&, seed = sr.seed](const MixedBatch& b) {
          options.batch_observer({seed, &b, trainer.demo_buffer().size(), trainer.explore_buffer().size()});
        });
      }
      {
        auto out = open_out(dir / "manifest.txt");
        out << "strategy=" << strategy_name(options.kind) << '\n';
        trainer.write_manifest(out);
      }
      if (options.kind == StrategyKind::Proposed) {
        for (const auto& ep : demo_episodes) trainer.load_demonstrations(ep);
      }
      auto metrics_out = open_out(dir / "metrics.csv");
      write_metrics_header(metrics_out);
      sr.metrics = trainer.train(nullptr, [&](const EpisodeMetrics& m) {
        write_metrics_row(metrics_out, m);
        metrics_out.flush();
        if ((m.episode + 1) % 10 == 0) {
          log(std::string(strategy_name(options.kind)) + " seed " + std::to_string(sr.seed) + " episode " +
              std::to_string(m.episode + 1));
        }
      });
      sr.demo_buffer_size = trainer.demo_buffer().size();
      sr.env_steps = trainer.env_steps();
      save_checkpoint(dir / "policy.bin", trainer.q1(), trainer.updates_q1());
      sr.policy = trainer.q1();
    }

    if (options.evaluate_after && base.eval_runs > 0) {
      EvalResult ev = evaluate(sr.policy, base.eval_runs, base.eval_seed, base.env, true);
      write_eval(dir / "eval", ev);
      sr.eval = std::move(ev);
    }
  };

  int jobs = options.jobs > 0 ? options.jobs : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  jobs = std::min<int>(jobs, static_cast<int>(options.seeds.size()));
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(options.seeds.size());
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < options.seeds.size();) {
      try {
        run_seed(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  if (options.kind != StrategyKind::ImitationIL) {
    std::vector<std::vector<EpisodeMetrics>> all;
    for (const auto& s : result.seeds) all.push_back(s.metrics);
    result.curves = make_curves(options.seeds, all);
  }
  return result;
}

// ---------------------------------------------------------------------------

ReportResult report(const fs::path& dir) {
  ReportResult res;
  const fs::path run_file = dir / "run.txt";
  if (!fs::exists(run_file)) {
    res.complete = false;
    res.missing.push_back(run_file.string());
    return res;
  }
  const auto run = read_kv(run_file);
  StrategyKind kind;
  std::vector<std::uint64_t> seeds;
  try {
    kind = strategy_from_name(run.count("strategy") ? run.at("strategy") : "");
    seeds = parse_seed_list(run.count("seeds") ? run.at("seeds") : "");
  } catch (const std::invalid_argument& e) {
    res.complete = false;
    res.missing.push_back(run_file.string() + " (" + e.what() + ")");
    return res;
  }

  std::vector<std::string> required = {"policy.bin", "eval/eval_runs.csv"};
  if (kind == StrategyKind::ImitationIL) {
    required.push_back("bc.txt");
  } else {
    required.push_back("manifest.txt");
    required.push_back("metrics.csv");
  }
  for (const auto s : seeds) {
    for (const auto& r : required) {
      const fs::path p = dir / seed_dir_name(s) / r;
      if (!fs::exists(p)) res.missing.push_back(p.string());
    }
  }
  if (!res.missing.empty()) {
    res.complete = false;
    return res;
  }

  const fs::path out = dir / "report";
  fs::create_directories(out / "traces");
  auto emit = [&](const fs::path& p) -> std::ofstream {
    res.written.push_back(p);
    return open_out(p);
  };

  // Curves.
  if (kind != StrategyKind::ImitationIL) {
    std::vector<std::vector<EpisodeMetrics>> all;
    for (const auto s : seeds) {
      std::ifstream in(dir / seed_dir_name(s) / "metrics.csv");
      all.push_back(read_metrics(in));
    }
    const CurveSet c = make_curves(seeds, all);
    for (std::size_t k = 0; k < seeds.size(); ++k) {
      auto o = emit(out / ("curves_" + seed_dir_name(seeds[k]) + ".csv"));
      o << "episode,reward,final_lateral,collision,collision_rate\n";
      for (std::size_t e = 0; e < all[k].size(); ++e) {
        o << all[k][e].episode << ',' << fmt(c.reward[k][e]) << ',' << fmt(c.final_lateral[k][e]) << ','
          << (all[k][e].collision ? 1 : 0) << ',' << fmt(c.collision_rate[k][e]) << '\n';
      }
    }
    auto o = emit(out / "curves_mean.csv");
    o << "episode,reward_mean,reward_std,final_lateral_mean,final_lateral_std,collision_rate_mean,collision_rate_std\n";
    for (std::size_t e = 0; e < c.reward_agg.mean.size(); ++e) {
      o << e << ',' << fmt(c.reward_agg.mean[e]) << ',' << fmt(c.reward_agg.stddev[e]) << ','
        << fmt(c.lateral_agg.mean[e]) << ',' << fmt(c.lateral_agg.stddev[e]) << ',' << fmt(c.collision_agg.mean[e])
        << ',' << fmt(c.collision_agg.stddev[e]) << '\n';
    }
  }

  // Evaluation table and traces.
  std::vector<EvalRun> pooled;
  auto table = emit(out / "eval_table.csv");
  table << "seed,collision_rate,success_rate,traffic_speed_mean,traffic_speed_std,n_runs\n";
  auto peaks = emit(out / "trace_summary.csv");
  peaks << "seed,run,samples,period,peak_abs_lateral_speed,peak_speed\n";
  for (const auto s : seeds) {
    const fs::path ed = dir / seed_dir_name(s) / "eval";
    std::ifstream in(ed / "eval_runs.csv");
    std::string line;
    std::getline(in, line);
    std::vector<EvalRun> runs;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto f = split_csv(line);
      if (f.size() != 7) throw std::runtime_error("malformed " + (ed / "eval_runs.csv").string());
      EvalRun r;
      r.run = std::stoi(f[0]);
      r.seed = std::stoull(f[1]);
      r.outcome = outcome_from_name(f[2]);
      r.reward = std::stod(f[3]);
      r.steps = std::stoi(f[4]);
      r.traffic_mean_speed = std::stod(f[5]);
      r.final_lateral = std::stod(f[6]);
      runs.push_back(r);

      const fs::path trace = ed / "traces" / ("run_" + f[0] + ".csv");
      if (fs::exists(trace)) {
        std::ifstream tin(trace, std::ios::binary);
        std::stringstream buf;
        buf << tin.rdbuf();
        const std::string text = buf.str();
        {
          auto o = emit(out / "traces" / (seed_dir_name(s) + "_run_" + f[0] + ".csv"));
          o << text;
        }
        std::istringstream tl(text);
        std::string row;
        std::getline(tl, row);
        int samples = 0;
        double first_t = 0.0, second_t = 0.0, peak_lat = 0.0, peak_v = 0.0;
        while (std::getline(tl, row)) {
          const auto c = split_csv(row);
          if (c.size() != 5) continue;
          const double t = std::stod(c[0]);
          if (samples == 0) first_t = t;
          if (samples == 1) second_t = t;
          peak_lat = std::max(peak_lat, std::abs(std::stod(c[2])));
          peak_v = std::max(peak_v, std::stod(c[4]));
          ++samples;
        }
        peaks << s << ',' << f[0] << ',' << samples << ',' << fmt(samples > 1 ? second_t - first_t : 0.0) << ','
              << fmt(peak_lat) << ',' << fmt(peak_v) << '\n';
      }
    }
    const EvalReport r = summarize(runs);
    table << s << ',' << fmt(r.collision_rate) << ',' << fmt(r.success_rate) << ',' << fmt(r.traffic_speed_mean) << ','
          << fmt(r.traffic_speed_std) << ',' << r.n_runs << '\n';
    pooled.insert(pooled.end(), runs.begin(), runs.end());
  }
  const EvalReport all = summarize(pooled);
  table << "pooled," << fmt(all.collision_rate) << ',' << fmt(all.success_rate) << ',' << fmt(all.traffic_speed_mean)
        << ',' << fmt(all.traffic_speed_std) << ',' << all.n_runs << '\n';
  return res;
}

}  // namespace lanechange
