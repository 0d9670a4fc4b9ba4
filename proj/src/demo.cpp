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

#include "lanechange/demo.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "lanechange/digest.hpp"

namespace lanechange {

namespace {

struct LaneScan {
  const VehicleState* front = nullptr;
  const VehicleState* rear = nullptr;
};

// Nearest vehicles ahead and behind the ego among those in or entering `lane`.
LaneScan scan_lane(const WorldState& w, int lane) {
  const VehicleState& ego = w.ego();
  LaneScan s;
  for (const auto& v : w.vehicles) {
    if (v.is_ego) continue;
    if (!occupies_lane(v, lane, w.road) && v.lane_target != lane) continue;
    if (v.longitudinal_pos >= ego.longitudinal_pos) {
      if (!s.front || v.longitudinal_pos < s.front->longitudinal_pos) s.front = &v;
    } else {
      if (!s.rear || v.longitudinal_pos > s.rear->longitudinal_pos) s.rear = &v;
    }
  }
  return s;
}

std::optional<double> closing_ttc(const VehicleState& follower, const VehicleState& leader) {
  const double closing = follower.speed - leader.speed;
  if (closing <= 0.0) return std::nullopt;
  return std::max(bumper_gap(follower, leader), 0.0) / closing;
}

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

double parse_double(const std::string& s) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw DemoFormatError("demo file: bad number '" + s + "'");
  }
  if (pos != s.size()) throw DemoFormatError("demo file: bad number '" + s + "'");
  return v;
}

template <class I>
I parse_int(const std::string& s) {
  I v{};
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw DemoFormatError("demo file: bad integer '" + s + "'");
  return v;
}

std::vector<std::string> split(const std::string& line) {
  std::istringstream is(line);
  std::vector<std::string> out;
  for (std::string tok; is >> tok;) out.push_back(tok);
  return out;
}

std::string next_line(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DemoFormatError("demo file: unexpected end of file");
  return line;
}

// Reads `tag v1 v2 ...` and checks the tag and arity.
std::vector<std::string> expect(std::istream& in, const std::string& tag, std::size_t arity) {
  auto tok = split(next_line(in));
  if (tok.empty() || tok[0] != tag || tok.size() != arity + 1) {
    throw DemoFormatError("demo file: expected '" + tag + "' record");
  }
  return tok;
}

void write_frame(std::ostream& out, const Frame& f) {
  out << "frame " << Frame::kPixels << '\n';
  out.write(reinterpret_cast<const char*>(f.levels.data()), Frame::kPixels);
  out << '\n';
}

FramePtr read_frame(std::istream& in) {
  const auto tok = expect(in, "frame", 1);
  if (parse_int<int>(tok[1]) != Frame::kPixels) throw DemoFormatError("demo file: frame length mismatch");
  auto f = std::make_shared<Frame>();
  in.read(reinterpret_cast<char*>(f->levels.data()), Frame::kPixels);
  if (in.gcount() != Frame::kPixels) throw DemoFormatError("demo file: truncated frame");
  if (in.get() != '\n') throw DemoFormatError("demo file: frame not terminated");
  return f;
}

SessionMode mode_from_name(const std::string& s) {
  if (s == "human") return SessionMode::Human;
  if (s == "scripted") return SessionMode::Scripted;
  throw DemoFormatError("demo file: unknown mode '" + s + "'");
}

bool same_frame(const FramePtr& a, const FramePtr& b) {
  if (!a || !b) return a == b;
  return *a == *b;
}

}  // namespace

// ---------------------------------------------------------------------------

DecisionAction scripted_demonstrator(const WorldState& w, const ScriptedThresholds& th) {
  const VehicleState& ego = w.ego();
  const RoadConfig& road = w.road;
  const int lane = road.lane_at(ego.lateral_pos);
  const bool changing = ego.lane_target != lane || std::abs(ego.lateral_pos - road.lane_center(lane)) > 1e-6;

  const auto leader = idm_leader(w, ego.id);
  const VehicleState* front = leader ? &w.vehicle(*leader) : nullptr;
  const auto front_ttc = front ? closing_ttc(ego, *front) : std::nullopt;
  const bool must_brake = front_ttc && *front_ttc < th.brake_ttc;

  bool blocked = false;
  if (!changing && lane < road.shoulder_lane && !must_brake) {
    const LaneScan s = scan_lane(w, lane + 1);
    const bool front_ok = !s.front || bumper_gap(ego, *s.front) > th.lane_front_gap;
    bool rear_ok = !s.rear || bumper_gap(*s.rear, ego) > th.lane_rear_gap;
    if (rear_ok && s.rear) {
      const auto t = closing_ttc(*s.rear, ego);
      rear_ok = !t || *t > th.lane_rear_ttc;
    }
    if (front_ok && rear_ok) return DecisionAction::LaneRight;
    blocked = !front_ok;
  }

  if (must_brake) return DecisionAction::Brake;
  if (th.yield_when_blocked && blocked && ego.speed > th.yield_speed_floor) return DecisionAction::Brake;
  const bool room = !front || bumper_gap(ego, *front) > th.accelerate_front_gap;
  if (ego.speed < th.cruise_speed && ego.target_speed < th.cruise_speed && room) {
    return DecisionAction::Accelerate;
  }
  return DecisionAction::Maintain;
}

std::optional<DecisionAction> action_for_key(std::string_view key) {
  if (key == " " || key == "space" || key == "Space" || key == "SPACE" || key == "32") {
    return DecisionAction::Maintain;
  }
  if (key == "87") return DecisionAction::Accelerate;
  if (key == "83") return DecisionAction::Brake;
  if (key == "65") return DecisionAction::LaneLeft;
  if (key == "68") return DecisionAction::LaneRight;
  if (key.size() != 1) return std::nullopt;
  switch (std::tolower(static_cast<unsigned char>(key[0]))) {
    case 'w': return DecisionAction::Accelerate;
    case 's': return DecisionAction::Brake;
    case 'a': return DecisionAction::LaneLeft;
    case 'd': return DecisionAction::LaneRight;
    default: return std::nullopt;
  }
}

std::string_view mode_name(SessionMode m) {
  return m == SessionMode::Human ? "human" : "scripted";
}

bool operator==(const DemoStep& a, const DemoStep& b) {
  return a.step == b.step && a.action == b.action && a.reward == b.reward && a.done == b.done &&
         a.outcome == b.outcome && a.digest == b.digest && same_frame(a.frame, b.frame);
}

bool operator==(const DemoEpisode& a, const DemoEpisode& b) {
  return a.session_id == b.session_id && a.seed == b.seed && a.mode == b.mode && a.road == b.road &&
         a.weights == b.weights && a.max_steps == b.max_steps && same_frame(a.initial_frame, b.initial_frame) &&
         a.steps == b.steps;
}

std::string frame_digest(const Frame& f) { return sha256_hex(f.levels); }

// ---------------------------------------------------------------------------
// File format

void write_demos(std::ostream& out, const std::vector<DemoEpisode>& episodes) {
  out << "LCDEMO " << kDemoFormatVersion << '\n';
  out << "sessions " << episodes.size() << '\n';
  for (const auto& ep : episodes) {
    if (!ep.initial_frame) throw std::invalid_argument("write_demos: episode without initial frame");
    out << "session " << ep.session_id << " seed " << ep.seed << " mode " << mode_name(ep.mode) << " steps "
        << ep.steps.size() << '\n';
    const RoadConfig& r = ep.road;
    out << "road " << r.lane_count << ' ' << fmt(r.lane_width) << ' ' << fmt(r.goal_distance) << ' '
        << r.shoulder_lane << ' ' << fmt(r.speed_floor) << ' ' << fmt(r.speed_ceiling) << '\n';
    out << "weights " << fmt(ep.weights.w1) << ' ' << fmt(ep.weights.w2) << ' ' << fmt(ep.weights.w3) << ' '
        << fmt(ep.weights.w4) << '\n';
    out << "max_steps " << ep.max_steps << '\n';
    out << "initial " << frame_digest(*ep.initial_frame) << '\n';
    write_frame(out, *ep.initial_frame);
    for (const auto& st : ep.steps) {
      if (!st.frame) throw std::invalid_argument("write_demos: step without frame");
      out << "step " << st.step << " action " << action_code(st.action) << " reward " << fmt(st.reward.r1) << ' '
          << fmt(st.reward.r2) << ' ' << fmt(st.reward.r3) << ' ' << fmt(st.reward.r4) << ' '
          << fmt(st.reward.total) << " done " << (st.done ? 1 : 0) << " outcome " << outcome_name(st.outcome)
          << " digest " << st.digest << '\n';
      write_frame(out, *st.frame);
    }
    out << "end\n";
  }
}

std::vector<DemoEpisode> read_demos(std::istream& in) {
  const auto magic = split(next_line(in));
  if (magic.size() != 2 || magic[0] != "LCDEMO") throw DemoFormatError("demo file: bad magic");
  if (parse_int<int>(magic[1]) != kDemoFormatVersion) {
    throw DemoFormatError("demo file: unsupported version " + magic[1]);
  }
  const auto count = parse_int<std::size_t>(expect(in, "sessions", 1)[1]);
  std::vector<DemoEpisode> out;
  for (std::size_t k = 0; k < count; ++k) {
    DemoEpisode ep;
    const auto head = split(next_line(in));
    if (head.size() != 8 || head[0] != "session" || head[2] != "seed" || head[4] != "mode" || head[6] != "steps") {
      throw DemoFormatError("demo file: bad session header");
    }
    ep.session_id = parse_int<int>(head[1]);
    ep.seed = parse_int<std::uint64_t>(head[3]);
    ep.mode = mode_from_name(head[5]);
    const auto n_steps = parse_int<std::size_t>(head[7]);

    const auto road = expect(in, "road", 6);
    ep.road.lane_count = parse_int<int>(road[1]);
    ep.road.lane_width = parse_double(road[2]);
    ep.road.goal_distance = parse_double(road[3]);
    ep.road.shoulder_lane = parse_int<int>(road[4]);
    ep.road.speed_floor = parse_double(road[5]);
    ep.road.speed_ceiling = parse_double(road[6]);
    const auto wt = expect(in, "weights", 4);
    ep.weights = {parse_double(wt[1]), parse_double(wt[2]), parse_double(wt[3]), parse_double(wt[4])};
    ep.max_steps = parse_int<int>(expect(in, "max_steps", 1)[1]);

    const std::string initial_digest = expect(in, "initial", 1)[1];
    ep.initial_frame = read_frame(in);
    if (frame_digest(*ep.initial_frame) != initial_digest) {
      throw DemoFormatError("demo file: initial frame digest mismatch in session " + head[1]);
    }

    for (std::size_t i = 0; i < n_steps; ++i) {
      const auto tok = split(next_line(in));
      if (tok.size() != 16 || tok[0] != "step" || tok[2] != "action" || tok[4] != "reward" || tok[10] != "done" ||
          tok[12] != "outcome" || tok[14] != "digest") {
        throw DemoFormatError("demo file: bad step record");
      }
      DemoStep st;
      st.step = parse_int<int>(tok[1]);
      try {
        st.action = action_from_code(parse_int<int>(tok[3]));
      } catch (const std::out_of_range&) {
        throw DemoFormatError("demo file: bad action code " + tok[3]);
      }
      st.reward = {parse_double(tok[5]), parse_double(tok[6]), parse_double(tok[7]), parse_double(tok[8]),
                   parse_double(tok[9])};
      const int done = parse_int<int>(tok[11]);
      if (done != 0 && done != 1) throw DemoFormatError("demo file: bad done flag");
      st.done = done == 1;
      try {
        st.outcome = outcome_from_name(tok[13]);
      } catch (const std::exception&) {
        throw DemoFormatError("demo file: bad outcome " + tok[13]);
      }
      st.digest = tok[15];
      st.frame = read_frame(in);
      if (frame_digest(*st.frame) != st.digest) {
        throw DemoFormatError("demo file: frame digest mismatch at step " + tok[1] + " of session " + head[1]);
      }
      ep.steps.push_back(std::move(st));
    }
    if (next_line(in) != "end") throw DemoFormatError("demo file: missing session terminator");
    out.push_back(std::move(ep));
  }
  return out;
}

void export_demos(const std::filesystem::path& path, const std::vector<DemoEpisode>& episodes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  // Written beside the target and renamed, so a reader never sees half a file.
  std::filesystem::path tmp = path;
  tmp += ".partial";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    write_demos(out, episodes);
    out.close();
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::vector<DemoEpisode> load_demo_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return read_demos(in);
}

std::vector<Transition> to_transitions(const DemoEpisode& episode) {
  std::vector<FramePtr> history{episode.initial_frame};
  history.reserve(episode.steps.size() + 1);
  std::vector<Transition> out;
  out.reserve(episode.steps.size());
  Observation s = observe(history);
  for (const auto& st : episode.steps) {
    history.push_back(st.frame);
    Observation s_next = observe(history);
    out.push_back({s, action_code(st.action), st.reward.total, s_next, st.done, true});
    s = std::move(s_next);
  }
  return out;
}

std::vector<Transition> load_demos(const std::filesystem::path& path) {
  const auto episodes = load_demo_file(path);
  const auto report = validate_demos(episodes);
  if (!report.ok) throw DemoFormatError("demo file failed replay validation: " + report.problems.front());
  std::vector<Transition> out;
  for (const auto& ep : episodes) {
    auto t = to_transitions(ep);
    out.insert(out.end(), std::make_move_iterator(t.begin()), std::make_move_iterator(t.end()));
  }
  return out;
}

ValidationReport validate_episode(const DemoEpisode& episode, const TrafficConfig& traffic) {
  ValidationReport rep;
  auto fail = [&](const std::string& what) {
    rep.ok = false;
    rep.problems.push_back("session " + std::to_string(episode.session_id) + ": " + what);
  };
  EnvConfig cfg;
  cfg.road = episode.road;
  cfg.traffic = traffic;
  cfg.weights = episode.weights;
  cfg.max_steps = episode.max_steps;
  Env env(cfg);
  try {
    env.reset(episode.seed);
  } catch (const std::exception& e) {
    fail(std::string("reset failed: ") + e.what());
    return rep;
  }
  if (!episode.initial_frame || frame_digest(*env.frames().front()) != frame_digest(*episode.initial_frame)) {
    fail("initial frame digest mismatch");
  }
  for (std::size_t i = 0; i < episode.steps.size(); ++i) {
    const DemoStep& st = episode.steps[i];
    if (st.step != static_cast<int>(i)) fail("step index " + std::to_string(st.step) + " out of order");
    if (env.done()) {
      fail("episode ended before step " + std::to_string(i));
      return rep;
    }
    const StepResult r = env.step(st.action);
    const std::string at = " at step " + std::to_string(i);
    if (!(r.reward == st.reward)) fail("reward mismatch" + at);
    if (r.done != st.done || r.outcome != st.outcome) fail("termination mismatch" + at);
    if (frame_digest(*env.frames().back()) != st.digest) fail("frame digest mismatch" + at);
  }
  // Saved sessions always run to termination; a cut-off tail would turn its
  // last step into a false terminal transition.
  if (!env.done()) fail("episode does not terminate after " + std::to_string(episode.steps.size()) + " steps");
  return rep;
}

ValidationReport validate_demos(const std::vector<DemoEpisode>& episodes, const TrafficConfig& traffic) {
  ValidationReport rep;
  for (const auto& ep : episodes) {
    auto r = validate_episode(ep, traffic);
    if (!r.ok) rep.ok = false;
    rep.problems.insert(rep.problems.end(), r.problems.begin(), r.problems.end());
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Session service

DemoService::DemoService(EnvConfig env_config) : env_config_(std::move(env_config)), env_(env_config_) {}

bool DemoService::has_active() const {
  return current_.has_value() && current_->status == SessionStatus::Active;
}

const DemoSession& DemoService::start_session(std::uint64_t seed, SessionMode mode) {
  if (has_active()) throw SessionBusy("a session is already active");
  env_.reset(seed);
  DemoSession s;
  s.id = next_id_++;
  s.seed = seed;
  s.mode = mode;
  s.record.session_id = s.id;
  s.record.seed = seed;
  s.record.mode = mode;
  s.record.road = env_config_.road;
  s.record.weights = env_config_.weights;
  s.record.max_steps = env_config_.max_steps;
  s.record.initial_frame = env_.frames().front();
  current_ = std::move(s);
  return *current_;
}

StepSummary DemoService::submit_key(std::string_view key) {
  const auto a = action_for_key(key);
  if (!a) throw UnknownKey("unmapped key '" + std::string(key) + "'");
  return submit_action(*a);
}

StepSummary DemoService::submit_action(DecisionAction a) {
  if (!has_active()) throw SessionStateError("no active session");
  DemoSession& s = *current_;
  const int index = env_.steps();
  const StepResult r = env_.step(a);
  DemoStep st;
  st.step = index;
  st.action = a;
  st.reward = r.reward;
  st.done = r.done;
  st.outcome = r.outcome;
  st.frame = env_.frames().back();
  st.digest = frame_digest(*st.frame);
  s.record.steps.push_back(st);
  if (r.done) {
    s.status = SessionStatus::Completed;
    completed_.push_back(s);
  }
  return {index, a, r.reward, r.done, r.outcome};
}

const DemoSession& DemoService::run_scripted(const ScriptedThresholds& th) {
  if (!has_active()) throw SessionStateError("no active session");
  while (has_active()) submit_action(scripted_demonstrator(env_.world(), th));
  return completed_.back();
}

void DemoService::abort() {
  if (!has_active()) throw SessionStateError("no active session");
  current_->status = SessionStatus::Aborted;
}

std::vector<DemoEpisode> DemoService::completed_episodes() const {
  std::vector<DemoEpisode> out;
  out.reserve(completed_.size());
  for (const auto& s : completed_) out.push_back(s.record);
  return out;
}

std::vector<DemoEpisode> record_scripted_sessions(std::uint64_t base_seed, int count, const EnvConfig& env_config) {
  DemoService service(env_config);
  for (int k = 0; k < count; ++k) {
    service.start_session(derive_seed(base_seed, static_cast<std::uint64_t>(k)), SessionMode::Scripted);
    service.run_scripted();
  }
  return service.completed_episodes();
}

}  // namespace lanechange
