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

#include "lanechange/demo_server.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"
#include "lanechange/digest.hpp"

namespace lanechange {

using nlohmann::json;

namespace {

json parse_object(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ws::ProtocolError(std::string("malformed message: ") + e.what());
  }
  if (!j.is_object() || !j.contains("type") || !j["type"].is_string()) {
    throw ws::ProtocolError("message without a type");
  }
  return j;
}

template <class T>
T field(const json& j, const char* name) {
  if (!j.contains(name)) throw ws::ProtocolError(std::string("missing field ") + name);
  try {
    return j.at(name).get<T>();
  } catch (const json::exception&) {
    throw ws::ProtocolError(std::string("bad field ") + name);
  }
}

}  // namespace

std::string encode_frame_message(const FrameMessage& m) {
  json j;
  j["type"] = "frame";
  j["session"] = m.session;
  j["step"] = m.step;
  j["width"] = Frame::kWidth;
  j["height"] = Frame::kHeight;
  j["grid"] = base64_encode(m.grid.levels);
  j["hud"] = {{"speed", m.hud.speed}, {"lane", m.hud.lane}, {"deadline_ms", m.hud.deadline_ms}};
  return j.dump();
}

std::string encode_end_message(const EndMessage& m) {
  json j;
  j["type"] = "end";
  j["session"] = m.session;
  j["outcome"] = m.outcome;
  j["totals"] = {{"reward", m.total_reward}, {"steps", m.steps}};
  return j.dump();
}

std::string encode_error_message(const std::string& what) {
  return json{{"type", "error"}, {"message", what}}.dump();
}

ClientMessage parse_client_message(const std::string& text) {
  const json j = parse_object(text);
  const std::string type = j["type"];
  ClientMessage m;
  if (type == "hello") {
    m.kind = ClientMessage::Kind::Hello;
    m.version = field<int>(j, "version");
  } else if (type == "key") {
    m.kind = ClientMessage::Kind::Key;
    if (!j.contains("keycode")) throw ws::ProtocolError("missing field keycode");
    const json& k = j["keycode"];
    if (k.is_number_integer()) {
      m.keycode = std::to_string(k.get<long long>());
    } else if (k.is_string()) {
      m.keycode = k.get<std::string>();
    } else {
      throw ws::ProtocolError("bad field keycode");
    }
  } else if (type == "abort") {
    m.kind = ClientMessage::Kind::Abort;
  } else {
    throw ws::ProtocolError("unknown message type '" + type + "'");
  }
  return m;
}

ServerMessage parse_server_message(const std::string& text) {
  const json j = parse_object(text);
  const std::string type = j["type"];
  ServerMessage m;
  if (type == "frame") {
    m.kind = ServerMessage::Kind::Frame;
    m.frame.session = field<int>(j, "session");
    m.frame.step = field<int>(j, "step");
    std::vector<std::uint8_t> bytes;
    try {
      bytes = base64_decode(field<std::string>(j, "grid"));
    } catch (const std::invalid_argument& e) {
      throw ws::ProtocolError(e.what());
    }
    if (bytes.size() != Frame::kPixels) throw ws::ProtocolError("grid size mismatch");
    std::copy(bytes.begin(), bytes.end(), m.frame.grid.levels.begin());
    const json hud = field<json>(j, "hud");
    m.frame.hud = {field<double>(hud, "speed"), field<int>(hud, "lane"), field<int>(hud, "deadline_ms")};
  } else if (type == "end") {
    m.kind = ServerMessage::Kind::End;
    m.end.session = field<int>(j, "session");
    m.end.outcome = field<std::string>(j, "outcome");
    const json totals = field<json>(j, "totals");
    m.end.total_reward = field<double>(totals, "reward");
    m.end.steps = field<int>(totals, "steps");
  } else if (type == "error") {
    m.kind = ServerMessage::Kind::Error;
    m.error = field<std::string>(j, "message");
  } else {
    throw ws::ProtocolError("unknown message type '" + type + "'");
  }
  return m;
}

// ---------------------------------------------------------------------------

DemoServer::DemoServer(ServeOptions options)
    : options_(std::move(options)), listener_(options_.port, options_.any_address), service_(options_.env) {
  if (options_.tick_period.count() <= 0) throw std::invalid_argument("tick period must be positive");
}

void DemoServer::save() const {
  if (options_.out) export_demos(*options_.out, service_.completed_episodes());
}

void DemoServer::run(const std::atomic<bool>& stop) {
  while (!stop.load()) {
    if (options_.max_sessions > 0 && sessions_finished_ >= options_.max_sessions) return;
    auto conn = listener_.accept(ws::Clock::now() + std::chrono::milliseconds(100));
    if (!conn) continue;
    try {
      while (conn->open() && !stop.load()) {
        if (options_.max_sessions > 0 && sessions_finished_ >= options_.max_sessions) break;
        if (!run_session(*conn, stop)) break;
      }
    } catch (const std::exception&) {
      // A misbehaving client only costs its own session.
      if (service_.has_active()) service_.abort();
    }
    conn->close();
  }
}

bool DemoServer::run_session(ws::Connection& conn, const std::atomic<bool>& stop) {
  // Wait for hello.
  for (;;) {
    if (stop.load()) return false;
    auto text = conn.receive(ws::Clock::now() + std::chrono::milliseconds(100));
    if (!text) {
      if (!conn.open()) return false;
      continue;
    }
    ClientMessage m;
    try {
      m = parse_client_message(*text);
    } catch (const ws::ProtocolError& e) {
      conn.send_text(encode_error_message(e.what()));
      continue;
    }
    if (m.kind != ClientMessage::Kind::Hello) {
      conn.send_text(encode_error_message("send hello first"));
      continue;
    }
    if (m.version != kProtocolVersion) {
      conn.send_text(encode_error_message("unsupported protocol version " + std::to_string(m.version)));
      return false;
    }
    break;
  }

  const auto seed = derive_seed(options_.seed, static_cast<std::uint64_t>(sessions_finished_));
  const DemoSession& session = service_.start_session(seed, SessionMode::Human);
  const int session_id = session.id;
  ticks_.clear();
  const auto period = options_.tick_period;
  const auto t0 = ws::Clock::now();
  auto tick_start = t0;
  double total = 0.0;

  for (;;) {
    const auto deadline = tick_start + period;
    const Env& env = service_.env();
    const auto& ego = env.world().ego();
    FrameMessage fm;
    fm.session = session_id;
    fm.step = env.steps();
    fm.grid = *env.frames().back();
    fm.hud = {ego.speed, env.world().road.lane_at(ego.lateral_pos),
              static_cast<int>(std::chrono::duration_cast<std::chrono::milliseconds>(deadline - ws::Clock::now()).count())};
    TickRecord rec;
    rec.step = fm.step;
    rec.sent_at = std::chrono::duration<double>(ws::Clock::now() - t0).count();
    conn.send_text(encode_frame_message(fm));

    std::optional<DecisionAction> latched;
    while (ws::Clock::now() < deadline) {
      auto text = conn.receive(deadline);
      if (!text) {
        if (!conn.open()) {
          service_.abort();
          return false;
        }
        continue;
      }
      ClientMessage m;
      try {
        m = parse_client_message(*text);
      } catch (const ws::ProtocolError& e) {
        conn.send_text(encode_error_message(e.what()));
        continue;
      }
      if (m.kind == ClientMessage::Kind::Abort) {
        service_.abort();
        conn.send_text(encode_end_message({session_id, "aborted", total, env.steps()}));
        return true;
      }
      if (m.kind == ClientMessage::Kind::Key) {
        ++rec.keys_received;
        if (const auto a = action_for_key(m.keycode)) {
          latched = *a;
        } else {
          conn.send_text(encode_error_message("unmapped key '" + m.keycode + "'"));
        }
      }
    }
    if (stop.load()) {
      service_.abort();
      return false;
    }

    rec.action = latched.value_or(DecisionAction::Maintain);
    rec.from_key = latched.has_value();
    const StepSummary s = service_.submit_action(rec.action);
    ticks_.push_back(rec);
    total += s.reward.total;
    tick_start = deadline;
    if (s.done) {
      ++sessions_finished_;
      save();
      conn.send_text(encode_end_message({session_id, std::string(outcome_name(s.outcome)), total, s.step + 1}));
      return true;
    }
  }
}

DriverResult drive_session(const std::string& host, int port,
                           const std::function<std::optional<std::string>(const FrameMessage&)>& policy) {
  ws::Connection conn = ws::connect(host, port);
  conn.send_text(json{{"type", "hello"}, {"version", kProtocolVersion}}.dump());
  DriverResult out;
  for (;;) {
    auto text = conn.receive(ws::Clock::now() + std::chrono::seconds(30));
    if (!text) throw std::runtime_error("server went silent or closed mid-session");
    const ServerMessage m = parse_server_message(*text);
    if (m.kind == ServerMessage::Kind::Error) continue;
    if (m.kind == ServerMessage::Kind::End) {
      out.end = m.end;
      conn.close();
      return out;
    }
    ++out.frames;
    if (const auto key = policy(m.frame)) {
      conn.send_text(json{{"type", "key"}, {"keycode", *key}}.dump());
      ++out.keys_sent;
    }
  }
}

}  // namespace lanechange
