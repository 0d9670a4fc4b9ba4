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

#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "lanechange/demo.hpp"
#include "lanechange/ws.hpp"

namespace lanechange {

// ---------------------------------------------------------------------------
// Messages. Every message is a JSON object with a "type" field.

inline constexpr int kProtocolVersion = 1;

struct Hud {
  double speed = 0.0;      // m/s
  int lane = 0;
  int deadline_ms = 0;     // time left in the current tick
};

struct FrameMessage {
  int session = 0;
  int step = 0;
  Frame grid;
  Hud hud;
};

struct EndMessage {
  int session = 0;
  std::string outcome;  // outcome_name() or "aborted"
  double total_reward = 0.0;
  int steps = 0;
};

std::string encode_frame_message(const FrameMessage& m);
std::string encode_end_message(const EndMessage& m);
std::string encode_error_message(const std::string& what);

struct ClientMessage {
  enum class Kind { Hello, Key, Abort } kind = Kind::Hello;
  int version = 0;
  std::string keycode;  // numeric codes are carried as their decimal text
};

/// Throws ws::ProtocolError on malformed JSON or an unknown type.
ClientMessage parse_client_message(const std::string& text);

/// Client-side decoding of server messages.
struct ServerMessage {
  enum class Kind { Frame, End, Error } kind = Kind::Frame;
  FrameMessage frame;
  EndMessage end;
  std::string error;
};
ServerMessage parse_server_message(const std::string& text);

// ---------------------------------------------------------------------------
// Server

struct ServeOptions {
  int port = 8765;
  bool any_address = false;
  std::chrono::milliseconds tick_period{500};
  std::uint64_t seed = 0;         // session k runs seed derive_seed(seed, k)
  int max_sessions = 0;           // 0: serve until stopped
  std::optional<std::filesystem::path> out;  // demo file rewritten after each session
  EnvConfig env{};
};

/// Per-tick bookkeeping, exposed for timing checks.
struct TickRecord {
  int step = 0;
  DecisionAction action = DecisionAction::Maintain;
  bool from_key = false;
  int keys_received = 0;
  double sent_at = 0.0;  // seconds since session start
};

/// Human-mode session server: one client at a time, one frame per tick, the
/// last valid key of a tick wins and silence means Maintain.
class DemoServer {
 public:
  explicit DemoServer(ServeOptions options);

  int port() const { return listener_.port(); }
  /// Serves until `stop` is set or max_sessions sessions have finished.
  void run(const std::atomic<bool>& stop);

  const DemoService& service() const { return service_; }
  /// Ticks of the most recent session.
  const std::vector<TickRecord>& ticks() const { return ticks_; }
  int sessions_finished() const { return sessions_finished_; }

 private:
  ServeOptions options_;
  ws::Listener listener_;
  DemoService service_;
  std::vector<TickRecord> ticks_;
  int sessions_finished_ = 0;

  /// Runs one session on `conn`; returns false when the client went away.
  bool run_session(ws::Connection& conn, const std::atomic<bool>& stop);
  void save() const;
};

/// Headless protocol driver. `policy` picks a key for each frame (nullopt:
/// stay silent). Returns the end message.
struct DriverResult {
  EndMessage end;
  int frames = 0;
  int keys_sent = 0;
};
DriverResult drive_session(const std::string& host, int port,
                           const std::function<std::optional<std::string>(const FrameMessage&)>& policy);

}  // namespace lanechange
