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

// Minimal RFC 6455 endpoint: text messages only, no extensions, no TLS.

#include <chrono>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace lanechange::ws {

class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Opcode : std::uint8_t { Continuation = 0x0, Text = 0x1, Binary = 0x2, Close = 0x8, Ping = 0x9, Pong = 0xA };

/// Sec-WebSocket-Accept for a client key.
std::string accept_key(std::string_view client_key);

/// One complete frame. Clients must mask; servers must not.
std::string encode_frame(Opcode op, std::string_view payload, std::optional<std::uint32_t> mask = std::nullopt);

struct DecodedFrame {
  bool fin = true;
  Opcode op = Opcode::Text;
  bool masked = false;
  std::string payload;  // unmasked
  std::size_t consumed = 0;
};

/// Decodes the frame at the start of `buf`; nullopt when more bytes are
/// needed. Throws ProtocolError on reserved bits or oversized payloads.
std::optional<DecodedFrame> decode_frame(std::string_view buf);

inline constexpr std::size_t kMaxPayload = 1 << 20;

using Clock = std::chrono::steady_clock;

/// A connected, handshaken endpoint. Move-only; closes on destruction.
class Connection {
 public:
  Connection() = default;
  Connection(int fd, bool client_side, std::string pending = {});
  Connection(Connection&&) noexcept;
  Connection& operator=(Connection&&) noexcept;
  Connection(const Connection&) = delete;
  Connection& operator=(const Connection&) = delete;
  ~Connection();

  bool open() const { return fd_ >= 0 && !closed_; }
  void send_text(std::string_view text);
  /// Next text message, waiting until `deadline`. nullopt on timeout or when
  /// the peer closed (check open()). Pings are answered transparently.
  std::optional<std::string> receive(Clock::time_point deadline);
  void close();

 private:
  int fd_ = -1;
  bool client_side_ = false;
  bool closed_ = false;
  std::string buffer_;
  std::string fragments_;
  std::uint32_t mask_state_ = 0x9e3779b9u;

  void send_frame(Opcode op, std::string_view payload);
  std::optional<std::string> take_message();
};

/// Listening socket on 127.0.0.1 (or any address when `any_address`).
class Listener {
 public:
  /// Port 0 picks an ephemeral port.
  explicit Listener(int port, bool any_address = false);
  Listener(const Listener&) = delete;
  Listener& operator=(const Listener&) = delete;
  ~Listener();

  int port() const { return port_; }
  /// Accepts one client and completes the server handshake; nullopt on
  /// timeout or a failed handshake.
  std::optional<Connection> accept(Clock::time_point deadline);

 private:
  int fd_ = -1;
  int port_ = 0;
};

/// Client handshake against ws://host:port/path.
Connection connect(const std::string& host, int port, const std::string& path = "/");

}  // namespace lanechange::ws
