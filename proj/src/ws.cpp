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

#include "lanechange/ws.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cstring>
#include <random>
#include <utility>
#include <vector>

#include "lanechange/digest.hpp"

namespace lanechange::ws {

namespace {

constexpr std::string_view kGuid = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11";

int remaining_ms(Clock::time_point deadline) {
  const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
  return static_cast<int>(std::clamp<long long>(left, 0, 1'000'000));
}

// Waits for readability; false on timeout.
bool wait_readable(int fd, Clock::time_point deadline) {
  for (;;) {
    pollfd p{fd, POLLIN, 0};
    const int r = ::poll(&p, 1, remaining_ms(deadline));
    if (r > 0) return true;
    if (r == 0) return false;
    if (errno != EINTR) throw std::runtime_error(std::string("poll: ") + std::strerror(errno));
  }
}

void send_all(int fd, std::string_view data) {
  while (!data.empty()) {
    const ssize_t n = ::send(fd, data.data(), data.size(), MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw std::runtime_error(std::string("send: ") + std::strerror(errno));
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
}

// Appends available bytes; false when the peer closed.
bool read_some(int fd, std::string& buf) {
  char tmp[8192];
  for (;;) {
    const ssize_t n = ::recv(fd, tmp, sizeof tmp, 0);
    if (n > 0) {
      buf.append(tmp, static_cast<std::size_t>(n));
      return true;
    }
    if (n == 0) return false;
    if (errno == EINTR) continue;
    return false;
  }
}

// Reads an HTTP head (through the blank line). Returns {head, rest}.
std::optional<std::pair<std::string, std::string>> read_http_head(int fd, Clock::time_point deadline) {
  std::string buf;
  for (;;) {
    const auto end = buf.find("\r\n\r\n");
    if (end != std::string::npos) return std::make_pair(buf.substr(0, end + 4), buf.substr(end + 4));
    if (buf.size() > 16384) return std::nullopt;
    if (!wait_readable(fd, deadline)) return std::nullopt;
    if (!read_some(fd, buf)) return std::nullopt;
  }
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return std::string(s);
}

std::optional<std::string> header(const std::string& head, std::string_view name) {
  const std::string want = lower(name);
  std::size_t pos = head.find("\r\n");
  while (pos != std::string::npos && pos + 2 < head.size()) {
    const std::size_t start = pos + 2;
    const std::size_t end = head.find("\r\n", start);
    if (end == std::string::npos) break;
    const std::string_view line(head.data() + start, end - start);
    const auto colon = line.find(':');
    if (colon != std::string_view::npos && lower(trim(line.substr(0, colon))) == want) {
      return trim(line.substr(colon + 1));
    }
    pos = end;
  }
  return std::nullopt;
}

bool header_has_token(const std::optional<std::string>& value, std::string_view token) {
  if (!value) return false;
  const std::string v = lower(*value);
  const std::string t = lower(token);
  std::size_t start = 0;
  while (start <= v.size()) {
    const std::size_t comma = std::min(v.find(',', start), v.size());
    if (trim(std::string_view(v).substr(start, comma - start)) == t) return true;
    start = comma + 1;
  }
  return false;
}

}  // namespace

std::string accept_key(std::string_view client_key) {
  const auto md = sha1(std::string(client_key) + std::string(kGuid));
  return base64_encode(md);
}

std::string encode_frame(Opcode op, std::string_view payload, std::optional<std::uint32_t> mask) {
  if (payload.size() > kMaxPayload) throw ProtocolError("payload too large");
  std::string out;
  out.push_back(static_cast<char>(0x80 | static_cast<std::uint8_t>(op)));
  const std::uint8_t mask_bit = mask ? 0x80 : 0x00;
  const std::size_t n = payload.size();
  if (n < 126) {
    out.push_back(static_cast<char>(mask_bit | n));
  } else if (n <= 0xffff) {
    out.push_back(static_cast<char>(mask_bit | 126));
    out.push_back(static_cast<char>((n >> 8) & 0xff));
    out.push_back(static_cast<char>(n & 0xff));
  } else {
    out.push_back(static_cast<char>(mask_bit | 127));
    for (int i = 7; i >= 0; --i) out.push_back(static_cast<char>((static_cast<std::uint64_t>(n) >> (8 * i)) & 0xff));
  }
  if (!mask) {
    out.append(payload);
    return out;
  }
  std::uint8_t key[4];
  for (int i = 0; i < 4; ++i) key[i] = static_cast<std::uint8_t>((*mask >> (24 - 8 * i)) & 0xff);
  out.append(reinterpret_cast<const char*>(key), 4);
  for (std::size_t i = 0; i < n; ++i) out.push_back(static_cast<char>(payload[i] ^ key[i % 4]));
  return out;
}

std::optional<DecodedFrame> decode_frame(std::string_view buf) {
  if (buf.size() < 2) return std::nullopt;
  const auto b0 = static_cast<std::uint8_t>(buf[0]);
  const auto b1 = static_cast<std::uint8_t>(buf[1]);
  if (b0 & 0x70) throw ProtocolError("reserved bits set");
  DecodedFrame f;
  f.fin = (b0 & 0x80) != 0;
  const std::uint8_t op = b0 & 0x0f;
  switch (op) {
    case 0x0: case 0x1: case 0x2: case 0x8: case 0x9: case 0xA: break;
    default: throw ProtocolError("unknown opcode");
  }
  f.op = static_cast<Opcode>(op);
  f.masked = (b1 & 0x80) != 0;
  std::size_t pos = 2;
  std::uint64_t n = b1 & 0x7f;
  if (n == 126) {
    if (buf.size() < 4) return std::nullopt;
    n = (static_cast<std::uint64_t>(static_cast<std::uint8_t>(buf[2])) << 8) | static_cast<std::uint8_t>(buf[3]);
    pos = 4;
  } else if (n == 127) {
    if (buf.size() < 10) return std::nullopt;
    n = 0;
    for (int i = 0; i < 8; ++i) n = (n << 8) | static_cast<std::uint8_t>(buf[2 + i]);
    pos = 10;
  }
  if (n > kMaxPayload) throw ProtocolError("payload too large");
  std::uint8_t key[4] = {0, 0, 0, 0};
  if (f.masked) {
    if (buf.size() < pos + 4) return std::nullopt;
    for (int i = 0; i < 4; ++i) key[i] = static_cast<std::uint8_t>(buf[pos + i]);
    pos += 4;
  }
  if (buf.size() < pos + n) return std::nullopt;
  f.payload.assign(buf.substr(pos, n));
  if (f.masked) {
    for (std::size_t i = 0; i < f.payload.size(); ++i) f.payload[i] = static_cast<char>(f.payload[i] ^ key[i % 4]);
  }
  f.consumed = pos + n;
  return f;
}

// ---------------------------------------------------------------------------

Connection::Connection(int fd, bool client_side, std::string pending)
    : fd_(fd), client_side_(client_side), buffer_(std::move(pending)) {}

Connection::Connection(Connection&& o) noexcept
    : fd_(std::exchange(o.fd_, -1)),
      client_side_(o.client_side_),
      closed_(o.closed_),
      buffer_(std::move(o.buffer_)),
      fragments_(std::move(o.fragments_)),
      mask_state_(o.mask_state_) {}

Connection& Connection::operator=(Connection&& o) noexcept {
  if (this != &o) {
    if (fd_ >= 0) ::close(fd_);
    fd_ = std::exchange(o.fd_, -1);
    client_side_ = o.client_side_;
    closed_ = o.closed_;
    buffer_ = std::move(o.buffer_);
    fragments_ = std::move(o.fragments_);
    mask_state_ = o.mask_state_;
  }
  return *this;
}

Connection::~Connection() {
  if (fd_ >= 0) ::close(fd_);
}

void Connection::send_frame(Opcode op, std::string_view payload) {
  if (fd_ < 0) throw std::runtime_error("send on a closed connection");
  std::optional<std::uint32_t> mask;
  if (client_side_) {
    // xorshift32; masking only needs unpredictability against proxies.
    mask_state_ ^= mask_state_ << 13;
    mask_state_ ^= mask_state_ >> 17;
    mask_state_ ^= mask_state_ << 5;
    mask = mask_state_;
  }
  send_all(fd_, encode_frame(op, payload, mask));
}

void Connection::send_text(std::string_view text) {
  if (!open()) throw std::runtime_error("send on a closed connection");
  send_frame(Opcode::Text, text);
}

std::optional<std::string> Connection::take_message() {
  while (auto f = decode_frame(buffer_)) {
    buffer_.erase(0, f->consumed);
    if (f->masked == client_side_) throw ProtocolError("wrong masking direction");
    switch (f->op) {
      case Opcode::Ping:
        send_frame(Opcode::Pong, f->payload);
        break;
      case Opcode::Pong:
        break;
      case Opcode::Close:
        if (!closed_) {
          try {
            send_frame(Opcode::Close, f->payload.substr(0, 2));
          } catch (const std::exception&) {
          }
        }
        closed_ = true;
        return std::nullopt;
      case Opcode::Text:
      case Opcode::Binary:
      case Opcode::Continuation:
        fragments_ += f->payload;
        if (fragments_.size() > kMaxPayload) throw ProtocolError("message too large");
        if (f->fin) return std::exchange(fragments_, {});
        break;
    }
  }
  return std::nullopt;
}

std::optional<std::string> Connection::receive(Clock::time_point deadline) {
  for (;;) {
    if (auto m = take_message()) return m;
    if (!open()) return std::nullopt;
    if (!wait_readable(fd_, deadline)) return std::nullopt;
    if (!read_some(fd_, buffer_)) {
      closed_ = true;
      return std::nullopt;
    }
  }
}

void Connection::close() {
  if (fd_ < 0) return;
  if (!closed_) {
    try {
      send_frame(Opcode::Close, std::string("\x03\xe8", 2));
    } catch (const std::exception&) {
    }
    closed_ = true;
  }
  ::close(fd_);
  fd_ = -1;
}

// ---------------------------------------------------------------------------

Listener::Listener(int port, bool any_address) {
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) throw std::runtime_error(std::string("socket: ") + std::strerror(errno));
  const int one = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  addr.sin_addr.s_addr = htonl(any_address ? INADDR_ANY : INADDR_LOOPBACK);
  if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0 || ::listen(fd_, 4) < 0) {
    const std::string err = std::strerror(errno);
    ::close(fd_);
    throw std::runtime_error("bind/listen on port " + std::to_string(port) + ": " + err);
  }
  socklen_t len = sizeof addr;
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

Listener::~Listener() {
  if (fd_ >= 0) ::close(fd_);
}

std::optional<Connection> Listener::accept(Clock::time_point deadline) {
  if (!wait_readable(fd_, deadline)) return std::nullopt;
  const int cfd = ::accept(fd_, nullptr, nullptr);
  if (cfd < 0) return std::nullopt;
  const int one = 1;
  ::setsockopt(cfd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  const auto head = read_http_head(cfd, Clock::now() + std::chrono::seconds(5));
  const auto reject = [&](std::string_view status) -> std::optional<Connection> {
    try {
      send_all(cfd, std::string("HTTP/1.1 ") + std::string(status) + "\r\nContent-Length: 0\r\nConnection: close\r\n\r\n");
    } catch (const std::exception&) {
    }
    ::close(cfd);
    return std::nullopt;
  };
  if (!head) return reject("400 Bad Request");
  const auto key = header(head->first, "Sec-WebSocket-Key");
  if (head->first.rfind("GET ", 0) != 0 || !key || !header_has_token(header(head->first, "Upgrade"), "websocket")) {
    return reject("400 Bad Request");
  }
  const std::string response =
      "HTTP/1.1 101 Switching Protocols\r\nUpgrade: websocket\r\nConnection: Upgrade\r\nSec-WebSocket-Accept: " +
      accept_key(*key) + "\r\n\r\n";
  try {
    send_all(cfd, response);
  } catch (const std::exception&) {
    ::close(cfd);
    return std::nullopt;
  }
  return Connection(cfd, false, head->second);
}

Connection connect(const std::string& host, int port, const std::string& path) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0 || !res) {
    throw std::runtime_error("cannot resolve " + host);
  }
  const int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  if (fd < 0 || ::connect(fd, res->ai_addr, res->ai_addrlen) < 0) {
    const std::string err = std::strerror(errno);
    ::freeaddrinfo(res);
    if (fd >= 0) ::close(fd);
    throw std::runtime_error("connect " + host + ":" + std::to_string(port) + ": " + err);
  }
  ::freeaddrinfo(res);
  const int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);

  std::random_device rd;
  std::vector<std::uint8_t> nonce(16);
  for (auto& b : nonce) b = static_cast<std::uint8_t>(rd());
  const std::string key = base64_encode(nonce);
  const std::string request = "GET " + path + " HTTP/1.1\r\nHost: " + host + ":" + std::to_string(port) +
                              "\r\nUpgrade: websocket\r\nConnection: Upgrade\r\nSec-WebSocket-Key: " + key +
                              "\r\nSec-WebSocket-Version: 13\r\n\r\n";
  try {
    send_all(fd, request);
  } catch (...) {
    ::close(fd);
    throw;
  }
  const auto head = read_http_head(fd, Clock::now() + std::chrono::seconds(5));
  if (!head || head->first.find(" 101 ") == std::string::npos ||
      header(head->first, "Sec-WebSocket-Accept") != accept_key(key)) {
    ::close(fd);
    throw ProtocolError("websocket handshake rejected");
  }
  return Connection(fd, true, head->second);
}

}  // namespace lanechange::ws
