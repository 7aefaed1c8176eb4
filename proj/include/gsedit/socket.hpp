#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gsedit/protocol.hpp"

namespace gsedit::wire {

/// Owning TCP stream socket. Errors surface as TransportError.
class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  Socket(Socket&& o) noexcept : fd_(o.fd_) { o.fd_ = -1; }
  Socket& operator=(Socket&& o) noexcept;
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;
  ~Socket();

  static Socket connect(const std::string& host, std::uint16_t port, int timeout_ms);

  bool valid() const { return fd_ >= 0; }
  int fd() const { return fd_; }
  void send_all(std::span<const std::uint8_t> bytes);
  void recv_exact(std::span<std::uint8_t> out);
  void close();

 private:
  int fd_ = -1;
};

/// Listening socket bound to 127.0.0.1 (port 0 picks a free port).
class Listener {
 public:
  explicit Listener(std::uint16_t port = 0);
  ~Listener();
  Listener(const Listener&) = delete;
  Listener& operator=(const Listener&) = delete;

  std::uint16_t port() const { return port_; }
  Socket accept(int timeout_ms);

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
};

struct Frame {
  FrameHeader header;
  std::vector<std::uint8_t> payload;
};

/// Reads one frame. Rejects bad magic and oversized payloads.
Frame read_frame(Socket& socket);
void write_frame(Socket& socket, MessageType type, std::span<const std::uint8_t> payload);

}  // namespace gsedit::wire
