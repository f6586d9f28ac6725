#pragma once

// Transports carrying e2_wire frames between RicCore and its clients.
//
// LoopbackBus: single-threaded, in-process byte pipes with a deterministic
// delivery order; used by the lockstep orchestrator and tests.
// TcpRicServer / TcpClient: stream sockets for free-running deployments.

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "oran/e2_wire.hpp"
#include "oran/ric.hpp"

namespace oran {

class LoopbackBus {
 public:
  using Handler = std::function<void(const E2Frame&)>;

  explicit LoopbackBus(RicCore::Clock clock = {});
  LoopbackBus(const LoopbackBus&) = delete;
  LoopbackBus& operator=(const LoopbackBus&) = delete;

  RicCore& ric() { return ric_; }
  const RicCore& ric() const { return ric_; }

  ConnId connect(Handler handler);
  /// Queues `frame` on the connection's uplink. Delivered by pump().
  void send(ConnId from, const E2Frame& frame);
  void disconnect(ConnId conn);
  /// Moves bytes until no frame is in flight.
  void pump();
  std::uint64_t bytes_moved() const { return bytes_moved_; }

 private:
  struct Endpoint {
    Handler handler;
    StreamDecoder up;    // client -> ric
    StreamDecoder down;  // ric -> client
    std::deque<std::vector<std::uint8_t>> downlink;
  };

  RicCore ric_;
  std::map<ConnId, Endpoint> endpoints_;
  std::deque<std::pair<ConnId, std::vector<std::uint8_t>>> uplink_;
  ConnId next_id_{1};
  std::uint64_t bytes_moved_{0};
};

/// Blocking stream-socket connection speaking e2_wire frames.
class TcpClient {
 public:
  TcpClient() = default;
  ~TcpClient();
  TcpClient(const TcpClient&) = delete;
  TcpClient& operator=(const TcpClient&) = delete;

  /// Throws std::runtime_error when the endpoint is unreachable.
  void connect(const std::string& host, std::uint16_t port);
  bool connected() const { return fd_ >= 0; }
  void send(const E2Frame& frame);
  /// Waits up to `timeout_ms` for a frame. nullopt on timeout; throws
  /// std::runtime_error when the peer closed the connection.
  std::optional<E2Frame> receive(int timeout_ms);
  void close();

 private:
  int fd_{-1};
  StreamDecoder decoder_;
};

class TcpRicServer {
 public:
  /// Port 0 binds an ephemeral port; see port().
  TcpRicServer(std::string host, std::uint16_t port);
  ~TcpRicServer();
  TcpRicServer(const TcpRicServer&) = delete;
  TcpRicServer& operator=(const TcpRicServer&) = delete;

  void start();
  void stop();
  std::uint16_t port() const { return port_; }
  RicCore& ric() { return ric_; }

 private:
  struct Conn {
    int fd{-1};
    std::mutex mu;
    std::condition_variable cv;
    std::deque<std::vector<std::uint8_t>> outbox;
    bool closing{false};
    std::thread reader;
    std::thread writer;
  };

  void accept_loop();
  void read_loop(ConnId id, std::shared_ptr<Conn> conn);
  void write_loop(std::shared_ptr<Conn> conn);
  void enqueue(ConnId id, const E2Frame& frame);

  std::string host_;
  std::uint16_t port_;
  int listen_fd_{-1};
  std::atomic<bool> running_{false};
  std::thread acceptor_;
  std::mutex conns_mu_;
  std::map<ConnId, std::shared_ptr<Conn>> conns_;
  ConnId next_id_{1};
  RicCore ric_;
};

}  // namespace oran
