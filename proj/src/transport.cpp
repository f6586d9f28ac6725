#include "oran/transport.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <stdexcept>

namespace oran {

LoopbackBus::LoopbackBus(RicCore::Clock clock)
    : ric_(
          [this](ConnId conn, const E2Frame& f) {
            auto it = endpoints_.find(conn);
            if (it == endpoints_.end()) return;
            it->second.downlink.push_back(encode_frame(f));
          },
          std::move(clock)) {}

ConnId LoopbackBus::connect(Handler handler) {
  const ConnId id = next_id_++;
  endpoints_[id].handler = std::move(handler);
  ric_.on_connect(id);
  return id;
}

void LoopbackBus::send(ConnId from, const E2Frame& frame) {
  if (!endpoints_.count(from)) throw std::logic_error("send on a closed loopback connection");
  uplink_.emplace_back(from, encode_frame(frame));
}

void LoopbackBus::disconnect(ConnId conn) {
  if (endpoints_.erase(conn) == 0) return;
  ric_.on_disconnect(conn);
}

void LoopbackBus::pump() {
  while (true) {
    if (!uplink_.empty()) {
      auto [conn, bytes] = std::move(uplink_.front());
      uplink_.pop_front();
      auto it = endpoints_.find(conn);
      if (it == endpoints_.end()) continue;
      bytes_moved_ += bytes.size();
      it->second.up.feed(bytes);
      while (auto f = it->second.up.next()) ric_.on_frame(conn, *f);
      continue;
    }
    bool moved = false;
    for (auto& [id, ep] : endpoints_) {
      if (ep.downlink.empty()) continue;
      auto bytes = std::move(ep.downlink.front());
      ep.downlink.pop_front();
      bytes_moved_ += bytes.size();
      ep.down.feed(bytes);
      // The handler may send (uplink only), never connect or disconnect,
      // so `ep` stays valid.
      while (auto f = ep.down.next()) {
        if (ep.handler) ep.handler(*f);
      }
      moved = true;
      break;
    }
    if (!moved) return;
  }
}

// ---------------------------------------------------------------------------

namespace {

[[noreturn]] void throw_errno(const std::string& what) {
  throw std::runtime_error(what + ": " + std::strerror(errno));
}

void send_all(int fd, const std::uint8_t* data, std::size_t n) {
  while (n > 0) {
    const ssize_t w = ::send(fd, data, n, MSG_NOSIGNAL);
    if (w < 0) {
      if (errno == EINTR) continue;
      throw_errno("send");
    }
    data += w;
    n -= static_cast<std::size_t>(w);
  }
}

}  // namespace

TcpClient::~TcpClient() { close(); }

void TcpClient::connect(const std::string& host, std::uint16_t port) {
  close();
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string service = std::to_string(port);
  if (int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &res); rc != 0) {
    throw std::runtime_error("resolve " + host + ": " + gai_strerror(rc));
  }
  int fd = -1;
  for (auto* ai = res; ai; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0) throw std::runtime_error("cannot connect to " + host + ":" + service);
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  fd_ = fd;
  decoder_ = StreamDecoder{};
}

void TcpClient::send(const E2Frame& frame) {
  if (fd_ < 0) throw std::runtime_error("send on a closed connection");
  auto bytes = encode_frame(frame);
  send_all(fd_, bytes.data(), bytes.size());
}

std::optional<E2Frame> TcpClient::receive(int timeout_ms) {
  if (auto f = decoder_.next()) return f;
  if (fd_ < 0) throw std::runtime_error("receive on a closed connection");
  pollfd p{fd_, POLLIN, 0};
  const int rc = ::poll(&p, 1, timeout_ms);
  if (rc < 0) {
    if (errno == EINTR) return std::nullopt;
    throw_errno("poll");
  }
  if (rc == 0) return std::nullopt;
  std::uint8_t buf[16384];
  const ssize_t r = ::recv(fd_, buf, sizeof buf, 0);
  if (r <= 0) {
    close();
    throw std::runtime_error("connection closed by peer");
  }
  decoder_.feed(std::span<const std::uint8_t>(buf, static_cast<std::size_t>(r)));
  return decoder_.next();
}

void TcpClient::close() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

// ---------------------------------------------------------------------------

TcpRicServer::TcpRicServer(std::string host, std::uint16_t port)
    : host_(std::move(host)),
      port_(port),
      ric_([this](ConnId id, const E2Frame& f) { enqueue(id, f); }) {}

TcpRicServer::~TcpRicServer() { stop(); }

void TcpRicServer::start() {
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw_errno("socket");
  int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port_);
  if (::inet_pton(AF_INET, host_.c_str(), &addr.sin_addr) != 1) {
    throw std::runtime_error("bad listen address " + host_);
  }
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0) throw_errno("bind");
  if (::listen(listen_fd_, 64) < 0) throw_errno("listen");
  socklen_t len = sizeof addr;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
  running_ = true;
  acceptor_ = std::thread([this] { accept_loop(); });
}

void TcpRicServer::stop() {
  if (!running_.exchange(false)) return;
  ::shutdown(listen_fd_, SHUT_RDWR);
  ::close(listen_fd_);
  if (acceptor_.joinable()) acceptor_.join();
  std::map<ConnId, std::shared_ptr<Conn>> conns;
  {
    std::lock_guard lock(conns_mu_);
    conns.swap(conns_);
  }
  for (auto& [id, c] : conns) {
    {
      std::lock_guard lock(c->mu);
      c->closing = true;
    }
    c->cv.notify_all();
    ::shutdown(c->fd, SHUT_RDWR);
    if (c->reader.joinable()) c->reader.join();
    if (c->writer.joinable()) c->writer.join();
    ::close(c->fd);
  }
}

void TcpRicServer::accept_loop() {
  while (running_) {
    pollfd p{listen_fd_, POLLIN, 0};
    if (::poll(&p, 1, 100) <= 0) continue;
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) continue;
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    auto conn = std::make_shared<Conn>();
    conn->fd = fd;
    ConnId id;
    {
      std::lock_guard lock(conns_mu_);
      id = next_id_++;
      conns_[id] = conn;
    }
    ric_.on_connect(id);
    conn->writer = std::thread([this, conn] { write_loop(conn); });
    conn->reader = std::thread([this, id, conn] { read_loop(id, conn); });
  }
}

void TcpRicServer::read_loop(ConnId id, std::shared_ptr<Conn> conn) {
  StreamDecoder decoder;
  std::uint8_t buf[16384];
  try {
    while (running_) {
      const ssize_t r = ::recv(conn->fd, buf, sizeof buf, 0);
      if (r <= 0) break;
      decoder.feed(std::span<const std::uint8_t>(buf, static_cast<std::size_t>(r)));
      while (auto f = decoder.next()) ric_.on_frame(id, *f);
    }
  } catch (const WireError&) {
    // Corrupt stream: drop the connection.
  }
  ric_.on_disconnect(id);
  {
    std::lock_guard lock(conn->mu);
    conn->closing = true;
  }
  conn->cv.notify_all();
  ::shutdown(conn->fd, SHUT_RDWR);
}

void TcpRicServer::write_loop(std::shared_ptr<Conn> conn) {
  while (true) {
    std::vector<std::uint8_t> bytes;
    {
      std::unique_lock lock(conn->mu);
      conn->cv.wait(lock, [&] { return conn->closing || !conn->outbox.empty(); });
      if (conn->outbox.empty()) return;
      bytes = std::move(conn->outbox.front());
      conn->outbox.pop_front();
    }
    try {
      send_all(conn->fd, bytes.data(), bytes.size());
    } catch (const std::runtime_error&) {
      return;
    }
  }
}

void TcpRicServer::enqueue(ConnId id, const E2Frame& frame) {
  std::shared_ptr<Conn> conn;
  {
    std::lock_guard lock(conns_mu_);
    auto it = conns_.find(id);
    if (it == conns_.end()) return;
    conn = it->second;
  }
  {
    std::lock_guard lock(conn->mu);
    if (conn->closing) return;
    conn->outbox.push_back(encode_frame(frame));
  }
  conn->cv.notify_one();
}

}  // namespace oran
