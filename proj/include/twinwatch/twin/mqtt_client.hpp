#pragma once

// Minimal MQTT 3.1.1 client over POSIX TCP sockets: CONNECT/CONNACK,
// SUBSCRIBE/SUBACK, PUBLISH at QoS 0/1 with PUBACK, PINGREQ/PINGRESP,
// DISCONNECT, plus automatic reconnect with exponential backoff.

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <cstring>
#include <functional>
#include <map>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "twinwatch/core/errors.hpp"
#include "twinwatch/twin/transport.hpp"

namespace twinwatch::twin::mqtt {

enum PacketType : std::uint8_t {
  CONNECT = 1, CONNACK = 2, PUBLISH = 3, PUBACK = 4,
  SUBSCRIBE = 8, SUBACK = 9, UNSUBSCRIBE = 10, UNSUBACK = 11,
  PINGREQ = 12, PINGRESP = 13, DISCONNECT = 14,
};

struct Packet {
  std::uint8_t type = 0;
  std::uint8_t flags = 0;
  std::vector<std::uint8_t> body;
};

inline void append_u16(std::vector<std::uint8_t>& v, std::uint16_t x) {
  v.push_back(static_cast<std::uint8_t>(x >> 8));
  v.push_back(static_cast<std::uint8_t>(x & 0xff));
}

inline void append_string(std::vector<std::uint8_t>& v, const std::string& s) {
  append_u16(v, static_cast<std::uint16_t>(s.size()));
  v.insert(v.end(), s.begin(), s.end());
}

inline std::vector<std::uint8_t> frame(std::uint8_t type, std::uint8_t flags,
                                       const std::vector<std::uint8_t>& body) {
  std::vector<std::uint8_t> out;
  out.push_back(static_cast<std::uint8_t>(type << 4 | (flags & 0x0f)));
  std::size_t len = body.size();
  do {
    std::uint8_t b = len % 128;
    len /= 128;
    if (len > 0) b |= 0x80;
    out.push_back(b);
  } while (len > 0);
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

class Reader {
public:
  explicit Reader(int fd) : fd_(fd) {}

  /// Blocking read of one packet; false on EOF/error/stop.
  bool next(Packet& pkt, const std::atomic<bool>& stop) {
    std::uint8_t header;
    if (!read_exact(&header, 1, stop)) return false;
    pkt.type = header >> 4;
    pkt.flags = header & 0x0f;
    std::size_t len = 0, mult = 1;
    for (int i = 0; i < 4; ++i) {
      std::uint8_t b;
      if (!read_exact(&b, 1, stop)) return false;
      len += static_cast<std::size_t>(b & 0x7f) * mult;
      if (!(b & 0x80)) break;
      mult *= 128;
      if (i == 3) return false; // malformed varint
    }
    pkt.body.resize(len);
    return len == 0 || read_exact(pkt.body.data(), len, stop);
  }

private:
  bool read_exact(void* dst, std::size_t n, const std::atomic<bool>& stop) {
    auto* p = static_cast<std::uint8_t*>(dst);
    while (n > 0) {
      if (stop.load()) return false;
      pollfd pfd{fd_, POLLIN, 0};
      int pr = ::poll(&pfd, 1, 200);
      if (pr < 0) {
        if (errno == EINTR) continue;
        return false;
      }
      if (pr == 0) continue;
      ssize_t r = ::recv(fd_, p, n, 0);
      if (r <= 0) return false;
      p += r;
      n -= static_cast<std::size_t>(r);
    }
    return true;
  }

  int fd_;
};

inline bool write_all(int fd, const std::vector<std::uint8_t>& data) {
  const std::uint8_t* p = data.data();
  std::size_t n = data.size();
  while (n > 0) {
    ssize_t w = ::send(fd, p, n, MSG_NOSIGNAL);
    if (w <= 0) {
      if (w < 0 && errno == EINTR) continue;
      return false;
    }
    p += w;
    n -= static_cast<std::size_t>(w);
  }
  return true;
}

struct ParsedPublish {
  std::string topic;
  std::uint16_t packet_id = 0;
  int qos = 0;
  bool dup = false;
  std::string payload;
};

inline bool parse_publish(const Packet& pkt, ParsedPublish& out) {
  out.qos = (pkt.flags >> 1) & 0x3;
  out.dup = (pkt.flags & 0x8) != 0;
  const auto& b = pkt.body;
  if (b.size() < 2) return false;
  std::size_t tlen = static_cast<std::size_t>(b[0]) << 8 | b[1];
  std::size_t pos = 2 + tlen;
  if (b.size() < pos) return false;
  out.topic.assign(b.begin() + 2, b.begin() + static_cast<long>(pos));
  if (out.qos > 0) {
    if (b.size() < pos + 2) return false;
    out.packet_id = static_cast<std::uint16_t>(b[pos] << 8 | b[pos + 1]);
    pos += 2;
  }
  out.payload.assign(b.begin() + static_cast<long>(pos), b.end());
  return true;
}

inline std::vector<std::uint8_t> make_publish(const std::string& topic, const std::string& payload,
                                              int qos, std::uint16_t packet_id, bool dup = false) {
  std::vector<std::uint8_t> body;
  append_string(body, topic);
  if (qos > 0) append_u16(body, packet_id);
  body.insert(body.end(), payload.begin(), payload.end());
  std::uint8_t flags = static_cast<std::uint8_t>(qos << 1);
  if (dup) flags |= 0x8;
  return frame(PUBLISH, flags, body);
}

/// Parsed tcp://host:port URL (the scheme is optional).
struct BrokerAddress {
  std::string host = "localhost";
  std::uint16_t port = 1883;
};

inline BrokerAddress parse_broker_url(const std::string& url) {
  std::string rest = url;
  auto scheme = rest.find("://");
  if (scheme != std::string::npos) {
    if (rest.substr(0, scheme) != "tcp")
      throw ConfigError("unsupported broker url scheme in '" + url + "'");
    rest = rest.substr(scheme + 3);
  }
  BrokerAddress addr;
  auto colon = rest.rfind(':');
  if (colon == std::string::npos) {
    addr.host = rest;
  } else {
    addr.host = rest.substr(0, colon);
    auto port = num::parse_int(rest.substr(colon + 1));
    if (!port || *port <= 0 || *port > 65535)
      throw ConfigError("malformed broker port in '" + url + "'");
    addr.port = static_cast<std::uint16_t>(*port);
  }
  if (addr.host.empty()) throw ConfigError("malformed broker url '" + url + "'");
  return addr;
}

inline int tcp_connect(const BrokerAddress& addr) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (::getaddrinfo(addr.host.c_str(), std::to_string(addr.port).c_str(), &hints, &res) != 0)
    return -1;
  int fd = -1;
  for (addrinfo* it = res; it != nullptr; it = it->ai_next) {
    fd = ::socket(it->ai_family, it->ai_socktype, it->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, it->ai_addr, it->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd >= 0) {
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  }
  return fd;
}

} // namespace twinwatch::twin::mqtt

namespace twinwatch::twin {

/// MQTT 3.1.1 transport. publish() at QoS 1 blocks until the broker's
/// PUBACK; incoming QoS 1 deliveries are acknowledged automatically
/// (duplicates are the subscriber's concern, deduplicated by seq upstream).
/// Connection loss notifies the status callback and starts reconnect
/// attempts with exponential backoff (base 0.5 s, cap 8 s), resubscribing
/// every topic after the session comes back.
class MqttTransport : public Transport {
public:
  struct Options {
    std::string broker_url = "tcp://localhost:1883";
    std::string client_id = "twinwatch";
    int qos = 1;
    double ack_timeout_s = 5.0;
    double backoff_base_s = 0.5;
    double backoff_cap_s = 8.0;
    bool auto_reconnect = true;
    std::uint16_t keepalive_s = 60;
  };

  explicit MqttTransport(Options opts) : opts_(std::move(opts)), addr_(mqtt::parse_broker_url(opts_.broker_url)) {
    if (opts_.qos != 0 && opts_.qos != 1) throw ConfigError("qos must be 0 or 1");
  }

  ~MqttTransport() override { shutdown(); }

  /// Blocking first connect; throws TransportError when the broker refuses.
  void connect() {
    if (!connect_once()) throw TransportError("cannot connect to broker at " + opts_.broker_url);
    stop_.store(false);
    worker_ = std::thread([this] { run(); });
  }

  void shutdown() {
    bool was_running = !stop_.exchange(true);
    {
      std::lock_guard lock(write_mu_);
      if (fd_ >= 0 && connected_.load()) {
        mqtt::write_all(fd_, mqtt::frame(mqtt::DISCONNECT, 0, {}));
      }
    }
    close_socket();
    if (was_running && worker_.joinable()) worker_.join();
    ack_cv_.notify_all();
  }

  bool connected() const override { return connected_.load(); }

  void on_connection_change(std::function<void(bool)> cb) {
    std::lock_guard lock(handlers_mu_);
    conn_cb_ = std::move(cb);
  }

  void publish(const std::string& topic, const std::string& payload) override {
    if (!connected_.load()) throw TransportError("publish on unconnected transport");
    // Publishing from inside a delivery handler runs on the reader thread;
    // waiting for the PUBACK there would deadlock, so those sends are
    // fire-and-forget (the ack is still consumed when it arrives).
    const bool can_wait = !worker_.joinable() || std::this_thread::get_id() != worker_.get_id();
    std::uint16_t id = 0;
    std::unique_lock ack_lock(ack_mu_, std::defer_lock);
    if (opts_.qos == 1) {
      ack_lock.lock();
      id = next_packet_id();
      if (can_wait) pending_acks_.insert(id);
      ack_lock.unlock();
    }
    {
      std::lock_guard lock(write_mu_);
      if (fd_ < 0 || !mqtt::write_all(fd_, mqtt::make_publish(topic, payload, opts_.qos, id)))
        throw TransportError("publish failed: connection lost");
    }
    if (opts_.qos == 1 && can_wait) {
      ack_lock.lock();
      bool ok = ack_cv_.wait_for(ack_lock, std::chrono::duration<double>(opts_.ack_timeout_s),
                                 [this, id] { return pending_acks_.count(id) == 0 || stop_.load(); });
      if (!ok || stop_.load()) {
        pending_acks_.erase(id);
        throw TransportError("puback timeout for packet " + std::to_string(id));
      }
    }
  }

  void subscribe(const std::string& topic, MessageHandler handler) override {
    {
      std::lock_guard lock(handlers_mu_);
      handlers_[topic].push_back(handler);
      subscribed_topics_.insert(topic);
    }
    if (connected_.load()) send_subscribe(topic);
  }

private:
  bool connect_once() {
    int fd = mqtt::tcp_connect(addr_);
    if (fd < 0) return false;

    std::vector<std::uint8_t> body;
    mqtt::append_string(body, "MQTT");
    body.push_back(0x04); // protocol level 3.1.1
    body.push_back(0x02); // clean session
    mqtt::append_u16(body, opts_.keepalive_s);
    mqtt::append_string(body, opts_.client_id);
    if (!mqtt::write_all(fd, mqtt::frame(mqtt::CONNECT, 0, body))) {
      ::close(fd);
      return false;
    }
    mqtt::Reader reader(fd);
    mqtt::Packet pkt;
    std::atomic<bool> no_stop{false};
    if (!reader.next(pkt, no_stop) || pkt.type != mqtt::CONNACK || pkt.body.size() < 2 ||
        pkt.body[1] != 0) {
      ::close(fd);
      return false;
    }
    {
      std::lock_guard lock(write_mu_);
      fd_ = fd;
    }
    connected_.store(true);
    last_write_ = std::chrono::steady_clock::now();
    notify_connection(true);
    resubscribe_all();
    return true;
  }

  void run() {
    while (!stop_.load()) {
      read_loop();
      if (stop_.load()) break;
      connected_.store(false);
      notify_connection(false);
      fail_pending_acks();
      close_socket();
      if (!opts_.auto_reconnect) break;
      double backoff = opts_.backoff_base_s;
      while (!stop_.load()) {
        sleep_interruptible(backoff);
        if (stop_.load()) break;
        if (connect_once()) break;
        backoff = std::min(backoff * 2.0, opts_.backoff_cap_s);
      }
      if (!connected_.load()) break;
    }
  }

  void read_loop() {
    int fd;
    {
      std::lock_guard lock(write_mu_);
      fd = fd_;
    }
    if (fd < 0) return;
    mqtt::Reader reader(fd);
    mqtt::Packet pkt;
    while (!stop_.load()) {
      maybe_ping();
      if (!reader.next(pkt, stop_)) return;
      switch (pkt.type) {
        case mqtt::PUBLISH: {
          mqtt::ParsedPublish pub;
          if (!mqtt::parse_publish(pkt, pub)) return;
          if (pub.qos == 1) {
            std::vector<std::uint8_t> ack;
            mqtt::append_u16(ack, pub.packet_id);
            std::lock_guard lock(write_mu_);
            if (fd_ >= 0) mqtt::write_all(fd_, mqtt::frame(mqtt::PUBACK, 0, ack));
          }
          dispatch(pub.topic, pub.payload);
          break;
        }
        case mqtt::PUBACK: {
          if (pkt.body.size() >= 2) {
            std::uint16_t id = static_cast<std::uint16_t>(pkt.body[0] << 8 | pkt.body[1]);
            std::lock_guard lock(ack_mu_);
            pending_acks_.erase(id);
            ack_cv_.notify_all();
          }
          break;
        }
        case mqtt::SUBACK:
        case mqtt::UNSUBACK:
        case mqtt::PINGRESP:
          break;
        default:
          break;
      }
    }
  }

  void dispatch(const std::string& topic, const std::string& payload) {
    std::vector<MessageHandler> targets;
    {
      std::lock_guard lock(handlers_mu_);
      auto it = handlers_.find(topic);
      if (it != handlers_.end()) targets = it->second;
    }
    for (auto& h : targets) h(topic, payload);
  }

  void send_subscribe(const std::string& topic) {
    std::vector<std::uint8_t> body;
    std::uint16_t id;
    {
      std::lock_guard lock(ack_mu_);
      id = next_packet_id();
    }
    mqtt::append_u16(body, id);
    mqtt::append_string(body, topic);
    body.push_back(static_cast<std::uint8_t>(opts_.qos));
    std::lock_guard lock(write_mu_);
    if (fd_ >= 0) mqtt::write_all(fd_, mqtt::frame(mqtt::SUBSCRIBE, 0x2, body));
  }

  void resubscribe_all() {
    std::set<std::string> topics;
    {
      std::lock_guard lock(handlers_mu_);
      topics = subscribed_topics_;
    }
    for (const auto& t : topics) send_subscribe(t);
  }

  void maybe_ping() {
    auto now = std::chrono::steady_clock::now();
    double idle = std::chrono::duration<double>(now - last_write_).count();
    if (idle > opts_.keepalive_s / 2.0) {
      std::lock_guard lock(write_mu_);
      if (fd_ >= 0) mqtt::write_all(fd_, mqtt::frame(mqtt::PINGREQ, 0, {}));
      last_write_ = now;
    }
  }

  void fail_pending_acks() {
    std::lock_guard lock(ack_mu_);
    pending_acks_.clear();
    ack_cv_.notify_all();
  }

  void close_socket() {
    std::lock_guard lock(write_mu_);
    if (fd_ >= 0) {
      ::shutdown(fd_, SHUT_RDWR);
      ::close(fd_);
      fd_ = -1;
    }
    connected_.store(false);
  }

  void notify_connection(bool up) {
    std::function<void(bool)> cb;
    {
      std::lock_guard lock(handlers_mu_);
      cb = conn_cb_;
    }
    if (cb) cb(up);
  }

  void sleep_interruptible(double seconds) {
    auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(seconds);
    while (!stop_.load() && std::chrono::steady_clock::now() < deadline)
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }

  std::uint16_t next_packet_id() {
    if (++packet_id_ == 0) ++packet_id_;
    return packet_id_;
  }

  Options opts_;
  mqtt::BrokerAddress addr_;

  std::mutex write_mu_;
  int fd_ = -1;
  std::atomic<bool> connected_{false};
  std::atomic<bool> stop_{true};
  std::thread worker_;
  std::chrono::steady_clock::time_point last_write_ = std::chrono::steady_clock::now();

  std::mutex handlers_mu_;
  std::map<std::string, std::vector<MessageHandler>> handlers_;
  std::set<std::string> subscribed_topics_;
  std::function<void(bool)> conn_cb_;

  std::mutex ack_mu_;
  std::condition_variable ack_cv_;
  std::set<std::uint16_t> pending_acks_;
  std::uint16_t packet_id_ = 0;
};

} // namespace twinwatch::twin
