#pragma once

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include <atomic>
#include <chrono>
#include <cmath>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <utility>

#include "tvdcov/protocol.hpp"

namespace tvdcov::service {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;

struct ServiceOptions {
  std::string address = "127.0.0.1";
  unsigned short port = 8765;  // 0 picks a free port
  double frame_rate = 30.0;    // Hz
  double time_scale = 1.0;     // simulated seconds per wall second
};

// "host:port", ":port" or "port".
inline std::pair<std::string, unsigned short> parse_endpoint(const std::string& s) {
  const auto colon = s.rfind(':');
  std::string host = colon == std::string::npos ? "127.0.0.1" : s.substr(0, colon);
  const std::string port = colon == std::string::npos ? s : s.substr(colon + 1);
  if (host.empty()) host = "127.0.0.1";
  std::size_t used = 0;
  int value = -1;
  try {
    value = std::stoi(port, &used);
  } catch (const std::exception&) {
  }
  if (used != port.size() || value < 0 || value > 65535)
    throw Error(ErrorCode::InvalidScenario, "bad listen endpoint '" + s + "'");
  return {host, static_cast<unsigned short>(value)};
}

class Server;

namespace detail {

// One connected client. Lives on the I/O thread only.
class Session : public std::enable_shared_from_this<Session> {
 public:
  Session(tcp::socket socket, Server& server, int id) : ws_(std::move(socket)), server_(server), id_(id) {}

  void start();
  void send(std::shared_ptr<const std::string> text, bool droppable);
  int id() const { return id_; }
  bool joined() const { return joined_; }

 private:
  void read();
  void write();
  void close();

  websocket::stream<beast::tcp_stream> ws_;
  beast::flat_buffer buffer_;
  std::deque<std::pair<std::shared_ptr<const std::string>, bool>> outbox_;
  Server& server_;
  int id_;
  bool joined_ = false;
  bool closed_ = false;
};

}  // namespace detail

/// WebSocket bridge. The simulation loop runs on its own thread and is the
/// only owner of the LiveSimulation; sessions exchange text with it through
/// queues. Frames go to every client at the configured rate.
class Server {
 public:
  static constexpr std::size_t kMaxQueuedFrames = 8;

  Server(const Scenario& sc, ServiceOptions opt)
      : opt_(std::move(opt)), sim_(sc), acceptor_(ioc_) {
    if (!(opt_.frame_rate > 0.0) || !(opt_.time_scale > 0.0))
      throw Error(ErrorCode::InvalidScenario, "frame rate and time scale must be > 0");
    const tcp::endpoint ep(net::ip::make_address(opt_.address), opt_.port);
    acceptor_.open(ep.protocol());
    acceptor_.set_option(net::socket_base::reuse_address(true));
    acceptor_.bind(ep);
    acceptor_.listen();
    latest_frame_ = std::make_shared<const std::string>(sim_.frame().dump());
    hello_ = std::make_shared<const std::string>(protocol::hello_message(sim_, opt_.frame_rate, opt_.time_scale).dump());
  }

  ~Server() { stop(); }

  unsigned short port() const { return acceptor_.local_endpoint().port(); }

  // Blocks until stop().
  void run() {
    accept();
    std::thread loop([this] { simulate(); });
    ioc_.run();
    stopping_ = true;
    loop.join();
  }

  void stop() {
    if (stopping_.exchange(true)) return;
    net::post(ioc_, [this] {
      beast::error_code ec;
      acceptor_.close(ec);
      ioc_.stop();
    });
  }

  // Frames broadcast so far.
  long frames_sent() const { return frames_sent_.load(); }

 private:
  friend class detail::Session;

  void accept() {
    acceptor_.async_accept([this](beast::error_code ec, tcp::socket socket) {
      if (ec) return;
      std::make_shared<detail::Session>(std::move(socket), *this, next_id_++)->start();
      accept();
    });
  }

  // I/O thread.
  void joined(const std::shared_ptr<detail::Session>& s) {
    sessions_[s->id()] = s;
    s->send(hello_, false);
    s->send(latest_frame_, true);
  }
  void left(int id) { sessions_.erase(id); }
  void received(int id, std::string text) {
    std::lock_guard lock(inbox_mutex_);
    inbox_.emplace_back(id, std::move(text));
  }
  void broadcast(std::shared_ptr<const std::string> text, bool droppable) {
    for (auto& [id, s] : sessions_) s->send(text, droppable);
  }
  void send_to(int id, std::shared_ptr<const std::string> text) {
    if (auto it = sessions_.find(id); it != sessions_.end()) it->second->send(std::move(text), false);
  }

  // Simulation thread: drain commands at a step boundary, advance to the
  // wall-clock target, publish a frame; once per broadcast period.
  void simulate() {
    using clock = std::chrono::steady_clock;
    const auto period = std::chrono::duration_cast<clock::duration>(std::chrono::duration<double>(1.0 / opt_.frame_rate));
    const double dt = sim_.dt();
    // Never try to catch up more than a few periods after a stall.
    const long max_steps = std::max(1L, std::lround(4.0 * opt_.time_scale / (opt_.frame_rate * dt)));
    auto next = clock::now();
    auto last = next;
    double owed = 0.0;  // simulated seconds behind the wall clock
    while (!stopping_) {
      std::deque<std::pair<int, std::string>> batch;
      {
        std::lock_guard lock(inbox_mutex_);
        batch.swap(inbox_);
      }
      for (auto& [id, text] : batch) {
        const bool was_paused = sim_.paused();
        if (auto err = protocol::handle_text(sim_, text)) {
          auto msg = std::make_shared<const std::string>(err->dump());
          net::post(ioc_, [this, id = id, msg] { send_to(id, msg); });
        }
        if (was_paused && !sim_.paused()) owed = 0.0;
      }

      const auto now = clock::now();
      if (!sim_.paused()) {
        owed += opt_.time_scale * std::chrono::duration<double>(now - last).count();
        long steps = static_cast<long>(std::floor(owed / dt + 1e-9));
        if (steps > max_steps) {
          steps = max_steps;
          owed = 0.0;
        } else {
          owed -= static_cast<double>(steps) * dt;
        }
        try {
          for (long k = 0; k < steps; ++k) sim_.advance();
        } catch (const std::exception& e) {
          sim_.set_paused(true);
          owed = 0.0;
          auto msg = std::make_shared<const std::string>(protocol::error_message(e.what(), "simulation").dump());
          net::post(ioc_, [this, msg] { broadcast(msg, false); });
        }
      }
      last = now;

      std::shared_ptr<const std::string> frame;
      try {
        frame = std::make_shared<const std::string>(sim_.frame().dump());
      } catch (const std::exception& e) {
        sim_.set_paused(true);
        frame = std::make_shared<const std::string>(protocol::error_message(e.what(), "simulation").dump());
      }
      net::post(ioc_, [this, frame] {
        latest_frame_ = frame;
        broadcast(frame, true);
      });
      ++frames_sent_;

      next += period;
      const auto after = clock::now();
      if (next < after) next = after;
      std::this_thread::sleep_until(next);
    }
  }

  ServiceOptions opt_;
  protocol::LiveSimulation sim_;
  net::io_context ioc_;
  tcp::acceptor acceptor_;
  std::map<int, std::shared_ptr<detail::Session>> sessions_;
  std::shared_ptr<const std::string> latest_frame_;
  std::shared_ptr<const std::string> hello_;
  int next_id_ = 0;

  std::mutex inbox_mutex_;
  std::deque<std::pair<int, std::string>> inbox_;
  std::atomic<bool> stopping_{false};
  std::atomic<long> frames_sent_{0};
};

namespace detail {

inline void Session::start() {
  ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
  ws_.async_accept([self = shared_from_this()](beast::error_code ec) {
    if (ec) return;
    self->joined_ = true;
    self->server_.joined(self);
    self->read();
  });
}

inline void Session::read() {
  ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
    if (ec) {
      self->close();
      return;
    }
    self->server_.received(self->id_, beast::buffers_to_string(self->buffer_.data()));
    self->buffer_.consume(self->buffer_.size());
    self->read();
  });
}

// Frames are droppable: a slow client skips them rather than queueing without
// bound. Replies and errors are always delivered.
inline void Session::send(std::shared_ptr<const std::string> text, bool droppable) {
  if (closed_) return;
  if (droppable) {
    std::size_t frames = 0;
    for (const auto& m : outbox_) frames += m.second ? 1 : 0;
    if (frames >= Server::kMaxQueuedFrames) return;
  }
  outbox_.emplace_back(std::move(text), droppable);
  if (outbox_.size() == 1) write();
}

inline void Session::write() {
  ws_.text(true);
  ws_.async_write(net::buffer(*outbox_.front().first), [self = shared_from_this()](beast::error_code ec, std::size_t) {
    if (ec) {
      self->close();
      return;
    }
    self->outbox_.pop_front();
    if (!self->closed_ && !self->outbox_.empty()) self->write();
  });
}

inline void Session::close() {
  if (closed_) return;
  closed_ = true;
  server_.left(id_);
}

}  // namespace detail

}  // namespace tvdcov::service
