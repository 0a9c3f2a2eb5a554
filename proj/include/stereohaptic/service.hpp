#pragma once

// WebSocket control plane in front of a RealtimeLoop.
//
// One strand per connection; the render loop runs on its own thread and is
// only reached through its bounded queues. Outbound frames per connection are
// capped: telemetry is dropped oldest-first, and reading from a client pauses
// while its replies are backed up.

#include <atomic>
#include <chrono>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "stereohaptic/protocol.hpp"
#include "stereohaptic/realtime.hpp"
#include "stereohaptic/renderer.hpp"
#include "stereohaptic/signal.hpp"

namespace stereohaptic {

struct ServiceConfig {
  std::string host{"127.0.0.1"};
  unsigned short port{8765};  // 0 picks a free port
  std::size_t max_pending_frames{64};
  std::size_t max_message_bytes{64 * 1024};
  std::function<void(const std::string&)> log;
};

class Service {
  using tcp = boost::asio::ip::tcp;

 public:
  Service(Engine engine, ServiceConfig cfg)
      : cfg_(std::move(cfg)),
        layout_frame_(std::make_shared<const std::string>(layout_frame(engine).dump())),
        empty_frame_(std::make_shared<const std::string>(telemetry_frame(TelemetrySnapshot{}).dump())),
        latest_frame_(empty_frame_),
        loop_(std::move(engine)),
        acceptor_(ioc_),
        pump_(ioc_) {
    state_.capacity = loop_.engine().capacity();
    state_.sample_rate = loop_.engine().render_config().sample_rate;
    state_.carrier_hz = loop_.engine().signal_config().carrier_hz;
    sink_.submit = [this](const ControlCommand& c) { return loop_.submit(c); };
    sink_.envelope = [this](Preset p, double carrier) { return envelope(p, carrier); };
  }

  ~Service() { stop(); }

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Binds and starts the render loop and the network thread. Throws Error
  // when the address cannot be bound.
  void start() {
    if (started_) return;
    namespace net = boost::asio;
    boost::system::error_code ec;
    const auto address = net::ip::make_address(cfg_.host, ec);
    if (ec) throw Error("invalid host '" + cfg_.host + "'", "host");
    const tcp::endpoint endpoint(address, cfg_.port);
    acceptor_.open(endpoint.protocol(), ec);
    if (!ec) acceptor_.set_option(net::socket_base::reuse_address(true), ec);
    if (!ec) acceptor_.bind(endpoint, ec);
    if (!ec) acceptor_.listen(net::socket_base::max_listen_connections, ec);
    if (ec) {
      acceptor_.close();
      throw Error("cannot listen on " + cfg_.host + ":" + std::to_string(cfg_.port) + ": " + ec.message(), "port");
    }
    port_ = acceptor_.local_endpoint().port();
    started_ = true;
    loop_.start();
    do_accept();
    schedule_pump();
    thread_ = std::thread([this] { ioc_.run(); });
    log("listening on " + cfg_.host + ":" + std::to_string(port_));
  }

  // Closes the listener and every connection, then stops the render loop.
  void stop() {
    if (!started_) return;
    started_ = false;
    boost::asio::post(ioc_, [this] {
      boost::system::error_code ec;
      acceptor_.close(ec);
      pump_.cancel();
      ioc_.stop();
    });
    if (thread_.joinable()) thread_.join();
    std::vector<std::shared_ptr<Session>> live;
    {
      std::lock_guard lock(sessions_mu_);
      for (auto& w : sessions_)
        if (auto s = w.lock()) live.push_back(std::move(s));
      sessions_.clear();
    }
    for (auto& s : live) s->force_close();
    loop_.stop();
    log("stopped");
  }

  unsigned short port() const noexcept { return port_; }
  RealtimeLoop& loop() noexcept { return loop_; }
  std::size_t client_count() const noexcept { return clients_.load(); }

 private:
  class Session : public std::enable_shared_from_this<Session> {
   public:
    Session(tcp::socket socket, Service& svc) : ws_(std::move(socket)), svc_(svc), timer_(ws_.get_executor()) {}

    void start() {
      boost::asio::dispatch(ws_.get_executor(), [self = shared_from_this()] { self->on_start(); });
    }

    // Only while no network thread is running.
    void force_close() {
      closed_ = true;
      boost::system::error_code ec;
      timer_.cancel();
      boost::beast::get_lowest_layer(ws_).socket().close(ec);
      if (counted_) {
        counted_ = false;
        --svc_.clients_;
      }
    }

   private:
    struct Outbound {
      std::shared_ptr<const std::string> text;
      bool droppable{false};
    };

    void on_start() {
      namespace websocket = boost::beast::websocket;
      ws_.set_option(websocket::stream_base::timeout::suggested(boost::beast::role_type::server));
      ws_.read_message_max(svc_.cfg_.max_message_bytes);
      ws_.async_accept([self = shared_from_this()](boost::beast::error_code ec) { self->on_accept(ec); });
    }

    void on_accept(boost::beast::error_code ec) {
      if (ec) return finish();
      counted_ = true;
      ++svc_.clients_;
      svc_.log("client connected (" + std::to_string(svc_.clients_.load()) + " total)");
      enqueue(svc_.layout_frame_, false);
      do_read();
    }

    void do_read() {
      ws_.async_read(buffer_, [self = shared_from_this()](boost::beast::error_code ec, std::size_t) {
        self->on_read(ec);
      });
    }

    void on_read(boost::beast::error_code ec) {
      if (ec) return finish();
      HandleResult result;
      if (!ws_.got_text()) {
        result.reply = make_error("binary frames are not supported", "", std::nullopt);
      } else {
        result = svc_.handle(boost::beast::buffers_to_string(buffer_.data()));
      }
      buffer_.consume(buffer_.size());
      enqueue(std::make_shared<const std::string>(result.reply.dump()), false);
      if (result.subscribe_rate) subscribe(*result.subscribe_rate);
      if (closed_) return;
      // A peer that sends faster than it reads is throttled through TCP rather than dropped.
      if (queue_.size() >= svc_.cfg_.max_pending_frames)
        read_paused_ = true;
      else
        do_read();
    }

    void subscribe(double rate_hz) {
      period_ = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
          std::chrono::duration<double>(1.0 / rate_hz));
      next_tick_ = std::chrono::steady_clock::now() + period_;
      ++generation_;
      schedule_tick();
    }

    void schedule_tick() {
      timer_.expires_at(next_tick_);
      timer_.async_wait([self = shared_from_this(), gen = generation_](boost::beast::error_code ec) {
        if (ec || self->closed_ || gen != self->generation_) return;
        self->tick();
      });
    }

    void tick() {
      enqueue(svc_.latest_frame(), true);
      const auto now = std::chrono::steady_clock::now();
      next_tick_ += period_;
      if (now > next_tick_ + period_) next_tick_ = now + period_;
      if (!closed_) schedule_tick();
    }

    void enqueue(std::shared_ptr<const std::string> text, bool droppable) {
      if (closed_) return;
      if (queue_.size() >= svc_.cfg_.max_pending_frames) {
        const auto first = queue_.begin() + (writing_ ? 1 : 0);
        const auto victim = std::find_if(first, queue_.end(), [](const Outbound& o) { return o.droppable; });
        if (victim != queue_.end()) {
          queue_.erase(victim);
        } else if (droppable) {
          return;
        } else {
          svc_.log("client not reading replies, disconnecting");
          return shutdown();
        }
      }
      queue_.push_back({std::move(text), droppable});
      if (!writing_) do_write();
    }

    void do_write() {
      writing_ = true;
      ws_.text(true);
      // The handler holds the payload so finish() may drop the queue mid-write.
      auto text = queue_.front().text;
      ws_.async_write(boost::asio::buffer(*text),
                      [self = shared_from_this(), text](boost::beast::error_code ec, std::size_t) { self->on_write(ec); });
    }

    void on_write(boost::beast::error_code ec) {
      if (ec || closed_) {
        writing_ = false;
        return finish();
      }
      queue_.pop_front();
      if (read_paused_ && queue_.size() <= svc_.cfg_.max_pending_frames / 2) {
        read_paused_ = false;
        do_read();
      }
      if (queue_.empty()) {
        writing_ = false;
      } else {
        do_write();
      }
    }

    void shutdown() {
      closed_ = true;
      timer_.cancel();
      boost::system::error_code ec;
      boost::beast::get_lowest_layer(ws_).socket().shutdown(tcp::socket::shutdown_both, ec);
      boost::beast::get_lowest_layer(ws_).socket().close(ec);
      finish();
    }

    void finish() {
      closed_ = true;
      timer_.cancel();
      queue_.clear();
      if (counted_) {
        counted_ = false;
        --svc_.clients_;
        svc_.log("client disconnected (" + std::to_string(svc_.clients_.load()) + " total)");
      }
    }

    boost::beast::websocket::stream<boost::beast::tcp_stream> ws_;
    Service& svc_;
    boost::asio::steady_timer timer_;
    boost::beast::flat_buffer buffer_;
    std::deque<Outbound> queue_;
    bool writing_{false};
    bool read_paused_{false};
    bool closed_{false};
    bool counted_{false};
    std::uint64_t generation_{0};
    std::chrono::steady_clock::duration period_{};
    std::chrono::steady_clock::time_point next_tick_{};
  };

  void do_accept() {
    acceptor_.async_accept(boost::asio::make_strand(ioc_), [this](boost::beast::error_code ec, tcp::socket socket) {
      if (!ec) {
        auto session = std::make_shared<Session>(std::move(socket), *this);
        {
          std::lock_guard lock(sessions_mu_);
          std::erase_if(sessions_, [](const std::weak_ptr<Session>& w) { return w.expired(); });
          sessions_.push_back(session);
        }
        session->start();
      }
      if (acceptor_.is_open()) do_accept();
    });
  }

  // Moves the newest render snapshot into the shared telemetry frame.
  void schedule_pump() {
    pump_.expires_after(std::chrono::milliseconds(2));
    pump_.async_wait([this](boost::beast::error_code ec) {
      if (ec) return;
      if (loop_.latest_telemetry(snapshot_)) {
        auto frame = std::make_shared<const std::string>(telemetry_frame(snapshot_).dump());
        std::lock_guard lock(frame_mu_);
        latest_frame_ = std::move(frame);
      }
      schedule_pump();
    });
  }

  std::shared_ptr<const std::string> latest_frame() {
    std::lock_guard lock(frame_mu_);
    return latest_frame_;
  }

  HandleResult handle(std::string_view text) {
    std::lock_guard lock(state_mu_);
    return handle_text(text, state_, sink_);
  }

  // Looped preset envelopes, created on first use and kept for the service's
  // lifetime so the render thread never releases one.
  const IntensityEnvelope* envelope(Preset preset, double carrier_hz) {
    std::lock_guard lock(cache_mu_);
    auto& slot = envelopes_[{preset, carrier_hz}];
    if (!slot) {
      SignalConfig cfg = loop_.engine().signal_config();
      cfg.carrier_hz = carrier_hz;
      const double rate = loop_.engine().render_config().sample_rate;
      slot = std::make_unique<IntensityEnvelope>(
          perceived_intensity_envelope(preset_signal(preset, Engine::kDefaultSignalLength, cfg, rate), cfg));
    }
    return slot.get();
  }

  void log(const std::string& line) const {
    if (cfg_.log) cfg_.log(line);
  }

  ServiceConfig cfg_;
  std::shared_ptr<const std::string> layout_frame_;
  std::shared_ptr<const std::string> empty_frame_;

  std::mutex cache_mu_;
  std::map<std::pair<Preset, double>, std::unique_ptr<IntensityEnvelope>> envelopes_;

  std::mutex state_mu_;
  ControlState state_;
  ControlSink sink_;

  std::mutex frame_mu_;
  std::shared_ptr<const std::string> latest_frame_;
  TelemetrySnapshot snapshot_;

  RealtimeLoop loop_;

  boost::asio::io_context ioc_;
  tcp::acceptor acceptor_;
  boost::asio::steady_timer pump_;
  std::thread thread_;
  bool started_{false};
  unsigned short port_{0};

  std::mutex sessions_mu_;
  std::vector<std::weak_ptr<Session>> sessions_;
  std::atomic<std::size_t> clients_{0};
};

}  // namespace stereohaptic
