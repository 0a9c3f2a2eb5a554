#pragma once

// Real-time driver for Engine.
//
// The render thread owns the engine. Control commands arrive through a bounded
// queue drained at block boundaries; telemetry leaves through a pool of
// preallocated snapshots cycled between two bounded queues. When the consumer
// falls behind, the render thread recycles the oldest unread snapshot. Nothing
// on the render path waits on a lock, allocates, or does I/O (the optional
// sink is the caller's responsibility).

#include <pthread.h>
#include <sched.h>

#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <thread>
#include <vector>

#include "stereohaptic/bounded_queue.hpp"
#include "stereohaptic/renderer.hpp"

namespace stereohaptic {

struct ControlCommand {
  enum class Kind : std::uint8_t { set_source, set_signal, remove_source, set_carrier };

  Kind kind{Kind::set_source};
  SourceId id;
  Vec3 position;
  double gain{0.0};
  const IntensityEnvelope* envelope{nullptr};
  double carrier_hz{0.0};
};

struct TelemetrySnapshot {
  double t{0.0};  // engine time at the end of the block
  std::uint64_t block{0};
  std::size_t count{0};
  std::vector<SourceReport> sources;  // first `count` entries are live
};

struct RealtimeOptions {
  std::size_t control_capacity{1024};
  std::size_t telemetry_pool{8};
  std::size_t interval_capacity{1 << 14};
  int fifo_priority{10};  // SCHED_FIFO for the render thread; 0 keeps the default policy
};

class RealtimeLoop {
 public:
  using Sink = std::function<void(const MultichannelBuffer&)>;

  using Options = RealtimeOptions;

  explicit RealtimeLoop(Engine engine, Options options = {}, Sink sink = {})
      : engine_(std::move(engine)),
        sink_(std::move(sink)),
        control_(options.control_capacity),
        free_(options.telemetry_pool),
        ready_(options.telemetry_pool),
        intervals_(options.interval_capacity),
        fifo_priority_(options.fifo_priority) {
    pool_.reserve(options.telemetry_pool);
    for (std::size_t i = 0; i < options.telemetry_pool; ++i) {
      auto snap = std::make_unique<TelemetrySnapshot>();
      snap->sources.resize(engine_.capacity());
      for (auto& r : snap->sources) {
        r.weights.assign(engine_.layout().size(), 0.0);
        r.channel_intensity.assign(engine_.layout().size(), 0.0);
      }
      free_.try_push(snap.get());
      pool_.push_back(std::move(snap));
    }
  }

  ~RealtimeLoop() { stop(); }

  RealtimeLoop(const RealtimeLoop&) = delete;
  RealtimeLoop& operator=(const RealtimeLoop&) = delete;

  const Engine& engine() const noexcept { return engine_; }

  void start() {
    if (thread_.joinable()) return;
    running_.store(true, std::memory_order_release);
    thread_ = std::thread([this] { run(); });
  }

  void stop() {
    running_.store(false, std::memory_order_release);
    if (thread_.joinable()) thread_.join();
  }

  bool running() const noexcept { return running_.load(std::memory_order_acquire); }

  // Whether the render thread got the requested real-time policy. Without the
  // privilege it silently keeps the default one.
  bool realtime_scheduled() const noexcept { return realtime_.load(std::memory_order_acquire); }

  // Any thread. Returns false when the control queue is full.
  bool submit(const ControlCommand& cmd) noexcept { return control_.try_push(cmd); }

  // One block: apply pending commands, render, publish telemetry. Called by
  // the render thread; usable directly when the loop is not started.
  const MultichannelBuffer& step() {
    apply_commands();
    const MultichannelBuffer& block = engine_.render_block();
    if (sink_) sink_(block);
    publish();
    source_count_.store(engine_.source_count(), std::memory_order_relaxed);
    blocks_.fetch_add(1, std::memory_order_relaxed);
    return block;
  }

  // Copies the newest snapshot into `out`. Returns false when nothing new
  // was published since the last call.
  bool latest_telemetry(TelemetrySnapshot& out) {
    TelemetrySnapshot* newest = nullptr;
    TelemetrySnapshot* p = nullptr;
    while (ready_.try_pop(p)) {
      if (newest != nullptr) free_.try_push(newest);
      newest = p;
    }
    if (newest == nullptr) return false;
    out.t = newest->t;
    out.block = newest->block;
    out.count = newest->count;
    out.sources.assign(newest->sources.begin(),
                       newest->sources.begin() + static_cast<std::ptrdiff_t>(newest->count));
    free_.try_push(newest);
    return true;
  }

  // Moves recorded block start intervals (seconds) into `out`.
  std::size_t drain_block_intervals(std::vector<double>& out) {
    double v = 0.0;
    std::size_t n = 0;
    while (intervals_.try_pop(v)) {
      out.push_back(v);
      ++n;
    }
    return n;
  }

  std::size_t source_count() const noexcept { return source_count_.load(std::memory_order_relaxed); }
  std::uint64_t blocks_rendered() const noexcept { return blocks_.load(std::memory_order_relaxed); }
  std::uint64_t commands_rejected() const noexcept { return rejected_.load(std::memory_order_relaxed); }

 private:
  void apply_commands() {
    ControlCommand cmd;
    while (control_.try_pop(cmd)) {
      bool ok = true;
      switch (cmd.kind) {
        case ControlCommand::Kind::set_source:
          ok = engine_.set_source(cmd.id, cmd.position, cmd.gain);
          break;
        case ControlCommand::Kind::set_signal:
          ok = engine_.set_signal(cmd.id, cmd.envelope);
          break;
        case ControlCommand::Kind::remove_source:
          engine_.remove_source(cmd.id);
          break;
        case ControlCommand::Kind::set_carrier:
          if (cmd.carrier_hz >= 100.0 && cmd.carrier_hz <= engine_.render_config().sample_rate / 4.0)
            engine_.set_carrier(cmd.carrier_hz);
          else
            ok = false;
          break;
      }
      if (!ok) rejected_.fetch_add(1, std::memory_order_relaxed);
    }
  }

  void publish() {
    TelemetrySnapshot* snap = nullptr;
    if (!free_.try_pop(snap) && !ready_.try_pop(snap)) return;
    const auto reports = engine_.reports();
    snap->t = engine_.time();
    snap->block = blocks_.load(std::memory_order_relaxed);
    snap->count = reports.size();
    for (std::size_t i = 0; i < reports.size(); ++i) snap->sources[i] = reports[i];
    ready_.try_push(snap);
  }

  void run() {
    if (fifo_priority_ > 0) {
      sched_param param{};
      param.sched_priority = fifo_priority_;
      realtime_.store(pthread_setschedparam(pthread_self(), SCHED_FIFO, &param) == 0, std::memory_order_release);
    }
    using clock = std::chrono::steady_clock;
    const auto period = std::chrono::duration_cast<clock::duration>(
        std::chrono::duration<double>(engine_.render_config().block_duration()));
    auto deadline = clock::now();
    auto previous = deadline;
    bool first = true;
    while (running_.load(std::memory_order_acquire)) {
      std::this_thread::sleep_until(deadline);
      const auto now = clock::now();
      if (!first) intervals_.try_push(std::chrono::duration<double>(now - previous).count());
      first = false;
      previous = now;
      step();
      deadline += period;
      // More than a few blocks behind: resynchronize rather than burst.
      if (clock::now() - deadline > 4 * period) deadline = clock::now() + period;
    }
  }

  Engine engine_;
  Sink sink_;
  BoundedQueue<ControlCommand> control_;
  std::vector<std::unique_ptr<TelemetrySnapshot>> pool_;
  BoundedQueue<TelemetrySnapshot*> free_;
  BoundedQueue<TelemetrySnapshot*> ready_;
  BoundedQueue<double> intervals_;

  int fifo_priority_;
  std::atomic<bool> running_{false};
  std::atomic<bool> realtime_{false};
  std::atomic<std::size_t> source_count_{0};
  std::atomic<std::uint64_t> blocks_{0};
  std::atomic<std::uint64_t> rejected_{0};
  std::thread thread_;
};

}  // namespace stereohaptic
