#pragma once

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <vector>

#include <json.hpp>

#include "morphnas/engine/history.hpp"

namespace morphnas::engine {

/// Fan-out of run events to subscribers, each with a bounded queue. A
/// subscriber that falls behind loses events and is told so by a gap marker
/// carrying the last epoch it did receive, from which it can backfill.
class EventHub {
 public:
  static constexpr std::size_t kCapacity = 256;

  class Subscription {
   public:
    explicit Subscription(std::size_t capacity, std::size_t cursor) : capacity_(capacity), delivered_epoch_(cursor) {}

    /// Next event, a gap marker, or nothing after `timeout`.
    std::optional<json> next(std::chrono::milliseconds timeout) {
      std::unique_lock lock(mu_);
      cv_.wait_for(lock, timeout, [&] { return !queue_.empty() || dropped_ > 0 || closed_; });
      if (dropped_ > 0 && queue_.empty()) {
        json gap{{"type", "gap"}, {"missed", dropped_}, {"cursor", delivered_epoch_}};
        dropped_ = 0;
        return gap;
      }
      if (queue_.empty()) return std::nullopt;
      json e = std::move(queue_.front());
      queue_.pop_front();
      if (e.contains("epoch") && e["type"] == "epoch") delivered_epoch_ = e["epoch"].get<std::size_t>();
      return e;
    }

    bool closed() const {
      std::lock_guard lock(mu_);
      return closed_ && queue_.empty() && dropped_ == 0;
    }

   private:
    friend class EventHub;
    void push(const json& e) {
      {
        std::lock_guard lock(mu_);
        if (closed_) return;
        // Once something was dropped, keep dropping until the gap is reported,
        // so the subscriber never sees events out of order around a hole.
        if (queue_.size() >= capacity_ || dropped_ > 0) {
          ++dropped_;
        } else {
          queue_.push_back(e);
        }
      }
      cv_.notify_all();
    }
    void close() {
      {
        std::lock_guard lock(mu_);
        closed_ = true;
      }
      cv_.notify_all();
    }

    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::deque<json> queue_;
    std::size_t capacity_;
    std::size_t dropped_ = 0;
    std::size_t delivered_epoch_;
    bool closed_ = false;
  };

  /// Registers a subscriber. The returned cursor is the last epoch published
  /// before the subscription; everything after it will be delivered.
  std::pair<std::shared_ptr<Subscription>, std::size_t> subscribe(std::size_t capacity = kCapacity) {
    std::lock_guard lock(mu_);
    auto sub = std::make_shared<Subscription>(capacity, last_epoch_);
    if (finished_) sub->close();
    subs_.push_back(sub);
    return {sub, last_epoch_};
  }

  void publish(json e) {
    std::lock_guard lock(mu_);
    e["seq"] = ++seq_;
    if (e["type"] == "epoch") last_epoch_ = e["epoch"].get<std::size_t>();
    std::erase_if(subs_, [](const std::weak_ptr<Subscription>& w) { return w.expired(); });
    for (auto& w : subs_)
      if (auto s = w.lock()) s->push(e);
  }

  /// Ends every stream once its queue drains.
  void finish() {
    std::lock_guard lock(mu_);
    finished_ = true;
    for (auto& w : subs_)
      if (auto s = w.lock()) s->close();
  }

  void set_last_epoch(std::size_t epoch) {
    std::lock_guard lock(mu_);
    last_epoch_ = epoch;
  }

 private:
  std::mutex mu_;
  std::vector<std::weak_ptr<Subscription>> subs_;
  std::uint64_t seq_ = 0;
  std::size_t last_epoch_ = 0;
  bool finished_ = false;
};

/// Immutable views of a run, swapped in by the training thread and read by
/// any number of API threads.
class Publisher {
 public:
  void set_status(json status) {
    auto p = std::make_shared<const json>(std::move(status));
    std::lock_guard lock(mu_);
    status_ = std::move(p);
  }

  void set_architecture(json arch) {
    auto p = std::make_shared<const json>(std::move(arch));
    std::lock_guard lock(mu_);
    architecture_ = std::move(p);
  }

  /// Null until the engine has started.
  std::shared_ptr<const json> status() const {
    std::lock_guard lock(mu_);
    return status_;
  }

  std::shared_ptr<const json> architecture() const {
    std::lock_guard lock(mu_);
    return architecture_;
  }

  /// Seeds the history of a resumed run without emitting events.
  void load_history(const std::vector<HistoryEvent>& events) {
    std::lock_guard lock(mu_);
    history_ = events;
    hub_.set_last_epoch(events.empty() ? 0 : events.back().epoch);
  }

  void append_history(const HistoryEvent& e) {
    json ev = to_json(e);
    ev["type"] = "epoch";
    {
      std::lock_guard lock(mu_);
      history_.push_back(e);
      // Published under the lock so history and stream agree on order.
      hub_.publish(std::move(ev));
    }
  }

  /// Events with epoch > since, in order.
  std::vector<HistoryEvent> history_since(std::size_t since) const {
    std::lock_guard lock(mu_);
    std::vector<HistoryEvent> out;
    for (const auto& e : history_)
      if (e.epoch > since) out.push_back(e);
    return out;
  }

  void marker(json m) { hub_.publish(std::move(m)); }

  EventHub& hub() { return hub_; }

 private:
  mutable std::mutex mu_;
  std::shared_ptr<const json> status_;
  std::shared_ptr<const json> architecture_;
  std::vector<HistoryEvent> history_;
  EventHub hub_;
};

}  // namespace morphnas::engine
