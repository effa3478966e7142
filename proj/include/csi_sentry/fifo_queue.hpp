#pragma once

#include <condition_variable>
#include <cstddef>
#include <deque>
#include <mutex>
#include <optional>
#include <utility>

#include "csi_sentry/error.hpp"

namespace csi_sentry::transport {

// Bounded FIFO between one producer and one consumer.
//
// push() blocks while the queue is full; pop() blocks while it is empty. After
// close(), push() throws Closed immediately and pop() keeps returning queued
// items until the queue is empty, then throws Closed.
template <typename T>
class FifoQueue {
 public:
  explicit FifoQueue(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw Error(Errc::BadConfig, "queue capacity must be >= 1");
  }

  FifoQueue(const FifoQueue&) = delete;
  FifoQueue& operator=(const FifoQueue&) = delete;

  void push(T item) {
    std::unique_lock lock(mutex_);
    not_full_.wait(lock, [&] { return closed_ || items_.size() < capacity_; });
    if (closed_) throw Error(Errc::Closed, "push on closed queue");
    items_.push_back(std::move(item));
    lock.unlock();
    not_empty_.notify_one();
  }

  // Non-blocking push; false when full.
  bool try_push(T item) {
    std::unique_lock lock(mutex_);
    if (closed_) throw Error(Errc::Closed, "push on closed queue");
    if (items_.size() >= capacity_) return false;
    items_.push_back(std::move(item));
    lock.unlock();
    not_empty_.notify_one();
    return true;
  }

  T pop() {
    std::unique_lock lock(mutex_);
    not_empty_.wait(lock, [&] { return closed_ || !items_.empty(); });
    if (items_.empty()) throw Error(Errc::Closed, "pop on closed, empty queue");
    T item = std::move(items_.front());
    items_.pop_front();
    lock.unlock();
    not_full_.notify_one();
    return item;
  }

  std::optional<T> try_pop() {
    std::unique_lock lock(mutex_);
    if (items_.empty()) {
      if (closed_) throw Error(Errc::Closed, "pop on closed, empty queue");
      return std::nullopt;
    }
    T item = std::move(items_.front());
    items_.pop_front();
    lock.unlock();
    not_full_.notify_one();
    return item;
  }

  void close() {
    {
      std::lock_guard lock(mutex_);
      closed_ = true;
    }
    not_empty_.notify_all();
    not_full_.notify_all();
  }

  bool closed() const {
    std::lock_guard lock(mutex_);
    return closed_;
  }

  std::size_t size() const {
    std::lock_guard lock(mutex_);
    return items_.size();
  }

  std::size_t capacity() const { return capacity_; }

 private:
  const std::size_t capacity_;
  mutable std::mutex mutex_;
  std::condition_variable not_empty_;
  std::condition_variable not_full_;
  std::deque<T> items_;
  bool closed_ = false;
};

}  // namespace csi_sentry::transport
