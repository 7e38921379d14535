#pragma once

#include <algorithm>
#include <condition_variable>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace divnet {

/// Resolves a worker count: explicit value if > 0, else DIVNET_THREADS, else 1.
inline unsigned resolve_threads(int requested) {
  if (requested > 0) return static_cast<unsigned>(requested);
  if (const char* env = std::getenv("DIVNET_THREADS")) {
    try {
      const int v = std::stoi(env);
      if (v > 0) return static_cast<unsigned>(v);
    } catch (...) {
    }
  }
  return 1;
}

/// Fixed-size worker pool running blocking index-range jobs. Work items are
/// assigned by index, never by completion order, so callers that write
/// results into per-index slots get schedule-independent output.
class ThreadPool {
 public:
  explicit ThreadPool(unsigned threads) : size_(std::max(1u, threads)) {
    for (unsigned i = 1; i < size_; ++i) workers_.emplace_back([this, i] { worker_loop(i); });
  }

  ~ThreadPool() {
    {
      std::lock_guard lock(mutex_);
      stop_ = true;
    }
    wake_.notify_all();
    for (auto& w : workers_) w.join();
  }

  ThreadPool(const ThreadPool&) = delete;
  ThreadPool& operator=(const ThreadPool&) = delete;

  unsigned size() const noexcept { return size_; }

  /// Calls fn(begin, end) over a partition of [0, n) into contiguous blocks.
  void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn) {
    if (n == 0) return;
    if (size_ == 1 || n == 1) {
      fn(0, n);
      return;
    }
    {
      std::lock_guard lock(mutex_);
      job_ = &fn;
      job_n_ = n;
      pending_ = size_ - 1;
      ++generation_;
      error_ = nullptr;
    }
    wake_.notify_all();
    run_block(0, fn, n);
    std::unique_lock lock(mutex_);
    done_.wait(lock, [this] { return pending_ == 0; });
    job_ = nullptr;
    if (error_) std::rethrow_exception(error_);
  }

 private:
  void run_block(unsigned index, const std::function<void(std::size_t, std::size_t)>& fn,
                 std::size_t n) {
    const std::size_t chunk = (n + size_ - 1) / size_;
    const std::size_t b = std::min(n, chunk * index);
    const std::size_t e = std::min(n, b + chunk);
    if (b < e) fn(b, e);
  }

  void worker_loop(unsigned index) {
    std::size_t seen = 0;
    for (;;) {
      const std::function<void(std::size_t, std::size_t)>* job;
      std::size_t n;
      {
        std::unique_lock lock(mutex_);
        wake_.wait(lock, [&] { return stop_ || generation_ != seen; });
        if (stop_) return;
        seen = generation_;
        job = job_;
        n = job_n_;
      }
      try {
        run_block(index, *job, n);
      } catch (...) {
        std::lock_guard lock(mutex_);
        if (!error_) error_ = std::current_exception();
      }
      {
        std::lock_guard lock(mutex_);
        if (--pending_ == 0) done_.notify_one();
      }
    }
  }

  unsigned size_;
  std::vector<std::thread> workers_;
  std::mutex mutex_;
  std::condition_variable wake_;
  std::condition_variable done_;
  const std::function<void(std::size_t, std::size_t)>* job_ = nullptr;
  std::size_t job_n_ = 0;
  std::size_t generation_ = 0;
  unsigned pending_ = 0;
  bool stop_ = false;
  std::exception_ptr error_;
};

}  // namespace divnet
