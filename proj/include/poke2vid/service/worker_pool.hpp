#pragma once

#include <condition_variable>
#include <deque>
#include <functional>
#include <future>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

namespace poke2vid {

/// Fixed number of workers plus a bounded queue. submit() refuses work instead of
/// queueing beyond the limit.
class BoundedWorkerPool {
public:
    BoundedWorkerPool(int workers, int queue_limit);
    ~BoundedWorkerPool();

    BoundedWorkerPool(const BoundedWorkerPool&) = delete;
    BoundedWorkerPool& operator=(const BoundedWorkerPool&) = delete;

    /// Returns nullopt when `workers + queue_limit` tasks are already running or waiting.
    template <typename F>
    auto submit(F&& fn) -> std::optional<std::future<std::invoke_result_t<F>>> {
        using R = std::invoke_result_t<F>;
        auto task = std::make_shared<std::packaged_task<R()>>(std::forward<F>(fn));
        auto future = task->get_future();
        {
            std::lock_guard lock(mutex_);
            if (stopping_ || in_flight_ >= capacity()) return std::nullopt;
            ++in_flight_;
            queue_.emplace_back([task] { (*task)(); });
        }
        cv_.notify_one();
        return future;
    }

    int capacity() const { return workers_ + queue_limit_; }
    int in_flight() const;

private:
    void loop();

    int workers_;
    int queue_limit_;
    mutable std::mutex mutex_;
    std::condition_variable cv_;
    std::deque<std::function<void()>> queue_;
    std::vector<std::thread> threads_;
    int in_flight_ = 0;
    bool stopping_ = false;
};

}  // namespace poke2vid
