#include "poke2vid/service/worker_pool.hpp"

#include "poke2vid/common.hpp"

namespace poke2vid {

BoundedWorkerPool::BoundedWorkerPool(int workers, int queue_limit) : workers_(workers), queue_limit_(queue_limit) {
    if (workers < 1) throw ValidationError("worker pool needs at least one worker");
    if (queue_limit < 0) throw ValidationError("queue limit must be non-negative");
    for (int i = 0; i < workers; ++i) threads_.emplace_back([this] { loop(); });
}

BoundedWorkerPool::~BoundedWorkerPool() {
    {
        std::lock_guard lock(mutex_);
        stopping_ = true;
    }
    cv_.notify_all();
    for (auto& t : threads_) t.join();
}

int BoundedWorkerPool::in_flight() const {
    std::lock_guard lock(mutex_);
    return in_flight_;
}

void BoundedWorkerPool::loop() {
    for (;;) {
        std::function<void()> job;
        {
            std::unique_lock lock(mutex_);
            cv_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
            if (queue_.empty()) return;
            job = std::move(queue_.front());
            queue_.pop_front();
        }
        job();
        std::lock_guard lock(mutex_);
        --in_flight_;
    }
}

}  // namespace poke2vid
