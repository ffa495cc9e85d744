#include "graphpf/worker_pool.hpp"

#include <algorithm>
#include <stdexcept>

namespace graphpf {

IndexRange static_range(std::size_t n, std::size_t parts, std::size_t idx) noexcept {
    const std::size_t base = n / parts;
    const std::size_t extra = n % parts;
    const std::size_t begin = idx * base + std::min(idx, extra);
    return {begin, begin + base + (idx < extra ? 1 : 0)};
}

WorkerPool::WorkerPool(unsigned workers) : workers_(workers), errors_(workers) {
    if (workers == 0) throw std::invalid_argument("WorkerPool: need at least one worker");
    threads_.reserve(workers - 1);
    for (unsigned w = 1; w < workers; ++w) threads_.emplace_back([this, w] { worker_loop(w); });
}

WorkerPool::~WorkerPool() {
    {
        std::lock_guard lock(mutex_);
        stopping_ = true;
    }
    start_cv_.notify_all();
    for (auto& t : threads_) t.join();
}

void WorkerPool::run(const std::function<void(unsigned)>& task) {
    if (workers_ == 1) {
        task(0);
        return;
    }
    {
        std::lock_guard lock(mutex_);
        task_ = &task;
        pending_ = workers_ - 1;
        ++generation_;
        for (auto& e : errors_) e = nullptr;
    }
    start_cv_.notify_all();

    try {
        task(0);
    } catch (...) {
        errors_[0] = std::current_exception();
    }

    std::unique_lock lock(mutex_);
    done_cv_.wait(lock, [this] { return pending_ == 0; });
    task_ = nullptr;
    for (auto& e : errors_) {
        if (e) std::rethrow_exception(e);
    }
}

void WorkerPool::worker_loop(unsigned index) {
    std::size_t seen = 0;
    for (;;) {
        const std::function<void(unsigned)>* task = nullptr;
        {
            std::unique_lock lock(mutex_);
            start_cv_.wait(lock, [&] { return stopping_ || generation_ != seen; });
            if (stopping_) return;
            seen = generation_;
            task = task_;
        }
        try {
            (*task)(index);
        } catch (...) {
            errors_[index] = std::current_exception();
        }
        {
            std::lock_guard lock(mutex_);
            if (--pending_ == 0) done_cv_.notify_one();
        }
    }
}

}  // namespace graphpf
