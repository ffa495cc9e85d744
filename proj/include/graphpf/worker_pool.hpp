#pragma once

#include <condition_variable>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <utility>
#include <vector>

namespace graphpf {

/// Half-open range [begin, end).
struct IndexRange {
    std::size_t begin = 0;
    std::size_t end = 0;
    std::size_t size() const noexcept { return end - begin; }
};

/// Contiguous static share of [0, n) for part `idx` of `parts`. Earlier parts get the
/// remainder, so sizes differ by at most one.
IndexRange static_range(std::size_t n, std::size_t parts, std::size_t idx) noexcept;

/// Fixed set of compute threads that execute one task per worker and then meet at a
/// barrier. The calling thread acts as worker 0, so a pool of size 1 spawns nothing.
class WorkerPool {
public:
    explicit WorkerPool(unsigned workers = 1);
    ~WorkerPool();

    WorkerPool(const WorkerPool&) = delete;
    WorkerPool& operator=(const WorkerPool&) = delete;

    unsigned size() const noexcept { return workers_; }

    /// Runs task(worker) on every worker and blocks until all return. If tasks throw,
    /// the exception from the lowest worker index is rethrown after the barrier.
    void run(const std::function<void(unsigned)>& task);

    /// Static contiguous partition of [0, n): body(range, worker) per worker.
    template <class Body>
    void for_ranges(std::size_t n, Body&& body) {
        run([&](unsigned w) {
            const auto r = static_range(n, workers_, w);
            if (r.size() > 0) body(r, w);
        });
    }

private:
    void worker_loop(unsigned index);

    unsigned workers_;
    std::vector<std::thread> threads_;

    std::mutex mutex_;
    std::condition_variable start_cv_;
    std::condition_variable done_cv_;
    const std::function<void(unsigned)>* task_ = nullptr;
    std::size_t generation_ = 0;
    unsigned pending_ = 0;
    bool stopping_ = false;
    std::vector<std::exception_ptr> errors_;
};

}  // namespace graphpf
