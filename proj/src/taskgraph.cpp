#include "mixtile/taskgraph.hpp"

#include <algorithm>
#include <condition_variable>
#include <exception>
#include <functional>
#include <mutex>
#include <queue>
#include <thread>

#include "mixtile/rng.hpp"

namespace mixtile {

std::size_t resolve_threads(std::size_t requested) {
    if (requested > 0) return requested;
    return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

void TaskGraph::add_edge(std::size_t from, std::size_t to, std::vector<std::size_t>& seen) {
    if (from == to || std::find(seen.begin(), seen.end(), from) != seen.end()) return;
    seen.push_back(from);
    tasks_[from].successors.push_back(to);
    ++tasks_[to].dependencies;
}

std::size_t TaskGraph::submit(std::function<void()> work, std::initializer_list<Handle> reads,
                              std::initializer_list<Handle> writes) {
    const std::size_t id = tasks_.size();
    tasks_.push_back(Task{std::move(work), {}, 0});
    std::vector<std::size_t> seen;

    for (Handle h : reads) {
        auto& state = handles_[h];
        if (state.last_writer) add_edge(*state.last_writer, id, seen);
    }
    for (Handle h : writes) {
        auto& state = handles_[h];
        if (state.last_writer) add_edge(*state.last_writer, id, seen);
        for (std::size_t r : state.readers) add_edge(r, id, seen);
    }
    for (Handle h : reads) {
        if (std::find(writes.begin(), writes.end(), h) == writes.end()) handles_[h].readers.push_back(id);
    }
    for (Handle h : writes) {
        auto& state = handles_[h];
        state.last_writer = id;
        state.readers.clear();
    }
    return id;
}

void TaskGraph::run(std::size_t threads, std::optional<std::uint64_t> shuffle_seed) {
    if (tasks_.empty()) return;
    if (shuffle_seed) {
        run_shuffled(*shuffle_seed);
    } else if (threads <= 1) {
        run_sequential();
    } else {
        run_parallel(threads);
    }
}

void TaskGraph::run_sequential() {
    for (auto& t : tasks_) t.work();
}

void TaskGraph::run_shuffled(std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::size_t> remaining(tasks_.size());
    std::vector<std::size_t> ready;
    for (std::size_t i = 0; i < tasks_.size(); ++i) {
        remaining[i] = tasks_[i].dependencies;
        if (remaining[i] == 0) ready.push_back(i);
    }
    while (!ready.empty()) {
        const std::size_t pick = rng.below(ready.size());
        const std::size_t id = ready[pick];
        ready[pick] = ready.back();
        ready.pop_back();
        tasks_[id].work();
        for (std::size_t s : tasks_[id].successors)
            if (--remaining[s] == 0) ready.push_back(s);
    }
}

void TaskGraph::run_parallel(std::size_t threads) {
    std::mutex mutex;
    std::condition_variable cv;
    std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
    std::vector<std::size_t> remaining(tasks_.size());
    for (std::size_t i = 0; i < tasks_.size(); ++i) {
        remaining[i] = tasks_[i].dependencies;
        if (remaining[i] == 0) ready.push(i);
    }
    std::size_t completed = 0;
    std::size_t running = 0;
    std::exception_ptr failure;

    auto worker = [&] {
        std::unique_lock lock(mutex);
        while (true) {
            cv.wait(lock, [&] {
                return !ready.empty() || completed == tasks_.size() || (failure && running == 0);
            });
            if (failure || completed == tasks_.size()) {
                cv.notify_all();
                return;
            }
            const std::size_t id = ready.top();
            ready.pop();
            ++running;
            lock.unlock();
            std::exception_ptr error;
            try {
                tasks_[id].work();
            } catch (...) {
                error = std::current_exception();
            }
            lock.lock();
            --running;
            ++completed;
            if (error) {
                if (!failure) failure = error;
            } else {
                for (std::size_t s : tasks_[id].successors)
                    if (--remaining[s] == 0) ready.push(s);
            }
            cv.notify_all();
        }
    };

    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    pool.clear();
    if (failure) std::rethrow_exception(failure);
}

}  // namespace mixtile
