#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <optional>
#include <unordered_map>
#include <vector>

namespace mixtile {

// Sequential-task-flow graph: tasks are submitted in a valid sequential order
// together with the data handles they read and write; dependencies are
// inferred (read-after-write, write-after-write, write-after-read) and the
// graph is then executed by a dependency-counting work queue.
class TaskGraph {
public:
    using Handle = std::uint64_t;

    std::size_t submit(std::function<void()> work, std::initializer_list<Handle> reads,
                       std::initializer_list<Handle> writes);

    std::size_t size() const noexcept { return tasks_.size(); }
    const std::vector<std::size_t>& successors(std::size_t task) const { return tasks_[task].successors; }
    std::size_t dependency_count(std::size_t task) const { return tasks_[task].dependencies; }

    // Runs every task once. threads <= 1 executes in submission order unless
    // `shuffle_seed` is given, in which case a random topological order drawn
    // from that seed is used (schedule-invariance testing). The first
    // exception thrown by a task stops further scheduling and is rethrown.
    void run(std::size_t threads, std::optional<std::uint64_t> shuffle_seed = std::nullopt);

private:
    struct Task {
        std::function<void()> work;
        std::vector<std::size_t> successors;
        std::size_t dependencies = 0;
    };
    struct HandleState {
        std::optional<std::size_t> last_writer;
        std::vector<std::size_t> readers;
    };

    void add_edge(std::size_t from, std::size_t to, std::vector<std::size_t>& seen);
    void run_sequential();
    void run_shuffled(std::uint64_t seed);
    void run_parallel(std::size_t threads);

    std::vector<Task> tasks_;
    std::unordered_map<Handle, HandleState> handles_;
};

// Worker count for a requested value; 0 means hardware concurrency.
std::size_t resolve_threads(std::size_t requested);

}  // namespace mixtile
