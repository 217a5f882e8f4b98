#include "porogen/core/parallel.hpp"

#include <atomic>

#include <Eigen/Core>

namespace porogen {

namespace {
std::atomic<int> g_workers{1};
}

int worker_count() { return g_workers.load(); }

void set_worker_count(int n) {
    if (n < 1) n = 1;
    g_workers.store(n);
    Eigen::setNbThreads(n);
}

} // namespace porogen
