#include "doppler/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <limits>
#include <string>
#include <thread>
#include <vector>

namespace doppler {

std::size_t thread_count() {
    const char* env = std::getenv("DOPPLER_THREADS");
    if (env == nullptr || *env == '\0') return 1;
    try {
        const long value = std::stol(env);
        if (value <= 0) return std::max<std::size_t>(1, std::thread::hardware_concurrency());
        return static_cast<std::size_t>(value);
    } catch (const std::exception&) {
        return 1;
    }
}

void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& body) {
    threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(n, 1));
    if (threads == 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }

    struct Failure {
        std::size_t index = std::numeric_limits<std::size_t>::max();
        std::exception_ptr error;
    };
    std::vector<Failure> failures(threads);
    std::vector<std::thread> workers;
    workers.reserve(threads);
    const std::size_t chunk = (n + threads - 1) / threads;
    for (std::size_t t = 0; t < threads; ++t) {
        workers.emplace_back([&, t] {
            const std::size_t begin = t * chunk;
            const std::size_t end = std::min(n, begin + chunk);
            for (std::size_t i = begin; i < end; ++i) {
                try {
                    body(i);
                } catch (...) {
                    failures[t] = {i, std::current_exception()};
                    return;
                }
            }
        });
    }
    for (auto& w : workers) w.join();

    const auto first = std::min_element(failures.begin(), failures.end(),
                                        [](const Failure& a, const Failure& b) { return a.index < b.index; });
    if (first->error) std::rethrow_exception(first->error);
}

}  // namespace doppler
