#pragma once

#include <fftw3.h>

#include <array>
#include <complex>
#include <map>
#include <mutex>
#include <span>
#include <tuple>
#include <vector>

#include "stochdisp/error.hpp"

namespace stochdisp::fft {

using complex = std::complex<double>;

// Plans are created once per (rank, n, direction) and shared. FFTW plan
// creation is not thread-safe, execution of an existing plan on new arrays is.
class PlanCache {
public:
    static PlanCache& instance() {
        static PlanCache cache;
        return cache;
    }

    PlanCache(const PlanCache&) = delete;
    PlanCache& operator=(const PlanCache&) = delete;

    fftw_plan get(int rank, int n, int sign) {
        std::lock_guard<std::mutex> lock(mutex_);
        const auto key = std::make_tuple(rank, n, sign);
        if (auto it = plans_.find(key); it != plans_.end()) return it->second;

        std::size_t total = 1;
        for (int i = 0; i < rank; ++i) total *= static_cast<std::size_t>(n);
        std::vector<complex> scratch(total);
        std::array<int, 3> dims{n, n, n};
        auto* data = reinterpret_cast<fftw_complex*>(scratch.data());
        fftw_plan plan = fftw_plan_dft(rank, dims.data(), data, data, sign,
                                       FFTW_ESTIMATE | FFTW_UNALIGNED);
        require(plan != nullptr, ErrorKind::resource, "FFTW could not create a plan");
        plans_.emplace(key, plan);
        return plan;
    }

    ~PlanCache() {
        for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
    }

private:
    PlanCache() = default;

    std::mutex mutex_;
    std::map<std::tuple<int, int, int>, fftw_plan> plans_;
};

/// In-place unnormalized forward DFT (sign -1) over a rank-d cube of side n.
inline void forward(std::span<complex> data, int rank, int n) {
    fftw_plan plan = PlanCache::instance().get(rank, n, FFTW_FORWARD);
    auto* ptr = reinterpret_cast<fftw_complex*>(data.data());
    fftw_execute_dft(plan, ptr, ptr);
}

/// In-place inverse DFT, normalized so that inverse(forward(x)) == x.
inline void inverse(std::span<complex> data, int rank, int n) {
    fftw_plan plan = PlanCache::instance().get(rank, n, FFTW_BACKWARD);
    auto* ptr = reinterpret_cast<fftw_complex*>(data.data());
    fftw_execute_dft(plan, ptr, ptr);
    const double scale = 1.0 / static_cast<double>(data.size());
    for (auto& v : data) v *= scale;
}

}  // namespace stochdisp::fft
