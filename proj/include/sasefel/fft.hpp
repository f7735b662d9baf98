#pragma once

// Thin wrapper over FFTW for the unnormalized complex transforms used by the
// noise synthesis and spectral estimators.

#include <complex>
#include <cstddef>
#include <map>
#include <mutex>
#include <span>
#include <utility>
#include <vector>

#include <fftw3.h>

namespace sasefel::fft {

enum class Direction { Forward, Backward };

namespace detail {

class PlanCache {
public:
    static PlanCache& instance() {
        static PlanCache cache;
        return cache;
    }

    // Plans are created with FFTW_ESTIMATE | FFTW_UNALIGNED so one plan can be
    // executed on any buffer through the thread-safe new-array interface.
    fftw_plan get(std::size_t n, Direction dir) {
        std::lock_guard lock(mutex_);
        auto key = std::make_pair(n, dir);
        if (auto it = plans_.find(key); it != plans_.end()) return it->second;
        std::vector<std::complex<double>> scratch(n);
        auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
        fftw_plan p = fftw_plan_dft_1d(static_cast<int>(n), buf, buf,
                                       dir == Direction::Forward ? FFTW_FORWARD : FFTW_BACKWARD,
                                       FFTW_ESTIMATE | FFTW_UNALIGNED);
        plans_.emplace(key, p);
        return p;
    }

    PlanCache(const PlanCache&) = delete;
    PlanCache& operator=(const PlanCache&) = delete;

private:
    PlanCache() = default;
    ~PlanCache() {
        for (auto& [key, p] : plans_) fftw_destroy_plan(p);
    }

    std::mutex mutex_;
    std::map<std::pair<std::size_t, Direction>, fftw_plan> plans_;
};

}  // namespace detail

/// In-place DFT without normalization.
/// Forward: X_k = sum_j x_j e^{-2 pi i jk/N}; Backward: x_j = sum_k X_k e^{+2 pi i jk/N}.
inline void transform(std::span<std::complex<double>> data, Direction dir) {
    if (data.empty()) return;
    fftw_plan p = detail::PlanCache::instance().get(data.size(), dir);
    auto* buf = reinterpret_cast<fftw_complex*>(data.data());
    fftw_execute_dft(p, buf, buf);
}

/// Index k of an N-point DFT mapped to its signed frequency multiple (k or k - N).
inline long signed_index(std::size_t k, std::size_t n) {
    return k < (n + 1) / 2 ? static_cast<long>(k) : static_cast<long>(k) - static_cast<long>(n);
}

inline std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

}  // namespace sasefel::fft
