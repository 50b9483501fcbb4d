// Thin wrapper around FFTW complex transforms on cubic grids.
#pragma once

#include <fftw3.h>

#include <array>
#include <complex>
#include <cstddef>
#include <map>
#include <mutex>
#include <span>
#include <stdexcept>

namespace njsm::fft {

enum class Direction { Forward = FFTW_FORWARD, Backward = FFTW_BACKWARD };

namespace detail {

struct PlanKey {
    int dim;
    int size;
    int sign;
    auto operator<=>(const PlanKey&) const = default;
};

class PlanCache {
public:
    static PlanCache& instance() {
        static PlanCache cache;
        return cache;
    }

    fftw_plan get(int dim, int size, int sign) {
        std::lock_guard<std::mutex> lock(mutex_);
        PlanKey key{dim, size, sign};
        auto it = plans_.find(key);
        if (it != plans_.end()) return it->second;

        std::array<int, 3> n{size, size, size};
        std::size_t total = 1;
        for (int i = 0; i < dim; ++i) total *= static_cast<std::size_t>(size);
        auto* scratch = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * total));
        fftw_plan plan = fftw_plan_dft(dim, n.data(), scratch, scratch, sign,
                                       FFTW_ESTIMATE | FFTW_UNALIGNED);
        fftw_free(scratch);
        if (plan == nullptr) throw std::runtime_error("fftw: plan creation failed");
        plans_.emplace(key, plan);
        return plan;
    }

    PlanCache(const PlanCache&) = delete;
    PlanCache& operator=(const PlanCache&) = delete;

private:
    PlanCache() = default;
    ~PlanCache() {
        for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
    }

    std::mutex mutex_;
    std::map<PlanKey, fftw_plan> plans_;
};

}  // namespace detail

inline std::size_t grid_points(int dim, int size) {
    std::size_t total = 1;
    for (int i = 0; i < dim; ++i) total *= static_cast<std::size_t>(size);
    return total;
}

// Unnormalised in-place transform of a row-major size^dim array.
inline void transform(std::span<std::complex<double>> data, int dim, int size, Direction dir) {
    if (dim < 1 || dim > 3 || size < 1) throw std::invalid_argument("fft: bad grid shape");
    if (data.size() != grid_points(dim, size))
        throw std::invalid_argument("fft: buffer does not match grid");
    fftw_plan plan = detail::PlanCache::instance().get(dim, size, static_cast<int>(dir));
    auto* ptr = reinterpret_cast<fftw_complex*>(data.data());
    fftw_execute_dft(plan, ptr, ptr);
}

// Smallest 2^a 3^b 5^c that is >= n.
inline int good_size(int n) {
    if (n <= 1) return 1;
    for (int m = n;; ++m) {
        int r = m;
        for (int p : {2, 3, 5})
            while (r % p == 0) r /= p;
        if (r == 1) return m;
    }
}

}  // namespace njsm::fft
