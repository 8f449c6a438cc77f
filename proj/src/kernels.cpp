#include "stepfuse/kernels.hpp"

#include <atomic>
#include <limits>

namespace stepfuse::kernels {

namespace {

std::atomic<bool> g_parallel{true};

// Work below this many multiply-adds is not worth forking a team for.
constexpr long kParallelThreshold = 1 << 15;

inline double sq_dist(const double* a, const double* b, int dim) {
    double acc = 0.0;
    for (int d = 0; d < dim; ++d) {
        const double diff = a[d] - b[d];
        acc += diff * diff;
    }
    return acc;
}

inline NearestTwo scan_pools(const double* q, std::span<const DescriptorSpan> pools, int dim) {
    NearestTwo r;
    r.d1_sq = std::numeric_limits<double>::infinity();
    r.d2_sq = std::numeric_limits<double>::infinity();
    int base = 0;
    for (const auto& pool : pools) {
        for (int c = 0; c < pool.count; ++c) {
            const double d = sq_dist(q, pool.data + static_cast<long>(c) * dim, dim);
            if (d < r.d1_sq) {
                r.d2_sq = r.d1_sq;
                r.d1_sq = d;
                r.index = base + c;
            } else if (d < r.d2_sq) {
                r.d2_sq = d;
            }
        }
        base += pool.count;
    }
    if (r.index < 0) r.d1_sq = 0.0;
    return r;
}

inline long total_count(std::span<const DescriptorSpan> pools) {
    long n = 0;
    for (const auto& p : pools) n += p.count;
    return n;
}

}  // namespace

void set_parallel(bool enabled) { g_parallel.store(enabled); }

bool parallel_enabled() {
#ifdef _OPENMP
    return g_parallel.load();
#else
    return false;
#endif
}

void squared_distances_serial(const double* q, const double* cols, int dim, int n, double* out) {
    for (int i = 0; i < n; ++i) {
        out[i] = sq_dist(q, cols + static_cast<long>(i) * dim, dim);
    }
}

void squared_distances_omp(const double* q, const double* cols, int dim, int n, double* out) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int i = 0; i < n; ++i) {
        out[i] = sq_dist(q, cols + static_cast<long>(i) * dim, dim);
    }
}

void squared_distances(const double* q, const double* cols, int dim, int n, double* out) {
    if (parallel_enabled() && static_cast<long>(n) * dim >= kParallelThreshold) {
        squared_distances_omp(q, cols, dim, n, out);
    } else {
        squared_distances_serial(q, cols, dim, n, out);
    }
}

void nearest_two_serial(const double* queries, int m, std::span<const DescriptorSpan> pools,
                        int dim, NearestTwo* out) {
    for (int j = 0; j < m; ++j) {
        out[j] = scan_pools(queries + static_cast<long>(j) * dim, pools, dim);
    }
}

void nearest_two_omp(const double* queries, int m, std::span<const DescriptorSpan> pools,
                     int dim, NearestTwo* out) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int j = 0; j < m; ++j) {
        out[j] = scan_pools(queries + static_cast<long>(j) * dim, pools, dim);
    }
}

void nearest_two(const double* queries, int m, std::span<const DescriptorSpan> pools,
                 int dim, NearestTwo* out) {
    if (parallel_enabled() && static_cast<long>(m) * total_count(pools) * dim >= kParallelThreshold) {
        nearest_two_omp(queries, m, pools, dim, out);
    } else {
        nearest_two_serial(queries, m, pools, dim, out);
    }
}

}  // namespace stepfuse::kernels
