#pragma once

#include <span>
#include <vector>

namespace stepfuse::kernels {

/// Best and second-best squared distances of one query against a candidate
/// pool. `index` is the flat candidate index of the best (-1 when the pool
/// is empty); d2_sq is +inf when the pool has a single candidate.
struct NearestTwo {
    int index = -1;
    double d1_sq = 0.0;
    double d2_sq = 0.0;
};

/// Column-major block of `count` descriptors of shared dimension.
struct DescriptorSpan {
    const double* data = nullptr;
    int count = 0;
};

// Squared L2 distances of `q` (dim) against n column vectors (dim x n,
// column-major). Serial and OpenMP variants compute bit-identical outputs;
// the undecorated entry point dispatches on size and the global toggle.
void squared_distances_serial(const double* q, const double* cols, int dim, int n, double* out);
void squared_distances_omp(const double* q, const double* cols, int dim, int n, double* out);
void squared_distances(const double* q, const double* cols, int dim, int n, double* out);

// For each of m query descriptors (dim x m, column-major), the two smallest
// squared distances over all candidates in `pools`, flat-indexed in pool
// order. Parallel variant splits over query columns; per-query reduction
// order is identical, so outputs are bit-identical to the serial variant.
void nearest_two_serial(const double* queries, int m, std::span<const DescriptorSpan> pools,
                        int dim, NearestTwo* out);
void nearest_two_omp(const double* queries, int m, std::span<const DescriptorSpan> pools,
                     int dim, NearestTwo* out);
void nearest_two(const double* queries, int m, std::span<const DescriptorSpan> pools,
                 int dim, NearestTwo* out);

/// Process-wide switch for the dispatching entry points (default: on when
/// compiled with OpenMP). Serial/parallel results are bit-identical either way.
void set_parallel(bool enabled);
bool parallel_enabled();

}  // namespace stepfuse::kernels
