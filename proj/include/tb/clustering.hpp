#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "tb/matrix.hpp"

namespace tb {

struct FeatureMatrix;

// One agglomeration step. Leaves are 0..n-1; the cluster created by merge s
// has id n + s.
struct Merge {
    std::size_t left = 0;   // smaller of the two input ids
    std::size_t right = 0;
    double height = 0.0;    // Ward cost: increase of the within-cluster sum of squares
    std::size_t size = 0;   // leaves in the merged cluster

    bool operator==(const Merge&) const = default;
};

struct Dendrogram {
    std::size_t n = 0;
    std::vector<Merge> merges;  // n - 1 entries

    // Each id consumed at most once, ids refer to existing clusters, sizes add
    // up, heights non-decreasing. Throws ValidationError.
    void validate() const;
    // Stable hash over the exact merge sequence (heights bitwise).
    std::uint64_t digest() const;

    bool operator==(const Dendrogram&) const = default;
};

struct ClusterAssignment {
    std::size_t k = 0;
    // Cluster index in 0..k-1 per participant, numbered by first appearance.
    std::vector<std::uint32_t> label_of;

    std::uint64_t digest() const;
    bool operator==(const ClusterAssignment&) const = default;
};

// D[i][j] = sum_c (x_ic - x_jc)^2, computed row-parallel.
Matrix pairwise_sq_dist(const Matrix& features);
Matrix pairwise_sq_dist(const FeatureMatrix& features);

// Lance-Williams Ward agglomeration on squared Euclidean distances. Ties in the
// merge cost go to the lexicographically smallest (left id, right id) pair.
// Throws InputError on non-finite input and ArgumentError when there are no rows.
Dendrogram ward_linkage(const Matrix& features);
Dendrogram ward_linkage(const FeatureMatrix& features);

// Number of ward_linkage calls made by this process.
std::uint64_t linkage_call_count() noexcept;

// Partition obtained by undoing the last k - 1 merges. Requires 1 <= k <= n.
ClusterAssignment cut(const Dendrogram& dendrogram, std::size_t k);

// Four columns: left,right,height,size.
void write_dendrogram_csv(const Dendrogram& dendrogram, const std::filesystem::path& path);
Dendrogram read_dendrogram_csv(const std::filesystem::path& path);

}  // namespace tb
