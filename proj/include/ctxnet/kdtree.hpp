#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <numeric>
#include <ostream>
#include <utility>
#include <vector>

#include "ctxnet/error.hpp"
#include "ctxnet/pointcloud.hpp"

namespace ctxnet {

/// Balanced k-d tree over a 2^D point cloud.
///
/// Points are stored implicitly in "tree order": the node at depth d with
/// ordinal k owns the contiguous slice [k * 2^(D-d), (k+1) * 2^(D-d)).
/// `order[t]` is the original index of the point at tree position t and
/// `position[p]` its inverse. Split axes are kept for inspection only; the
/// network never consumes them.
struct KdTree {
    unsigned depth = 0;
    std::size_t n = 1;
    std::vector<std::uint32_t> order;
    std::vector<std::uint32_t> position;
    std::vector<std::uint8_t> split_axes;  // level order, node (d,k) at 2^d - 1 + k

    std::size_t slice_len(unsigned d) const { return n >> d; }
    std::size_t slice_start(unsigned d, std::size_t k) const { return k * slice_len(d); }

    std::uint8_t split_axis(unsigned d, std::size_t k) const {
        require(d < depth && k < (std::size_t{1} << d), "argument", "no internal node at that depth/ordinal");
        return split_axes[(std::size_t{1} << d) - 1 + k];
    }
};

namespace detail {

inline void build_node(const PointCloud& pc, std::vector<std::uint32_t>& idx, std::size_t begin, std::size_t len,
                       unsigned d, std::size_t k, KdTree& tree) {
    if (len <= 1) return;
    std::array<double, 3> lo{}, hi{};
    lo.fill(std::numeric_limits<double>::infinity());
    hi.fill(-std::numeric_limits<double>::infinity());
    for (std::size_t t = begin; t < begin + len; ++t)
        for (int a = 0; a < 3; ++a) {
            lo[a] = std::min(lo[a], pc.at(idx[t], a));
            hi[a] = std::max(hi[a], pc.at(idx[t], a));
        }
    int axis = 0;
    for (int a = 1; a < 3; ++a)
        if (hi[a] - lo[a] > hi[axis] - lo[axis]) axis = a;
    tree.split_axes[(std::size_t{1} << d) - 1 + k] = static_cast<std::uint8_t>(axis);

    auto less = [&](std::uint32_t p, std::uint32_t q) {
        const double pa = pc.at(p, axis), qa = pc.at(q, axis);
        if (pa != qa) return pa < qa;
        for (int a = 0; a < 3; ++a)
            if (pc.at(p, a) != pc.at(q, a)) return pc.at(p, a) < pc.at(q, a);
        return p < q;
    };
    const std::size_t half = len / 2;
    auto first = idx.begin() + static_cast<std::ptrdiff_t>(begin);
    std::nth_element(first, first + static_cast<std::ptrdiff_t>(half), first + static_cast<std::ptrdiff_t>(len), less);
    build_node(pc, idx, begin, half, d + 1, 2 * k, tree);
    build_node(pc, idx, begin + half, half, d + 1, 2 * k + 1, tree);
}

}  // namespace detail

/// Recursive median split on the axis of largest spread (ties go to the
/// lowest axis). Within a node, points are ranked by (axis value, x, y, z,
/// original index) and the lower half goes left.
inline KdTree build_kdtree(const PointCloud& pc) {
    require(pc.n >= 1 && std::has_single_bit(pc.n), "size",
            "k-d tree needs a power-of-two point count, got " + std::to_string(pc.n));
    require(pc.f >= 3, "dimension", "need xyz columns");
    KdTree tree;
    tree.n = pc.n;
    tree.depth = static_cast<unsigned>(std::countr_zero(pc.n));
    tree.order.resize(pc.n);
    std::iota(tree.order.begin(), tree.order.end(), 0u);
    tree.split_axes.assign(pc.n - 1, 0);
    detail::build_node(pc, tree.order, 0, pc.n, 0, 0, tree);
    tree.position.resize(pc.n);
    for (std::size_t t = 0; t < pc.n; ++t) tree.position[tree.order[t]] = static_cast<std::uint32_t>(t);
    return tree;
}

/// Region membership of every point (original index order) at one level.
struct LevelPartition {
    std::size_t region_size = 1;
    std::size_t region_count = 1;
    std::vector<std::uint32_t> membership;
};

inline LevelPartition level_partition(const KdTree& tree, std::size_t region_size) {
    require(region_size >= 1 && std::has_single_bit(region_size) && region_size <= tree.n, "argument",
            "region size must be a power of two <= " + std::to_string(tree.n) + ", got " +
                std::to_string(region_size));
    LevelPartition part;
    part.region_size = region_size;
    part.region_count = tree.n / region_size;
    part.membership.resize(tree.n);
    for (std::size_t p = 0; p < tree.n; ++p)
        part.membership[p] = static_cast<std::uint32_t>(tree.position[p] / region_size);
    return part;
}

/// Ordinals of the two children of node (d, k), at depth d + 1.
inline std::pair<std::size_t, std::size_t> children(const KdTree& tree, unsigned d, std::size_t k) {
    require(d < tree.depth && k < (std::size_t{1} << d), "argument",
            "node (" + std::to_string(d) + "," + std::to_string(k) + ") has no children");
    return {2 * k, 2 * k + 1};
}

/// One line per node: "depth ordinal axis slice_start slice_len".
/// Leaves (depth D) have no split and print axis -1.
inline void write_tree_dump(std::ostream& os, const KdTree& tree) {
    for (unsigned d = 0; d <= tree.depth; ++d) {
        const std::size_t count = std::size_t{1} << d;
        for (std::size_t k = 0; k < count; ++k) {
            os << d << ' ' << k << ' ';
            if (d < tree.depth) os << static_cast<int>(tree.split_axis(d, k));
            else os << -1;
            os << ' ' << tree.slice_start(d, k) << ' ' << tree.slice_len(d) << '\n';
        }
    }
}

}  // namespace ctxnet
