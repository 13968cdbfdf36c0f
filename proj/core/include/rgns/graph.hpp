#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rgns/mat.hpp"
#include "rgns/trajectory.hpp"

namespace rgns {

struct Edge {
    std::int32_t recv = 0;  // receiver i
    std::int32_t send = 0;  // sender j
};

// Directed radius graph: both directions of every pair within the
// connectivity radius, sorted lexicographically by (recv, send).
struct RadiusGraph {
    int n_nodes = 0;
    int dims = 0;
    std::vector<Edge> edges;
    std::vector<double> geom;  // per edge: ((p_i - p_j)/r, |p_i - p_j|/r), dims+1 entries

    int n_edges() const { return static_cast<int>(edges.size()); }
    const double* edge_geom(int e) const { return geom.data() + static_cast<std::size_t>(e) * (dims + 1); }
};

// Shared by the cell list and the brute-force test oracle so the membership
// predicate is the same arithmetic in both.
inline double dist2(const double* a, const double* b, int dims) {
    double s = 0;
    for (int d = 0; d < dims; ++d) {
        const double dx = a[d] - b[d];
        s += dx * dx;
    }
    return s;
}

// Uniform-cell neighbor search, cell side = r, 3^D stencil. Edge set is
// exactly { (i,j) : i != j, |p_i - p_j| <= r }.
RadiusGraph build_radius_graph(std::span<const double> positions, int n, int dims, double r,
                               std::span<const double> box_lo, std::span<const double> box_hi);

// Fills graph.geom from the same positions the graph was built on.
void edge_features(RadiusGraph& graph, std::span<const double> positions, double r);

// Per-axis velocity statistics fit on training data.
struct Normalizer {
    std::vector<double> mean, stdev;  // size dims
    void validate(int dims) const;
};

// Node physical vector chi: flattened normalized velocity window
// (oldest -> newest), clipped per-wall distances scaled to [0,1], one-hot
// material. Wall distances are measured at the conditioning positions,
// which the forward and inverse applications of one step share.
template <std::floating_point T>
Mat<T> node_physical(const StepState& s, std::span<const double> cond_positions,
                     std::span<const double> box_lo, std::span<const double> box_hi, double r,
                     const Normalizer& stats, int n_materials) {
    stats.validate(s.dims);
    if (n_materials < 1) throw config_error("node_physical: n_materials must be >= 1");
    const int D = s.dims, k = s.k, n = s.n;
    const int C = k * D + 2 * D + n_materials;
    Mat<T> chi(n, C);
    for (int i = 0; i < n; ++i) {
        T* row = chi.row(i);
        int c = 0;
        for (int slot = 0; slot < k; ++slot)
            for (int d = 0; d < D; ++d)
                row[c++] = static_cast<T>((s.vel(slot, i)[d] - stats.mean[d]) / stats.stdev[d]);
        const double* p = cond_positions.data() + static_cast<std::size_t>(i) * D;
        for (int d = 0; d < D; ++d) {
            const double lo_dist = std::clamp(p[d] - box_lo[d], 0.0, r) / r;
            const double hi_dist = std::clamp(box_hi[d] - p[d], 0.0, r) / r;
            row[c++] = static_cast<T>(lo_dist);
            row[c++] = static_cast<T>(hi_dist);
        }
        const int m = s.materials[static_cast<std::size_t>(i)];
        if (m < 0 || m >= n_materials)
            throw config_error("node_physical: material id out of range");
        for (int j = 0; j < n_materials; ++j) row[c++] = static_cast<T>(j == m ? 1 : 0);
    }
    return chi;
}

Normalizer fit_normalizer(std::span<const Trajectory> trajs);

}  // namespace rgns
