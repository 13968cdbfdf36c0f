#include "rgns/graph.hpp"

#include <algorithm>
#include <cmath>

namespace rgns {

RadiusGraph build_radius_graph(std::span<const double> positions, int n, int dims, double r,
                               std::span<const double> box_lo, std::span<const double> box_hi) {
    if (n < 1 || dims < 1 || dims > 3) throw config_error("build_radius_graph: bad n/dims");
    if (!(r > 0)) throw config_error("build_radius_graph: radius must be > 0");
    if (positions.size() != static_cast<std::size_t>(n) * dims)
        throw config_error("build_radius_graph: positions size mismatch");
    for (double p : positions)
        if (!std::isfinite(p)) throw numeric_error("build_radius_graph: non-finite position");

    // Cell side exactly r; the final cell per axis absorbs the remainder and
    // out-of-box positions clamp to the boundary cells, so a pair within r
    // is always within one cell index per axis.
    int ncells[3] = {1, 1, 1};
    for (int d = 0; d < dims; ++d) {
        const double span = box_hi[d] - box_lo[d];
        ncells[d] = std::max(1, static_cast<int>(std::floor(span / r)));
    }
    const auto cell_of = [&](const double* p, int out[3]) {
        for (int d = 0; d < dims; ++d) {
            const int c = static_cast<int>(std::floor((p[d] - box_lo[d]) / r));
            out[d] = std::clamp(c, 0, ncells[d] - 1);
        }
        for (int d = dims; d < 3; ++d) out[d] = 0;
    };
    const auto flat = [&](const int c[3]) { return (c[2] * ncells[1] + c[1]) * ncells[0] + c[0]; };

    const int total_cells = ncells[0] * ncells[1] * ncells[2];
    std::vector<int> head(static_cast<std::size_t>(total_cells), -1);
    std::vector<int> next(static_cast<std::size_t>(n), -1);
    for (int i = 0; i < n; ++i) {
        int c[3];
        cell_of(positions.data() + static_cast<std::size_t>(i) * dims, c);
        const int f = flat(c);
        next[static_cast<std::size_t>(i)] = head[static_cast<std::size_t>(f)];
        head[static_cast<std::size_t>(f)] = i;
    }

    RadiusGraph g;
    g.n_nodes = n;
    g.dims = dims;
    const double r2 = r * r;
    int stencil_lo[3] = {0, 0, 0}, stencil_hi[3] = {0, 0, 0};
    for (int i = 0; i < n; ++i) {
        const double* pi = positions.data() + static_cast<std::size_t>(i) * dims;
        int ci[3];
        cell_of(pi, ci);
        for (int d = 0; d < 3; ++d) {
            stencil_lo[d] = std::max(0, ci[d] - (d < dims ? 1 : 0));
            stencil_hi[d] = std::min(ncells[d] - 1, ci[d] + (d < dims ? 1 : 0));
        }
        int c[3];
        for (c[2] = stencil_lo[2]; c[2] <= stencil_hi[2]; ++c[2])
            for (c[1] = stencil_lo[1]; c[1] <= stencil_hi[1]; ++c[1])
                for (c[0] = stencil_lo[0]; c[0] <= stencil_hi[0]; ++c[0])
                    for (int j = head[static_cast<std::size_t>(flat(c))]; j >= 0;
                         j = next[static_cast<std::size_t>(j)]) {
                        if (j == i) continue;
                        const double* pj = positions.data() + static_cast<std::size_t>(j) * dims;
                        if (dist2(pi, pj, dims) <= r2) g.edges.push_back({i, j});
                    }
    }
    std::sort(g.edges.begin(), g.edges.end(), [](const Edge& a, const Edge& b) {
        return a.recv != b.recv ? a.recv < b.recv : a.send < b.send;
    });
    return g;
}

void edge_features(RadiusGraph& graph, std::span<const double> positions, double r) {
    const int D = graph.dims;
    graph.geom.resize(static_cast<std::size_t>(graph.edges.size()) * (D + 1));
    for (std::size_t e = 0; e < graph.edges.size(); ++e) {
        const double* pi = positions.data() + static_cast<std::size_t>(graph.edges[e].recv) * D;
        const double* pj = positions.data() + static_cast<std::size_t>(graph.edges[e].send) * D;
        double* out = graph.geom.data() + e * (D + 1);
        double d2 = 0;
        for (int d = 0; d < D; ++d) {
            const double dx = pi[d] - pj[d];
            out[d] = dx / r;
            d2 += dx * dx;
        }
        out[D] = std::sqrt(d2) / r;
    }
}

void Normalizer::validate(int dims) const {
    if (static_cast<int>(mean.size()) != dims || static_cast<int>(stdev.size()) != dims)
        throw config_error("normalizer: wrong number of axes");
    for (double s : stdev)
        if (!(s > 0) || !std::isfinite(s))
            throw config_error("normalizer: velocity std must be positive and finite");
    for (double m : mean)
        if (!std::isfinite(m)) throw config_error("normalizer: non-finite mean");
}

Normalizer fit_normalizer(std::span<const Trajectory> trajs) {
    if (trajs.empty()) throw config_error("fit_normalizer: no trajectories");
    const int D = trajs.front().dims;
    std::vector<double> sum(static_cast<std::size_t>(D), 0.0), sum2(static_cast<std::size_t>(D), 0.0);
    std::size_t count = 0;
    for (const auto& traj : trajs) {
        if (traj.dims != D) throw config_error("fit_normalizer: mixed dims");
        const auto vel = compute_velocities(traj);
        const std::size_t rows = vel.size() / D;
        for (std::size_t rirow = 0; rirow < rows; ++rirow)
            for (int d = 0; d < D; ++d) {
                const double v = vel[rirow * D + d];
                sum[static_cast<std::size_t>(d)] += v;
                sum2[static_cast<std::size_t>(d)] += v * v;
            }
        count += rows;
    }
    Normalizer norm;
    norm.mean.resize(D);
    norm.stdev.resize(D);
    for (int d = 0; d < D; ++d) {
        const double m = sum[static_cast<std::size_t>(d)] / static_cast<double>(count);
        const double var = sum2[static_cast<std::size_t>(d)] / static_cast<double>(count) - m * m;
        norm.mean[d] = m;
        norm.stdev[d] = std::sqrt(std::max(var, 0.0));
    }
    norm.validate(D);
    return norm;
}

}  // namespace rgns
