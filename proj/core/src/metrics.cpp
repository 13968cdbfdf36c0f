#include "rgns/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"

namespace rgns {

double rollout_mse(const RolloutResult& pred, const Trajectory& truth) {
    if (pred.frames.empty()) throw config_error("rollout_mse: empty rollout");
    const int n = truth.n_particles, D = truth.dims;
    if (pred.frames.front().n != n || pred.frames.front().dims != D)
        throw config_error("rollout_mse: particle count or dims mismatch");
    double s = 0;
    std::size_t count = 0;
    for (std::size_t f = 1; f < pred.frames.size(); ++f) {
        const long t = pred.forward ? pred.start_index + static_cast<long>(f)
                                    : pred.start_index - static_cast<long>(f);
        if (t < 0 || t >= truth.n_steps)
            throw config_error("rollout_mse: rollout leaves the trajectory at frame " +
                               std::to_string(f));
        for (int i = 0; i < n; ++i)
            for (int d = 0; d < D; ++d) {
                const double diff = pred.frames[f].pos(i)[d] -
                                    static_cast<double>(truth.pos(static_cast<int>(t), i, d));
                s += diff * diff;
                ++count;
            }
    }
    if (count == 0) throw config_error("rollout_mse: no predicted frames");
    return s / static_cast<double>(count);
}

namespace {

double sq_dist(std::span<const double> a, std::span<const double> b, int dims, int i, int j) {
    double s = 0;
    for (int d = 0; d < dims; ++d) {
        const double diff = a[static_cast<std::size_t>(i) * dims + d] -
                            b[static_cast<std::size_t>(j) * dims + d];
        s += diff * diff;
    }
    return s;
}

// Shortest augmenting path assignment (Jonker-Volgenant style), O(n^3).
// Returns the column matched to each row.
std::vector<int> solve_assignment(const std::vector<double>& cost, int n) {
    std::vector<double> u(static_cast<std::size_t>(n) + 1), v(static_cast<std::size_t>(n) + 1);
    std::vector<int> p(static_cast<std::size_t>(n) + 1, n), way(static_cast<std::size_t>(n) + 1, n);
    const double inf = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
        p[static_cast<std::size_t>(n)] = i;
        int j0 = n;
        std::vector<double> minv(static_cast<std::size_t>(n) + 1, inf);
        std::vector<char> used(static_cast<std::size_t>(n) + 1, 0);
        do {
            used[static_cast<std::size_t>(j0)] = 1;
            const int i0 = p[static_cast<std::size_t>(j0)];
            double delta = inf;
            int j1 = n;
            for (int j = 0; j < n; ++j) {
                if (used[static_cast<std::size_t>(j)]) continue;
                const double cur = cost[static_cast<std::size_t>(i0) * n + j] -
                                   u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
                if (cur < minv[static_cast<std::size_t>(j)]) {
                    minv[static_cast<std::size_t>(j)] = cur;
                    way[static_cast<std::size_t>(j)] = j0;
                }
                if (minv[static_cast<std::size_t>(j)] < delta) {
                    delta = minv[static_cast<std::size_t>(j)];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[static_cast<std::size_t>(j)]) {
                    u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
                    v[static_cast<std::size_t>(j)] -= delta;
                } else {
                    minv[static_cast<std::size_t>(j)] -= delta;
                }
            }
            j0 = j1;
        } while (p[static_cast<std::size_t>(j0)] != n);
        do {
            const int j1 = way[static_cast<std::size_t>(j0)];
            p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
            j0 = j1;
        } while (j0 != n);
    }
    std::vector<int> match(static_cast<std::size_t>(n), -1);
    for (int j = 0; j < n; ++j)
        if (p[static_cast<std::size_t>(j)] < n) match[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] = j;
    return match;
}

// Log-domain Sinkhorn with uniform marginals; mean transport cost of the
// entropic plan.
double sinkhorn_cost(const std::vector<double>& cost, int n, double reg, int iters) {
    std::vector<double> f(static_cast<std::size_t>(n), 0.0), g(static_cast<std::size_t>(n), 0.0);
    const double log_marginal = -std::log(static_cast<double>(n));
    std::vector<double> tmp(static_cast<std::size_t>(n));
    for (int it = 0; it < iters; ++it) {
        for (int i = 0; i < n; ++i) {
            double m = -std::numeric_limits<double>::infinity();
            for (int j = 0; j < n; ++j)
                m = std::max(m, (g[static_cast<std::size_t>(j)] -
                                 cost[static_cast<std::size_t>(i) * n + j]) / reg);
            double s = 0;
            for (int j = 0; j < n; ++j)
                s += std::exp((g[static_cast<std::size_t>(j)] -
                               cost[static_cast<std::size_t>(i) * n + j]) / reg - m);
            f[static_cast<std::size_t>(i)] = reg * (log_marginal - m - std::log(s));
        }
        for (int j = 0; j < n; ++j) {
            double m = -std::numeric_limits<double>::infinity();
            for (int i = 0; i < n; ++i)
                m = std::max(m, (f[static_cast<std::size_t>(i)] -
                                 cost[static_cast<std::size_t>(i) * n + j]) / reg);
            double s = 0;
            for (int i = 0; i < n; ++i)
                s += std::exp((f[static_cast<std::size_t>(i)] -
                               cost[static_cast<std::size_t>(i) * n + j]) / reg - m);
            g[static_cast<std::size_t>(j)] = reg * (log_marginal - m - std::log(s));
        }
    }
    double total = 0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double c = cost[static_cast<std::size_t>(i) * n + j];
            const double plan = std::exp((f[static_cast<std::size_t>(i)] +
                                          g[static_cast<std::size_t>(j)] - c) / reg);
            total += plan * c;
        }
    return total;  // the plan's total mass is 1, so this is the mean per-point cost
}

}  // namespace

double ot_distance(std::span<const double> a, std::span<const double> b, int dims, int exact_limit) {
    if (a.size() != b.size()) throw config_error("ot_distance: point sets must have equal size");
    if (a.empty()) throw config_error("ot_distance: empty point sets");
    const int n = static_cast<int>(a.size() / static_cast<std::size_t>(dims));
    std::vector<double> cost(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) cost[static_cast<std::size_t>(i) * n + j] = sq_dist(a, b, dims, i, j);

    if (n <= exact_limit) {
        const auto match = solve_assignment(cost, n);
        double total = 0;
        for (int i = 0; i < n; ++i) total += cost[static_cast<std::size_t>(i) * n + match[static_cast<std::size_t>(i)]];
        return total / static_cast<double>(n);
    }
    return sinkhorn_cost(cost, n, /*reg=*/1e-3, /*iters=*/1000);
}

double mmd(std::span<const double> a, std::span<const double> b, int dims, double bandwidth) {
    if (a.empty() || b.empty()) throw config_error("mmd: empty point set");
    const int m = static_cast<int>(a.size() / static_cast<std::size_t>(dims));
    const int n = static_cast<int>(b.size() / static_cast<std::size_t>(dims));
    if (m < 2 || n < 2)
        throw config_error("mmd: unbiased estimator needs at least two samples per set");

    if (bandwidth <= 0) {
        // median pairwise distance of the pooled set
        std::vector<double> pooled(a.begin(), a.end());
        pooled.insert(pooled.end(), b.begin(), b.end());
        const int total = m + n;
        std::vector<double> dists;
        dists.reserve(static_cast<std::size_t>(total) * (total - 1) / 2);
        for (int i = 0; i < total; ++i)
            for (int j = i + 1; j < total; ++j)
                dists.push_back(std::sqrt(sq_dist(pooled, pooled, dims, i, j)));
        std::nth_element(dists.begin(), dists.begin() + static_cast<std::ptrdiff_t>(dists.size() / 2),
                         dists.end());
        bandwidth = dists[dists.size() / 2];
        if (!(bandwidth > 0)) bandwidth = 1.0;
    }

    const double inv = -1.0 / (2.0 * bandwidth * bandwidth);
    double kaa = 0, kbb = 0, kab = 0;
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
            if (i != j) kaa += std::exp(inv * sq_dist(a, a, dims, i, j));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (i != j) kbb += std::exp(inv * sq_dist(b, b, dims, i, j));
    if (m == n) {
        // equal-size unbiased estimator: diagonal cross terms excluded, so
        // identical multisets measure exactly zero
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j)
                if (i != j) kab += std::exp(inv * sq_dist(a, b, dims, i, j));
        return (kaa + kbb - 2.0 * kab) / (static_cast<double>(m) * (m - 1));
    }
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) kab += std::exp(inv * sq_dist(a, b, dims, i, j));
    return kaa / (static_cast<double>(m) * (m - 1)) + kbb / (static_cast<double>(n) * (n - 1)) -
           2.0 * kab / (static_cast<double>(m) * n);
}

int Mask::count() const {
    int c = 0;
    for (auto v : cells) c += v != 0;
    return c;
}

Mask parse_mask(const std::string& text) {
    Mask m;
    std::istringstream in(text);
    std::string line;
    std::vector<std::string> rows;
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        if (line.empty()) continue;
        rows.push_back(line);
    }
    if (rows.empty()) throw config_error("mask: empty grid");
    m.rows = static_cast<int>(rows.size());
    m.cols = static_cast<int>(rows.front().size());
    m.cells.assign(static_cast<std::size_t>(m.rows) * m.cols, 0);
    for (int r = 0; r < m.rows; ++r) {
        if (static_cast<int>(rows[static_cast<std::size_t>(r)].size()) != m.cols)
            throw config_error("mask: ragged rows");
        for (int c = 0; c < m.cols; ++c) {
            const char ch = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
            if (ch == '#')
                m.cells[static_cast<std::size_t>(r) * m.cols + c] = 1;
            else if (ch != '.')
                throw config_error(std::string("mask: unexpected character '") + ch + "'");
        }
    }
    if (m.count() == 0) throw config_error("mask: no occupied cells");
    return m;
}

Mask load_mask(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open mask file: " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_mask(text);
}

StepState rasterize_target(const Mask& mask, std::span<const double> box_lo,
                           std::span<const double> box_hi, int n_max, int k) {
    if (mask.count() == 0) throw config_error("rasterize_target: empty mask");
    if (n_max < 1) throw config_error("rasterize_target: n_max must be >= 1");
    if (box_lo.size() != 2 || box_hi.size() != 2)
        throw config_error("rasterize_target: masks are 2-D");

    std::vector<double> pts;
    const double sx = (box_hi[0] - box_lo[0]) / mask.cols;
    const double sy = (box_hi[1] - box_lo[1]) / mask.rows;
    for (int r = 0; r < mask.rows; ++r)
        for (int c = 0; c < mask.cols; ++c)
            if (mask.at(r, c)) {
                pts.push_back(box_lo[0] + (c + 0.5) * sx);
                pts.push_back(box_hi[1] - (r + 0.5) * sy);  // text row 0 = top of the box
            }
    int count = static_cast<int>(pts.size() / 2);
    if (count > n_max) {
        std::vector<double> picked;
        const double stride = static_cast<double>(count) / n_max;
        for (int i = 0; i < n_max; ++i) {
            const int src = static_cast<int>(i * stride);
            picked.push_back(pts[static_cast<std::size_t>(src) * 2]);
            picked.push_back(pts[static_cast<std::size_t>(src) * 2 + 1]);
        }
        pts = std::move(picked);
        count = n_max;
    }

    StepState s;
    s.dims = 2;
    s.n = count;
    s.k = k;
    s.time_index = 0;
    s.positions = std::move(pts);
    s.vel_window.assign(static_cast<std::size_t>(k) * count * 2, 0.0);
    s.materials.assign(static_cast<std::size_t>(count), 0);
    return s;
}

std::string metric_report_json(const MetricReport& r) {
    nlohmann::json j;
    j["rollout_mse"] = r.rollout;
    nlohmann::json cons = nlohmann::json::object();
    for (const auto& [kk, v] : r.consistency) cons[std::to_string(kk)] = v;
    j["consistency"] = cons;
    j["ot"] = r.ot;
    j["mmd"] = r.mmd_value;
    j["timings"] = r.timings_sec;
    return j.dump(2);
}

}  // namespace rgns
