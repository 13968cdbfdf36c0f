#include "rgns/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "rgns/binio.hpp"

namespace rgns {

namespace {

constexpr char kMagic[4] = {'R', 'G', 'N', 'S'};
constexpr std::uint32_t kVersion = 1;

// Rounding double -> f32 can nudge a boundary position just outside the box;
// step the float back inside.
float snap_into_box(double p, double lo, double hi) {
    float f = static_cast<float>(p);
    while (static_cast<double>(f) < lo) f = std::nextafter(f, std::numeric_limits<float>::max());
    while (static_cast<double>(f) > hi) f = std::nextafter(f, std::numeric_limits<float>::lowest());
    return f;
}

}  // namespace

void Trajectory::validate(bool strict_dims) const {
    if (strict_dims && dims != 2 && dims != 3) throw config_error("trajectory: dims must be 2 or 3");
    if (dims < 1) throw config_error("trajectory: dims must be >= 1");
    if (n_particles < 1 || n_steps < 1) throw config_error("trajectory: empty");
    if (!(dt > 0)) throw config_error("trajectory: dt must be > 0");
    if (!(radius > 0)) throw config_error("trajectory: radius must be > 0");
    if (static_cast<int>(box_lo.size()) != dims || static_cast<int>(box_hi.size()) != dims)
        throw config_error("trajectory: box bounds must have one entry per axis");
    if (static_cast<int>(materials.size()) != n_particles)
        throw config_error("trajectory: materials length must equal particle count");
    if (positions.size() != static_cast<std::size_t>(n_steps) * n_particles * dims)
        throw config_error("trajectory: positions size mismatch");
    for (int d = 0; d < dims; ++d)
        if (!(box_lo[d] < box_hi[d])) throw config_error("trajectory: box_lo must be < box_hi");
    for (int t = 0; t < n_steps; ++t)
        for (int i = 0; i < n_particles; ++i)
            for (int d = 0; d < dims; ++d) {
                const double p = pos(t, i, d);
                if (!std::isfinite(p) || p < box_lo[d] || p > box_hi[d])
                    throw config_error("trajectory: position outside box at step " + std::to_string(t));
            }
}

void ToyGenConfig::validate() const {
    if (dims != 2 && dims != 3) throw config_error("toy gen: dims must be 2 or 3");
    if (n_particles < 1 || n_steps < 1) throw config_error("toy gen: empty configuration");
    if (!(dt > 0)) throw config_error("toy gen: dt must be > 0");
    if (!(damping >= 0 && damping < 1)) throw config_error("toy gen: damping must be in [0,1)");
    if (!(restitution >= 0 && restitution < 1)) throw config_error("toy gen: restitution must be in [0,1)");
    if (!(radius > 0)) throw config_error("toy gen: connectivity radius must be > 0");
    if (repulsion_radius < 0 || repulsion_stiffness < 0)
        throw config_error("toy gen: repulsion parameters must be >= 0");
    if (static_cast<int>(box_lo.size()) != dims || static_cast<int>(box_hi.size()) != dims ||
        static_cast<int>(gravity.size()) != dims || static_cast<int>(spawn_lo.size()) != dims ||
        static_cast<int>(spawn_hi.size()) != dims)
        throw config_error("toy gen: per-axis fields must have one entry per axis");
    for (int d = 0; d < dims; ++d) {
        if (!(box_lo[d] < box_hi[d])) throw config_error("toy gen: box_lo must be < box_hi");
        if (!(spawn_lo[d] >= 0 && spawn_lo[d] < spawn_hi[d] && spawn_hi[d] <= 1))
            throw config_error("toy gen: spawn fractions must satisfy 0 <= lo < hi <= 1");
    }
}

Trajectory generate_trajectory(const ToyGenConfig& cfg) {
    cfg.validate();
    const int n = cfg.n_particles, D = cfg.dims, T = cfg.n_steps;
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    // Spawn on a jittered lattice inside the spawn block.
    std::vector<double> span(D), slo(D), shi(D);
    for (int d = 0; d < D; ++d) {
        span[d] = cfg.box_hi[d] - cfg.box_lo[d];
        slo[d] = cfg.box_lo[d] + cfg.spawn_lo[d] * span[d];
        shi[d] = cfg.box_lo[d] + cfg.spawn_hi[d] * span[d];
    }
    int per_axis = 1;
    while (std::pow(per_axis, D) < n) ++per_axis;
    std::vector<double> p(static_cast<std::size_t>(n) * D), v(static_cast<std::size_t>(n) * D);
    for (int i = 0; i < n; ++i) {
        int cell = i;
        for (int d = 0; d < D; ++d) {
            const int idx = cell % per_axis;
            cell /= per_axis;
            const double step = (shi[d] - slo[d]) / per_axis;
            const double jitter = (unit(rng) - 0.5) * 0.3 * step;
            p[static_cast<std::size_t>(i) * D + d] =
                std::clamp(slo[d] + (idx + 0.5) * step + jitter, cfg.box_lo[d], cfg.box_hi[d]);
        }
        for (int d = 0; d < D; ++d)
            v[static_cast<std::size_t>(i) * D + d] = (unit(rng) * 2.0 - 1.0) * cfg.init_speed;
    }

    Trajectory traj;
    traj.dims = D;
    traj.n_particles = n;
    traj.n_steps = T;
    traj.dt = cfg.dt;
    traj.radius = cfg.radius;
    traj.box_lo = cfg.box_lo;
    traj.box_hi = cfg.box_hi;
    traj.materials.assign(static_cast<std::size_t>(n), 0);
    traj.positions.resize(static_cast<std::size_t>(T) * n * D);

    std::vector<double> acc(static_cast<std::size_t>(n) * D);
    const double rr = cfg.repulsion_radius;
    for (int t = 0; t < T; ++t) {
        for (int i = 0; i < n; ++i)
            for (int d = 0; d < D; ++d)
                traj.pos(t, i, d) = snap_into_box(p[static_cast<std::size_t>(i) * D + d],
                                                  cfg.box_lo[d], cfg.box_hi[d]);
        if (t + 1 == T) break;

        std::fill(acc.begin(), acc.end(), 0.0);
        if (cfg.repulsion_stiffness > 0 && rr > 0) {
            for (int i = 0; i < n; ++i) {
                for (int j = i + 1; j < n; ++j) {
                    double d2 = 0;
                    for (int d = 0; d < D; ++d) {
                        const double dx = p[static_cast<std::size_t>(i) * D + d] -
                                          p[static_cast<std::size_t>(j) * D + d];
                        d2 += dx * dx;
                    }
                    if (d2 >= rr * rr || d2 == 0.0) continue;
                    const double dist = std::sqrt(d2);
                    const double mag = cfg.repulsion_stiffness * (1.0 - dist / rr) / dist;
                    for (int d = 0; d < D; ++d) {
                        const double fx = mag * (p[static_cast<std::size_t>(i) * D + d] -
                                                 p[static_cast<std::size_t>(j) * D + d]);
                        acc[static_cast<std::size_t>(i) * D + d] += fx;
                        acc[static_cast<std::size_t>(j) * D + d] -= fx;
                    }
                }
            }
        }

        for (int i = 0; i < n; ++i) {
            for (int d = 0; d < D; ++d) {
                const std::size_t id = static_cast<std::size_t>(i) * D + d;
                double vn = (v[id] + cfg.dt * (cfg.gravity[d] + acc[id])) * (1.0 - cfg.damping);
                double pn = p[id] + cfg.dt * vn;
                if (pn < cfg.box_lo[d]) {
                    pn = cfg.box_lo[d];
                    vn = -cfg.restitution * vn;
                } else if (pn > cfg.box_hi[d]) {
                    pn = cfg.box_hi[d];
                    vn = -cfg.restitution * vn;
                }
                if (!std::isfinite(pn) || !std::isfinite(vn))
                    throw numeric_error("toy gen: integration diverged at step " + std::to_string(t + 1));
                p[id] = pn;
                v[id] = vn;
            }
        }
    }
    return traj;
}

std::vector<double> compute_velocities(const Trajectory& traj) {
    if (traj.n_steps < 2) throw config_error("compute_velocities: need at least 2 frames");
    const int n = traj.n_particles, D = traj.dims;
    std::vector<double> vel(static_cast<std::size_t>(traj.n_steps - 1) * n * D);
    for (int t = 1; t < traj.n_steps; ++t)
        for (int i = 0; i < n; ++i)
            for (int d = 0; d < D; ++d)
                vel[(static_cast<std::size_t>(t - 1) * n + i) * D + d] =
                    (static_cast<double>(traj.pos(t, i, d)) - static_cast<double>(traj.pos(t - 1, i, d))) /
                    traj.dt;
    return vel;
}

void write_trajectory(const Trajectory& traj, const std::filesystem::path& path) {
    traj.validate();
    ByteWriter w;
    w.raw(kMagic, 4);
    w.u32(kVersion);
    w.u32(static_cast<std::uint32_t>(traj.dims));
    w.u32(static_cast<std::uint32_t>(traj.n_particles));
    w.u32(static_cast<std::uint32_t>(traj.n_steps));
    w.f64(traj.dt);
    w.f64(traj.radius);
    for (int d = 0; d < traj.dims; ++d) w.f64(traj.box_lo[d]);
    for (int d = 0; d < traj.dims; ++d) w.f64(traj.box_hi[d]);
    for (auto m : traj.materials) w.u8(m);
    for (float p : traj.positions) w.f32(p);
    w.to_file(path);
}

Trajectory read_trajectory(const std::filesystem::path& path) {
    ByteReader r = ByteReader::from_file(path);
    char magic[4];
    r.raw(magic, 4, "magic");
    if (std::memcmp(magic, kMagic, 4) != 0)
        throw io_error("trajectory: magic mismatch at byte offset 0 in " + path.string());
    const std::uint32_t version = r.u32("version");
    if (version != kVersion)
        throw io_error("trajectory: unsupported format version " + std::to_string(version));
    Trajectory traj;
    traj.dims = static_cast<int>(r.u32("dims"));
    traj.n_particles = static_cast<int>(r.u32("particle count"));
    traj.n_steps = static_cast<int>(r.u32("step count"));
    traj.dt = r.f64("dt");
    traj.radius = r.f64("radius");
    if (traj.dims != 2 && traj.dims != 3) throw io_error("trajectory: dims must be 2 or 3");
    traj.box_lo.resize(traj.dims);
    traj.box_hi.resize(traj.dims);
    for (int d = 0; d < traj.dims; ++d) traj.box_lo[d] = r.f64("box_lo");
    for (int d = 0; d < traj.dims; ++d) traj.box_hi[d] = r.f64("box_hi");
    traj.materials.resize(static_cast<std::size_t>(traj.n_particles));
    for (auto& m : traj.materials) m = r.u8("materials");
    traj.positions.resize(static_cast<std::size_t>(traj.n_steps) * traj.n_particles * traj.dims);
    for (auto& p : traj.positions) p = r.f32("positions");
    if (!r.exhausted())
        throw io_error("trajectory: trailing bytes at offset " + std::to_string(r.offset()));
    traj.validate();
    return traj;
}

StepState state_from_trajectory(const Trajectory& traj, int t, int k) {
    if (k < 1) throw config_error("state_from_trajectory: k must be >= 1");
    if (t < k || t >= traj.n_steps)
        throw config_error("state_from_trajectory: insufficient history at t=" + std::to_string(t) +
                           " (need t >= k=" + std::to_string(k) + ")");
    const int n = traj.n_particles, D = traj.dims;
    StepState s;
    s.dims = D;
    s.n = n;
    s.k = k;
    s.time_index = t;
    s.materials = traj.materials;
    s.positions.resize(static_cast<std::size_t>(n) * D);
    for (int i = 0; i < n; ++i)
        for (int d = 0; d < D; ++d) s.positions[static_cast<std::size_t>(i) * D + d] = traj.pos(t, i, d);
    s.vel_window.resize(static_cast<std::size_t>(k) * n * D);
    for (int slot = 0; slot < k; ++slot) {
        const int step = t - k + 1 + slot;  // velocity v^step
        for (int i = 0; i < n; ++i)
            for (int d = 0; d < D; ++d)
                s.vel_window[(static_cast<std::size_t>(slot) * n + i) * D + d] =
                    (static_cast<double>(traj.pos(step, i, d)) -
                     static_cast<double>(traj.pos(step - 1, i, d))) /
                    traj.dt;
    }
    return s;
}

namespace {

void write_csv_header(std::ofstream& out, int dims) {
    out << "step,particle,x,y";
    if (dims == 3) out << ",z";
    out << "\n";
}

}  // namespace

void write_frames_csv(const std::filesystem::path& path, const Trajectory& traj) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw io_error("cannot open for writing: " + path.string());
    out.precision(9);
    write_csv_header(out, traj.dims);
    for (int t = 0; t < traj.n_steps; ++t)
        for (int i = 0; i < traj.n_particles; ++i) {
            out << t << ',' << i;
            for (int d = 0; d < traj.dims; ++d) out << ',' << traj.pos(t, i, d);
            out << "\n";
        }
}

void write_frames_csv(const std::filesystem::path& path, const std::vector<StepState>& frames) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw io_error("cannot open for writing: " + path.string());
    out.precision(17);
    if (frames.empty()) throw config_error("write_frames_csv: no frames");
    write_csv_header(out, frames.front().dims);
    for (std::size_t t = 0; t < frames.size(); ++t)
        for (int i = 0; i < frames[t].n; ++i) {
            out << t << ',' << i;
            for (int d = 0; d < frames[t].dims; ++d) out << ',' << frames[t].pos(i)[d];
            out << "\n";
        }
}

}  // namespace rgns
