#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "rgns/error.hpp"

namespace rgns {

// Ground-truth record: particle positions over time plus static attributes,
// box geometry and timestep. Positions are stored as f32 to match the file
// format; all state-space arithmetic happens in double.
struct Trajectory {
    int dims = 0;         // 2 or 3 on disk; in-memory pipelines also accept 1
    int n_particles = 0;
    int n_steps = 0;
    double dt = 0.0;
    double radius = 0.0;  // connectivity radius the data was generated for
    std::vector<double> box_lo, box_hi;   // per axis
    std::vector<std::uint8_t> materials;  // per particle
    std::vector<float> positions;         // n_steps * n_particles * dims, particle-major per frame

    float pos(int t, int i, int d) const {
        return positions[(static_cast<std::size_t>(t) * n_particles + i) * dims + d];
    }
    float& pos(int t, int i, int d) {
        return positions[(static_cast<std::size_t>(t) * n_particles + i) * dims + d];
    }

    void validate(bool strict_dims = true) const;
};

// Working state at one time step: positions plus the length-k velocity
// history window, ordered oldest to newest.
struct StepState {
    int dims = 0;
    int n = 0;
    int k = 0;
    std::vector<double> positions;    // n * dims
    std::vector<double> vel_window;   // k * n * dims, oldest -> newest
    std::vector<std::uint8_t> materials;
    long time_index = 0;

    double* pos(int i) { return positions.data() + static_cast<std::size_t>(i) * dims; }
    const double* pos(int i) const { return positions.data() + static_cast<std::size_t>(i) * dims; }
    double* vel(int slot, int i) {
        return vel_window.data() + (static_cast<std::size_t>(slot) * n + i) * dims;
    }
    const double* vel(int slot, int i) const {
        return vel_window.data() + (static_cast<std::size_t>(slot) * n + i) * dims;
    }
};

// Synthetic dissipative dynamics: gravity + short-range pairwise repulsion +
// per-step velocity damping + inelastic walls, integrated symplectic-Euler.
struct ToyGenConfig {
    int dims = 2;
    int n_particles = 150;
    int n_steps = 200;
    double dt = 0.005;
    std::vector<double> box_lo = {0.0, 0.0};
    std::vector<double> box_hi = {1.0, 1.0};
    std::vector<double> gravity = {0.0, -9.8};
    double damping = 0.01;               // velocity decay per step, [0,1)
    double repulsion_stiffness = 60.0;   // peak repulsive acceleration
    double repulsion_radius = 0.045;
    double restitution = 0.3;            // wall bounce coefficient, [0,1)
    double radius = 0.1;                 // connectivity radius recorded in the file
    std::vector<double> spawn_lo = {0.08, 0.35};  // spawn block, fractions of the box
    std::vector<double> spawn_hi = {0.50, 0.95};
    double init_speed = 0.3;             // uniform random initial velocity scale
    std::uint64_t seed = 1;

    void validate() const;
};

Trajectory generate_trajectory(const ToyGenConfig& cfg);

// Backward differences v^t = (p^t - p^{t-1}) / dt, (T-1) * N * D,
// index s-1 holds v^s.
std::vector<double> compute_velocities(const Trajectory& traj);

// Bit-exact binary format, magic "RGNS", version 1, little-endian.
void write_trajectory(const Trajectory& traj, const std::filesystem::path& path);
Trajectory read_trajectory(const std::filesystem::path& path);

// State at frame t (0-based) with the k most recent velocities; requires t >= k.
StepState state_from_trajectory(const Trajectory& traj, int t, int k);

// CSV frame export, header "step,particle,x,y[,z]".
void write_frames_csv(const std::filesystem::path& path, const Trajectory& traj);
void write_frames_csv(const std::filesystem::path& path, const std::vector<StepState>& frames);

}  // namespace rgns
