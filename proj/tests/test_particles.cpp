#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "rgns/binio.hpp"
#include "rgns/trajectory.hpp"
#include "test_support.hpp"

using namespace rgns;
namespace fs = std::filesystem;

namespace {

fs::path tmp_file(const char* name) {
    return fs::temp_directory_path() / name;
}

ToyGenConfig small_config() {
    ToyGenConfig cfg;
    cfg.n_particles = 30;
    cfg.n_steps = 60;
    return cfg;
}

double kinetic_energy(const Trajectory& traj, const std::vector<double>& vel, int step) {
    // velocities index step-1 holds v^step
    double e = 0;
    for (int i = 0; i < traj.n_particles; ++i)
        for (int d = 0; d < traj.dims; ++d) {
            const double v = vel[(static_cast<std::size_t>(step - 1) * traj.n_particles + i) *
                                     traj.dims + d];
            e += 0.5 * v * v;
        }
    return e;
}

}  // namespace

TEST_CASE("generator: single particle resting on the floor stays fixed") {
    ToyGenConfig cfg;
    cfg.n_particles = 1;
    cfg.n_steps = 50;
    cfg.repulsion_stiffness = 0;
    cfg.init_speed = 0;
    cfg.spawn_lo = {0.5, 0.0};
    cfg.spawn_hi = {0.500001, 1e-9};  // pinned to the floor
    const auto traj = generate_trajectory(cfg);
    // the spawn jitter is sub-nanometre; gravity settles it onto the wall at
    // frame 1 and it must stay put from then on
    CHECK(traj.pos(1, 0, 1) == 0.0f);
    for (int t = 1; t < traj.n_steps; ++t) {
        CHECK(traj.pos(t, 0, 1) == traj.pos(1, 0, 1));
        CHECK(traj.pos(t, 0, 0) == traj.pos(0, 0, 0));
    }
}

TEST_CASE("generator: free fall matches the discrete recurrence oracle") {
    ToyGenConfig cfg;
    cfg.n_particles = 1;
    cfg.n_steps = 40;
    cfg.damping = 0;
    cfg.repulsion_stiffness = 0;
    cfg.init_speed = 0;
    cfg.restitution = 0;
    cfg.spawn_lo = {0.5, 0.9};
    cfg.spawn_hi = {0.500001, 0.900001};
    const auto traj = generate_trajectory(cfg);

    // standalone recurrence: v += dt*g; p += dt*v, until first floor contact
    double p = traj.pos(0, 0, 1), v = 0.0;
    for (int t = 1; t < traj.n_steps; ++t) {
        v += cfg.dt * cfg.gravity[1];
        p += cfg.dt * v;
        if (p < cfg.box_lo[1]) break;
        CHECK(static_cast<double>(traj.pos(t, 0, 1)) == doctest::Approx(p).epsilon(1e-6));
    }
}

TEST_CASE("generator: dissipation drains kinetic energy") {
    // gravity-free, non-overlapping spawn, damping only: kinetic energy is
    // non-increasing every window and strictly lower at the end
    ToyGenConfig cfg = small_config();
    cfg.gravity = {0.0, 0.0};
    cfg.damping = 0.02;
    cfg.repulsion_stiffness = 0;
    cfg.init_speed = 0.8;
    const auto traj = generate_trajectory(cfg);
    const auto vel = compute_velocities(traj);
    const double e_first = kinetic_energy(traj, vel, 1);
    const double e_last = kinetic_energy(traj, vel, traj.n_steps - 1);
    CHECK(e_last < e_first);
    for (int t = 1; t + 10 < traj.n_steps; ++t)
        CHECK(kinetic_energy(traj, vel, t + 10) <= kinetic_energy(traj, vel, t) + 1e-12);
}

TEST_CASE("generator: default config dissipates total energy") {
    // kinetic + gravitational + pair-repulsion potential; gravity trades
    // potential for kinetic, so only the total is monotone-ish
    ToyGenConfig cfg = small_config();
    cfg.n_steps = 400;  // long enough for the splash to settle
    const auto traj = generate_trajectory(cfg);
    const auto vel = compute_velocities(traj);

    const auto total_energy = [&](int step) {
        double e = kinetic_energy(traj, vel, std::max(step, 1));
        for (int i = 0; i < traj.n_particles; ++i) {
            e += -cfg.gravity[1] * (static_cast<double>(traj.pos(step, i, 1)) - cfg.box_lo[1]);
            for (int j = i + 1; j < traj.n_particles; ++j) {
                double d2 = 0;
                for (int d = 0; d < 2; ++d) {
                    const double dx = static_cast<double>(traj.pos(step, i, d)) -
                                      static_cast<double>(traj.pos(step, j, d));
                    d2 += dx * dx;
                }
                const double dist = std::sqrt(d2);
                if (dist < cfg.repulsion_radius)
                    e += cfg.repulsion_stiffness * (cfg.repulsion_radius - dist) *
                         (cfg.repulsion_radius - dist) / (2.0 * cfg.repulsion_radius);
            }
        }
        return e;
    };
    CHECK(total_energy(traj.n_steps - 1) < total_energy(1));
}

TEST_CASE("generator: determinism and frames inside the box") {
    const auto a = generate_trajectory(small_config());
    const auto b = generate_trajectory(small_config());
    CHECK(a.positions == b.positions);
    CHECK_NOTHROW(a.validate());
    ToyGenConfig other = small_config();
    other.seed = 2;
    const auto c = generate_trajectory(other);
    CHECK(a.positions != c.positions);
}

TEST_CASE("compute_velocities: constant positions give zero") {
    Trajectory traj;
    traj.dims = 2;
    traj.n_particles = 3;
    traj.n_steps = 4;
    traj.dt = 0.1;
    traj.radius = 0.1;
    traj.box_lo = {0, 0};
    traj.box_hi = {1, 1};
    traj.materials.assign(3, 0);
    traj.positions.assign(4 * 3 * 2, 0.25f);
    const auto vel = compute_velocities(traj);
    for (double v : vel) CHECK(v == 0.0);
}

TEST_CASE("compute_velocities: uniform motion gives the constant rate") {
    Trajectory traj;
    traj.dims = 2;
    traj.n_particles = 1;
    traj.n_steps = 5;
    traj.dt = 0.5;
    traj.radius = 0.1;
    traj.box_lo = {0, 0};
    traj.box_hi = {10, 10};
    traj.materials.assign(1, 0);
    for (int t = 0; t < 5; ++t) {
        traj.positions.push_back(0.25f * t);  // c = (0.25, 0.5) per frame
        traj.positions.push_back(0.5f * t);
    }
    const auto vel = compute_velocities(traj);
    for (int t = 0; t < 4; ++t) {
        CHECK(vel[static_cast<std::size_t>(t) * 2] == doctest::Approx(0.5).epsilon(1e-7));
        CHECK(vel[static_cast<std::size_t>(t) * 2 + 1] == doctest::Approx(1.0).epsilon(1e-7));
    }
}

TEST_CASE("compute_velocities: random frames match elementwise differencing") {
    const auto traj = generate_trajectory(small_config());
    const auto vel = compute_velocities(traj);
    std::mt19937_64 rng(4);
    for (int probe = 0; probe < 50; ++probe) {
        const int t = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(traj.n_steps - 1));
        const int i = static_cast<int>(rng() % static_cast<std::uint64_t>(traj.n_particles));
        const int d = static_cast<int>(rng() % 2);
        const double expect = (static_cast<double>(traj.pos(t, i, d)) -
                               static_cast<double>(traj.pos(t - 1, i, d))) /
                              traj.dt;
        CHECK(vel[(static_cast<std::size_t>(t - 1) * traj.n_particles + i) * 2 + d] == expect);
    }
}

TEST_CASE("compute_velocities: single frame is insufficient") {
    Trajectory traj;
    traj.dims = 2;
    traj.n_particles = 1;
    traj.n_steps = 1;
    traj.dt = 0.1;
    traj.radius = 0.1;
    traj.box_lo = {0, 0};
    traj.box_hi = {1, 1};
    traj.materials.assign(1, 0);
    traj.positions.assign(2, 0.5f);
    CHECK_THROWS_AS((void)compute_velocities(traj), config_error);
}

TEST_CASE("trajectory file roundtrip is bit-identical") {
    const auto traj = generate_trajectory(small_config());
    const auto path = tmp_file("rgns_test_roundtrip.rgns");
    write_trajectory(traj, path);
    const auto back = read_trajectory(path);
    CHECK(back.dims == traj.dims);
    CHECK(back.n_particles == traj.n_particles);
    CHECK(back.n_steps == traj.n_steps);
    CHECK(back.dt == traj.dt);
    CHECK(back.radius == traj.radius);
    CHECK(back.box_lo == traj.box_lo);
    CHECK(back.box_hi == traj.box_hi);
    CHECK(back.materials == traj.materials);
    CHECK(back.positions == traj.positions);
    fs::remove(path);
}

TEST_CASE("trajectory file: corrupted magic is rejected") {
    const auto traj = generate_trajectory(small_config());
    const auto path = tmp_file("rgns_test_magic.rgns");
    write_trajectory(traj, path);
    {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(0);
        f.put('X');
    }
    CHECK_THROWS_WITH_AS((void)read_trajectory(path), doctest::Contains("magic mismatch"),
                         io_error);
    fs::remove(path);
}

TEST_CASE("trajectory file: truncation reports the byte offset") {
    const auto traj = generate_trajectory(small_config());
    const auto path = tmp_file("rgns_test_trunc.rgns");
    write_trajectory(traj, path);
    const auto full = fs::file_size(path);
    fs::resize_file(path, full - 7);
    CHECK_THROWS_WITH_AS((void)read_trajectory(path), doctest::Contains("byte offset"), io_error);
    fs::remove(path);
}

TEST_CASE("trajectory file: unsupported version is rejected") {
    const auto traj = generate_trajectory(small_config());
    const auto path = tmp_file("rgns_test_version.rgns");
    write_trajectory(traj, path);
    {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(4);
        f.put(static_cast<char>(9));
    }
    CHECK_THROWS_WITH_AS((void)read_trajectory(path), doctest::Contains("version"), io_error);
    fs::remove(path);
}

TEST_CASE("hand-assembled minimal file decodes to known values") {
    // N=1, T=2, D=2, dt=0.5, radius=0.25, box [0,1]^2, material 3,
    // positions (0.25, 0.5) then (0.75, 1.0)
    ByteWriter w;
    w.raw("RGNS", 4);
    w.u32(1);
    w.u32(2);  // D
    w.u32(1);  // N
    w.u32(2);  // T
    w.f64(0.5);
    w.f64(0.25);
    w.f64(0.0);
    w.f64(0.0);
    w.f64(1.0);
    w.f64(1.0);
    w.u8(3);
    w.f32(0.25f);
    w.f32(0.5f);
    w.f32(0.75f);
    w.f32(1.0f);
    const auto path = tmp_file("rgns_test_fixture.rgns");
    w.to_file(path);

    const auto traj = read_trajectory(path);
    CHECK(traj.dims == 2);
    CHECK(traj.n_particles == 1);
    CHECK(traj.n_steps == 2);
    CHECK(traj.dt == 0.5);
    CHECK(traj.radius == 0.25);
    CHECK(traj.materials[0] == 3);
    CHECK(traj.pos(0, 0, 0) == 0.25f);
    CHECK(traj.pos(0, 0, 1) == 0.5f);
    CHECK(traj.pos(1, 0, 0) == 0.75f);
    CHECK(traj.pos(1, 0, 1) == 1.0f);
    fs::remove(path);
}

TEST_CASE("state_from_trajectory: constant trajectory gives a zero window") {
    Trajectory traj;
    traj.dims = 2;
    traj.n_particles = 2;
    traj.n_steps = 6;
    traj.dt = 0.1;
    traj.radius = 0.1;
    traj.box_lo = {0, 0};
    traj.box_hi = {1, 1};
    traj.materials.assign(2, 0);
    traj.positions.assign(6 * 2 * 2, 0.5f);
    const auto s = state_from_trajectory(traj, 4, 3);
    CHECK(s.k == 3);
    CHECK(s.time_index == 4);
    for (double v : s.vel_window) CHECK(v == 0.0);
    for (double p : s.positions) CHECK(p == 0.5);
}

TEST_CASE("state_from_trajectory: window ordering matches the differencing oracle") {
    const auto traj = generate_trajectory(small_config());
    const auto vel = compute_velocities(traj);
    const int k = 4;
    const auto s = state_from_trajectory(traj, k, k);  // t = k boundary
    for (int slot = 0; slot < k; ++slot) {
        const int step = k - (k - 1) + slot;  // oldest = v^1
        for (int i = 0; i < traj.n_particles; ++i)
            for (int d = 0; d < 2; ++d)
                CHECK(s.vel(slot, i)[d] ==
                      vel[(static_cast<std::size_t>(step - 1) * traj.n_particles + i) * 2 + d]);
    }
}

TEST_CASE("state_from_trajectory: insufficient history") {
    const auto traj = generate_trajectory(small_config());
    CHECK_THROWS_AS((void)state_from_trajectory(traj, 2, 3), config_error);
    CHECK_NOTHROW((void)state_from_trajectory(traj, 3, 3));
}

TEST_CASE("frame CSV export uses the documented header") {
    const auto traj = generate_trajectory(small_config());
    const auto path = tmp_file("rgns_test_frames.csv");
    write_frames_csv(path, traj);
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header == "step,particle,x,y");
    std::string first;
    std::getline(in, first);
    CHECK(first.substr(0, 4) == "0,0,");
    // row count = 1 header + T*N
    std::size_t lines = 2;
    std::string line;
    while (std::getline(in, line)) ++lines;
    CHECK(lines == 1 + static_cast<std::size_t>(traj.n_steps) * traj.n_particles);
    fs::remove(path);
}
