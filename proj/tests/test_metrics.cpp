#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <random>

#include "json.hpp"
#include "rgns/identity_model.hpp"
#include "rgns/metrics.hpp"
#include "test_support.hpp"

using namespace rgns;

namespace {

std::vector<double> random_points(int n, int dims, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> p(static_cast<std::size_t>(n) * dims);
    for (auto& v : p) v = u(rng);
    return p;
}

double brute_force_ot(const std::vector<double>& a, const std::vector<double>& b, int dims) {
    const int n = static_cast<int>(a.size()) / dims;
    std::vector<int> perm(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
    double best = std::numeric_limits<double>::infinity();
    do {
        double s = 0;
        for (int i = 0; i < n; ++i)
            for (int d = 0; d < dims; ++d) {
                const double diff =
                    a[static_cast<std::size_t>(i) * dims + d] -
                    b[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)]) * dims + d];
                s += diff * diff;
            }
        best = std::min(best, s / n);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

}  // namespace

TEST_CASE("rollout_mse: prediction equal to truth gives zero") {
    ToyGenConfig cfg;
    cfg.n_particles = 10;
    cfg.n_steps = 20;
    const auto traj = generate_trajectory(cfg);
    RolloutResult r;
    r.forward = true;
    r.start_index = 3;
    for (int t = 3; t <= 8; ++t) {
        StepState s;
        s.dims = 2;
        s.n = 10;
        s.k = 1;
        s.time_index = t;
        for (int i = 0; i < 10; ++i)
            for (int d = 0; d < 2; ++d) s.positions.push_back(traj.pos(t, i, d));
        r.frames.push_back(std::move(s));
    }
    CHECK(rollout_mse(r, traj) == 0.0);
}

TEST_CASE("rollout_mse: constant offset c gives c^2") {
    ToyGenConfig cfg;
    cfg.n_particles = 6;
    cfg.n_steps = 12;
    const auto traj = generate_trajectory(cfg);
    const double c = 0.03125;  // f32-exact so the offset survives storage
    RolloutResult r;
    r.forward = true;
    r.start_index = 2;
    for (int t = 2; t <= 6; ++t) {
        StepState s;
        s.dims = 2;
        s.n = 6;
        s.k = 1;
        s.time_index = t;
        for (int i = 0; i < 6; ++i)
            for (int d = 0; d < 2; ++d)
                s.positions.push_back(static_cast<double>(traj.pos(t, i, d)) + c);
        r.frames.push_back(std::move(s));
    }
    CHECK(rollout_mse(r, traj) == doctest::Approx(c * c).epsilon(1e-12));
}

TEST_CASE("rollout_mse matches a direct-summation oracle, both directions") {
    std::mt19937_64 rng(2);
    ToyGenConfig cfg;
    cfg.n_particles = 8;
    cfg.n_steps = 15;
    const auto traj = generate_trajectory(cfg);
    std::normal_distribution<double> jitter(0.0, 0.01);

    for (const bool forward : {true, false}) {
        RolloutResult r;
        r.forward = forward;
        r.start_index = 7;
        double manual = 0;
        std::size_t count = 0;
        for (int fidx = 0; fidx <= 4; ++fidx) {
            const int t = forward ? 7 + fidx : 7 - fidx;
            StepState s;
            s.dims = 2;
            s.n = 8;
            s.k = 1;
            s.time_index = t;
            for (int i = 0; i < 8; ++i)
                for (int d = 0; d < 2; ++d) {
                    const double p = static_cast<double>(traj.pos(t, i, d)) + jitter(rng);
                    s.positions.push_back(p);
                    if (fidx > 0) {
                        const double diff = p - static_cast<double>(traj.pos(t, i, d));
                        manual += diff * diff;
                        ++count;
                    }
                }
            r.frames.push_back(std::move(s));
        }
        CHECK(rollout_mse(r, traj) == doctest::Approx(manual / count).epsilon(1e-14));
    }
}

TEST_CASE("consistency_mse: identity pipeline on uniform motion is exactly zero") {
    ModelConfig cfg;
    cfg.dims = 2;
    cfg.k = 3;
    cfg.latent = 18;
    cfg.hidden = 8;
    cfg.layers = 2;
    cfg.radius = 0.2;
    cfg.dt = 0.002;
    const auto m = make_identity_model<double>(cfg);
    StepState s;
    s.dims = 2;
    s.n = 12;
    s.k = 3;
    s.time_index = 100;
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.35, 0.65);
    for (int i = 0; i < 12; ++i) {
        s.positions.push_back(u(rng));
        s.positions.push_back(u(rng));
    }
    for (int j = 0; j < 3 * 12; ++j) {
        s.vel_window.push_back(0.015);
        s.vel_window.push_back(-0.01);
    }
    s.materials.assign(12, 0);
    for (int K : {1, 10, 40}) CHECK(consistency_mse(m, s, K) == 0.0);
}

TEST_CASE("consistency_mse: K=1 collapses to the single-step residual") {
    ModelConfig cfg;
    cfg.dims = 2;
    cfg.k = 2;
    cfg.latent = 16;
    cfg.hidden = 8;
    cfg.layers = 1;
    cfg.radius = 0.25;
    cfg.dt = 0.01;
    auto m = init_model<double>(cfg, 5);
    m.norm.mean = {0.0, 0.0};
    m.norm.stdev = {0.1, 0.1};
    std::mt19937_64 rng(7);
    StepState s;
    s.dims = 2;
    s.n = 9;
    s.k = 2;
    s.time_index = 10;
    std::uniform_real_distribution<double> u(0.3, 0.7);
    std::normal_distribution<double> v(0.0, 0.05);
    for (int i = 0; i < 9; ++i) {
        s.positions.push_back(u(rng));
        s.positions.push_back(u(rng));
    }
    for (int j = 0; j < 2 * 9 * 2; ++j) s.vel_window.push_back(v(rng));
    s.materials.assign(9, 0);

    const double via_metric = consistency_mse(m, s, 1);
    const auto back = inverse_step(m, s);
    const auto again = forward_step(m, back);
    CHECK(via_metric == position_mse(again, s));
}

TEST_CASE("ot_distance: identical sets cost nothing") {
    std::mt19937_64 rng(11);
    const auto a = random_points(20, 2, rng);
    CHECK(ot_distance(a, a, 2) == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("ot_distance: two points pick the cheaper pairing") {
    // a0 near b1 and a1 near b0: crossed matching wins
    const std::vector<double> a = {0.0, 0.0, 1.0, 1.0};
    const std::vector<double> b = {0.9, 0.9, 0.1, 0.1};
    const double direct = (0.81 + 0.81 + 0.81 + 0.81) / 2;   // a0-b0, a1-b1
    const double crossed = (0.01 + 0.01 + 0.01 + 0.01) / 2;  // a0-b1, a1-b0
    const double got = ot_distance(a, b, 2);
    CHECK(got == doctest::Approx(crossed).epsilon(1e-12));
    CHECK(got < direct);
}

TEST_CASE("ot_distance: |A| = 6 equals the factorial oracle") {
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 30; ++trial) {
        const auto a = random_points(6, 2, rng);
        const auto b = random_points(6, 2, rng);
        CHECK(ot_distance(a, b, 2) == doctest::Approx(brute_force_ot(a, b, 2)).epsilon(1e-12));
    }
}

TEST_CASE("ot_distance: sizes up to 7 against brute force, 3-D included") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 25; ++trial) {
        const int n = 2 + trial % 6;
        const int dims = trial % 2 == 0 ? 2 : 3;
        const auto a = random_points(n, dims, rng);
        const auto b = random_points(n, dims, rng);
        CHECK(ot_distance(a, b, dims) ==
              doctest::Approx(brute_force_ot(a, b, dims)).epsilon(1e-12));
    }
}

TEST_CASE("ot_distance: entropic path approximates the exact cost") {
    // the regularized plan is only approximately feasible, so the value can
    // sit on either side of the exact optimum, but close
    std::mt19937_64 rng(19);
    const auto a = random_points(24, 2, rng);
    const auto b = random_points(24, 2, rng);
    const double exact = ot_distance(a, b, 2);
    const double entropic = ot_distance(a, b, 2, /*exact_limit=*/8);
    CHECK(std::abs(entropic - exact) <= 0.05 * exact + 1e-4);
}

TEST_CASE("ot_distance: mismatched sizes are rejected") {
    const std::vector<double> a = {0, 0, 1, 1};
    const std::vector<double> b = {0, 0};
    CHECK_THROWS_AS((void)ot_distance(a, b, 2), config_error);
}

TEST_CASE("mmd: identical multisets vanish") {
    std::mt19937_64 rng(23);
    const auto a = random_points(15, 2, rng);
    CHECK(std::abs(mmd(a, a, 2)) <= 1e-12);
}

TEST_CASE("mmd: two points per set match the hand-computed kernel sums") {
    const std::vector<double> a = {0.0, 0.0, 1.0, 0.0};
    const std::vector<double> b = {0.0, 1.0, 1.0, 1.0};
    const double bw = 0.7;
    const auto k = [&](double d2) { return std::exp(-d2 / (2.0 * bw * bw)); };
    // equal-size unbiased estimator over the off-diagonal pairs (0,1),(1,0):
    // within-set distances both 1; off-diagonal cross distances both 2
    const double expect = k(1.0) + k(1.0) - 2.0 * k(2.0);
    CHECK(mmd(a, b, 2, bw) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("mmd: rigid translation of both sets changes nothing") {
    std::mt19937_64 rng(29);
    auto a = random_points(12, 2, rng);
    auto b = random_points(14, 2, rng);
    const double base = mmd(a, b, 2, 0.5);
    for (std::size_t i = 0; i < a.size(); i += 2) a[i] += 0.25;
    for (std::size_t i = 0; i < b.size(); i += 2) b[i] += 0.25;
    CHECK(mmd(a, b, 2, 0.5) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("mmd: median-heuristic bandwidth is deterministic and finite") {
    std::mt19937_64 rng(31);
    const auto a = random_points(10, 2, rng);
    const auto b = random_points(10, 2, rng);
    const double v1 = mmd(a, b, 2);
    const double v2 = mmd(a, b, 2);
    CHECK(v1 == v2);
    CHECK(std::isfinite(v1));
}

TEST_CASE("mmd: singleton sets are rejected for the unbiased estimator") {
    const std::vector<double> a = {0.5, 0.5};
    const std::vector<double> b = {0.1, 0.1, 0.9, 0.9};
    CHECK_THROWS_AS((void)mmd(a, b, 2), config_error);
}

TEST_CASE("mask parsing: fixtures and failure modes") {
    const Mask m = parse_mask("..#\n#.#\n###\n");
    CHECK(m.rows == 3);
    CHECK(m.cols == 3);
    CHECK(m.count() == 6);
    CHECK(m.at(0, 2));
    CHECK(!m.at(0, 0));
    CHECK_THROWS_AS((void)parse_mask(""), config_error);
    CHECK_THROWS_AS((void)parse_mask("..\n...\n"), config_error);
    CHECK_THROWS_AS((void)parse_mask("..x\n...\n"), config_error);
    CHECK_THROWS_AS((void)parse_mask("...\n...\n"), config_error);  // nothing occupied
}

TEST_CASE("rasterize_target: full grid gives a regular lattice") {
    Mask m;
    m.rows = 3;
    m.cols = 4;
    m.cells.assign(12, 1);
    const std::vector<double> lo = {0, 0}, hi = {1, 1};
    const auto s = rasterize_target(m, lo, hi, 100, 2);
    REQUIRE(s.n == 12);
    CHECK(s.k == 2);
    for (double v : s.vel_window) CHECK(v == 0.0);
    // first particle: row 0 col 0 -> top-left cell center
    CHECK(s.positions[0] == doctest::Approx(0.125).epsilon(1e-12));
    CHECK(s.positions[1] == doctest::Approx(1.0 - 1.0 / 6.0).epsilon(1e-12));
}

TEST_CASE("rasterize_target: single occupied cell sits at its center") {
    const Mask m = parse_mask(".....\n..#..\n.....\n");
    const std::vector<double> lo = {0, 0}, hi = {1, 1};
    const auto s = rasterize_target(m, lo, hi, 100, 3);
    REQUIRE(s.n == 1);
    CHECK(s.positions[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(s.positions[1] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("rasterize_target: L mask audit against cell centers") {
    const std::string l_mask =
        "#....\n"
        "#....\n"
        "#....\n"
        "#....\n"
        "#####\n";
    const Mask m = parse_mask(l_mask);
    const std::vector<double> lo = {0, 0}, hi = {1, 1};
    const auto s = rasterize_target(m, lo, hi, 1000, 2);
    REQUIRE(s.n == m.count());
    REQUIRE(s.n == 9);
    int idx = 0;
    for (int r = 0; r < 5; ++r)
        for (int c = 0; c < 5; ++c) {
            if (!m.at(r, c)) continue;
            CHECK(s.positions[static_cast<std::size_t>(idx) * 2] ==
                  doctest::Approx((c + 0.5) / 5.0).epsilon(1e-12));
            CHECK(s.positions[static_cast<std::size_t>(idx) * 2 + 1] ==
                  doctest::Approx(1.0 - (r + 0.5) / 5.0).epsilon(1e-12));
            ++idx;
        }
}

TEST_CASE("rasterize_target: subsampling caps the particle count") {
    Mask m;
    m.rows = 10;
    m.cols = 10;
    m.cells.assign(100, 1);
    const std::vector<double> lo = {0, 0}, hi = {1, 1};
    const auto s = rasterize_target(m, lo, hi, 37, 2);
    CHECK(s.n == 37);
}

TEST_CASE("metric report serializes to the documented schema") {
    MetricReport r;
    r.rollout = 0.25;
    r.consistency[1] = 0.5;
    r.consistency[40] = 1.5;
    r.ot = 0.125;
    r.mmd_value = 0.0625;
    r.timings_sec["total"] = 2.0;
    const auto j = nlohmann::json::parse(metric_report_json(r));
    CHECK(j["rollout_mse"] == 0.25);
    CHECK(j["consistency"]["1"] == 0.5);
    CHECK(j["consistency"]["40"] == 1.5);
    CHECK(j["ot"] == 0.125);
    CHECK(j["mmd"] == 0.0625);
    CHECK(j["timings"]["total"] == 2.0);
}
