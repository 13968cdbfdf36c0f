#pragma once

#include <map>
#include <string>

#include "rgns/simulator.hpp"

namespace rgns {

// Mean squared position error between a predicted rollout and the matching
// ground-truth frames (the given frame 0 is excluded).
double rollout_mse(const RolloutResult& pred, const Trajectory& truth);

// Invert K steps, roll forward K steps, compare final positions with the
// given state. The paper-preferred measure of forward-inverse alignment.
template <std::floating_point T>
double consistency_mse(const ModelParams<T>& m, const StepState& state, int steps) {
    if (steps < 1) throw config_error("consistency_mse: steps must be >= 1");
    RolloutResult back = inverse_rollout(m, state, steps);
    RolloutResult again = rollout(m, back.frames.back(), steps);
    return position_mse(again.frames.back(), state);
}

// Minimum mean squared-Euclidean matching cost between two equal-size point
// sets. Exact assignment (shortest augmenting path) up to `exact_limit`
// points, entropic regularization above it (reg 1e-3, 1000+ iterations).
double ot_distance(std::span<const double> a, std::span<const double> b, int dims,
                   int exact_limit = 512);

// Unbiased squared maximum mean discrepancy, Gaussian kernel
// exp(-|x-y|^2 / (2 bw^2)); bandwidth <= 0 selects the median pairwise
// distance of the pooled sets.
double mmd(std::span<const double> a, std::span<const double> b, int dims, double bandwidth = 0.0);

// Plain-text occupancy grid, rows of '.' and '#'.
struct Mask {
    int rows = 0, cols = 0;
    std::vector<std::uint8_t> cells;  // row-major, 1 = occupied

    bool at(int r, int c) const { return cells[static_cast<std::size_t>(r) * cols + c] != 0; }
    int count() const;
};

Mask load_mask(const std::filesystem::path& path);
Mask parse_mask(const std::string& text);

// One particle at each occupied cell center (top text row = top of the box),
// zero velocity window, default material. Uniform stride subsampling keeps
// at most n_max particles.
StepState rasterize_target(const Mask& mask, std::span<const double> box_lo,
                           std::span<const double> box_hi, int n_max, int k);

struct MetricReport {
    double rollout = 0.0;
    std::map<int, double> consistency;  // K -> consistency MSE
    double ot = 0.0;
    double mmd_value = 0.0;
    std::map<std::string, double> timings_sec;
};

std::string metric_report_json(const MetricReport& r);

}  // namespace rgns
