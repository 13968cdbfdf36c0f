#pragma once

#include "rgns/model.hpp"

namespace rgns {

// Position updates go through these two helpers everywhere (simulator and
// tests alike) so the forward and inverse identities are checked against the
// exact arithmetic that produced them.
inline double advance_position(double p, double dt, double v) {
    const double inc = dt * v;
    return p + inc;
}
inline double recover_position(double p_next, double dt, double v) {
    const double inc = dt * v;
    return p_next - inc;
}

template <std::floating_point T>
struct PipelineTrace {
    RadiusGraph graph;
    Mat<T> chi;
    MlpCache<T> edge_enc_cache;
    MlpCache<T> codec_enc_cache, codec_dec_cache;  // mlp codec only
    StackState<T> s_in, s_out;
    Mat<T> decoded;
    bool inverse = false;
};

template <std::floating_point T>
Mat<T> codec_encode(const ModelParams<T>& m, const Mat<T>& chi,
                    std::type_identity_t<PipelineTrace<T>*> tr) {
    if (m.codec.mode == CodecMode::ilp) return ilp_encode(m.codec.ilp, chi);
    return mlp_forward(m.codec.enc, chi, tr ? &tr->codec_enc_cache : nullptr);
}

template <std::floating_point T>
Mat<T> codec_decode(const ModelParams<T>& m, const Mat<T>& latent,
                    std::type_identity_t<PipelineTrace<T>*> tr) {
    if (m.codec.mode == CodecMode::ilp) return ilp_decode(m.codec.ilp, latent);
    return mlp_forward(m.codec.dec, latent, tr ? &tr->codec_dec_cache : nullptr);
}

// Encode -> propagate -> decode on the given conditioning positions (the
// shared positions p^t of the transition; the forward and inverse
// applications of one step build the identical graph). Returns the decoded
// physical matrix, rows = nodes.
template <std::floating_point T>
Mat<T> latent_pass(const ModelParams<T>& m, const StepState& s,
                   std::span<const double> cond_positions, bool inverse,
                   std::type_identity_t<PipelineTrace<T>*> tr = nullptr) {
    const auto& cfg = m.cfg;
    if (s.dims != cfg.dims || s.k != cfg.k)
        throw config_error("latent_pass: state does not match model config");

    RadiusGraph graph = build_radius_graph(cond_positions, s.n, s.dims, cfg.radius,
                                           cfg.box_lo, cfg.box_hi);
    edge_features(graph, cond_positions, cfg.radius);
    Mat<T> chi = node_physical<T>(s, cond_positions, cfg.box_lo, cfg.box_hi, cfg.radius, m.norm,
                                  cfg.n_materials);
    Mat<T> n_in = codec_encode(m, chi, tr);

    Mat<T> geom(graph.n_edges(), cfg.dims + 1);
    for (std::size_t i = 0; i < graph.geom.size(); ++i) geom.a[i] = static_cast<T>(graph.geom[i]);
    Mat<T> edge_latent = encode_edges(m.edge_encoder, geom, tr ? &tr->edge_enc_cache : nullptr);

    StackState<T> x;
    split_halves(n_in, x.n1, x.n2);
    split_halves(edge_latent, x.e1, x.e2);
    StackState<T> y = inverse ? stack_inverse(m.stack, x, graph) : stack_forward(m.stack, x, graph);

    Mat<T> n_out = join_halves(y.n1, y.n2);
    Mat<T> decoded = codec_decode(m, n_out, tr);
    if (tr) {
        tr->chi = std::move(chi);
        tr->s_in = std::move(x);
        tr->s_out = std::move(y);
        tr->decoded = decoded;
        tr->inverse = inverse;
        tr->graph = std::move(graph);
    }
    return decoded;
}

// Distance of the stack output from the codec's representable set,
// mean squared over latent entries: how much decode-then-encode loses.
template <std::floating_point T>
double codec_projection_residual(const ModelParams<T>& m, const StackState<T>& y,
                                 const Mat<T>& decoded) {
    Mat<T> n_out = join_halves(y.n1, y.n2);
    Mat<T> back = codec_encode(m, decoded, nullptr);
    double s = 0;
    for (std::size_t i = 0; i < back.a.size(); ++i) {
        const double d = static_cast<double>(back.a[i]) - static_cast<double>(n_out.a[i]);
        s += d * d;
    }
    return back.a.empty() ? 0.0 : s / static_cast<double>(back.a.size());
}

struct StepDiag {
    int edge_count = 0;
    bool out_of_box = false;
    double codec_residual = 0.0;
};

// One forward transition: predicts only the newest velocity; the other
// window slots are masked with the known shifted inputs, so codec residual
// never leaks into carried history. The position identity
// p^{t+1} = p^t + dt * v_new holds bit-exactly by construction.
template <std::floating_point T>
StepState forward_step(const ModelParams<T>& m, const StepState& s, StepDiag* diag = nullptr) {
    const auto& cfg = m.cfg;
    PipelineTrace<T> tr;
    Mat<T> decoded = latent_pass(m, s, s.positions, /*inverse=*/false, diag ? &tr : nullptr);
    const int D = cfg.dims, k = cfg.k, n = s.n;
    if (diag) {
        diag->edge_count = tr.graph.n_edges();
        diag->codec_residual = codec_projection_residual(m, tr.s_out, tr.decoded);
    }

    StepState out;
    out.dims = D;
    out.n = n;
    out.k = k;
    out.materials = s.materials;
    out.time_index = s.time_index + 1;
    out.positions.resize(static_cast<std::size_t>(n) * D);
    out.vel_window.resize(static_cast<std::size_t>(k) * n * D);
    // masked slots: shift the known window up by one
    for (int slot = 0; slot + 1 < k; ++slot)
        std::copy(s.vel(slot + 1, 0), s.vel(slot + 1, 0) + static_cast<std::size_t>(n) * D,
                  out.vel(slot, 0));

    bool clamped = false;
    for (int i = 0; i < n; ++i) {
        for (int d = 0; d < D; ++d) {
            const double vn = m.norm.mean[d] +
                              m.norm.stdev[d] * static_cast<double>(decoded(i, (k - 1) * D + d));
            if (!std::isfinite(vn))
                throw numeric_error("forward_step: non-finite prediction at t=" +
                                    std::to_string(s.time_index));
            const double p = s.positions[static_cast<std::size_t>(i) * D + d];
            double v = vn;
            double pn = advance_position(p, cfg.dt, v);
            if (pn < cfg.box_lo[d] || pn > cfg.box_hi[d]) {
                clamped = true;
                // wall contact: clamp, then carry the clamp-consistent
                // velocity so the position identity stays exact (a particle
                // resting on the wall carries zero normal velocity)
                const double target = std::clamp(pn, cfg.box_lo[d], cfg.box_hi[d]);
                v = (target - p) / cfg.dt;
                pn = advance_position(p, cfg.dt, v);
                for (int guard = 0; guard < 8 && (pn < cfg.box_lo[d] || pn > cfg.box_hi[d]); ++guard) {
                    v = std::nextafter(v, pn < cfg.box_lo[d] ? std::numeric_limits<double>::max()
                                                             : std::numeric_limits<double>::lowest());
                    pn = advance_position(p, cfg.dt, v);
                }
                if (pn < cfg.box_lo[d] || pn > cfg.box_hi[d])
                    throw numeric_error("forward_step: wall clamp failed to converge");
            }
            out.positions[static_cast<std::size_t>(i) * D + d] = pn;
            out.vel(k - 1, i)[d] = v;
        }
    }
    if (diag) diag->out_of_box = clamped;
    return out;
}

// One inverse transition: p^t = p^{t+1} - dt * v^{t+1} exactly, the same
// graph is rebuilt on p^t, and only the oldest window velocity is predicted.
// No clamping on the recovered positions; leaving the box is reported.
template <std::floating_point T>
StepState inverse_step(const ModelParams<T>& m, const StepState& s, StepDiag* diag = nullptr) {
    const auto& cfg = m.cfg;
    const int D = cfg.dims, k = cfg.k, n = s.n;
    std::vector<double> p_prev(static_cast<std::size_t>(n) * D);
    bool outside = false;
    for (int i = 0; i < n; ++i)
        for (int d = 0; d < D; ++d) {
            const double p = recover_position(s.positions[static_cast<std::size_t>(i) * D + d],
                                              cfg.dt, s.vel(k - 1, i)[d]);
            if (!std::isfinite(p))
                throw numeric_error("inverse_step: non-finite position at t=" +
                                    std::to_string(s.time_index));
            if (p < cfg.box_lo[d] || p > cfg.box_hi[d]) outside = true;
            p_prev[static_cast<std::size_t>(i) * D + d] = p;
        }

    PipelineTrace<T> tr;
    Mat<T> decoded = latent_pass(m, s, p_prev, /*inverse=*/true, diag ? &tr : nullptr);
    if (diag) {
        diag->edge_count = tr.graph.n_edges();
        diag->codec_residual = codec_projection_residual(m, tr.s_out, tr.decoded);
        diag->out_of_box = outside;
    }

    StepState out;
    out.dims = D;
    out.n = n;
    out.k = k;
    out.materials = s.materials;
    out.time_index = s.time_index - 1;
    out.positions = std::move(p_prev);
    out.vel_window.resize(static_cast<std::size_t>(k) * n * D);
    // masked slots: shift the known window down by one
    for (int slot = 1; slot < k; ++slot)
        std::copy(s.vel(slot - 1, 0), s.vel(slot - 1, 0) + static_cast<std::size_t>(n) * D,
                  out.vel(slot, 0));
    for (int i = 0; i < n; ++i)
        for (int d = 0; d < D; ++d) {
            const double vn = m.norm.mean[d] + m.norm.stdev[d] * static_cast<double>(decoded(i, d));
            if (!std::isfinite(vn))
                throw numeric_error("inverse_step: non-finite prediction at t=" +
                                    std::to_string(s.time_index));
            out.vel(0, i)[d] = vn;
        }
    return out;
}

struct RolloutResult {
    std::vector<StepState> frames;  // frames[0] is the given state
    bool forward = true;
    long start_index = 0;
    std::vector<StepDiag> diags;    // one per transition
};

template <std::floating_point T>
RolloutResult rollout(const ModelParams<T>& m, const StepState& start, int steps) {
    if (steps < 1) throw config_error("rollout: steps must be >= 1");
    RolloutResult r;
    r.forward = true;
    r.start_index = start.time_index;
    r.frames.reserve(static_cast<std::size_t>(steps) + 1);
    r.frames.push_back(start);
    for (int i = 0; i < steps; ++i) {
        StepDiag diag;
        try {
            r.frames.push_back(forward_step(m, r.frames.back(), &diag));
        } catch (const numeric_error& e) {
            throw numeric_error("rollout step " + std::to_string(i + 1) + ": " + e.what());
        }
        r.diags.push_back(diag);
    }
    return r;
}

template <std::floating_point T>
RolloutResult inverse_rollout(const ModelParams<T>& m, const StepState& start, int steps) {
    if (steps < 1) throw config_error("inverse_rollout: steps must be >= 1");
    RolloutResult r;
    r.forward = false;
    r.start_index = start.time_index;
    r.frames.reserve(static_cast<std::size_t>(steps) + 1);
    r.frames.push_back(start);
    for (int i = 0; i < steps; ++i) {
        StepDiag diag;
        try {
            r.frames.push_back(inverse_step(m, r.frames.back(), &diag));
        } catch (const numeric_error& e) {
            throw numeric_error("inverse rollout step " + std::to_string(i + 1) + ": " + e.what());
        }
        r.diags.push_back(diag);
    }
    return r;
}

inline double position_mse(const StepState& a, const StepState& b) {
    if (a.positions.size() != b.positions.size()) throw config_error("position_mse: size mismatch");
    double s = 0;
    for (std::size_t i = 0; i < a.positions.size(); ++i) {
        const double d = a.positions[i] - b.positions[i];
        s += d * d;
    }
    return s / static_cast<double>(a.positions.size());
}

template <std::floating_point T>
struct GoalResult {
    RolloutResult inferred;    // inverse rollout from the target
    RolloutResult reproduced;  // forward rollout from the inferred state
    double consistency_mse = 0.0;
};

// Goal-conditioned pipeline: infer a plausible initial state K steps back,
// then roll forward to reproduce the target.
template <std::floating_point T>
GoalResult<T> goal_condition(const ModelParams<T>& m, const StepState& target, int steps) {
    if (steps < 0) throw config_error("goal_condition: steps must be >= 0");
    GoalResult<T> g;
    if (steps == 0) {
        g.inferred.frames.push_back(target);
        g.inferred.start_index = target.time_index;
        g.reproduced = g.inferred;
        g.reproduced.forward = true;
        g.consistency_mse = 0.0;
        return g;
    }
    g.inferred = inverse_rollout(m, target, steps);
    g.reproduced = rollout(m, g.inferred.frames.back(), steps);
    g.consistency_mse = position_mse(g.reproduced.frames.back(), target);
    return g;
}

}  // namespace rgns
