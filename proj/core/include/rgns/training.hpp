#pragma once

#include <algorithm>
#include <iostream>
#include <optional>

#include "rgns/simulator.hpp"

namespace rgns {

enum class LossMode { bidirectional, forward_only };

struct TrainConfig {
    int k = 5;
    int latent = 128;
    int hidden = 128;
    int layers = 10;
    int n_materials = 1;
    double lr0 = 1e-4;
    long total_steps = 20000;
    int batch_size = 2;
    double noise_std = 1e-3;  // input-velocity noise, normalized units
    LossMode loss_mode = LossMode::bidirectional;
    CodecMode codec = CodecMode::ilp;
    EdgeMode edge_mode = EdgeMode::fixed;
    BackwardMode backward = BackwardMode::recompute;
    std::uint64_t seed = 1;
    long eval_every = 100;
    int patience = 10;        // evaluations without improvement before stopping
    double val_fraction = 0.1;
    int max_val_samples = 200;

    void validate() const {
        if (latent < 2 || latent % 2 != 0) throw config_error("train: latent width must be even");
        if (layers < 1) throw config_error("train: need at least one layer");
        if (noise_std < 0) throw config_error("train: noise_std must be >= 0");
        if (batch_size < 1) throw config_error("train: batch_size must be >= 1");
        if (total_steps < 0) throw config_error("train: total_steps must be >= 0");
        if (eval_every < 1) throw config_error("train: eval_every must be >= 1");
        if (!(val_fraction >= 0 && val_fraction < 1))
            throw config_error("train: val_fraction must be in [0,1)");
    }
};

// One supervision pair: the transition t -> t+1 of one trajectory. Valid t
// (0-based frames) span [k, T-2]: the window at t needs k backward
// differences and both the forward target v^{t+1} and the inverse target
// v^{t-k+1} must exist.
struct WindowSample {
    const Trajectory* traj = nullptr;
    int t = 0;
};

inline std::vector<WindowSample> make_windows(std::span<const Trajectory> trajs, int k) {
    if (k < 1) throw config_error("make_windows: k must be >= 1");
    std::vector<WindowSample> out;
    for (std::size_t ti = 0; ti < trajs.size(); ++ti) {
        const auto& traj = trajs[ti];
        if (traj.n_steps < k + 2) {
            std::cerr << "warning: trajectory " << ti << " too short (T=" << traj.n_steps
                      << ", need " << k + 2 << "), skipped\n";
            continue;
        }
        for (int t = k; t <= traj.n_steps - 2; ++t) out.push_back({&traj, t});
    }
    return out;
}

struct LossResult {
    double total = 0;
    double forward_term = 0;
    double inverse_term = 0;
};

namespace detail {

// Normalized ground-truth velocity v^step for every node, N x D.
template <std::floating_point T>
Mat<T> normalized_velocity_target(const Trajectory& traj, int step, const Normalizer& norm) {
    const int n = traj.n_particles, D = traj.dims;
    Mat<T> y(n, D);
    for (int i = 0; i < n; ++i)
        for (int d = 0; d < D; ++d) {
            const double v = (static_cast<double>(traj.pos(step, i, d)) -
                              static_cast<double>(traj.pos(step - 1, i, d))) /
                             traj.dt;
            y(i, d) = static_cast<T>((v - norm.mean[d]) / norm.stdev[d]);
        }
    return y;
}

// Backprop from a decoded-space gradient through codec, stack and encoders
// into the shared gradient registry.
template <std::floating_point T>
void pipeline_backward(const ModelParams<T>& m, PipelineTrace<T>& tr, const Mat<T>& d_decoded,
                       ModelGrads<T>& grads, BackwardMode mode) {
    Mat<T> d_nout;
    if (m.codec.mode == CodecMode::ilp)
        d_nout = ilp_decode_vjp(m.codec.ilp, d_decoded, grads.ilp_B);
    else
        d_nout = mlp_backward(m.codec.dec, tr.codec_dec_cache, d_decoded, grads.codec_dec);

    StackState<T> d_out;
    split_halves(d_nout, d_out.n1, d_out.n2);
    d_out.e1 = Mat<T>(tr.s_out.e1.rows, tr.s_out.e1.cols);
    d_out.e2 = Mat<T>(tr.s_out.e2.rows, tr.s_out.e2.cols);

    StackState<T> d_in;
    if (!tr.inverse) {
        d_in = mode == BackwardMode::recompute
                   ? stack_backward(m.stack, tr.s_out, d_out, tr.graph, grads.stack,
                                    nullptr, default_drift_guard<T>(), &tr.s_in)
                   : stack_backward_stored(m.stack, tr.s_in, d_out, tr.graph, grads.stack);
    } else {
        d_in = mode == BackwardMode::recompute
                   ? stack_inverse_backward(m.stack, tr.s_out, tr.s_in, d_out, tr.graph, grads.stack)
                   : stack_inverse_backward_stored(m.stack, tr.s_in, d_out, tr.graph, grads.stack);
    }

    Mat<T> d_nin = join_halves(d_in.n1, d_in.n2);
    if (m.codec.mode == CodecMode::ilp)
        ilp_encode_vjp(tr.chi, d_nin, grads.ilp_W, grads.ilp_B);
    else
        mlp_backward(m.codec.enc, tr.codec_enc_cache, d_nin, grads.codec_enc);

    Mat<T> d_edges = join_halves(d_in.e1, d_in.e2);
    mlp_backward(m.edge_encoder.net, tr.edge_enc_cache, d_edges, grads.edge_encoder);
}

}  // namespace detail

// Bidirectional MSE in normalized velocity space: the forward pipeline
// supervises v^{t+1}, the inverse pipeline v^{t-k+1}, equally weighted, both
// pipelines backpropagating into the one shared parameter set. Gaussian
// noise perturbs the input windows only; targets stay clean.
template <std::floating_point T>
LossResult bidirectional_loss(const ModelParams<T>& m, const WindowSample& sample,
                              double noise_std, std::mt19937_64& rng, LossMode mode,
                              ModelGrads<T>* grads = nullptr,
                              BackwardMode backward = BackwardMode::recompute) {
    const auto& cfg = m.cfg;
    const Trajectory& traj = *sample.traj;
    const int k = cfg.k, D = cfg.dims, n = traj.n_particles, t = sample.t;
    if (t < k || t > traj.n_steps - 2) throw config_error("bidirectional_loss: t out of range");

    // One noise draw per velocity v^{t-k+1} .. v^{t+1}; the forward and
    // inverse windows see the same perturbation on shared entries.
    std::vector<double> noise(static_cast<std::size_t>(k + 1) * n * D, 0.0);
    if (noise_std > 0) {
        std::normal_distribution<double> dist(0.0, 1.0);
        for (int slot = 0; slot <= k; ++slot)
            for (int i = 0; i < n; ++i)
                for (int d = 0; d < D; ++d)
                    noise[(static_cast<std::size_t>(slot) * n + i) * D + d] =
                        dist(rng) * noise_std * m.norm.stdev[d];
    }

    LossResult res;
    const double denom = static_cast<double>(n) * D;

    // forward pipeline on the noised window at t
    {
        StepState s = state_from_trajectory(traj, t, k);
        for (int slot = 0; slot < k; ++slot)
            for (int i = 0; i < n; ++i)
                for (int d = 0; d < D; ++d)
                    s.vel(slot, i)[d] += noise[(static_cast<std::size_t>(slot) * n + i) * D + d];
        PipelineTrace<T> tr;
        Mat<T> decoded = latent_pass(m, s, s.positions, /*inverse=*/false, grads ? &tr : nullptr);
        Mat<T> target = detail::normalized_velocity_target<T>(traj, t + 1, m.norm);
        Mat<T> d_decoded(decoded.rows, decoded.cols);
        for (int i = 0; i < n; ++i)
            for (int d = 0; d < D; ++d) {
                const double diff = static_cast<double>(decoded(i, (k - 1) * D + d)) -
                                    static_cast<double>(target(i, d));
                res.forward_term += diff * diff / denom;
                d_decoded(i, (k - 1) * D + d) = static_cast<T>(2.0 * diff / denom);
            }
        if (grads) detail::pipeline_backward(m, tr, d_decoded, *grads, backward);
    }

    // inverse pipeline on the noised shifted window at t+1
    if (mode == LossMode::bidirectional) {
        StepState s = state_from_trajectory(traj, t + 1, k);
        for (int slot = 0; slot < k; ++slot)
            for (int i = 0; i < n; ++i)
                for (int d = 0; d < D; ++d)
                    s.vel(slot, i)[d] += noise[(static_cast<std::size_t>(slot + 1) * n + i) * D + d];
        std::vector<double> p_prev(static_cast<std::size_t>(n) * D);
        for (int i = 0; i < n; ++i)
            for (int d = 0; d < D; ++d)
                p_prev[static_cast<std::size_t>(i) * D + d] =
                    recover_position(s.positions[static_cast<std::size_t>(i) * D + d], cfg.dt,
                                     s.vel(k - 1, i)[d]);
        PipelineTrace<T> tr;
        Mat<T> decoded = latent_pass(m, s, p_prev, /*inverse=*/true, grads ? &tr : nullptr);
        Mat<T> target = detail::normalized_velocity_target<T>(traj, t - k + 1, m.norm);
        Mat<T> d_decoded(decoded.rows, decoded.cols);
        for (int i = 0; i < n; ++i)
            for (int d = 0; d < D; ++d) {
                const double diff =
                    static_cast<double>(decoded(i, d)) - static_cast<double>(target(i, d));
                res.inverse_term += diff * diff / denom;
                d_decoded(i, d) = static_cast<T>(2.0 * diff / denom);
            }
        if (grads) detail::pipeline_backward(m, tr, d_decoded, *grads, backward);
    }

    res.total = res.forward_term + res.inverse_term;
    if (!std::isfinite(res.total))
        throw numeric_error("bidirectional_loss: non-finite loss for trajectory sample t=" +
                            std::to_string(t));
    return res;
}

// Forward one-step velocity MSE without noise, averaged over samples.
template <std::floating_point T>
double validation_mse(const ModelParams<T>& m, std::span<const WindowSample> samples) {
    if (samples.empty()) return 0.0;
    double s = 0;
    std::mt19937_64 rng(0);
    for (const auto& w : samples)
        s += bidirectional_loss<T>(m, w, 0.0, rng, LossMode::forward_only).forward_term;
    return s / static_cast<double>(samples.size());
}

struct TrainLogEntry {
    long step = 0;
    double lr = 0, train_loss = 0, val_mse = 0;
};

template <std::floating_point T>
struct TrainResult {
    ModelParams<T> model;
    long steps_run = 0;
    double untrained_val_mse = 0;
    double final_val_mse = 0;
    std::vector<TrainLogEntry> log;
};

namespace detail {

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a + 0x9e3779b97f4a7c15ull * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

}  // namespace detail

// Mini-batch Adam with cosine decay; the pseudo-inverse is refreshed after
// every update so the decode path always matches the current W. Early stop
// on a validation plateau.
template <std::floating_point T>
TrainResult<T> train(const TrainConfig& tc, std::span<const Trajectory> trajs,
                     std::ostream* log_stream = nullptr) {
    tc.validate();
    if (trajs.empty()) throw config_error("train: need at least one trajectory");
    for (const auto& t : trajs) {
        if (t.dims != trajs.front().dims || t.dt != trajs.front().dt ||
            t.radius != trajs.front().radius || t.box_lo != trajs.front().box_lo ||
            t.box_hi != trajs.front().box_hi)
            throw config_error("train: trajectories disagree on dims/dt/radius/box");
    }

    ModelConfig mc;
    mc.dims = trajs.front().dims;
    mc.k = tc.k;
    mc.latent = tc.latent;
    mc.hidden = tc.hidden;
    mc.layers = tc.layers;
    mc.n_materials = tc.n_materials;
    mc.radius = trajs.front().radius;
    mc.dt = trajs.front().dt;
    mc.box_lo = trajs.front().box_lo;
    mc.box_hi = trajs.front().box_hi;
    mc.codec = tc.codec;
    mc.edge_mode = tc.edge_mode;

    // validation split: tail fraction, at least one trajectory when possible
    std::size_t n_val = trajs.size() >= 2
                            ? std::max<std::size_t>(1, static_cast<std::size_t>(
                                                           tc.val_fraction * trajs.size()))
                            : 0;
    if (n_val >= trajs.size()) n_val = trajs.size() - 1;
    std::span<const Trajectory> train_trajs = trajs.subspan(0, trajs.size() - n_val);
    std::span<const Trajectory> val_trajs = n_val > 0 ? trajs.subspan(trajs.size() - n_val) : train_trajs;

    TrainResult<T> res;
    res.model = init_model<T>(mc, tc.seed);
    res.model.norm = fit_normalizer(train_trajs);

    std::vector<WindowSample> samples = make_windows(train_trajs, tc.k);
    if (samples.empty()) throw config_error("train: no usable training windows");
    std::vector<WindowSample> val_samples = make_windows(val_trajs, tc.k);
    if (static_cast<int>(val_samples.size()) > tc.max_val_samples) {
        std::vector<WindowSample> picked;
        const std::size_t stride = val_samples.size() / static_cast<std::size_t>(tc.max_val_samples);
        for (std::size_t i = 0; i < val_samples.size() && picked.size() < static_cast<std::size_t>(tc.max_val_samples);
             i += std::max<std::size_t>(1, stride))
            picked.push_back(val_samples[i]);
        val_samples = std::move(picked);
    }

    res.untrained_val_mse = validation_mse(res.model, val_samples);
    res.final_val_mse = res.untrained_val_mse;

    auto params = collect_params(res.model);
    ModelGrads<T> grads = make_grads(res.model);
    auto grad_refs = collect_grads(grads, res.model.codec.mode);
    AdamState<T> adam = make_adam<T>(params, tc.lr0, tc.total_steps);

    std::mt19937_64 shuffle_rng(detail::mix_seed(tc.seed, 0xC0FFEE));
    std::vector<std::size_t> order(samples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    std::size_t cursor = 0;

    double best_val = res.untrained_val_mse;
    int stale_evals = 0;
    const auto emit = [&](long step, double lr, double train_loss, double val) {
        res.log.push_back({step, lr, train_loss, val});
        if (log_stream) {
            (*log_stream) << "{\"step\":" << step << ",\"lr\":" << lr
                          << ",\"train_loss\":" << train_loss << ",\"val_mse\":" << val << "}\n";
        }
    };

    for (long step = 0; step < tc.total_steps; ++step) {
        zero_grads(grads);
        double batch_loss = 0;
        for (int b = 0; b < tc.batch_size; ++b) {
            if (cursor >= order.size()) {
                std::shuffle(order.begin(), order.end(), shuffle_rng);
                cursor = 0;
            }
            const WindowSample& w = samples[order[cursor++]];
            std::mt19937_64 noise_rng(
                detail::mix_seed(tc.seed, static_cast<std::uint64_t>(step) * 8192 + b));
            batch_loss += bidirectional_loss<T>(res.model, w, tc.noise_std, noise_rng,
                                                tc.loss_mode, &grads, tc.backward)
                              .total;
        }
        batch_loss /= tc.batch_size;
        const T scale = static_cast<T>(1.0 / tc.batch_size);
        for (auto& g : grad_refs)
            for (std::size_t i = 0; i < g.size; ++i) g.data[i] *= scale;

        adam_step(adam, params, grad_refs, step);
        if (res.model.codec.mode == CodecMode::ilp) refresh_pinv(res.model.codec.ilp);
        res.steps_run = step + 1;

        if ((step + 1) % tc.eval_every == 0 || step + 1 == tc.total_steps) {
            const double val = validation_mse(res.model, val_samples);
            res.final_val_mse = val;
            emit(step + 1, cosine_lr(tc.lr0, step, tc.total_steps), batch_loss, val);
            if (val < best_val - 1e-12) {
                best_val = val;
                stale_evals = 0;
            } else if (++stale_evals >= tc.patience) {
                break;
            }
        }
    }
    return res;
}

// ---------------------------------------------------------------------------
// Checkpoint: model weights plus the training configuration, magic "RGNC".

inline void write_train_config(ByteWriter& w, const TrainConfig& tc) {
    w.f64(tc.lr0);
    w.i64(tc.total_steps);
    w.u32(static_cast<std::uint32_t>(tc.batch_size));
    w.f64(tc.noise_std);
    w.u8(tc.loss_mode == LossMode::bidirectional ? 0 : 1);
    w.u8(tc.backward == BackwardMode::recompute ? 0 : 1);
    w.u64(tc.seed);
    w.i64(tc.eval_every);
    w.u32(static_cast<std::uint32_t>(tc.patience));
    w.f64(tc.val_fraction);
}

inline TrainConfig read_train_config(ByteReader& r) {
    TrainConfig tc;
    tc.lr0 = r.f64("train.lr0");
    tc.total_steps = static_cast<long>(r.i64("train.total_steps"));
    tc.batch_size = static_cast<int>(r.u32("train.batch_size"));
    tc.noise_std = r.f64("train.noise_std");
    tc.loss_mode = r.u8("train.loss_mode") == 0 ? LossMode::bidirectional : LossMode::forward_only;
    tc.backward = r.u8("train.backward") == 0 ? BackwardMode::recompute : BackwardMode::stored;
    tc.seed = r.u64("train.seed");
    tc.eval_every = static_cast<long>(r.i64("train.eval_every"));
    tc.patience = static_cast<int>(r.u32("train.patience"));
    tc.val_fraction = r.f64("train.val_fraction");
    return tc;
}

template <std::floating_point T>
void save_checkpoint(const std::filesystem::path& path, ModelParams<T>& model,
                     const TrainConfig& tc, long train_step) {
    ByteWriter w;
    w.raw(detail::kCkptMagic, 4);
    w.u32(detail::kCkptVersion);
    detail::write_config(w, model.cfg);
    write_train_config(w, tc);
    w.i64(train_step);
    for (int d = 0; d < model.cfg.dims; ++d) w.f64(model.norm.mean[d]);
    for (int d = 0; d < model.cfg.dims; ++d) w.f64(model.norm.stdev[d]);
    auto params = collect_params(model);
    w.u32(static_cast<std::uint32_t>(params.size()));
    for (const auto& t : params) detail::write_tensor(w, t);
    if (model.codec.mode == CodecMode::ilp) {
        TensorRef<double> pinv{"ilp.W_pinv", model.codec.ilp.W_pinv.a.data(),
                               model.codec.ilp.W_pinv.a.size()};
        detail::write_tensor(w, pinv);
    }
    w.to_file(path);
}

template <std::floating_point T>
ModelParams<T> load_checkpoint(const std::filesystem::path& path, TrainConfig* tc_out = nullptr,
                               long* train_step = nullptr) {
    ByteReader r = ByteReader::from_file(path);
    char magic[4];
    r.raw(magic, 4, "magic");
    if (std::memcmp(magic, detail::kCkptMagic, 4) != 0)
        throw io_error("checkpoint: magic mismatch at byte offset 0 in " + path.string());
    const std::uint32_t version = r.u32("version");
    if (version != detail::kCkptVersion)
        throw io_error("checkpoint: unsupported format version " + std::to_string(version));
    const ModelConfig cfg = detail::read_config(r);
    TrainConfig tc = read_train_config(r);
    tc.k = cfg.k;
    tc.latent = cfg.latent;
    tc.hidden = cfg.hidden;
    tc.layers = cfg.layers;
    tc.n_materials = cfg.n_materials;
    tc.codec = cfg.codec;
    tc.edge_mode = cfg.edge_mode;
    if (tc_out) *tc_out = tc;
    ModelParams<T> model = init_model<T>(cfg, /*seed=*/0);
    const long step = static_cast<long>(r.i64("train step"));
    if (train_step) *train_step = step;
    for (int d = 0; d < cfg.dims; ++d) model.norm.mean[d] = r.f64("norm.mean");
    for (int d = 0; d < cfg.dims; ++d) model.norm.stdev[d] = r.f64("norm.stdev");
    auto params = collect_params(model);
    const std::uint32_t count = r.u32("tensor count");
    if (count != params.size())
        throw io_error("checkpoint: tensor count " + std::to_string(count) + ", expected " +
                       std::to_string(params.size()));
    for (const auto& t : params) detail::read_tensor(r, t);
    if (model.codec.mode == CodecMode::ilp) {
        model.codec.ilp.W_pinv = Mat<double>(cfg.phys_dim(), cfg.latent);
        TensorRef<double> pinv{"ilp.W_pinv", model.codec.ilp.W_pinv.a.data(),
                               model.codec.ilp.W_pinv.a.size()};
        detail::read_tensor(r, pinv);
        model.codec.ilp.W_pinv_t = cast_mat<T>(model.codec.ilp.W_pinv);
        model.codec.ilp.stale = false;
    }
    if (!r.exhausted())
        throw io_error("checkpoint: trailing bytes at offset " + std::to_string(r.offset()));
    return model;
}

}  // namespace rgns
