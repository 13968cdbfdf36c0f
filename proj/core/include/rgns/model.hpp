#pragma once

#include <filesystem>
#include <random>

#include "rgns/adam.hpp"
#include "rgns/binio.hpp"
#include "rgns/graph.hpp"
#include "rgns/ilp.hpp"
#include "rgns/rrmp.hpp"

namespace rgns {

enum class CodecMode { ilp, mlp };

struct ModelConfig {
    int dims = 2;
    int k = 5;            // velocity history length
    int latent = 128;     // d, split into two halves
    int hidden = 128;     // subnetwork hidden width
    int layers = 10;      // M propagation steps
    int n_materials = 1;
    double radius = 0.1;  // connectivity radius
    double dt = 0.005;
    std::vector<double> box_lo = {0.0, 0.0};
    std::vector<double> box_hi = {1.0, 1.0};
    CodecMode codec = CodecMode::ilp;
    EdgeMode edge_mode = EdgeMode::fixed;

    int phys_dim() const { return k * dims + 2 * dims + n_materials; }
    int half() const { return latent / 2; }

    void validate() const {
        if (dims < 1 || dims > 3) throw config_error("model: dims must be 1..3");
        if (k < 1) throw config_error("model: k must be >= 1");
        if (latent < 2 || latent % 2 != 0) throw config_error("model: latent width must be even");
        if (layers < 1) throw config_error("model: need at least one layer");
        if (hidden < 1) throw config_error("model: hidden width must be >= 1");
        if (n_materials < 1) throw config_error("model: n_materials must be >= 1");
        if (!(radius > 0) || !(dt > 0)) throw config_error("model: radius and dt must be > 0");
        if (static_cast<int>(box_lo.size()) != dims || static_cast<int>(box_hi.size()) != dims)
            throw config_error("model: box bounds must have one entry per axis");
        if (codec == CodecMode::ilp && latent <= phys_dim())
            throw config_error("model: latent width must exceed physical width for the linear codec");
    }
};

// Either the invertible linear projection or, as an ablation, a nonlinear
// MLP encoder/decoder pair without exactness guarantees.
template <std::floating_point T>
struct Codec {
    CodecMode mode = CodecMode::ilp;
    IlpParams<T> ilp;
    Mlp<T> enc, dec;  // mlp mode only
};

// All learnable weights plus the data statistics; one shared parameter set
// serves the forward and inverse directions.
template <std::floating_point T>
struct ModelParams {
    ModelConfig cfg;
    Codec<T> codec;
    EdgeEncoderParams<T> edge_encoder;
    RrmpStack<T> stack;
    Normalizer norm;
};

template <std::floating_point T>
ModelParams<T> init_model(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    std::mt19937_64 rng(seed);
    ModelParams<T> m;
    m.cfg = cfg;
    m.codec.mode = cfg.codec;
    if (cfg.codec == CodecMode::ilp) {
        m.codec.ilp = init_ilp<T>(cfg.latent, cfg.phys_dim(), rng);
    } else {
        m.codec.enc = make_mlp<T>({cfg.phys_dim(), cfg.hidden, cfg.hidden, cfg.latent}, rng);
        m.codec.dec = make_mlp<T>({cfg.latent, cfg.hidden, cfg.hidden, cfg.phys_dim()}, rng);
    }
    m.edge_encoder.net = make_mlp<T>({cfg.dims + 1, cfg.hidden, cfg.hidden, cfg.latent}, rng);
    m.stack = make_rrmp_stack<T>(cfg.layers, cfg.half(), cfg.hidden, cfg.edge_mode, rng);
    m.norm.mean.assign(static_cast<std::size_t>(cfg.dims), 0.0);
    m.norm.stdev.assign(static_cast<std::size_t>(cfg.dims), 1.0);
    return m;
}

// Gradient container mirroring every trainable tensor.
template <std::floating_point T>
struct ModelGrads {
    Mat<T> ilp_W;
    std::vector<T> ilp_B;
    Mlp<T> codec_enc, codec_dec;
    Mlp<T> edge_encoder;
    StackGrads<T> stack;
};

template <std::floating_point T>
ModelGrads<T> make_grads(const ModelParams<T>& m) {
    ModelGrads<T> g;
    if (m.codec.mode == CodecMode::ilp) {
        g.ilp_W = Mat<T>(m.codec.ilp.W.rows, m.codec.ilp.W.cols);
        g.ilp_B.assign(m.codec.ilp.B.size(), T(0));
    } else {
        g.codec_enc = zeros_like(m.codec.enc);
        g.codec_dec = zeros_like(m.codec.dec);
    }
    g.edge_encoder = zeros_like(m.edge_encoder.net);
    g.stack = zeros_like(m.stack);
    return g;
}

template <std::floating_point T>
void zero_grads(ModelGrads<T>& g) {
    g.ilp_W.fill(T(0));
    std::fill(g.ilp_B.begin(), g.ilp_B.end(), T(0));
    for (auto* net : {&g.codec_enc, &g.codec_dec, &g.edge_encoder})
        for (auto& l : net->layers) {
            l.W.fill(T(0));
            std::fill(l.b.begin(), l.b.end(), T(0));
        }
    for (auto& layer : g.stack.layers)
        for (auto* net : {&layer.f_edge, &layer.f_node, &layer.g_edge, &layer.g_node,
                          &layer.g_edge_upd, &layer.f_edge_upd})
            for (auto& l : net->layers) {
                l.W.fill(T(0));
                std::fill(l.b.begin(), l.b.end(), T(0));
            }
}

namespace detail {

template <std::floating_point T>
void collect_mlp(std::vector<TensorRef<T>>& out, Mlp<T>& net, const std::string& prefix) {
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        out.push_back({prefix + ".w" + std::to_string(l), net.layers[l].W.a.data(),
                       net.layers[l].W.a.size()});
        out.push_back({prefix + ".b" + std::to_string(l), net.layers[l].b.data(),
                       net.layers[l].b.size()});
    }
}

template <std::floating_point T>
void collect_layer(std::vector<TensorRef<T>>& out, RrmpLayer<T>& layer, const std::string& prefix) {
    collect_mlp(out, layer.f_edge, prefix + ".f_edge");
    collect_mlp(out, layer.f_node, prefix + ".f_node");
    collect_mlp(out, layer.g_edge, prefix + ".g_edge");
    collect_mlp(out, layer.g_node, prefix + ".g_node");
    if (!layer.g_edge_upd.layers.empty()) collect_mlp(out, layer.g_edge_upd, prefix + ".g_edge_upd");
    if (!layer.f_edge_upd.layers.empty()) collect_mlp(out, layer.f_edge_upd, prefix + ".f_edge_upd");
}

}  // namespace detail

// The single registry of trainable tensors; the optimizer, the checkpoint
// writer and the shared-parameter audit all walk this order.
template <std::floating_point T>
std::vector<TensorRef<T>> collect_params(ModelParams<T>& m) {
    std::vector<TensorRef<T>> out;
    if (m.codec.mode == CodecMode::ilp) {
        out.push_back({"ilp.W", m.codec.ilp.W.a.data(), m.codec.ilp.W.a.size()});
        out.push_back({"ilp.B", m.codec.ilp.B.data(), m.codec.ilp.B.size()});
    } else {
        detail::collect_mlp(out, m.codec.enc, "codec.enc");
        detail::collect_mlp(out, m.codec.dec, "codec.dec");
    }
    detail::collect_mlp(out, m.edge_encoder.net, "edge_encoder");
    for (std::size_t l = 0; l < m.stack.layers.size(); ++l)
        detail::collect_layer(out, m.stack.layers[l], "stack." + std::to_string(l));
    return out;
}

template <std::floating_point T>
std::vector<TensorRef<T>> collect_grads(ModelGrads<T>& g, CodecMode mode) {
    std::vector<TensorRef<T>> out;
    if (mode == CodecMode::ilp) {
        out.push_back({"ilp.W", g.ilp_W.a.data(), g.ilp_W.a.size()});
        out.push_back({"ilp.B", g.ilp_B.data(), g.ilp_B.size()});
    } else {
        detail::collect_mlp(out, g.codec_enc, "codec.enc");
        detail::collect_mlp(out, g.codec_dec, "codec.dec");
    }
    detail::collect_mlp(out, g.edge_encoder, "edge_encoder");
    for (std::size_t l = 0; l < g.stack.layers.size(); ++l)
        detail::collect_layer(out, g.stack.layers[l], "stack." + std::to_string(l));
    return out;
}

// ---------------------------------------------------------------------------
// Checkpoint format: magic "RGNC", version 1, little-endian. All weights are
// written as f64 regardless of the working precision; the double-precision
// pseudo-inverse master is included. Tensors are self-describing
// (name, shape) records.

namespace detail {

constexpr char kCkptMagic[4] = {'R', 'G', 'N', 'C'};
constexpr std::uint32_t kCkptVersion = 1;

inline void write_config(ByteWriter& w, const ModelConfig& cfg) {
    w.u32(static_cast<std::uint32_t>(cfg.dims));
    w.u32(static_cast<std::uint32_t>(cfg.k));
    w.u32(static_cast<std::uint32_t>(cfg.latent));
    w.u32(static_cast<std::uint32_t>(cfg.hidden));
    w.u32(static_cast<std::uint32_t>(cfg.layers));
    w.u32(static_cast<std::uint32_t>(cfg.n_materials));
    w.f64(cfg.radius);
    w.f64(cfg.dt);
    for (int d = 0; d < cfg.dims; ++d) w.f64(cfg.box_lo[d]);
    for (int d = 0; d < cfg.dims; ++d) w.f64(cfg.box_hi[d]);
    w.u8(cfg.codec == CodecMode::ilp ? 0 : 1);
    w.u8(cfg.edge_mode == EdgeMode::fixed ? 0 : 1);
}

inline ModelConfig read_config(ByteReader& r) {
    ModelConfig cfg;
    cfg.dims = static_cast<int>(r.u32("cfg.dims"));
    cfg.k = static_cast<int>(r.u32("cfg.k"));
    cfg.latent = static_cast<int>(r.u32("cfg.latent"));
    cfg.hidden = static_cast<int>(r.u32("cfg.hidden"));
    cfg.layers = static_cast<int>(r.u32("cfg.layers"));
    cfg.n_materials = static_cast<int>(r.u32("cfg.n_materials"));
    cfg.radius = r.f64("cfg.radius");
    cfg.dt = r.f64("cfg.dt");
    cfg.box_lo.resize(cfg.dims);
    cfg.box_hi.resize(cfg.dims);
    for (int d = 0; d < cfg.dims; ++d) cfg.box_lo[d] = r.f64("cfg.box_lo");
    for (int d = 0; d < cfg.dims; ++d) cfg.box_hi[d] = r.f64("cfg.box_hi");
    cfg.codec = r.u8("cfg.codec") == 0 ? CodecMode::ilp : CodecMode::mlp;
    cfg.edge_mode = r.u8("cfg.edge_mode") == 0 ? EdgeMode::fixed : EdgeMode::updated;
    return cfg;
}

template <std::floating_point T>
void write_tensor(ByteWriter& w, const TensorRef<T>& t) {
    w.str(t.name);
    w.u64(t.size);
    for (std::size_t i = 0; i < t.size; ++i) w.f64(static_cast<double>(t.data[i]));
}

template <std::floating_point T>
void read_tensor(ByteReader& r, const TensorRef<T>& t) {
    const std::string name = r.str("tensor name");
    if (name != t.name)
        throw io_error("checkpoint: expected tensor '" + t.name + "', found '" + name + "'");
    const std::uint64_t n = r.u64("tensor size");
    if (n != t.size)
        throw io_error("checkpoint: tensor '" + name + "' has size " + std::to_string(n) +
                       ", expected " + std::to_string(t.size));
    for (std::size_t i = 0; i < t.size; ++i) t.data[i] = static_cast<T>(r.f64("tensor data"));
}

}  // namespace detail

}  // namespace rgns
