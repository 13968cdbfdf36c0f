#pragma once

#include "rgns/graph.hpp"
#include "rgns/ilp.hpp"
#include "rgns/mlp.hpp"

namespace rgns {

// Latent state carried through the reversible stack: node features split
// into two halves (N x h each) plus the conditioning edge halves (E x h).
// In fixed edge mode the edge halves pass through every layer unchanged.
template <std::floating_point T>
struct StackState {
    Mat<T> n1, n2;  // node halves
    Mat<T> e1, e2;  // edge halves
};

enum class EdgeMode { fixed, updated };

// One coupling layer: f updates the first node half from the second,
// g updates the second from the refreshed first. In updated edge mode two
// extra pair networks additively evolve the edge halves as well.
template <std::floating_point T>
struct RrmpLayer {
    Mlp<T> f_edge, f_node, g_edge, g_node;
    Mlp<T> g_edge_upd, f_edge_upd;  // populated only in updated mode
};

template <std::floating_point T>
struct RrmpStack {
    std::vector<RrmpLayer<T>> layers;
    EdgeMode edge_mode = EdgeMode::fixed;

    int depth() const { return static_cast<int>(layers.size()); }
};

template <std::floating_point T>
RrmpLayer<T> zeros_like(const RrmpLayer<T>& l) {
    RrmpLayer<T> g;
    g.f_edge = zeros_like(l.f_edge);
    g.f_node = zeros_like(l.f_node);
    g.g_edge = zeros_like(l.g_edge);
    g.g_node = zeros_like(l.g_node);
    if (!l.g_edge_upd.layers.empty()) g.g_edge_upd = zeros_like(l.g_edge_upd);
    if (!l.f_edge_upd.layers.empty()) g.f_edge_upd = zeros_like(l.f_edge_upd);
    return g;
}

// half width h, hidden width per subnetwork; message nets consume
// (receiver half, sender half, edge half), node nets (node half, aggregate).
// Sub-unit gain keeps residual magnitudes bounded across deep stacks.
inline constexpr double kResidualGain = 0.5;

template <std::floating_point T>
RrmpLayer<T> make_rrmp_layer(int half, int hidden, EdgeMode mode, std::mt19937_64& rng) {
    RrmpLayer<T> l;
    l.f_edge = make_mlp<T>({3 * half, hidden, hidden, half}, rng, Activation::relu, kResidualGain);
    l.f_node = make_mlp<T>({2 * half, hidden, hidden, half}, rng, Activation::relu, kResidualGain);
    l.g_edge = make_mlp<T>({3 * half, hidden, hidden, half}, rng, Activation::relu, kResidualGain);
    l.g_node = make_mlp<T>({2 * half, hidden, hidden, half}, rng, Activation::relu, kResidualGain);
    if (mode == EdgeMode::updated) {
        l.g_edge_upd = make_mlp<T>({2 * half, hidden, half}, rng, Activation::relu, kResidualGain);
        l.f_edge_upd = make_mlp<T>({2 * half, hidden, half}, rng, Activation::relu, kResidualGain);
    }
    return l;
}

template <std::floating_point T>
RrmpStack<T> make_rrmp_stack(int depth, int half, int hidden, EdgeMode mode, std::mt19937_64& rng) {
    if (depth < 1) throw config_error("rrmp: need at least one layer");
    RrmpStack<T> s;
    s.edge_mode = mode;
    s.layers.reserve(static_cast<std::size_t>(depth));
    for (int i = 0; i < depth; ++i) s.layers.push_back(make_rrmp_layer<T>(half, hidden, mode, rng));
    return s;
}

namespace detail {

template <std::floating_point T>
struct CouplingCache {
    MlpCache<T> edge_cache, node_cache;
};

// message(S, E) per edge -> sum at receivers -> node net; the residual the
// caller adds to the other half. Aggregation runs in sorted edge order.
template <std::floating_point T>
Mat<T> coupling_eval(const Mlp<T>& edge_net, const Mlp<T>& node_net, const Mat<T>& S,
                     const Mat<T>& Ehalf, const RadiusGraph& g,
                     std::type_identity_t<CouplingCache<T>*> cache) {
    const int h = S.cols;
    const int E = g.n_edges();
    if (Ehalf.rows != E || Ehalf.cols != h) throw config_error("rrmp: edge half shape mismatch");
    Mat<T> Xe(E, 3 * h);
    for (int e = 0; e < E; ++e) {
        T* row = Xe.row(e);
        const T* sr = S.row(g.edges[static_cast<std::size_t>(e)].recv);
        const T* ss = S.row(g.edges[static_cast<std::size_t>(e)].send);
        std::copy(sr, sr + h, row);
        std::copy(ss, ss + h, row + h);
        std::copy(Ehalf.row(e), Ehalf.row(e) + h, row + 2 * h);
    }
    Mat<T> msg = mlp_forward(edge_net, Xe, cache ? &cache->edge_cache : nullptr);
    Mat<T> agg(S.rows, h);
    for (int e = 0; e < E; ++e) {
        T* dst = agg.row(g.edges[static_cast<std::size_t>(e)].recv);
        const T* src = msg.row(e);
        for (int c = 0; c < h; ++c) dst[c] += src[c];
    }
    Mat<T> Xn(S.rows, 2 * h);
    for (int i = 0; i < S.rows; ++i) {
        std::copy(S.row(i), S.row(i) + h, Xn.row(i));
        std::copy(agg.row(i), agg.row(i) + h, Xn.row(i) + h);
    }
    return mlp_forward(node_net, Xn, cache ? &cache->node_cache : nullptr);
}

// VJP of coupling_eval: accumulates into dS, dE and the two subnet grads.
template <std::floating_point T>
void coupling_vjp(const Mlp<T>& edge_net, const Mlp<T>& node_net, const CouplingCache<T>& cache,
                  const Mat<T>& dR, const RadiusGraph& g, Mat<T>& dS, Mat<T>& dE,
                  Mlp<T>& edge_grads, Mlp<T>& node_grads) {
    const int h = dS.cols;
    const int E = g.n_edges();
    Mat<T> dXn = mlp_backward(node_net, cache.node_cache, dR, node_grads);
    Mat<T> dAgg(dS.rows, h);
    for (int i = 0; i < dS.rows; ++i) {
        const T* src = dXn.row(i);
        T* s = dS.row(i);
        for (int c = 0; c < h; ++c) s[c] += src[c];
        std::copy(src + h, src + 2 * h, dAgg.row(i));
    }
    Mat<T> dMsg(E, h);
    for (int e = 0; e < E; ++e) {
        const T* src = dAgg.row(g.edges[static_cast<std::size_t>(e)].recv);
        std::copy(src, src + h, dMsg.row(e));
    }
    Mat<T> dXe = mlp_backward(edge_net, cache.edge_cache, dMsg, edge_grads);
    for (int e = 0; e < E; ++e) {
        const T* src = dXe.row(e);
        T* dr = dS.row(g.edges[static_cast<std::size_t>(e)].recv);
        T* ds = dS.row(g.edges[static_cast<std::size_t>(e)].send);
        T* de = dE.row(e);
        for (int c = 0; c < h; ++c) {
            dr[c] += src[c];
            ds[c] += src[h + c];
            de[c] += src[2 * h + c];
        }
    }
}

// Edge-update pair net: per edge (receiver half, sender half) -> residual on
// the edge half. Used only in updated edge mode.
template <std::floating_point T>
Mat<T> pairnet_eval(const Mlp<T>& net, const Mat<T>& S, const RadiusGraph& g,
                    std::type_identity_t<MlpCache<T>*> cache) {
    const int h = S.cols;
    Mat<T> X(g.n_edges(), 2 * h);
    for (int e = 0; e < g.n_edges(); ++e) {
        const T* sr = S.row(g.edges[static_cast<std::size_t>(e)].recv);
        const T* ss = S.row(g.edges[static_cast<std::size_t>(e)].send);
        std::copy(sr, sr + h, X.row(e));
        std::copy(ss, ss + h, X.row(e) + h);
    }
    return mlp_forward(net, X, cache);
}

template <std::floating_point T>
void pairnet_vjp(const Mlp<T>& net, const MlpCache<T>& cache, const Mat<T>& dOut,
                 const RadiusGraph& g, Mat<T>& dS, Mlp<T>& grads) {
    const int h = dS.cols;
    Mat<T> dX = mlp_backward(net, cache, dOut, grads);
    for (int e = 0; e < g.n_edges(); ++e) {
        const T* src = dX.row(e);
        T* dr = dS.row(g.edges[static_cast<std::size_t>(e)].recv);
        T* ds = dS.row(g.edges[static_cast<std::size_t>(e)].send);
        for (int c = 0; c < h; ++c) {
            dr[c] += src[c];
            ds[c] += src[h + c];
        }
    }
}

template <std::floating_point T>
void add_inplace(Mat<T>& dst, const Mat<T>& src, T sign) {
    for (std::size_t i = 0; i < dst.a.size(); ++i) dst.a[i] += sign * src.a[i];
}

template <std::floating_point T>
double max_abs_diff(const Mat<T>& a, const Mat<T>& b) {
    double m = 0;
    for (std::size_t i = 0; i < a.a.size(); ++i)
        m = std::max(m, std::abs(static_cast<double>(a.a[i]) - static_cast<double>(b.a[i])));
    return m;
}

}  // namespace detail

template <std::floating_point T>
StackState<T> layer_forward(const RrmpLayer<T>& L, EdgeMode mode, const StackState<T>& x,
                            const RadiusGraph& g) {
    StackState<T> y = x;
    Mat<T> m1 = detail::coupling_eval(L.f_edge, L.f_node, x.n2, x.e2, g, nullptr);
    detail::add_inplace(y.n1, m1, T(1));
    Mat<T> m2 = detail::coupling_eval(L.g_edge, L.g_node, y.n1, x.e1, g, nullptr);
    detail::add_inplace(y.n2, m2, T(1));
    if (mode == EdgeMode::updated) {
        Mat<T> u1 = detail::pairnet_eval(L.g_edge_upd, y.n1, g, nullptr);
        detail::add_inplace(y.e1, u1, T(1));
        Mat<T> u2 = detail::pairnet_eval(L.f_edge_upd, y.n2, g, nullptr);
        detail::add_inplace(y.e2, u2, T(1));
    }
    return y;
}

template <std::floating_point T>
StackState<T> layer_inverse(const RrmpLayer<T>& L, EdgeMode mode, const StackState<T>& y,
                            const RadiusGraph& g) {
    StackState<T> x = y;
    if (mode == EdgeMode::updated) {
        Mat<T> u2 = detail::pairnet_eval(L.f_edge_upd, y.n2, g, nullptr);
        detail::add_inplace(x.e2, u2, T(-1));
        Mat<T> u1 = detail::pairnet_eval(L.g_edge_upd, y.n1, g, nullptr);
        detail::add_inplace(x.e1, u1, T(-1));
    }
    Mat<T> m2 = detail::coupling_eval(L.g_edge, L.g_node, y.n1, x.e1, g, nullptr);
    detail::add_inplace(x.n2, m2, T(-1));
    Mat<T> m1 = detail::coupling_eval(L.f_edge, L.f_node, x.n2, x.e2, g, nullptr);
    detail::add_inplace(x.n1, m1, T(-1));
    return x;
}

template <std::floating_point T>
StackState<T> stack_forward(const RrmpStack<T>& s, StackState<T> x, const RadiusGraph& g) {
    for (const auto& L : s.layers) x = layer_forward(L, s.edge_mode, x, g);
    return x;
}

template <std::floating_point T>
StackState<T> stack_inverse(const RrmpStack<T>& s, StackState<T> y, const RadiusGraph& g) {
    for (auto it = s.layers.rbegin(); it != s.layers.rend(); ++it)
        y = layer_inverse(*it, s.edge_mode, y, g);
    return y;
}

enum class BackwardMode { recompute, stored };

struct BackwardStats {
    int peak_saved_states = 0;  // latent snapshots retained simultaneously
    double max_drift = 0.0;     // recomputation drift against the carried state
};

namespace detail {

// VJP of y = layer_forward(L, x). Couplings are re-evaluated from x with
// caches; if y is supplied the recomputation drift is recorded.
template <std::floating_point T>
StackState<T> layer_forward_vjp(const RrmpLayer<T>& L, EdgeMode mode, const StackState<T>& x,
                                std::type_identity_t<const StackState<T>*> y, const StackState<T>& dy,
                                const RadiusGraph& g, RrmpLayer<T>& gr, double* drift) {
    CouplingCache<T> cf, cg;
    MlpCache<T> cu1, cu2;
    Mat<T> m1 = coupling_eval(L.f_edge, L.f_node, x.n2, x.e2, g, &cf);
    Mat<T> n1p = x.n1;
    add_inplace(n1p, m1, T(1));
    Mat<T> m2 = coupling_eval(L.g_edge, L.g_node, n1p, x.e1, g, &cg);
    if (drift && y) {
        Mat<T> n2p = x.n2;
        add_inplace(n2p, m2, T(1));
        *drift = std::max(*drift, max_abs_diff(n1p, y->n1));
        *drift = std::max(*drift, max_abs_diff(n2p, y->n2));
    }
    Mat<T> u1, u2;
    if (mode == EdgeMode::updated) {
        u1 = pairnet_eval(L.g_edge_upd, n1p, g, &cu1);
        Mat<T> n2p = x.n2;
        add_inplace(n2p, m2, T(1));
        u2 = pairnet_eval(L.f_edge_upd, n2p, g, &cu2);
    }

    StackState<T> dx;
    dx.e1 = dy.e1;
    dx.e2 = dy.e2;
    Mat<T> dn1p = dy.n1;
    Mat<T> dn2p = dy.n2;
    if (mode == EdgeMode::updated) {
        pairnet_vjp(L.f_edge_upd, cu2, dy.e2, g, dn2p, gr.f_edge_upd);
        pairnet_vjp(L.g_edge_upd, cu1, dy.e1, g, dn1p, gr.g_edge_upd);
    }
    dx.n2 = dn2p;
    coupling_vjp(L.g_edge, L.g_node, cg, dn2p, g, dn1p, dx.e1, gr.g_edge, gr.g_node);
    dx.n1 = dn1p;
    coupling_vjp(L.f_edge, L.f_node, cf, dn1p, g, dx.n2, dx.e2, gr.f_edge, gr.f_node);
    return dx;
}

// VJP of x_prev = layer_inverse(L, x). Evaluation points are reconstructed
// by re-running the forward couplings from x_prev; the recomputed x is
// written to x_next_out so the recompute sweep can continue, and compared
// against x_true when provided.
template <std::floating_point T>
StackState<T> layer_inverse_vjp(const RrmpLayer<T>& L, EdgeMode mode, const StackState<T>& x_prev,
                                std::type_identity_t<const StackState<T>*> x_true,
                                const StackState<T>& d_prev, const RadiusGraph& g, RrmpLayer<T>& gr,
                                double* drift, std::type_identity_t<StackState<T>*> x_next_out) {
    CouplingCache<T> cf, cg;
    MlpCache<T> cu1, cu2;
    Mat<T> m1 = coupling_eval(L.f_edge, L.f_node, x_prev.n2, x_prev.e2, g, &cf);
    Mat<T> n1p = x_prev.n1;
    add_inplace(n1p, m1, T(1));
    Mat<T> m2 = coupling_eval(L.g_edge, L.g_node, n1p, x_prev.e1, g, &cg);
    Mat<T> n2p = x_prev.n2;
    add_inplace(n2p, m2, T(1));
    Mat<T> e1p = x_prev.e1, e2p = x_prev.e2;
    if (mode == EdgeMode::updated) {
        Mat<T> u1 = pairnet_eval(L.g_edge_upd, n1p, g, &cu1);
        add_inplace(e1p, u1, T(1));
        Mat<T> u2 = pairnet_eval(L.f_edge_upd, n2p, g, &cu2);
        add_inplace(e2p, u2, T(1));
    }
    if (drift && x_true) {
        *drift = std::max(*drift, max_abs_diff(n1p, x_true->n1));
        *drift = std::max(*drift, max_abs_diff(n2p, x_true->n2));
        *drift = std::max(*drift, max_abs_diff(e1p, x_true->e1));
        *drift = std::max(*drift, max_abs_diff(e2p, x_true->e2));
    }

    // d_prev is the upstream gradient wrt x_prev; walk the inverse map's
    // computation in reverse: n1_prev, then n2_prev, then the edge halves.
    Mat<T> dn1p = d_prev.n1;               // via n1_prev = n1' - F(...)
    Mat<T> dn2_total = d_prev.n2;
    Mat<T> de2_total = d_prev.e2;
    Mat<T> neg = d_prev.n1;
    for (auto& v : neg.a) v = -v;
    coupling_vjp(L.f_edge, L.f_node, cf, neg, g, dn2_total, de2_total, gr.f_edge, gr.f_node);

    Mat<T> dn2p = dn2_total;               // via n2_prev = n2' - G(...)
    Mat<T> de1_total = d_prev.e1;
    neg = dn2_total;
    for (auto& v : neg.a) v = -v;
    coupling_vjp(L.g_edge, L.g_node, cg, neg, g, dn1p, de1_total, gr.g_edge, gr.g_node);

    if (mode == EdgeMode::updated) {
        neg = de1_total;
        for (auto& v : neg.a) v = -v;
        pairnet_vjp(L.g_edge_upd, cu1, neg, g, dn1p, gr.g_edge_upd);
        neg = de2_total;
        for (auto& v : neg.a) v = -v;
        pairnet_vjp(L.f_edge_upd, cu2, neg, g, dn2p, gr.f_edge_upd);
    }

    if (x_next_out) {
        x_next_out->n1 = std::move(n1p);
        x_next_out->n2 = std::move(n2p);
        x_next_out->e1 = std::move(e1p);
        x_next_out->e2 = std::move(e2p);
    }
    StackState<T> dx;
    dx.n1 = std::move(dn1p);
    dx.n2 = std::move(dn2p);
    dx.e1 = std::move(de1_total);
    dx.e2 = std::move(de2_total);
    return dx;
}

}  // namespace detail

template <std::floating_point T>
struct StackGrads {
    std::vector<RrmpLayer<T>> layers;  // gradient tensors, same layout as the stack
};

template <std::floating_point T>
StackGrads<T> zeros_like(const RrmpStack<T>& s) {
    StackGrads<T> g;
    g.layers.reserve(s.layers.size());
    for (const auto& l : s.layers) g.layers.push_back(zeros_like(l));
    return g;
}

template <std::floating_point T>
double default_drift_guard() {
    return std::is_same_v<T, float> ? 1e-3 : 1e-9;
}

// Backward through stack_forward. `output` must be the true forward output;
// each layer's input is recomputed via layer_inverse, so only a constant
// number of latent snapshots is ever held. When the caller supplies the true
// stack input, the fully recomputed input is checked against it, which
// bounds the accumulated recomputation drift the gradients were exposed to.
template <std::floating_point T>
StackState<T> stack_backward(const RrmpStack<T>& s, const StackState<T>& output,
                             const StackState<T>& d_output, const RadiusGraph& g,
                             StackGrads<T>& grads, BackwardStats* stats = nullptr,
                             double drift_guard = default_drift_guard<T>(),
                             std::type_identity_t<const StackState<T>*> true_input = nullptr) {
    StackState<T> cur = output;
    StackState<T> d = d_output;
    int live = 1;
    double drift = 0;
    for (int l = s.depth() - 1; l >= 0; --l) {
        StackState<T> prev = layer_inverse(s.layers[static_cast<std::size_t>(l)], s.edge_mode, cur, g);
        live = 2;
        if (stats) stats->peak_saved_states = std::max(stats->peak_saved_states, live);
        d = detail::layer_forward_vjp(s.layers[static_cast<std::size_t>(l)], s.edge_mode, prev, &cur,
                                      d, g, grads.layers[static_cast<std::size_t>(l)], &drift);
        cur = std::move(prev);
        live = 1;
    }
    if (true_input) {
        drift = std::max(drift, detail::max_abs_diff(cur.n1, true_input->n1));
        drift = std::max(drift, detail::max_abs_diff(cur.n2, true_input->n2));
        drift = std::max(drift, detail::max_abs_diff(cur.e1, true_input->e1));
        drift = std::max(drift, detail::max_abs_diff(cur.e2, true_input->e2));
    }
    if (stats) stats->max_drift = std::max(stats->max_drift, drift);
    if (drift > drift_guard)
        throw numeric_error("stack_backward: recomputation drift " + std::to_string(drift) +
                            " exceeds guard " + std::to_string(drift_guard));
    return d;
}

// Reference mode: replays the forward pass from `input`, storing every layer
// state; activation storage grows linearly with depth.
template <std::floating_point T>
StackState<T> stack_backward_stored(const RrmpStack<T>& s, const StackState<T>& input,
                                    const StackState<T>& d_output, const RadiusGraph& g,
                                    StackGrads<T>& grads, BackwardStats* stats = nullptr) {
    std::vector<StackState<T>> states;
    states.reserve(static_cast<std::size_t>(s.depth()) + 1);
    states.push_back(input);
    for (int l = 0; l < s.depth(); ++l)
        states.push_back(layer_forward(s.layers[static_cast<std::size_t>(l)], s.edge_mode,
                                       states.back(), g));
    if (stats)
        stats->peak_saved_states =
            std::max(stats->peak_saved_states, static_cast<int>(states.size()));
    StackState<T> d = d_output;
    for (int l = s.depth() - 1; l >= 0; --l)
        d = detail::layer_forward_vjp<T>(s.layers[static_cast<std::size_t>(l)], s.edge_mode,
                                         states[static_cast<std::size_t>(l)], nullptr, d, g,
                                         grads.layers[static_cast<std::size_t>(l)], nullptr);
    return d;
}

// Backward through stack_inverse. `inv_output` is the inverse pass's result
// (the layer-0 state); the sweep recomputes forward and checks drift against
// `inv_input`, the state the inverse pass started from.
template <std::floating_point T>
StackState<T> stack_inverse_backward(const RrmpStack<T>& s, const StackState<T>& inv_output,
                                     const StackState<T>& inv_input, const StackState<T>& d_output,
                                     const RadiusGraph& g, StackGrads<T>& grads,
                                     BackwardStats* stats = nullptr,
                                     double drift_guard = default_drift_guard<T>()) {
    StackState<T> cur = inv_output;
    StackState<T> d = d_output;
    double drift = 0;
    for (int l = 0; l < s.depth(); ++l) {
        StackState<T> next;
        const bool last = (l + 1 == s.depth());
        d = detail::layer_inverse_vjp(s.layers[static_cast<std::size_t>(l)], s.edge_mode, cur,
                                      last ? &inv_input : nullptr, d, g,
                                      grads.layers[static_cast<std::size_t>(l)],
                                      last ? &drift : nullptr, &next);
        if (stats) stats->peak_saved_states = std::max(stats->peak_saved_states, 2);
        cur = std::move(next);
    }
    if (stats) stats->max_drift = std::max(stats->max_drift, drift);
    if (drift > drift_guard)
        throw numeric_error("stack_inverse_backward: recomputation drift " + std::to_string(drift) +
                            " exceeds guard " + std::to_string(drift_guard));
    return d;
}

template <std::floating_point T>
StackState<T> stack_inverse_backward_stored(const RrmpStack<T>& s, const StackState<T>& inv_input,
                                            const StackState<T>& d_output, const RadiusGraph& g,
                                            StackGrads<T>& grads, BackwardStats* stats = nullptr) {
    std::vector<StackState<T>> states;  // states[l] = layer-l state, built by the inverse pass
    states.resize(static_cast<std::size_t>(s.depth()) + 1);
    states[static_cast<std::size_t>(s.depth())] = inv_input;
    for (int l = s.depth() - 1; l >= 0; --l)
        states[static_cast<std::size_t>(l)] =
            layer_inverse(s.layers[static_cast<std::size_t>(l)], s.edge_mode,
                          states[static_cast<std::size_t>(l) + 1], g);
    if (stats)
        stats->peak_saved_states =
            std::max(stats->peak_saved_states, static_cast<int>(states.size()));
    StackState<T> d = d_output;
    for (int l = 0; l < s.depth(); ++l)
        d = detail::layer_inverse_vjp<T>(s.layers[static_cast<std::size_t>(l)], s.edge_mode,
                                         states[static_cast<std::size_t>(l)], nullptr, d, g,
                                         grads.layers[static_cast<std::size_t>(l)], nullptr,
                                         nullptr);
    return d;
}

}  // namespace rgns
