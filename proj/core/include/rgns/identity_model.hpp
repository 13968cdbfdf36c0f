#pragma once

#include "rgns/model.hpp"

namespace rgns {

// Diagnostic configuration: zero-weight stack and padding codec W = [I; 0],
// B = 0. Every latent update is the identity, so a forward step reduces to
// constant-velocity extrapolation and the decode path is exact. Used by the
// identity-pipeline checks.
template <std::floating_point T>
ModelParams<T> make_identity_model(ModelConfig cfg) {
    cfg.codec = CodecMode::ilp;
    cfg.validate();
    ModelParams<T> m = init_model<T>(cfg, /*seed=*/0);
    for (auto& t : collect_params(m)) std::fill(t.data, t.data + t.size, T(0));
    for (int i = 0; i < cfg.phys_dim(); ++i) m.codec.ilp.W(i, i) = T(1);
    refresh_pinv(m.codec.ilp);
    m.norm.mean.assign(static_cast<std::size_t>(cfg.dims), 0.0);
    m.norm.stdev.assign(static_cast<std::size_t>(cfg.dims), 1.0);
    return m;
}

}  // namespace rgns
