#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "fws/errors.hpp"
#include "fws/net.hpp"

namespace fws {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    void validate() const {
        if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
            throw ConfigError("adam: betas must lie in [0, 1)");
        }
        if (!(epsilon > 0.0)) throw ConfigError("adam: epsilon must be > 0");
    }
};

// First/second moment accumulators, shaped exactly like the parameters they
// track (head included when present).
struct AdamState {
    Params m, v;
    long long step = 0;

    static AdamState for_params(const Params& p) {
        AdamState s;
        s.m = Params::zeros_like(p);
        s.v = Params::zeros_like(p);
        return s;
    }
};

namespace detail {

inline void adam_update_span(std::vector<double>& p, std::vector<double>& m,
                             std::vector<double>& v, const std::vector<double>& g, double lr,
                             const AdamConfig& cfg, double bc1, double bc2) {
    for (std::size_t i = 0; i < p.size(); ++i) {
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
        const double m_hat = m[i] / bc1;
        const double v_hat = v[i] / bc2;
        p[i] -= lr * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
}

inline void require_same_shape(const Params& a, const Params& b, const char* what) {
    if (a.layers.size() != b.layers.size() || a.head.size() != b.head.size()) {
        throw StateError(std::string("adam_step: ") + what + " shape mismatch");
    }
    for (std::size_t i = 0; i < a.layers.size(); ++i) {
        if (a.layers[i].w.size() != b.layers[i].w.size() ||
            a.layers[i].b.size() != b.layers[i].b.size()) {
            throw StateError(std::string("adam_step: ") + what + " shape mismatch at layer " +
                             std::to_string(i));
        }
    }
}

}  // namespace detail

// One bias-corrected Adam update of `params` in place. `grads` must be shaped
// like `params`; entries whose gradient and accumulated moments are both zero
// keep their value exactly.
inline void adam_step(Params& params, AdamState& state, const Params& grads, double lr,
                      const AdamConfig& cfg = {}) {
    cfg.validate();
    if (lr < 0.0) throw ConfigError("adam_step: negative learning rate");
    detail::require_same_shape(params, grads, "gradient");
    detail::require_same_shape(params, state.m, "state");

    state.step += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (std::size_t li = 0; li < params.layers.size(); ++li) {
        detail::adam_update_span(params.layers[li].w, state.m.layers[li].w, state.v.layers[li].w,
                                 grads.layers[li].w, lr, cfg, bc1, bc2);
        detail::adam_update_span(params.layers[li].b, state.m.layers[li].b, state.v.layers[li].b,
                                 grads.layers[li].b, lr, cfg, bc1, bc2);
    }
    detail::adam_update_span(params.head, state.m.head, state.v.head, grads.head, lr, cfg, bc1,
                             bc2);
}

}  // namespace fws
