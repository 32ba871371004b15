#include "arbsr/ops.hpp"

#include <algorithm>
#include <cmath>

namespace arbsr {

void adam_step(const std::vector<Parameter*>& params, real lr, const AdamConfig& cfg) {
    for (Parameter* p : params) {
        if (!p) throw shape_error("adam_step: null parameter");
        check_same_shape(p->value, p->grad, "adam_step");
        check_same_shape(p->value, p->adam_m, "adam_step");
        p->step += 1;
        const real b1t = real(1) - std::pow(cfg.beta1, (real)p->step);
        const real b2t = real(1) - std::pow(cfg.beta2, (real)p->step);
        const std::size_t n = p->value.data.size();
        for (std::size_t i = 0; i < n; ++i) {
            const real g = p->grad.data[i];
            real& m = p->adam_m.data[i];
            real& v = p->adam_v.data[i];
            m = cfg.beta1 * m + (real(1) - cfg.beta1) * g;
            v = cfg.beta2 * v + (real(1) - cfg.beta2) * g * g;
            const real mhat = m / b1t;
            const real vhat = v / b2t;
            p->value.data[i] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
        std::fill(p->grad.data.begin(), p->grad.data.end(), real(0));
    }
}

}  // namespace arbsr
