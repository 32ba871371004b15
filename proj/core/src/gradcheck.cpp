#include "arbsr/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace arbsr {

real rel_err(real a, real n) {
    const real denom = std::max({std::abs(a), std::abs(n), real(1e-8)});
    return std::abs(a - n) / denom;
}

GradReport grad_check(const std::vector<Parameter*>& params,
                      const std::function<real()>& loss,
                      const std::function<void()>& compute_grads,
                      real h, std::int64_t max_per_param) {
    compute_grads();
    GradReport report;
    for (Parameter* p : params) {
        const std::int64_t n = p->value.size();
        std::int64_t stride = 1;
        if (max_per_param > 0 && n > max_per_param) stride = n / max_per_param;
        for (std::int64_t i = 0; i < n; i += stride) {
            real& v = p->value.data[(std::size_t)i];
            const real saved = v;
            v = saved + h;
            const real f_plus = loss();
            v = saved - h;
            const real f_minus = loss();
            v = saved;
            const real numeric = (f_plus - f_minus) / (2 * h);
            const real analytic = p->grad.data[(std::size_t)i];
            const real rel = rel_err(analytic, numeric);
            report.checked += 1;
            if (rel > report.max_rel) {
                report.max_rel = rel;
                report.worst = GradProbe{p->name, i, analytic, numeric, rel};
            }
        }
    }
    return report;
}

}  // namespace arbsr
