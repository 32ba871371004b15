#include "arbsr/tensor.hpp"

#include <sstream>

namespace arbsr {

std::string Shape4::str() const {
    std::ostringstream os;
    os << n << "x" << c << "x" << h << "x" << w;
    return os.str();
}

Tensor::Tensor(Shape4 s, real fill) : shape(s) {
    if (s.n < 1 || s.c < 1 || s.h < 1 || s.w < 1)
        throw shape_error("tensor shape components must be >= 1, got " + s.str());
    data.assign(size_t(s.elems()), fill);
}

Tensor::Tensor(int n, int c, int h, int w, real fill) : Tensor(Shape4{n, c, h, w}, fill) {}

void Tensor::ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), real(0));
}

void Tensor::clear_grad() {
    std::fill(grad.begin(), grad.end(), real(0));
}

Parameter::Parameter(std::string param_name, Shape4 s)
    : name(std::move(param_name)), value(s), grad(s), adam_m(s), adam_v(s) {}

void check_same_shape(const Tensor& a, const Tensor& b, const char* who) {
    if (!(a.shape == b.shape))
        throw shape_error(std::string(who) + ": shape mismatch " + a.shape.str() +
                          " vs " + b.shape.str());
}

}  // namespace arbsr
