#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "arbsr/common.hpp"

namespace arbsr {

/// N x C x H x W dense shape. All components are >= 1.
struct Shape4 {
    int n = 1, c = 1, h = 1, w = 1;

    std::int64_t elems() const {
        return std::int64_t(n) * c * h * w;
    }
    bool operator==(const Shape4&) const = default;
    std::string str() const;
};

/// Dense row-major NCHW tensor, the universal value type. The gradient
/// buffer is allocated on demand and always matches the data shape.
class Tensor {
public:
    Shape4 shape;
    std::vector<real> data;
    std::vector<real> grad;  // empty means "no gradient buffer"

    Tensor() = default;
    explicit Tensor(Shape4 s, real fill = real(0));
    Tensor(int n, int c, int h, int w, real fill = real(0));

    std::int64_t size() const { return shape.elems(); }

    real& at(int n, int c, int y, int x) {
        return data[idx(n, c, y, x)];
    }
    const real& at(int n, int c, int y, int x) const {
        return data[idx(n, c, y, x)];
    }
    std::int64_t idx(int in, int ic, int iy, int ix) const {
        return ((std::int64_t(in) * shape.c + ic) * shape.h + iy) * shape.w + ix;
    }

    real* plane(int in, int ic) {
        return data.data() + (std::int64_t(in) * shape.c + ic) * shape.h * shape.w;
    }
    const real* plane(int in, int ic) const {
        return data.data() + (std::int64_t(in) * shape.c + ic) * shape.h * shape.w;
    }

    void ensure_grad();
    void clear_grad();

    bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

/// A learnable tensor with its gradient accumulator and Adam state.
/// All four tensors share one shape; `step` counts Adam updates.
struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;
    Tensor adam_m;
    Tensor adam_v;
    std::int64_t step = 0;

    Parameter() = default;
    Parameter(std::string param_name, Shape4 s);

    std::int64_t size() const { return value.size(); }
};

void check_same_shape(const Tensor& a, const Tensor& b, const char* who);

}  // namespace arbsr
