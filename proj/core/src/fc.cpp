#include "arbsr/ops.hpp"

#include <string>

#include "arbsr/gemm.hpp"
#include "arbsr/threading.hpp"

namespace arbsr {

namespace {

void check_fc(const Tensor& input, const Tensor& weight, std::size_t bias_len,
              const char* who) {
    if (input.shape.c != 1 || input.shape.h != 1)
        throw shape_error(std::string(who) + ": input rows must be Bx1x1xD, got " +
                          input.shape.str());
    if (weight.shape.n != 1 || weight.shape.c != 1)
        throw shape_error(std::string(who) + ": weight must be 1x1xDoutxDin, got " +
                          weight.shape.str());
    if (weight.shape.w != input.shape.w)
        throw shape_error(std::string(who) + ": weight expects " +
                          std::to_string(weight.shape.w) + " inputs, rows have " +
                          std::to_string(input.shape.w));
    if (bias_len != 0 && (int)bias_len != weight.shape.h)
        throw shape_error(std::string(who) + ": bias size mismatch");
}

}  // namespace

Tensor fully_connected(const Tensor& input, const Tensor& weight,
                       const std::vector<real>& bias) {
    check_fc(input, weight, bias.size(), "fully_connected");
    const int b = input.shape.n;
    const int d_in = input.shape.w;
    const int d_out = weight.shape.h;
    Tensor out(Shape4{b, 1, 1, d_out});
    threads::max();
    // out (B x Dout) = in (B x Din) * W^T (Din x Dout)
    gemm(false, true, b, d_out, d_in, real(1), input.data.data(), d_in,
         weight.data.data(), d_in, real(0), out.data.data(), d_out);
    if (!bias.empty()) {
        for (int r = 0; r < b; ++r) {
            real* row = out.data.data() + (std::size_t)r * d_out;
            for (int j = 0; j < d_out; ++j) row[j] += bias[j];
        }
    }
    return out;
}

void fully_connected_backward(const Tensor& input, const Tensor& weight,
                              const Tensor& grad_out, Tensor* grad_input,
                              Tensor* grad_weight, std::vector<real>* grad_bias) {
    check_fc(input, weight, 0, "fully_connected_backward");
    const int b = input.shape.n;
    const int d_in = input.shape.w;
    const int d_out = weight.shape.h;
    const Shape4 want{b, 1, 1, d_out};
    if (!(grad_out.shape == want))
        throw shape_error("fully_connected_backward: grad_out is " + grad_out.shape.str() +
                          ", expected " + want.str());
    if (grad_input && !(grad_input->shape == input.shape))
        throw shape_error("fully_connected_backward: grad_input shape mismatch");
    if (grad_weight && !(grad_weight->shape == weight.shape))
        throw shape_error("fully_connected_backward: grad_weight shape mismatch");
    if (grad_bias && (int)grad_bias->size() != d_out)
        throw shape_error("fully_connected_backward: grad_bias size mismatch");
    threads::max();

    if (grad_input) {
        // dX (B x Din) = dY (B x Dout) * W (Dout x Din)
        gemm(false, false, b, d_in, d_out, real(1), grad_out.data.data(), d_out,
             weight.data.data(), d_in, real(0), grad_input->data.data(), d_in);
    }
    if (grad_weight) {
        // dW (Dout x Din) += dY^T (Dout x B) * X (B x Din)
        gemm(true, false, d_out, d_in, b, real(1), grad_out.data.data(), d_out,
             input.data.data(), d_in, real(1), grad_weight->data.data(), d_in);
    }
    if (grad_bias) {
        for (int j = 0; j < d_out; ++j) {
            real acc = 0;
            for (int r = 0; r < b; ++r) acc += grad_out.data[(std::size_t)r * d_out + j];
            (*grad_bias)[j] += acc;
        }
    }
}

}  // namespace arbsr
