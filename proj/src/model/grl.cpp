#include "daseg/model/grl.hpp"

#include <cmath>
#include <string>

#include "daseg/error.hpp"

namespace daseg {

GrlCoefficient::GrlCoefficient(double alpha) : alpha_(alpha) {
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
        throw ConfigError("GRL coefficient must be finite and non-negative, got " + std::to_string(alpha));
    }
}

torch::Tensor GradientReversal::forward(torch::autograd::AutogradContext* ctx, const torch::Tensor& x,
                                        double alpha) {
    ctx->saved_data["alpha"] = alpha;
    return x.view_as(x);
}

torch::autograd::variable_list GradientReversal::backward(torch::autograd::AutogradContext* ctx,
                                                          torch::autograd::variable_list grad_output) {
    const double alpha = ctx->saved_data["alpha"].toDouble();
    return {grad_output[0] * (-alpha), torch::Tensor()};
}

torch::Tensor grl(const torch::Tensor& x, GrlCoefficient coeff) { return GradientReversal::apply(x, coeff.alpha()); }

}  // namespace daseg
