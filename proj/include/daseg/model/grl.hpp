#pragma once

#include <torch/torch.h>

namespace daseg {

/// Non-negative gradient reversal strength.
class GrlCoefficient {
public:
    explicit GrlCoefficient(double alpha = 0.0);
    double alpha() const { return alpha_; }

private:
    double alpha_;
};

/// Identity on the forward pass; multiplies the incoming gradient by -alpha on the way back.
struct GradientReversal : public torch::autograd::Function<GradientReversal> {
    static torch::Tensor forward(torch::autograd::AutogradContext* ctx, const torch::Tensor& x, double alpha);
    static torch::autograd::variable_list backward(torch::autograd::AutogradContext* ctx,
                                                   torch::autograd::variable_list grad_output);
};

torch::Tensor grl(const torch::Tensor& x, GrlCoefficient coeff);

}  // namespace daseg
