#pragma once

#include <string>
#include <vector>

#include "qnode/diff/params.hpp"
#include "qnode/diff/tensor.hpp"

namespace qnode::diff {

// Row-vector convention throughout: a batch is (B x features) and a layer
// computes x W + b with W of shape (in x out) and b of shape (1 x out).

/// Parameters "<prefix>.W<i>" and "<prefix>.b<i>" for consecutive widths.
std::vector<ParamSpec> mlp_arch(const std::string& prefix, const std::vector<std::size_t>& widths);

/// x W + b, with b tiled over the batch rows.
Tensor affine(const ParamStore& params, const std::string& weight, const std::string& bias,
              const Tensor& x);

/// tanh on hidden layers, identity on the output layer.
Tensor mlp_forward(const ParamStore& params, const std::string& prefix, const Tensor& input,
                   const std::vector<std::size_t>& widths);

std::vector<ParamSpec> gru_arch(const std::string& prefix, std::size_t input, std::size_t hidden);

/// z = s(x Wz + h Uz + bz), r = s(x Wr + h Ur + br),
/// c = tanh(x Wh + (r*h) Uh + bh), h' = (1 - z) * h + z * c.
Tensor gru_cell(const ParamStore& params, const std::string& prefix, const Tensor& x,
                const Tensor& h_prev);

std::vector<ParamSpec> rnn_arch(const std::string& prefix, std::size_t input, std::size_t hidden);

/// Elman cell: h' = tanh(x W + h U + b).
Tensor rnn_cell(const ParamStore& params, const std::string& prefix, const Tensor& x,
                const Tensor& h_prev);

}  // namespace qnode::diff
