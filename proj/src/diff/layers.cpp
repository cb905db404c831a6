#include "qnode/diff/layers.hpp"

#include "qnode/error.hpp"

namespace qnode::diff {

namespace {

std::vector<ParamSpec> gate_params(const std::string& prefix, const std::string& gate,
                                   std::size_t input, std::size_t hidden) {
  return {{prefix + ".W" + gate, {input, hidden}, ParamRole::Weight},
          {prefix + ".U" + gate, {hidden, hidden}, ParamRole::Weight},
          {prefix + ".b" + gate, {1, hidden}, ParamRole::Bias}};
}

Tensor gate_preactivation(const ParamStore& p, const std::string& prefix, const std::string& gate,
                          const Tensor& x, const Tensor& h) {
  return matmul(x, p.get(prefix + ".W" + gate)) + matmul(h, p.get(prefix + ".U" + gate)) +
         repeat_rows(p.get(prefix + ".b" + gate), x.rows());
}

void check_cell_inputs(const ParamStore& p, const std::string& weight, const Tensor& x,
                       const Tensor& h) {
  const Tensor& w = p.get(weight);
  if (x.rank() != 2 || h.rank() != 2 || x.rows() != h.rows() || x.cols() != w.rows() ||
      h.cols() != w.cols()) {
    fail(ErrorKind::ShapeMismatch, "recurrent cell: x " + shape_string(x.shape()) + ", h " +
                                       shape_string(h.shape()) + ", W " + shape_string(w.shape()));
  }
}

}  // namespace

std::vector<ParamSpec> mlp_arch(const std::string& prefix, const std::vector<std::size_t>& widths) {
  if (widths.size() < 2) fail(ErrorKind::InvalidArgument, "mlp_arch: need at least two widths");
  std::vector<ParamSpec> out;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    out.push_back({prefix + ".W" + std::to_string(i), {widths[i], widths[i + 1]}, ParamRole::Weight});
    out.push_back({prefix + ".b" + std::to_string(i), {1, widths[i + 1]}, ParamRole::Bias});
  }
  return out;
}

Tensor affine(const ParamStore& params, const std::string& weight, const std::string& bias,
              const Tensor& x) {
  return matmul(x, params.get(weight)) + repeat_rows(params.get(bias), x.rows());
}

Tensor mlp_forward(const ParamStore& params, const std::string& prefix, const Tensor& input,
                   const std::vector<std::size_t>& widths) {
  if (input.rank() != 2 || input.cols() != widths.front()) {
    fail(ErrorKind::ShapeMismatch, "mlp_forward(" + prefix + "): input " +
                                       shape_string(input.shape()) + " but arch expects width " +
                                       std::to_string(widths.front()));
  }
  Tensor h = input;
  const std::size_t layers = widths.size() - 1;
  for (std::size_t i = 0; i < layers; ++i) {
    const std::string idx = std::to_string(i);
    h = affine(params, prefix + ".W" + idx, prefix + ".b" + idx, h);
    if (i + 1 < layers) h = tanh(h);
  }
  return h;
}

std::vector<ParamSpec> gru_arch(const std::string& prefix, std::size_t input, std::size_t hidden) {
  std::vector<ParamSpec> out;
  for (const char* gate : {"z", "r", "h"}) {
    auto g = gate_params(prefix, gate, input, hidden);
    out.insert(out.end(), g.begin(), g.end());
  }
  return out;
}

Tensor gru_cell(const ParamStore& params, const std::string& prefix, const Tensor& x,
                const Tensor& h_prev) {
  check_cell_inputs(params, prefix + ".Wz", x, h_prev);
  const Tensor z = sigmoid(gate_preactivation(params, prefix, "z", x, h_prev));
  const Tensor r = sigmoid(gate_preactivation(params, prefix, "r", x, h_prev));
  const Tensor candidate = tanh(gate_preactivation(params, prefix, "h", x, r * h_prev));
  return (Tensor::scalar(1.0) - z) * h_prev + z * candidate;
}

std::vector<ParamSpec> rnn_arch(const std::string& prefix, std::size_t input, std::size_t hidden) {
  return gate_params(prefix, "", input, hidden);
}

Tensor rnn_cell(const ParamStore& params, const std::string& prefix, const Tensor& x,
                const Tensor& h_prev) {
  check_cell_inputs(params, prefix + ".W", x, h_prev);
  return tanh(gate_preactivation(params, prefix, "", x, h_prev));
}

}  // namespace qnode::diff
