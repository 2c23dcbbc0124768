#include "poke2vid/dynamics/cells.hpp"

#include <limits>
#include <string>

#include "poke2vid/common.hpp"

namespace poke2vid {

namespace nn = torch::nn;

void RecurrentCell::check_shapes(const torch::Tensor& state, const torch::Tensor& input) const {
    if (state.dim() != 4 || state.size(1) != hidden_channels())
        throw ValidationError("cell state must be [B, " + std::to_string(hidden_channels()) + ", S, S], got " +
                              c10::str(state.sizes()));
    if (input.dim() != 4 || input.size(1) != input_channels() || input.size(0) != state.size(0) ||
        input.size(2) != state.size(2) || input.size(3) != state.size(3))
        throw ValidationError("cell input " + c10::str(input.sizes()) + " does not match state " +
                              c10::str(state.sizes()));
}

ConvGruCell::ConvGruCell(std::int64_t input_channels, std::int64_t hidden_channels, std::int64_t kernel)
    : input_(input_channels), hidden_(hidden_channels) {
    const auto pad = kernel / 2;
    gate_conv = register_module(
        "gate_conv", nn::Conv2d(nn::Conv2dOptions(input_ + hidden_, 2 * hidden_, kernel).padding(pad)));
    candidate_conv = register_module(
        "candidate_conv", nn::Conv2d(nn::Conv2dOptions(input_ + hidden_, hidden_, kernel).padding(pad)));
}

GruGates ConvGruCell::gates(const torch::Tensor& state, const torch::Tensor& input) {
    check_shapes(state, input);
    auto zr = torch::sigmoid(gate_conv(torch::cat({input, state}, 1))).chunk(2, 1);
    auto candidate = torch::tanh(candidate_conv(torch::cat({input, zr[1] * state}, 1)));
    return GruGates{zr[0], zr[1], candidate};
}

torch::Tensor ConvGruCell::combine(const torch::Tensor& state, const torch::Tensor& update,
                                   const torch::Tensor& candidate) {
    return state + update * (candidate - state);
}

torch::Tensor ConvGruCell::step(const torch::Tensor& state, const torch::Tensor& input) {
    auto g = gates(state, input);
    return combine(state, g.update, g.candidate);
}

void ConvGruCell::make_identity() {
    torch::NoGradGuard no_grad;
    gate_conv->weight.zero_();
    candidate_conv->weight.zero_();
    candidate_conv->bias.zero_();
    gate_conv->bias.zero_();
    // exp(1000) overflows, so sigmoid(-1000) is exactly 0.
    gate_conv->bias.slice(0, 0, hidden_).fill_(-1000.0);
}

LinearResidualCell::LinearResidualCell(std::int64_t channels, double state_coeff, double input_coeff,
                                       double step_size)
    : channels_(channels), a_(state_coeff), b_(input_coeff), h_(step_size) {}

torch::Tensor LinearResidualCell::step(const torch::Tensor& state, const torch::Tensor& input) {
    check_shapes(state, input);
    return state + h_ * (a_ * state + b_ * input);
}

}  // namespace poke2vid
