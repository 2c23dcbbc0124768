#pragma once

#include <torch/torch.h>

namespace poke2vid {

/// A recurrent unit with residual structure: next = state + delta(state, input).
class RecurrentCell : public torch::nn::Module {
public:
    virtual torch::Tensor step(const torch::Tensor& state, const torch::Tensor& input) = 0;
    virtual std::int64_t hidden_channels() const = 0;
    virtual std::int64_t input_channels() const = 0;

protected:
    void check_shapes(const torch::Tensor& state, const torch::Tensor& input) const;
};

/// Gate activations of one convolutional GRU evaluation.
struct GruGates {
    torch::Tensor update;     // z
    torch::Tensor reset;      // r
    torch::Tensor candidate;  // tanh(W [input, r * state])
};

/// Convolutional GRU: next = (1 - z) * state + z * candidate.
///
/// The same update reads state + G1 + G2 with G1 = -z * state and G2 = z * candidate,
/// so the cell is a residual step whose increment is gated by z.
class ConvGruCell final : public RecurrentCell {
public:
    ConvGruCell(std::int64_t input_channels, std::int64_t hidden_channels, std::int64_t kernel = 3);

    torch::Tensor step(const torch::Tensor& state, const torch::Tensor& input) override;
    std::int64_t hidden_channels() const override { return hidden_; }
    std::int64_t input_channels() const override { return input_; }

    GruGates gates(const torch::Tensor& state, const torch::Tensor& input);
    static torch::Tensor combine(const torch::Tensor& state, const torch::Tensor& update,
                                 const torch::Tensor& candidate);

    /// Zeroes every weight and the candidate bias and saturates the update gate shut, so
    /// that step() returns the state unchanged.
    void make_identity();

    torch::nn::Conv2d gate_conv{nullptr};       // -> [z, r]
    torch::nn::Conv2d candidate_conv{nullptr};  // -> candidate

private:
    std::int64_t input_;
    std::int64_t hidden_;
};

/// Explicit Euler step of a linear vector field, next = state + h * (a * state + b * input).
/// Used to compare the hierarchy against hand-written integrators.
class LinearResidualCell final : public RecurrentCell {
public:
    LinearResidualCell(std::int64_t channels, double state_coeff, double input_coeff, double step_size);

    torch::Tensor step(const torch::Tensor& state, const torch::Tensor& input) override;
    std::int64_t hidden_channels() const override { return channels_; }
    std::int64_t input_channels() const override { return channels_; }

    double state_coeff() const { return a_; }
    double input_coeff() const { return b_; }
    double step_size() const { return h_; }

private:
    std::int64_t channels_;
    double a_, b_, h_;
};

}  // namespace poke2vid
