#pragma once

#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ana/tape.hpp"

namespace ana {

enum class Activation { Tanh, Sigmoid, Linear };

// How the latent noise fed into a generator network is drawn.
struct NoiseSpec {
    enum class Kind { StandardNormal, Uniform } kind = Kind::StandardNormal;
    int dim = 10;  // Uniform draws from [-1, 1]^dim
};

// Fully connected network.  Weights are row-major (out x in), one matrix and
// one bias vector per layer.  Parameters live here as plain doubles; each
// training iteration stages them onto the tape as fresh leaves.
struct Mlp {
    std::vector<int> widths;  // input, hidden..., output
    std::vector<std::vector<double>> weights;
    std::vector<std::vector<double>> biases;
    Activation hidden_activation = Activation::Tanh;
    Activation output_activation = Activation::Linear;

    int layer_count() const { return static_cast<int>(widths.size()) - 1; }
    int input_dim() const { return widths.front(); }
    int output_dim() const { return widths.back(); }
    std::size_t parameter_count() const;

    // Flat parameter layout: per layer, weights row-major then biases.
    std::vector<double> flatten() const;
    void set_from_flat(std::span<const double> flat);
};

// Glorot-uniform weights (+-sqrt(6/(fan_in+fan_out))), zero biases.
Mlp make_mlp(const std::vector<int>& widths, Activation hidden, Activation output,
             std::mt19937_64& rng);

// Tape handles for one staging of the parameters.
struct StagedMlp {
    std::vector<Var> weights;
    std::vector<Var> biases;
};

StagedMlp stage_mlp(Tape& tape, const Mlp& net);

// input is (input_dim x batch); returns (output_dim x batch).
Var mlp_forward(Tape& tape, const Mlp& net, const StagedMlp& staged, Var input);

// Convenience: stages and runs in one go (gradients not needed for the net).
Var mlp_forward(Tape& tape, const Mlp& net, Var input);

// Reads d(root)/d(parameter) after backward(), in flatten() order.
std::vector<double> mlp_gradient(const Tape& tape, const StagedMlp& staged);

// Draws a noise batch (dim x count) for a generator input.
std::vector<double> draw_noise(const NoiseSpec& spec, int count, std::mt19937_64& rng);

// Clips every weight and bias into [-c, c] (Wasserstein critic constraint).
void clip_weights(Mlp& net, double c);

// Plain (tape-free) forward pass for a single column vector.
std::vector<double> mlp_apply(const Mlp& net, std::span<const double> input);

// Text serialization: a widths header, then parameters in flatten() order,
// printed so that doubles round-trip exactly.
void save_mlp(std::ostream& os, const Mlp& net);
Mlp load_mlp(std::istream& is);
void save_mlp_file(const std::string& path, const Mlp& net);
Mlp load_mlp_file(const std::string& path);

}  // namespace ana
