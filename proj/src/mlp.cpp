#include "ana/mlp.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "ana/errors.hpp"

namespace ana {

namespace {

const char* activation_name(Activation a) {
    switch (a) {
        case Activation::Tanh: return "tanh";
        case Activation::Sigmoid: return "sigmoid";
        case Activation::Linear: return "linear";
    }
    return "?";
}

Activation activation_from_name(const std::string& s) {
    if (s == "tanh") return Activation::Tanh;
    if (s == "sigmoid") return Activation::Sigmoid;
    if (s == "linear") return Activation::Linear;
    throw IoError("unknown activation '" + s + "'");
}

Var apply_activation(Tape& tape, Activation a, Var x) {
    switch (a) {
        case Activation::Tanh: return tape.tanh(x);
        case Activation::Sigmoid: return tape.sigmoid(x);
        case Activation::Linear: return x;
    }
    throw ContractError("bad activation");
}

double apply_activation(Activation a, double x) {
    switch (a) {
        case Activation::Tanh: return std::tanh(x);
        case Activation::Sigmoid:
            return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                            : std::exp(x) / (1.0 + std::exp(x));
        case Activation::Linear: return x;
    }
    throw ContractError("bad activation");
}

}  // namespace

std::size_t Mlp::parameter_count() const {
    std::size_t n = 0;
    for (int l = 0; l < layer_count(); ++l)
        n += weights[l].size() + biases[l].size();
    return n;
}

std::vector<double> Mlp::flatten() const {
    std::vector<double> flat;
    flat.reserve(parameter_count());
    for (int l = 0; l < layer_count(); ++l) {
        flat.insert(flat.end(), weights[l].begin(), weights[l].end());
        flat.insert(flat.end(), biases[l].begin(), biases[l].end());
    }
    return flat;
}

void Mlp::set_from_flat(std::span<const double> flat) {
    if (flat.size() != parameter_count())
        throw ShapeError("set_from_flat: got " + std::to_string(flat.size()) +
                         " values, expected " + std::to_string(parameter_count()));
    std::size_t off = 0;
    for (int l = 0; l < layer_count(); ++l) {
        std::copy(flat.begin() + off, flat.begin() + off + weights[l].size(),
                  weights[l].begin());
        off += weights[l].size();
        std::copy(flat.begin() + off, flat.begin() + off + biases[l].size(),
                  biases[l].begin());
        off += biases[l].size();
    }
}

Mlp make_mlp(const std::vector<int>& widths, Activation hidden, Activation output,
             std::mt19937_64& rng) {
    if (widths.size() < 2) throw ShapeError("make_mlp: need at least input and output widths");
    for (int w : widths)
        if (w <= 0) throw ShapeError("make_mlp: non-positive layer width");
    Mlp net;
    net.widths = widths;
    net.hidden_activation = hidden;
    net.output_activation = output;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        int fan_in = widths[l], fan_out = widths[l + 1];
        double bound = std::sqrt(6.0 / (fan_in + fan_out));
        std::uniform_real_distribution<double> u(-bound, bound);
        std::vector<double> w(static_cast<std::size_t>(fan_out) * fan_in);
        for (auto& x : w) x = u(rng);
        net.weights.push_back(std::move(w));
        net.biases.emplace_back(fan_out, 0.0);
    }
    return net;
}

StagedMlp stage_mlp(Tape& tape, const Mlp& net) {
    StagedMlp staged;
    for (int l = 0; l < net.layer_count(); ++l) {
        staged.weights.push_back(
            tape.leaf(net.widths[l + 1], net.widths[l], net.weights[l]));
        staged.biases.push_back(tape.leaf(net.widths[l + 1], 1, net.biases[l]));
    }
    return staged;
}

Var mlp_forward(Tape& tape, const Mlp& net, const StagedMlp& staged, Var input) {
    if (tape.rows(input) != net.input_dim())
        throw ShapeError("mlp_forward: input has " + std::to_string(tape.rows(input)) +
                         " rows, net expects " + std::to_string(net.input_dim()));
    Var x = input;
    for (int l = 0; l < net.layer_count(); ++l) {
        Var z = tape.add(tape.matmul(staged.weights[l], x), staged.biases[l]);
        bool last = (l == net.layer_count() - 1);
        x = apply_activation(tape, last ? net.output_activation : net.hidden_activation, z);
    }
    return x;
}

Var mlp_forward(Tape& tape, const Mlp& net, Var input) {
    StagedMlp staged = stage_mlp(tape, net);
    return mlp_forward(tape, net, staged, input);
}

std::vector<double> mlp_gradient(const Tape& tape, const StagedMlp& staged) {
    std::vector<double> grad;
    for (std::size_t l = 0; l < staged.weights.size(); ++l) {
        auto gw = tape.adjoint(staged.weights[l]);
        grad.insert(grad.end(), gw.begin(), gw.end());
        auto gb = tape.adjoint(staged.biases[l]);
        grad.insert(grad.end(), gb.begin(), gb.end());
    }
    return grad;
}

std::vector<double> draw_noise(const NoiseSpec& spec, int count, std::mt19937_64& rng) {
    if (spec.dim <= 0 || count <= 0) throw ShapeError("draw_noise: non-positive size");
    std::vector<double> out(static_cast<std::size_t>(spec.dim) * count);
    if (spec.kind == NoiseSpec::Kind::StandardNormal) {
        std::normal_distribution<double> n(0.0, 1.0);
        for (auto& x : out) x = n(rng);
    } else {
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        for (auto& x : out) x = u(rng);
    }
    return out;
}

void clip_weights(Mlp& net, double c) {
    if (!(c > 0.0)) throw ContractError("clip_weights: bound must be positive");
    auto clip = [c](std::vector<double>& v) {
        for (auto& x : v) {
            if (x > c) x = c;
            if (x < -c) x = -c;
        }
    };
    for (auto& w : net.weights) clip(w);
    for (auto& b : net.biases) clip(b);
}

std::vector<double> mlp_apply(const Mlp& net, std::span<const double> input) {
    if (static_cast<int>(input.size()) != net.input_dim())
        throw ShapeError("mlp_apply: bad input size");
    std::vector<double> x(input.begin(), input.end());
    for (int l = 0; l < net.layer_count(); ++l) {
        int in = net.widths[l], out = net.widths[l + 1];
        std::vector<double> z(out);
        for (int i = 0; i < out; ++i) {
            double acc = net.biases[l][i];
            const double* wrow = net.weights[l].data() + static_cast<std::size_t>(i) * in;
            for (int j = 0; j < in; ++j) acc += wrow[j] * x[j];
            z[i] = acc;
        }
        bool last = (l == net.layer_count() - 1);
        Activation a = last ? net.output_activation : net.hidden_activation;
        for (auto& v : z) v = apply_activation(a, v);
        x = std::move(z);
    }
    return x;
}

void save_mlp(std::ostream& os, const Mlp& net) {
    os << "mlp";
    for (int w : net.widths) os << ' ' << w;
    os << '\n'
       << activation_name(net.hidden_activation) << ' '
       << activation_name(net.output_activation) << '\n';
    char buf[40];
    std::vector<double> flat = net.flatten();
    for (std::size_t i = 0; i < flat.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", flat[i]);
        os << buf << ((i + 1) % 8 == 0 ? '\n' : ' ');
    }
    if (flat.size() % 8 != 0) os << '\n';
}

Mlp load_mlp(std::istream& is) {
    std::string tag;
    is >> tag;
    if (tag != "mlp") throw IoError("not an mlp stream (tag '" + tag + "')");
    std::string line;
    std::getline(is, line);
    std::istringstream widths_in(line);
    std::vector<int> widths;
    int w;
    while (widths_in >> w) widths.push_back(w);
    if (widths.size() < 2) throw IoError("mlp stream: bad widths header");
    std::string hid, out;
    if (!(is >> hid >> out)) throw IoError("mlp stream: missing activations");

    Mlp net;
    net.widths = widths;
    net.hidden_activation = activation_from_name(hid);
    net.output_activation = activation_from_name(out);
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        net.weights.emplace_back(static_cast<std::size_t>(widths[l + 1]) * widths[l]);
        net.biases.emplace_back(widths[l + 1]);
    }
    std::vector<double> flat(net.parameter_count());
    for (auto& x : flat)
        if (!(is >> x)) throw IoError("mlp stream: truncated parameter list");
    net.set_from_flat(flat);
    return net;
}

void save_mlp_file(const std::string& path, const Mlp& net) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    save_mlp(os, net);
    if (!os) throw IoError("write to '" + path + "' failed");
}

Mlp load_mlp_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open '" + path + "'");
    return load_mlp(is);
}

}  // namespace ana
