#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "activation.hpp"
#include "errors.hpp"
#include "matrix.hpp"

namespace openbox {

/// FNV-1a over a byte string; used for network fingerprints and the run
/// manifests' file digests.
inline std::uint64_t fnv1a64(std::span<const char> bytes) {
    std::uint64_t h = 14695981039346656037ULL;
    for (char c : bytes) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[static_cast<std::size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return s;
}

/// Activation state of every hidden neuron for one input, one byte per
/// neuron in layer-major order; each byte is the 0-based activation piece
/// index (for ReLU: 0 = inactive, 1 = active). Two inputs land in the same
/// linear region of the network exactly when their configurations match.
struct Configuration {
    std::vector<std::uint8_t> states;

    bool operator==(const Configuration&) const = default;
    auto operator<=>(const Configuration&) const = default;

    /// Compact display form, layers separated by '|': "10|0110".
    std::string to_string(const std::vector<std::size_t>& hidden_sizes) const {
        std::string out;
        std::size_t pos = 0;
        for (std::size_t l = 0; l < hidden_sizes.size(); ++l) {
            if (l) out.push_back('|');
            for (std::size_t i = 0; i < hidden_sizes[l]; ++i)
                out += std::to_string(static_cast<int>(states[pos++]));
        }
        return out;
    }
};

/// Numerically stable softmax.
inline Vec softmax(std::span<const double> z) {
    double zmax = z[0];
    for (double v : z) zmax = std::max(zmax, v);
    Vec p(z.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        p[i] = std::exp(z[i] - zmax);
        sum += p[i];
    }
    for (double& v : p) v /= sum;
    return p;
}

/// Everything one forward pass produces. Layers are indexed from the first
/// hidden layer: z[i] is the pre-activation of hidden layer i (the last z
/// entry is the output layer's logits), hidden[i] the activation output of
/// hidden layer i.
struct ForwardTrace {
    std::vector<Vec> z;
    std::vector<Vec> hidden;
    Vec output;
    Configuration configuration;
};

/// A feed-forward classifier with piecewise linear activations on every
/// hidden layer and a softmax output layer.
class Network {
public:
    Network(std::vector<std::size_t> layer_sizes, std::vector<Matrix> weights,
            std::vector<Vec> biases, ActivationSpec activation)
        : layer_sizes_(std::move(layer_sizes)),
          weights_(std::move(weights)),
          biases_(std::move(biases)),
          activation_(std::move(activation)) {
        validate();
    }

    const std::vector<std::size_t>& layer_sizes() const { return layer_sizes_; }
    std::size_t depth() const { return layer_sizes_.size(); }
    std::size_t input_dim() const { return layer_sizes_.front(); }
    std::size_t class_count() const { return layer_sizes_.back(); }
    std::size_t hidden_layer_count() const { return layer_sizes_.size() - 2; }

    std::vector<std::size_t> hidden_sizes() const {
        return {layer_sizes_.begin() + 1, layer_sizes_.end() - 1};
    }

    /// Total number of hidden neurons (the length of a configuration).
    std::size_t hidden_unit_count() const {
        std::size_t n = 0;
        for (std::size_t l = 1; l + 1 < layer_sizes_.size(); ++l) n += layer_sizes_[l];
        return n;
    }

    /// weight(l) maps layer l to layer l+1, 0-based: weight(0) consumes the
    /// input. Shape: layer_sizes[l+1] x layer_sizes[l].
    const Matrix& weight(std::size_t l) const { return weights_[l]; }
    const Vec& bias(std::size_t l) const { return biases_[l]; }
    Matrix& weight(std::size_t l) { return weights_[l]; }
    Vec& bias(std::size_t l) { return biases_[l]; }

    const ActivationSpec& activation() const { return activation_; }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["layer_sizes"] = layer_sizes_;
        auto& w = j["weights"] = nlohmann::json::array();
        for (const Matrix& m : weights_) w.push_back(m.data());
        j["biases"] = biases_;
        j["activation"] = activation_.name();
        return j;
    }

    static Network from_json(const nlohmann::json& j) {
        try {
            auto sizes = j.at("layer_sizes").get<std::vector<std::size_t>>();
            if (sizes.size() < 2) throw ParseError("network needs at least two layers");
            auto flat = j.at("weights").get<std::vector<std::vector<double>>>();
            auto biases = j.at("biases").get<std::vector<Vec>>();
            if (flat.size() + 1 != sizes.size() || biases.size() + 1 != sizes.size())
                throw ParseError("network JSON: weight/bias count does not match layer_sizes");
            std::vector<Matrix> weights;
            for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
                const std::size_t r = sizes[l + 1], c = sizes[l];
                if (flat[l].size() != r * c)
                    throw ParseError("network JSON: layer " + std::to_string(l) +
                                     " weight matrix has wrong element count");
                Matrix m(r, c);
                m.data() = std::move(flat[l]);
                weights.push_back(std::move(m));
            }
            auto act = ActivationSpec::by_name(j.at("activation").get<std::string>());
            return Network(std::move(sizes), std::move(weights), std::move(biases), std::move(act));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(std::string("network JSON: ") + e.what());
        }
    }

    /// Hash of the canonical serialized form; interpretations remember it so
    /// applying them to a different network fails loudly instead of quietly.
    std::uint64_t fingerprint() const {
        const std::string s = to_json().dump();
        return fnv1a64(std::span<const char>(s.data(), s.size()));
    }

    bool operator==(const Network& o) const {
        return layer_sizes_ == o.layer_sizes_ && weights_ == o.weights_ &&
               biases_ == o.biases_ && activation_ == o.activation_;
    }

private:
    void validate() const {
        if (layer_sizes_.size() < 3)
            throw DimensionError("network needs at least one hidden layer");
        if (layer_sizes_.back() < 2)
            throw DimensionError("network needs at least two output classes");
        for (std::size_t n : layer_sizes_)
            if (n == 0) throw DimensionError("network has an empty layer");
        if (weights_.size() + 1 != layer_sizes_.size() || biases_.size() != weights_.size())
            throw DimensionError("network weight/bias count does not match layer count");
        for (std::size_t l = 0; l + 1 < layer_sizes_.size(); ++l) {
            if (weights_[l].rows() != layer_sizes_[l + 1] || weights_[l].cols() != layer_sizes_[l])
                throw DimensionError("weight matrix " + std::to_string(l) + " has shape " +
                                     std::to_string(weights_[l].rows()) + "x" +
                                     std::to_string(weights_[l].cols()) + ", expected " +
                                     std::to_string(layer_sizes_[l + 1]) + "x" +
                                     std::to_string(layer_sizes_[l]));
            if (biases_[l].size() != layer_sizes_[l + 1])
                throw DimensionError("bias vector " + std::to_string(l) + " has wrong length");
            if (!all_finite(weights_[l]) || !all_finite(biases_[l]))
                throw DomainError("network parameters contain non-finite values");
        }
    }

    std::vector<std::size_t> layer_sizes_;
    std::vector<Matrix> weights_;
    std::vector<Vec> biases_;
    ActivationSpec activation_;
};

/// Full forward pass recording pre-activations, hidden activations, softmax
/// output and the activation configuration.
inline ForwardTrace forward(const Network& net, std::span<const double> x) {
    if (x.size() != net.input_dim())
        throw DimensionError("forward: input has dimension " + std::to_string(x.size()) +
                             ", network expects " + std::to_string(net.input_dim()));
    if (!all_finite(x)) throw DomainError("forward: input contains non-finite values");

    ForwardTrace t;
    t.configuration.states.reserve(net.hidden_unit_count());
    Vec a(x.begin(), x.end());
    const std::size_t transitions = net.depth() - 1;
    for (std::size_t l = 0; l < transitions; ++l) {
        Vec z = affine(net.weight(l), a, net.bias(l));
        if (l + 1 < transitions) {
            a.resize(z.size());
            for (std::size_t i = 0; i < z.size(); ++i) {
                const std::size_t q = net.activation().piece_index(z[i]);
                t.configuration.states.push_back(static_cast<std::uint8_t>(q));
                const auto& p = net.activation().piece(q);
                a[i] = p.slope * z[i] + p.intercept;
            }
            t.hidden.push_back(a);
        } else {
            t.output = softmax(z);
        }
        t.z.push_back(std::move(z));
    }
    return t;
}

/// Activation configuration of x: which linear piece every hidden neuron is
/// on. Inputs with equal configurations see the same end-to-end linear map.
inline Configuration conf(const Network& net, std::span<const double> x) {
    return forward(net, x).configuration;
}

/// Index of the most probable class; ties resolve to the lower index.
inline std::size_t predicted_class(std::span<const double> probabilities) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < probabilities.size(); ++i)
        if (probabilities[i] > probabilities[best]) best = i;
    return best;
}

inline void save_network(const Network& net, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open " + path.string() + " for writing");
    out << net.to_json().dump(2) << '\n';
    if (!out) throw DataError("failed writing " + path.string());
}

inline Network load_network(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    return Network::from_json(j);
}

} // namespace openbox
