#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "matrix.hpp"
#include "network.hpp"

namespace openbox {

/// The affine map from network input to one layer's pre-activation,
/// z = W x + b, valid on the region where a fixed configuration holds.
struct AffinePrefix {
    Matrix W;
    Vec b;
};

/// Scalar multiplication counters for the fold, split into the matrix
/// products (the dominant cost) and the per-entry slope scalings.
struct FoldStats {
    std::size_t product_mults = 0;
    std::size_t scaling_mults = 0;
};

/// Collapse the network onto one activation configuration.
///
/// With every hidden neuron pinned to a linear piece, each activation is an
/// affine map, so layer after layer composes into a single affine map from
/// the input. The returned list holds that closed form per layer: entry i is
/// the map x -> pre-activation of hidden layer i, and the last entry maps to
/// the output logits. The recursion scales the accumulated prefix rows by the
/// pinned slopes and multiplies the next weight matrix on the left; the
/// scaled n_l x (n_1 + 1) block is the only temporary, nothing quadratic in
/// the layer widths is kept around.
inline std::vector<AffinePrefix> fold_configuration(const Network& net, const Configuration& c,
                                                    FoldStats* stats = nullptr) {
    if (c.states.size() != net.hidden_unit_count())
        throw DimensionError("configuration has " + std::to_string(c.states.size()) +
                             " states, network has " + std::to_string(net.hidden_unit_count()) +
                             " hidden neurons");

    const ActivationSpec& act = net.activation();
    std::vector<AffinePrefix> prefixes;
    prefixes.reserve(net.depth() - 1);
    prefixes.push_back({net.weight(0), net.bias(0)});

    std::size_t state_pos = 0;
    for (std::size_t l = 1; l + 1 < net.depth(); ++l) {
        const AffinePrefix& prev = prefixes.back();
        const std::size_t n_in = net.input_dim();
        const std::size_t n_l = prev.W.rows();

        // Apply the pinned activation pieces to the previous prefix:
        // a = r o z + t turns (W, b) into (diag(r) W, diag(r) b + t).
        Matrix scaled_w(n_l, n_in);
        Vec scaled_b(n_l);
        for (std::size_t i = 0; i < n_l; ++i) {
            const std::uint8_t q = c.states[state_pos + i];
            if (q >= act.piece_count())
                throw DomainError("configuration state out of range for activation");
            const ActivationPiece& p = act.piece(q);
            const auto src = prev.W.row(i);
            auto dst = scaled_w.row(i);
            for (std::size_t j = 0; j < n_in; ++j) dst[j] = p.slope * src[j];
            scaled_b[i] = p.slope * prev.b[i] + p.intercept;
        }
        state_pos += n_l;
        if (stats) stats->scaling_mults += n_l * (n_in + 1);

        const Matrix& w = net.weight(l);
        AffinePrefix next;
        next.W = matmul(w, scaled_w);
        next.b = affine(w, scaled_b, net.bias(l));
        if (stats) stats->product_mults += w.rows() * w.cols() * (n_in + 1);
        prefixes.push_back(std::move(next));
    }
    return prefixes;
}

/// Output probabilities of the collapsed map: softmax(W_hat x + b_hat).
inline Vec closed_form_output(const std::vector<AffinePrefix>& prefixes,
                              std::span<const double> x) {
    const AffinePrefix& out = prefixes.back();
    return softmax(affine(out.W, x, out.b));
}

/// Per-feature weights the collapsed classifier gives class `class_index`:
/// row class_index of the final folded matrix. Positive entries push the
/// class's logit up, negative entries pull it down.
inline Vec decision_features(const std::vector<AffinePrefix>& prefixes, std::size_t class_index) {
    const AffinePrefix& out = prefixes.back();
    if (class_index >= out.W.rows())
        throw DimensionError("decision_features: class index out of range");
    const auto r = out.W.row(class_index);
    return Vec(r.begin(), r.end());
}

/// Coefficients of the boundary function of one hidden neuron: the gradient
/// of z_neuron at hidden layer `hidden_layer` (0-based) as a function of the
/// input. Together with the matching offset this is the hyperplane whose
/// side decides that neuron's activation piece.
inline Vec pbf(const std::vector<AffinePrefix>& prefixes, std::size_t hidden_layer,
               std::size_t neuron) {
    if (hidden_layer + 1 >= prefixes.size())
        throw DimensionError("pbf: hidden layer index out of range");
    const AffinePrefix& p = prefixes[hidden_layer];
    if (neuron >= p.W.rows()) throw DimensionError("pbf: neuron index out of range");
    const auto r = p.W.row(neuron);
    return Vec(r.begin(), r.end());
}

/// Offset term that goes with pbf(): z = pbf . x + pbf_offset.
inline double pbf_offset(const std::vector<AffinePrefix>& prefixes, std::size_t hidden_layer,
                         std::size_t neuron) {
    const AffinePrefix& p = prefixes[hidden_layer];
    if (neuron >= p.b.size()) throw DimensionError("pbf_offset: neuron index out of range");
    return p.b[neuron];
}

} // namespace openbox
