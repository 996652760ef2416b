#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "errors.hpp"
#include "matrix.hpp"
#include "network.hpp"
#include "rng.hpp"

namespace openbox {

struct TrainConfig {
    std::size_t epochs = 100;
    std::size_t batch_size = 32;
    double learning_rate = 0.1;
    std::uint64_t seed = 0;
    /// L1 penalty weight on the weight matrices (not biases); 0 disables.
    double l1 = 0.0;
    /// Project all weights and biases onto >= 0 after every update. Together
    /// with l1 this is the sparse non-negative training mode; the clamp is
    /// what produces exact zeros.
    bool nonneg = false;
    /// Multiplier on the Glorot uniform init bound sqrt(6/(fan_in+fan_out)).
    double init_scale = 1.0;
    /// Initial value of hidden-layer biases (output biases always start at
    /// zero). Nonnegative inputs push narrow layers toward all-inactive
    /// units, where the gradient vanishes for good; starting the biases
    /// positive keeps units initially active. Plain SGD with ReLU has no
    /// other recovery mechanism, so this knob matters for thin networks.
    double hidden_bias_init = 0.0;
};

namespace detail {

/// Mean softmax cross-entropy over a batch, computed in log-sum-exp form so
/// the numeric gradient check is not polluted by catastrophic cancellation.
inline double batch_loss(const Network& net, const Matrix& x, const std::vector<int>& y,
                         std::span<const std::size_t> batch) {
    double total = 0.0;
    for (const std::size_t idx : batch) {
        const ForwardTrace t = forward(net, x.row(idx));
        const Vec& z = t.z.back();
        double zmax = z[0];
        for (double v : z) zmax = std::max(zmax, v);
        double sum = 0.0;
        for (double v : z) sum += std::exp(v - zmax);
        total += std::log(sum) + zmax - z[static_cast<std::size_t>(y[idx])];
    }
    return total / static_cast<double>(batch.size());
}

/// Analytic gradient of batch_loss with respect to every weight and bias.
inline void batch_gradient(const Network& net, const Matrix& x, const std::vector<int>& y,
                           std::span<const std::size_t> batch, std::vector<Matrix>& gw,
                           std::vector<Vec>& gb) {
    const std::size_t transitions = net.depth() - 1;
    gw.assign(transitions, Matrix());
    gb.assign(transitions, Vec());
    for (std::size_t l = 0; l < transitions; ++l) {
        gw[l] = Matrix(net.weight(l).rows(), net.weight(l).cols());
        gb[l].assign(net.bias(l).size(), 0.0);
    }
    const double inv_batch = 1.0 / static_cast<double>(batch.size());
    for (const std::size_t idx : batch) {
        const ForwardTrace t = forward(net, x.row(idx));
        // dL/dz at the output: softmax minus one-hot.
        Vec delta = t.output;
        delta[static_cast<std::size_t>(y[idx])] -= 1.0;
        for (double& v : delta) v *= inv_batch;

        for (std::size_t l = transitions; l-- > 0;) {
            const auto below = l == 0 ? x.row(idx) : std::span<const double>(t.hidden[l - 1]);
            Matrix& g = gw[l];
            for (std::size_t i = 0; i < g.rows(); ++i) {
                const double di = delta[i];
                gb[l][i] += di;
                if (di == 0.0) continue;
                auto grow = g.row(i);
                for (std::size_t j = 0; j < g.cols(); ++j) grow[j] += di * below[j];
            }
            if (l == 0) break;
            Vec prev = matvec_transposed(net.weight(l), delta);
            // Chain through the activation: multiply by the piece slope the
            // forward pass recorded (the subgradient at breakpoints).
            std::size_t offset = 0;
            for (std::size_t h = 0; h + 1 < l; ++h) offset += net.layer_sizes()[h + 1];
            for (std::size_t i = 0; i < prev.size(); ++i) {
                const auto& piece =
                    net.activation().piece(t.configuration.states[offset + i]);
                prev[i] *= piece.slope;
            }
            delta = std::move(prev);
        }
    }
}

} // namespace detail

/// Train a fresh network with mini-batch SGD on softmax cross-entropy.
/// Deterministic: equal config and data give a bit-identical network.
inline Network train(const std::vector<std::size_t>& layer_sizes, const Matrix& x,
                     const std::vector<int>& y, const TrainConfig& cfg) {
    if (x.rows() == 0) throw TrainingError("training set is empty");
    if (x.rows() != y.size()) throw TrainingError("instance/label counts disagree");
    if (!all_finite(x)) throw TrainingError("training data contains non-finite values");
    if (layer_sizes.size() < 3) throw DimensionError("network needs at least one hidden layer");
    if (x.cols() != layer_sizes.front())
        throw DimensionError("training data dimension does not match input layer");
    const int classes = static_cast<int>(layer_sizes.back());
    for (const int label : y)
        if (label < 0 || label >= classes)
            throw TrainingError("label " + std::to_string(label) + " outside [0, " +
                                std::to_string(classes) + ")");
    if (cfg.batch_size == 0) throw TrainingError("batch size must be positive");

    Rng rng(cfg.seed);
    std::vector<Matrix> weights;
    std::vector<Vec> biases;
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
        const std::size_t fan_in = layer_sizes[l], fan_out = layer_sizes[l + 1];
        const double bound =
            cfg.init_scale * std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        Matrix w(fan_out, fan_in);
        for (double& v : w.data()) v = rng.uniform(-bound, bound);
        weights.push_back(std::move(w));
        const bool is_hidden = l + 2 < layer_sizes.size();
        biases.emplace_back(fan_out, is_hidden ? cfg.hidden_bias_init : 0.0);
    }
    Network net(layer_sizes, std::move(weights), std::move(biases), ActivationSpec::relu());

    const auto project = [&cfg, &net] {
        if (!cfg.nonneg) return;
        for (std::size_t l = 0; l + 1 < net.depth(); ++l) {
            for (double& v : net.weight(l).data()) v = std::max(v, 0.0);
            for (double& v : net.bias(l)) v = std::max(v, 0.0);
        }
    };
    project(); // the init must already satisfy the constraint set

    std::vector<std::size_t> order(x.rows());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::vector<Matrix> gw;
    std::vector<Vec> gb;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            const std::span<const std::size_t> batch(order.data() + start, end - start);
            try {
                detail::batch_gradient(net, x, y, batch, gw, gb);
            } catch (const DomainError&) {
                // The data was finite on entry, so a non-finite forward pass
                // here means the parameters blew up.
                throw TrainingError("training diverged (non-finite activations)");
            }
            for (std::size_t l = 0; l + 1 < net.depth(); ++l) {
                Matrix& w = net.weight(l);
                for (std::size_t k = 0; k < w.data().size(); ++k) {
                    double g = gw[l].data()[k];
                    if (cfg.l1 != 0.0) {
                        const double v = w.data()[k];
                        g += cfg.l1 * (v > 0.0 ? 1.0 : v < 0.0 ? -1.0 : 0.0);
                    }
                    w.data()[k] -= cfg.learning_rate * g;
                }
                Vec& b = net.bias(l);
                for (std::size_t k = 0; k < b.size(); ++k)
                    b[k] -= cfg.learning_rate * gb[l][k];
            }
            project();
            if (!std::isfinite(gw[0].data()[0]))
                throw TrainingError("training diverged (non-finite gradients)");
        }
    }
    for (std::size_t l = 0; l + 1 < net.depth(); ++l)
        if (!all_finite(net.weight(l)) || !all_finite(net.bias(l)))
            throw TrainingError("training diverged (non-finite parameters)");
    return net;
}

/// Fraction of instances whose predicted class matches the label.
inline double accuracy(const Network& net, const Matrix& x, const std::vector<int>& y) {
    if (x.rows() != y.size()) throw DataError("accuracy: instance/label counts disagree");
    if (x.rows() == 0) return 0.0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const ForwardTrace t = forward(net, x.row(i));
        if (static_cast<int>(predicted_class(t.output)) == y[i]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(x.rows());
}

/// Compare the analytic batch gradient against central finite differences
/// over every parameter; returns the worst relative discrepancy. Breakpoint
/// crossings would invalidate the comparison, so the step must stay small.
inline double gradient_check(Network net, const Matrix& x, const std::vector<int>& y,
                             double step = 1e-6) {
    std::vector<std::size_t> batch(x.rows());
    for (std::size_t i = 0; i < batch.size(); ++i) batch[i] = i;
    std::vector<Matrix> gw;
    std::vector<Vec> gb;
    detail::batch_gradient(net, x, y, batch, gw, gb);

    double worst = 0.0;
    const auto probe = [&](double& param, double analytic) {
        const double saved = param;
        param = saved + step;
        const double up = detail::batch_loss(net, x, y, batch);
        param = saved - step;
        const double down = detail::batch_loss(net, x, y, batch);
        param = saved;
        const double numeric = (up - down) / (2.0 * step);
        const double rel = std::abs(analytic - numeric) /
                           std::max({1.0, std::abs(analytic), std::abs(numeric)});
        worst = std::max(worst, rel);
    };
    for (std::size_t l = 0; l + 1 < net.depth(); ++l) {
        for (std::size_t k = 0; k < net.weight(l).data().size(); ++k)
            probe(net.weight(l).data()[k], gw[l].data()[k]);
        for (std::size_t k = 0; k < net.bias(l).size(); ++k)
            probe(net.bias(l)[k], gb[l][k]);
    }
    return worst;
}

} // namespace openbox
