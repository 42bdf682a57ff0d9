#ifndef AOISIM_PREDICTOR_RECURRENT_HPP
#define AOISIM_PREDICTOR_RECURRENT_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "aoisim/predictor/dataset.hpp"

namespace aoisim {

/// Hyperparameters for the recurrent AoI forecaster. Defaults follow the
/// reference training setup; every field is scenario-overridable.
struct RecurrentNetConfig {
    int units_per_layer = 64;
    int layers = 4;
    double dropout = 0.1;
    double recurrent_dropout = 0.1;
    std::string activation = "tanh";
    int batch_size = 32;
    int epochs = 50;
    double learning_rate = 0.001;  // Adam
    std::uint64_t seed = 1;

    void validate() const {
        if (units_per_layer < 1 || layers < 1) throw SimError("recurrent: bad architecture");
        if (dropout < 0.0 || dropout >= 1.0 || recurrent_dropout < 0.0 || recurrent_dropout >= 1.0)
            throw SimError("recurrent: dropout rates must be in [0,1)");
        if (batch_size < 1) throw SimError("recurrent: batch size must be >= 1");
        if (epochs < 0) throw SimError("recurrent: epochs must be >= 0");
        if (learning_rate <= 0.0) throw SimError("recurrent: learning rate must be > 0");
        if (activation != "tanh") throw SimError("recurrent: unsupported activation " + activation);
    }
};

namespace detail {

inline Eigen::MatrixXd glorot_uniform(Eigen::Index rows, Eigen::Index cols,
                                      std::mt19937_64& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = dist(rng);
    return m;
}

/// Orthogonal init: QR of a Gaussian matrix, sign-fixed by R's diagonal.
inline Eigen::MatrixXd orthogonal(Eigen::Index n, std::mt19937_64& rng) {
    std::normal_distribution<double> dist(0.0, 1.0);
    Eigen::MatrixXd a(n, n);
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = 0; i < n; ++i) a(i, j) = dist(rng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
    Eigen::MatrixXd q = qr.householderQ();
    const Eigen::VectorXd r_diag = qr.matrixQR().diagonal();
    for (Eigen::Index j = 0; j < n; ++j)
        if (r_diag(j) < 0.0) q.col(j) = -q.col(j);
    return q;
}

inline Eigen::ArrayXXd sigmoid(const Eigen::ArrayXXd& z) {
    return 1.0 / (1.0 + (-z).exp());
}

}  // namespace detail

/// Stacked gated recurrent network (input/forget/output gates with a memory
/// cell) mapping a (t, v, aoi) window to a scalar forecast. Gate order in
/// the stacked weight matrices is i, f, g, o.
class LstmNetwork {
public:
    struct Layer {
        Eigen::MatrixXd wx;  // (4u x in)
        Eigen::MatrixXd wh;  // (4u x u)
        Eigen::VectorXd b;   // (4u)
        int in = 0;
        int units = 0;
    };

    LstmNetwork() = default;

    LstmNetwork(int input_dim, int units, int layers, std::mt19937_64& rng) {
        layers_.reserve(static_cast<std::size_t>(layers));
        int in = input_dim;
        for (int l = 0; l < layers; ++l) {
            Layer layer;
            layer.in = in;
            layer.units = units;
            layer.wx = detail::glorot_uniform(4 * units, in, rng);
            layer.wh.resize(4 * units, units);
            for (int g = 0; g < 4; ++g)
                layer.wh.middleRows(g * units, units) = detail::orthogonal(units, rng);
            layer.b = Eigen::VectorXd::Zero(4 * units);
            layer.b.segment(units, units).setOnes();  // forget-gate bias
            layers_.push_back(std::move(layer));
            in = units;
        }
        w_out_ = detail::glorot_uniform(units, 1, rng).col(0);
        b_out_ = 0.0;
    }

    /// Inference over one sequence (T x input_dim), no dropout.
    double forward_one(const Eigen::MatrixXd& sequence) const {
        const Eigen::Index steps = sequence.rows();
        Eigen::VectorXd x;
        std::vector<Eigen::VectorXd> h(layers_.size()), c(layers_.size());
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            h[l] = Eigen::VectorXd::Zero(layers_[l].units);
            c[l] = Eigen::VectorXd::Zero(layers_[l].units);
        }
        for (Eigen::Index t = 0; t < steps; ++t) {
            x = sequence.row(t).transpose();
            for (std::size_t l = 0; l < layers_.size(); ++l) {
                const Layer& layer = layers_[l];
                const int u = layer.units;
                Eigen::VectorXd z = layer.wx * x + layer.wh * h[l] + layer.b;
                const Eigen::ArrayXd zi = z.segment(0, u).array();
                const Eigen::ArrayXd zf = z.segment(u, u).array();
                const Eigen::ArrayXd zg = z.segment(2 * u, u).array();
                const Eigen::ArrayXd zo = z.segment(3 * u, u).array();
                const Eigen::ArrayXd gi = 1.0 / (1.0 + (-zi).exp());
                const Eigen::ArrayXd gf = 1.0 / (1.0 + (-zf).exp());
                const Eigen::ArrayXd gg = zg.tanh();
                const Eigen::ArrayXd go = 1.0 / (1.0 + (-zo).exp());
                c[l] = (gf * c[l].array() + gi * gg).matrix();
                h[l] = (go * c[l].array().tanh()).matrix();
                x = h[l];
            }
        }
        return w_out_.dot(h.back()) + b_out_;
    }

    struct BatchCache {
        // Per layer, per timestep activations needed by backprop.
        std::vector<std::vector<Eigen::MatrixXd>> x, h_prev, c_prev, gi, gf, gg, go, c, tc;
        std::vector<Eigen::MatrixXd> in_mask, rec_mask;  // per layer, scaled masks
        std::vector<Eigen::MatrixXd> h_last;             // final h per layer
        Eigen::VectorXd pred;                            // per sequence
    };

    /// Training forward pass over a batch. `sequences` holds one (T x in)
    /// matrix per sequence; dropout masks are fixed per sequence.
    BatchCache forward_batch(const std::vector<Eigen::MatrixXd>& sequences,
                             double dropout, double recurrent_dropout,
                             std::mt19937_64& rng) const {
        const Eigen::Index batch = static_cast<Eigen::Index>(sequences.size());
        const Eigen::Index steps = sequences.front().rows();
        const std::size_t depth = layers_.size();

        BatchCache cache;
        cache.x.resize(depth);
        cache.h_prev.resize(depth);
        cache.c_prev.resize(depth);
        cache.gi.resize(depth);
        cache.gf.resize(depth);
        cache.gg.resize(depth);
        cache.go.resize(depth);
        cache.c.resize(depth);
        cache.tc.resize(depth);
        cache.in_mask.resize(depth);
        cache.rec_mask.resize(depth);
        cache.h_last.resize(depth);

        std::uniform_real_distribution<double> unit(0.0, 1.0);
        auto make_mask = [&](Eigen::Index rows, double rate) {
            Eigen::MatrixXd m = Eigen::MatrixXd::Ones(rows, batch);
            if (rate > 0.0) {
                const double keep = 1.0 - rate;
                for (Eigen::Index j = 0; j < batch; ++j)
                    for (Eigen::Index i = 0; i < rows; ++i)
                        m(i, j) = unit(rng) < keep ? 1.0 / keep : 0.0;
            }
            return m;
        };

        std::vector<Eigen::MatrixXd> h(depth), c(depth);
        for (std::size_t l = 0; l < depth; ++l) {
            h[l] = Eigen::MatrixXd::Zero(layers_[l].units, batch);
            c[l] = Eigen::MatrixXd::Zero(layers_[l].units, batch);
            cache.in_mask[l] = make_mask(layers_[l].in, dropout);
            cache.rec_mask[l] = make_mask(layers_[l].units, recurrent_dropout);
            cache.x[l].resize(static_cast<std::size_t>(steps));
            cache.h_prev[l].resize(static_cast<std::size_t>(steps));
            cache.c_prev[l].resize(static_cast<std::size_t>(steps));
            cache.gi[l].resize(static_cast<std::size_t>(steps));
            cache.gf[l].resize(static_cast<std::size_t>(steps));
            cache.gg[l].resize(static_cast<std::size_t>(steps));
            cache.go[l].resize(static_cast<std::size_t>(steps));
            cache.c[l].resize(static_cast<std::size_t>(steps));
            cache.tc[l].resize(static_cast<std::size_t>(steps));
        }

        for (Eigen::Index t = 0; t < steps; ++t) {
            Eigen::MatrixXd x(sequences.front().cols(), batch);
            for (Eigen::Index s = 0; s < batch; ++s)
                x.col(s) = sequences[static_cast<std::size_t>(s)].row(t).transpose();
            for (std::size_t l = 0; l < depth; ++l) {
                const Layer& layer = layers_[l];
                const int u = layer.units;
                const auto ts = static_cast<std::size_t>(t);
                cache.x[l][ts] = x.cwiseProduct(cache.in_mask[l]);
                cache.h_prev[l][ts] = h[l];
                cache.c_prev[l][ts] = c[l];
                const Eigen::MatrixXd h_drop = h[l].cwiseProduct(cache.rec_mask[l]);
                Eigen::MatrixXd z = layer.wx * cache.x[l][ts] + layer.wh * h_drop;
                z.colwise() += layer.b;
                cache.gi[l][ts] = detail::sigmoid(z.middleRows(0, u).array()).matrix();
                cache.gf[l][ts] = detail::sigmoid(z.middleRows(u, u).array()).matrix();
                cache.gg[l][ts] = z.middleRows(2 * u, u).array().tanh().matrix();
                cache.go[l][ts] = detail::sigmoid(z.middleRows(3 * u, u).array()).matrix();
                c[l] = cache.gf[l][ts].cwiseProduct(c[l]) +
                       cache.gi[l][ts].cwiseProduct(cache.gg[l][ts]);
                cache.c[l][ts] = c[l];
                cache.tc[l][ts] = c[l].array().tanh().matrix();
                h[l] = cache.go[l][ts].cwiseProduct(cache.tc[l][ts]);
                x = h[l];
            }
        }
        for (std::size_t l = 0; l < depth; ++l) cache.h_last[l] = h[l];
        cache.pred = (w_out_.transpose() * h.back()).transpose();
        cache.pred.array() += b_out_;
        return cache;
    }

    struct Gradients {
        std::vector<Eigen::MatrixXd> wx, wh;
        std::vector<Eigen::VectorXd> b;
        Eigen::VectorXd w_out;
        double b_out = 0.0;
    };

    Gradients zero_gradients() const {
        Gradients g;
        g.wx.reserve(layers_.size());
        g.wh.reserve(layers_.size());
        g.b.reserve(layers_.size());
        for (const Layer& l : layers_) {
            g.wx.push_back(Eigen::MatrixXd::Zero(l.wx.rows(), l.wx.cols()));
            g.wh.push_back(Eigen::MatrixXd::Zero(l.wh.rows(), l.wh.cols()));
            g.b.push_back(Eigen::VectorXd::Zero(l.b.size()));
        }
        g.w_out = Eigen::VectorXd::Zero(w_out_.size());
        return g;
    }

    /// Backpropagation through time for the batch. `dpred` is dLoss/dpred
    /// per sequence. Returns parameter gradients.
    Gradients backward_batch(const BatchCache& cache, const Eigen::VectorXd& dpred) const {
        const std::size_t depth = layers_.size();
        const std::size_t steps = cache.x.front().size();
        const Eigen::Index batch = dpred.size();

        Gradients grads = zero_gradients();
        grads.w_out = cache.h_last.back() * dpred;
        grads.b_out = dpred.sum();

        // dh arriving from the layer above, per timestep; for the top layer
        // only the last step sees the output head.
        std::vector<Eigen::MatrixXd> dh_above(steps);
        for (std::size_t t = 0; t < steps; ++t)
            dh_above[t] = Eigen::MatrixXd::Zero(layers_.back().units, batch);
        dh_above[steps - 1] = w_out_ * dpred.transpose();

        for (std::size_t li = depth; li-- > 0;) {
            const Layer& layer = layers_[li];
            const int u = layer.units;
            Eigen::MatrixXd dh_rec = Eigen::MatrixXd::Zero(u, batch);
            Eigen::MatrixXd dc_next = Eigen::MatrixXd::Zero(u, batch);
            std::vector<Eigen::MatrixXd> dx_below;
            if (li > 0) {
                dx_below.resize(steps);
                for (std::size_t t = 0; t < steps; ++t)
                    dx_below[t] = Eigen::MatrixXd::Zero(layer.in, batch);
            }

            for (std::size_t t = steps; t-- > 0;) {
                const Eigen::ArrayXXd dh = (dh_above[t] + dh_rec).array();
                const Eigen::ArrayXXd gi = cache.gi[li][t].array();
                const Eigen::ArrayXXd gf = cache.gf[li][t].array();
                const Eigen::ArrayXXd gg = cache.gg[li][t].array();
                const Eigen::ArrayXXd go = cache.go[li][t].array();
                const Eigen::ArrayXXd tc = cache.tc[li][t].array();

                const Eigen::ArrayXXd dc =
                    dh * go * (1.0 - tc.square()) + dc_next.array();
                const Eigen::ArrayXXd dzo = dh * tc * go * (1.0 - go);
                const Eigen::ArrayXXd dzf =
                    dc * cache.c_prev[li][t].array() * gf * (1.0 - gf);
                const Eigen::ArrayXXd dzi = dc * gg * gi * (1.0 - gi);
                const Eigen::ArrayXXd dzg = dc * gi * (1.0 - gg.square());
                dc_next = (dc * gf).matrix();

                Eigen::MatrixXd dz(4 * u, batch);
                dz.middleRows(0, u) = dzi.matrix();
                dz.middleRows(u, u) = dzf.matrix();
                dz.middleRows(2 * u, u) = dzg.matrix();
                dz.middleRows(3 * u, u) = dzo.matrix();

                const Eigen::MatrixXd h_drop =
                    cache.h_prev[li][t].cwiseProduct(cache.rec_mask[li]);
                grads.wx[li].noalias() += dz * cache.x[li][t].transpose();
                grads.wh[li].noalias() += dz * h_drop.transpose();
                grads.b[li].noalias() += dz.rowwise().sum();

                dh_rec = (layer.wh.transpose() * dz).cwiseProduct(cache.rec_mask[li]);
                if (li > 0)
                    dx_below[t] =
                        (layer.wx.transpose() * dz).cwiseProduct(cache.in_mask[li]);
            }
            if (li > 0) dh_above = std::move(dx_below);
        }
        return grads;
    }

    std::size_t parameter_count() const {
        std::size_t n = static_cast<std::size_t>(w_out_.size()) + 1;
        for (const Layer& l : layers_)
            n += static_cast<std::size_t>(l.wx.size() + l.wh.size() + l.b.size());
        return n;
    }

    std::vector<double> pack_parameters() const {
        std::vector<double> out;
        out.reserve(parameter_count());
        auto push = [&out](const double* p, Eigen::Index n) {
            out.insert(out.end(), p, p + n);
        };
        for (const Layer& l : layers_) {
            push(l.wx.data(), l.wx.size());
            push(l.wh.data(), l.wh.size());
            push(l.b.data(), l.b.size());
        }
        push(w_out_.data(), w_out_.size());
        out.push_back(b_out_);
        return out;
    }

    void unpack_parameters(const std::vector<double>& flat) {
        std::size_t at = 0;
        auto take = [&](double* p, Eigen::Index n) {
            std::copy(flat.begin() + static_cast<std::ptrdiff_t>(at),
                      flat.begin() + static_cast<std::ptrdiff_t>(at + static_cast<std::size_t>(n)), p);
            at += static_cast<std::size_t>(n);
        };
        for (Layer& l : layers_) {
            take(l.wx.data(), l.wx.size());
            take(l.wh.data(), l.wh.size());
            take(l.b.data(), l.b.size());
        }
        take(w_out_.data(), w_out_.size());
        b_out_ = flat[at];
        if (at + 1 != flat.size()) throw SimError("recurrent: parameter vector size mismatch");
    }

    std::vector<double> pack_gradients(const Gradients& g) const {
        std::vector<double> out;
        out.reserve(parameter_count());
        auto push = [&out](const double* p, Eigen::Index n) {
            out.insert(out.end(), p, p + n);
        };
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            push(g.wx[l].data(), g.wx[l].size());
            push(g.wh[l].data(), g.wh[l].size());
            push(g.b[l].data(), g.b[l].size());
        }
        push(g.w_out.data(), g.w_out.size());
        out.push_back(g.b_out);
        return out;
    }

    std::vector<Layer>& layers() { return layers_; }
    const std::vector<Layer>& layers() const { return layers_; }
    Eigen::VectorXd& output_weights() { return w_out_; }
    const Eigen::VectorXd& output_weights() const { return w_out_; }
    double& output_bias() { return b_out_; }
    double output_bias() const { return b_out_; }

private:
    std::vector<Layer> layers_;
    Eigen::VectorXd w_out_;
    double b_out_ = 0.0;
};

/// Recurrent forecaster: scaler + network + the Adam/BPTT training loop.
class RecurrentModel {
public:
    RecurrentNetConfig config;
    FeatureScaler scaler;
    LstmNetwork net;
    double final_loss = 0.0;
    std::vector<double> loss_curve;  // per epoch, scaled-target MSE

    static RecurrentModel train(const std::vector<FeatureWindow>& inputs,
                                const std::vector<double>& targets,
                                const RecurrentNetConfig& config) {
        if (inputs.empty() || inputs.size() != targets.size())
            throw SimError("recurrent: empty or mismatched dataset");
        config.validate();

        RecurrentModel model;
        model.config = config;
        model.scaler = FeatureScaler::fit(inputs, targets);

        std::mt19937_64 rng(config.seed);
        model.net = LstmNetwork(kFeaturesPerStep, config.units_per_layer, config.layers, rng);

        const std::size_t n = inputs.size();
        std::vector<Eigen::MatrixXd> sequences(n);
        Eigen::VectorXd y(static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < n; ++i) {
            sequences[i] = to_sequence(model.scaler.transform(inputs[i]));
            y(static_cast<Eigen::Index>(i)) = model.scaler.scale_target(targets[i]);
        }

        AdamState adam(model.net);
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t{0});

        model.final_loss = model.dataset_loss(sequences, y);
        for (int epoch = 0; epoch < config.epochs; ++epoch) {
            std::shuffle(order.begin(), order.end(), rng);
            double epoch_loss = 0.0;
            std::size_t seen = 0;
            for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(config.batch_size)) {
                const std::size_t stop = std::min(n, start + static_cast<std::size_t>(config.batch_size));
                std::vector<Eigen::MatrixXd> batch;
                batch.reserve(stop - start);
                Eigen::VectorXd by(static_cast<Eigen::Index>(stop - start));
                for (std::size_t k = start; k < stop; ++k) {
                    batch.push_back(sequences[order[k]]);
                    by(static_cast<Eigen::Index>(k - start)) = y(static_cast<Eigen::Index>(order[k]));
                }
                auto cache = model.net.forward_batch(batch, config.dropout,
                                                     config.recurrent_dropout, rng);
                const Eigen::VectorXd err = cache.pred - by;
                const double loss = err.squaredNorm() / static_cast<double>(err.size());
                if (!std::isfinite(loss))
                    throw SimError("recurrent: loss diverged at epoch " + std::to_string(epoch));
                epoch_loss += loss * static_cast<double>(err.size());
                seen += static_cast<std::size_t>(err.size());
                const Eigen::VectorXd dpred = 2.0 * err / static_cast<double>(err.size());
                auto grads = model.net.backward_batch(cache, dpred);
                adam.apply(model.net, grads, config.learning_rate);
            }
            model.final_loss = epoch_loss / static_cast<double>(seen);
            model.loss_curve.push_back(model.final_loss);
        }
        return model;
    }

    double predict(const FeatureWindow& window) const {
        const auto f = scaler.transform(window);
        return scaler.unscale_target(net.forward_one(to_sequence(f)));
    }

    std::size_t parameter_count() const { return net.parameter_count(); }

private:
    static Eigen::MatrixXd to_sequence(const std::vector<double>& flat) {
        const Eigen::Index steps = static_cast<Eigen::Index>(flat.size() / kFeaturesPerStep);
        Eigen::MatrixXd seq(steps, kFeaturesPerStep);
        for (Eigen::Index t = 0; t < steps; ++t)
            for (Eigen::Index j = 0; j < kFeaturesPerStep; ++j)
                seq(t, j) = flat[static_cast<std::size_t>(t * kFeaturesPerStep + j)];
        return seq;
    }

    double dataset_loss(const std::vector<Eigen::MatrixXd>& sequences,
                        const Eigen::VectorXd& y) const {
        double sse = 0.0;
        for (std::size_t i = 0; i < sequences.size(); ++i) {
            const double e = net.forward_one(sequences[i]) - y(static_cast<Eigen::Index>(i));
            sse += e * e;
        }
        return sse / static_cast<double>(sequences.size());
    }

    struct AdamState {
        std::vector<Eigen::MatrixXd> m_wx, v_wx, m_wh, v_wh;
        std::vector<Eigen::VectorXd> m_b, v_b;
        Eigen::VectorXd m_out, v_out;
        double m_bout = 0.0, v_bout = 0.0;
        long step = 0;
        static constexpr double kBeta1 = 0.9;
        static constexpr double kBeta2 = 0.999;
        static constexpr double kEps = 1e-8;

        explicit AdamState(const LstmNetwork& net) {
            for (const auto& l : net.layers()) {
                m_wx.push_back(Eigen::MatrixXd::Zero(l.wx.rows(), l.wx.cols()));
                v_wx.push_back(Eigen::MatrixXd::Zero(l.wx.rows(), l.wx.cols()));
                m_wh.push_back(Eigen::MatrixXd::Zero(l.wh.rows(), l.wh.cols()));
                v_wh.push_back(Eigen::MatrixXd::Zero(l.wh.rows(), l.wh.cols()));
                m_b.push_back(Eigen::VectorXd::Zero(l.b.size()));
                v_b.push_back(Eigen::VectorXd::Zero(l.b.size()));
            }
            m_out = Eigen::VectorXd::Zero(net.output_weights().size());
            v_out = Eigen::VectorXd::Zero(net.output_weights().size());
        }

        template <typename T>
        static void update(T& param, T& m, T& v, const T& grad, double lr,
                           double bc1, double bc2) {
            m = kBeta1 * m + (1.0 - kBeta1) * grad;
            v = (kBeta2 * v.array() + (1.0 - kBeta2) * grad.array().square()).matrix();
            param.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + kEps);
        }

        void apply(LstmNetwork& net, const LstmNetwork::Gradients& g, double lr) {
            ++step;
            const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(step));
            const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(step));
            auto& layers = net.layers();
            for (std::size_t l = 0; l < layers.size(); ++l) {
                update(layers[l].wx, m_wx[l], v_wx[l], g.wx[l], lr, bc1, bc2);
                update(layers[l].wh, m_wh[l], v_wh[l], g.wh[l], lr, bc1, bc2);
                update(layers[l].b, m_b[l], v_b[l], g.b[l], lr, bc1, bc2);
            }
            update(net.output_weights(), m_out, v_out, g.w_out, lr, bc1, bc2);
            m_bout = kBeta1 * m_bout + (1.0 - kBeta1) * g.b_out;
            v_bout = kBeta2 * v_bout + (1.0 - kBeta2) * g.b_out * g.b_out;
            net.output_bias() -= lr * (m_bout / bc1) / (std::sqrt(v_bout / bc2) + kEps);
        }
    };
};

/// Compares analytic BPTT gradients against central finite differences on a
/// small network. Dropout must be disabled: the stochastic masks would make
/// the two passes incomparable.
inline double gradient_check(const RecurrentNetConfig& config, std::uint64_t data_seed,
                             int sequences = 3, int steps = 6, double epsilon = 1e-5) {
    config.validate();
    if (config.dropout != 0.0 || config.recurrent_dropout != 0.0)
        throw SimError("gradient_check: dropout must be disabled");

    std::mt19937_64 rng(config.seed);
    LstmNetwork net(kFeaturesPerStep, config.units_per_layer, config.layers, rng);

    std::mt19937_64 data_rng(data_seed);
    std::normal_distribution<double> dist(0.0, 1.0);
    std::vector<Eigen::MatrixXd> batch;
    Eigen::VectorXd y(sequences);
    for (int s = 0; s < sequences; ++s) {
        Eigen::MatrixXd seq(steps, kFeaturesPerStep);
        for (Eigen::Index t = 0; t < steps; ++t)
            for (Eigen::Index j = 0; j < kFeaturesPerStep; ++j) seq(t, j) = dist(data_rng);
        batch.push_back(std::move(seq));
        y(s) = dist(data_rng);
    }

    auto loss_of = [&](LstmNetwork& n) {
        std::mt19937_64 dummy(0);
        auto cache = n.forward_batch(batch, 0.0, 0.0, dummy);
        const Eigen::VectorXd err = cache.pred - y;
        return err.squaredNorm() / static_cast<double>(err.size());
    };

    std::mt19937_64 dummy(0);
    auto cache = net.forward_batch(batch, 0.0, 0.0, dummy);
    const Eigen::VectorXd err = cache.pred - y;
    const Eigen::VectorXd dpred = 2.0 * err / static_cast<double>(err.size());
    const auto analytic = net.pack_gradients(net.backward_batch(cache, dpred));

    auto params = net.pack_parameters();
    double max_rel = 0.0;
    for (std::size_t k = 0; k < params.size(); ++k) {
        const double saved = params[k];
        params[k] = saved + epsilon;
        net.unpack_parameters(params);
        const double up = loss_of(net);
        params[k] = saved - epsilon;
        net.unpack_parameters(params);
        const double down = loss_of(net);
        params[k] = saved;
        net.unpack_parameters(params);
        const double numeric = (up - down) / (2.0 * epsilon);
        const double denom = std::max(std::abs(analytic[k]) + std::abs(numeric), 1e-3);
        max_rel = std::max(max_rel, std::abs(analytic[k] - numeric) / denom);
    }
    return max_rel;
}

}  // namespace aoisim

#endif  // AOISIM_PREDICTOR_RECURRENT_HPP
