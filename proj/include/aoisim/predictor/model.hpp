#ifndef AOISIM_PREDICTOR_MODEL_HPP
#define AOISIM_PREDICTOR_MODEL_HPP

#include <bit>
#include <chrono>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "aoisim/predictor/dataset.hpp"
#include "aoisim/predictor/forest.hpp"
#include "aoisim/predictor/linear.hpp"
#include "aoisim/predictor/recurrent.hpp"

namespace aoisim {

enum class PredictorKind { Linear, Recurrent, TreeEnsemble };

inline std::string to_string(PredictorKind kind) {
    switch (kind) {
        case PredictorKind::Linear: return "linear";
        case PredictorKind::Recurrent: return "recurrent";
        case PredictorKind::TreeEnsemble: return "forest";
    }
    return "?";
}

inline PredictorKind parse_predictor_kind(const std::string& name) {
    if (name == "linear") return PredictorKind::Linear;
    if (name == "recurrent") return PredictorKind::Recurrent;
    if (name == "forest") return PredictorKind::TreeEnsemble;
    throw SimError("unknown predictor kind: " + name);
}

struct TrainReport {
    PredictorKind kind = PredictorKind::Linear;
    double final_loss = 0.0;        // train MSE in ms^2
    std::size_t parameter_count = 0;
    double train_time_ms = 0.0;     // wall clock
    std::size_t train_examples = 0;
    std::size_t test_examples = 0;
    int window = 0;
    int horizon = 0;
};

struct EvalReport {
    double mae_ms = 0.0;
    double within_tolerance_pct = 0.0;  // |pred - y| <= tolerance * |y|
    double mean_latency_ms = 0.0;       // running mean incl. the seeded prior
    std::size_t parameter_count = 0;
    std::size_t examples = 0;
};

struct PredictorOptions {
    PredictorKind kind = PredictorKind::Recurrent;
    RecurrentNetConfig recurrent;
    ForestConfig forest;
    // Prior for the inference-latency running mean, so period selection has a
    // sane estimate before the first measured call.
    double initial_latency_ms = 100.0;
};

namespace detail {

inline void write_u64(std::ostream& out, std::uint64_t v) {
    char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(buf, 8);
}

inline void write_u32(std::ostream& out, std::uint32_t v) {
    char buf[4];
    for (int i = 0; i < 4; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(buf, 4);
}

inline void write_u8(std::ostream& out, std::uint8_t v) {
    out.put(static_cast<char>(v));
}

inline void write_f64(std::ostream& out, double v) {
    write_u64(out, std::bit_cast<std::uint64_t>(v));
}

inline void write_str(std::ostream& out, const std::string& s) {
    write_u32(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::uint64_t read_u64(std::istream& in) {
    char buf[8];
    if (!in.read(buf, 8)) throw SimError("model file truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[i])) << (8 * i);
    return v;
}

inline std::uint32_t read_u32(std::istream& in) {
    char buf[4];
    if (!in.read(buf, 4)) throw SimError("model file truncated");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
        v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[i])) << (8 * i);
    return v;
}

inline std::uint8_t read_u8(std::istream& in) {
    const int c = in.get();
    if (c == std::char_traits<char>::eof()) throw SimError("model file truncated");
    return static_cast<std::uint8_t>(c);
}

inline double read_f64(std::istream& in) {
    return std::bit_cast<double>(read_u64(in));
}

inline std::string read_str(std::istream& in) {
    const auto len = read_u32(in);
    std::string s(len, '\0');
    if (len > 0 && !in.read(s.data(), len)) throw SimError("model file truncated");
    return s;
}

inline void write_f64_vec(std::ostream& out, const double* data, std::size_t n) {
    write_u64(out, n);
    for (std::size_t i = 0; i < n; ++i) write_f64(out, data[i]);
}

inline std::vector<double> read_f64_vec(std::istream& in) {
    const auto n = read_u64(in);
    std::vector<double> v(n);
    for (auto& x : v) x = read_f64(in);
    return v;
}

inline void write_scaler(std::ostream& out, const FeatureScaler& s) {
    write_f64_vec(out, s.mean.data(), s.mean.size());
    write_f64_vec(out, s.stdev.data(), s.stdev.size());
    write_f64(out, s.target_mean);
    write_f64(out, s.target_stdev);
}

inline FeatureScaler read_scaler(std::istream& in) {
    FeatureScaler s;
    s.mean = read_f64_vec(in);
    s.stdev = read_f64_vec(in);
    s.target_mean = read_f64(in);
    s.target_stdev = read_f64(in);
    return s;
}

}  // namespace detail

/// Trained forecaster of one kind behind a uniform interface. Keeps a
/// running mean of measured inference latency, seeded with a configurable
/// prior, for use by the refresh-period rule.
class PredictorModel {
public:
    static constexpr char kMagic[8] = {'A', 'O', 'I', 'P', 'R', 'E', 'D', '\0'};
    static constexpr std::uint32_t kFormatVersion = 1;

    PredictorKind kind = PredictorKind::Linear;
    LinearModel linear;
    RecurrentModel recurrent;
    RegressionForest forest;
    TrainReport report;

    static PredictorModel train(const SupervisedDataset& ds, const PredictorOptions& options) {
        if (ds.train_size() == 0) throw SimError("predictor: empty training set");
        PredictorModel model;
        model.kind = options.kind;
        model.latency_mean_ = options.initial_latency_ms;
        model.latency_samples_ = 1;

        const auto t0 = std::chrono::steady_clock::now();
        switch (options.kind) {
            case PredictorKind::Linear:
                model.linear = LinearModel::train(ds.train_inputs, ds.train_targets);
                model.report.final_loss = model.linear.final_loss;
                break;
            case PredictorKind::Recurrent:
                model.recurrent =
                    RecurrentModel::train(ds.train_inputs, ds.train_targets, options.recurrent);
                model.report.final_loss = model.recurrent.final_loss;
                break;
            case PredictorKind::TreeEnsemble: {
                model.forest = RegressionForest::train(ds.train_inputs, ds.train_targets,
                                                       options.forest);
                double sse = 0.0;
                for (std::size_t i = 0; i < ds.train_size(); ++i) {
                    const double e = model.forest.predict(ds.train_inputs[i]) - ds.train_targets[i];
                    sse += e * e;
                }
                model.report.final_loss = sse / static_cast<double>(ds.train_size());
                break;
            }
        }
        const auto t1 = std::chrono::steady_clock::now();

        model.report.kind = options.kind;
        model.report.parameter_count = model.parameter_count();
        model.report.train_time_ms =
            std::chrono::duration<double, std::milli>(t1 - t0).count();
        model.report.train_examples = ds.train_size();
        model.report.test_examples = ds.test_size();
        model.report.window = ds.window;
        model.report.horizon = ds.horizon;
        return model;
    }

    /// Forecast the AoI `n_steps` cycles past the window's end. The model is
    /// trained for one fixed horizon; asking for another is a caller bug.
    double predict_n_step(const FeatureWindow& window, int n_steps) const {
        if (n_steps != report.horizon)
            throw SimError("predictor: trained for horizon " + std::to_string(report.horizon) +
                           ", asked for " + std::to_string(n_steps));
        if (static_cast<int>(window.entries.size()) != report.window)
            throw SimError("predictor: window has " + std::to_string(window.entries.size()) +
                           " entries, expected " + std::to_string(report.window));
        window.validate();

        const auto t0 = std::chrono::steady_clock::now();
        double value = 0.0;
        switch (kind) {
            case PredictorKind::Linear: value = linear.predict(window); break;
            case PredictorKind::Recurrent: value = recurrent.predict(window); break;
            case PredictorKind::TreeEnsemble: value = forest.predict(window); break;
        }
        const auto t1 = std::chrono::steady_clock::now();
        const double ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
        ++latency_samples_;
        latency_mean_ += (ms - latency_mean_) / static_cast<double>(latency_samples_);
        return value;
    }

    double mean_latency_ms() const { return latency_mean_; }
    std::size_t latency_samples() const { return latency_samples_; }

    std::size_t parameter_count() const {
        switch (kind) {
            case PredictorKind::Linear: return linear.parameter_count();
            case PredictorKind::Recurrent: return recurrent.parameter_count();
            case PredictorKind::TreeEnsemble: return forest.parameter_count();
        }
        return 0;
    }

    EvalReport evaluate(const std::vector<FeatureWindow>& inputs,
                        const std::vector<double>& targets, double tolerance = 0.10) const {
        if (inputs.empty() || inputs.size() != targets.size())
            throw SimError("predictor: empty or mismatched evaluation set");
        if (tolerance <= 0.0) throw SimError("predictor: tolerance must be > 0");
        EvalReport eval;
        double abs_err = 0.0;
        std::size_t within = 0;
        for (std::size_t i = 0; i < inputs.size(); ++i) {
            const double pred = predict_n_step(inputs[i], report.horizon);
            const double err = std::abs(pred - targets[i]);
            abs_err += err;
            if (err <= tolerance * std::abs(targets[i])) ++within;
        }
        eval.mae_ms = abs_err / static_cast<double>(inputs.size());
        eval.within_tolerance_pct =
            100.0 * static_cast<double>(within) / static_cast<double>(inputs.size());
        eval.mean_latency_ms = latency_mean_;
        eval.parameter_count = parameter_count();
        eval.examples = inputs.size();
        return eval;
    }

    void save(const std::string& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw SimError("cannot open model file for writing: " + path);
        out.write(kMagic, sizeof(kMagic));
        detail::write_u32(out, kFormatVersion);
        detail::write_u8(out, static_cast<std::uint8_t>(kind));
        detail::write_u32(out, static_cast<std::uint32_t>(report.window));
        detail::write_u32(out, static_cast<std::uint32_t>(report.horizon));
        detail::write_f64(out, report.final_loss);
        detail::write_f64(out, report.train_time_ms);
        detail::write_u64(out, report.train_examples);
        detail::write_u64(out, report.test_examples);
        detail::write_f64(out, latency_mean_);
        detail::write_u64(out, latency_samples_);

        switch (kind) {
            case PredictorKind::Linear: {
                detail::write_scaler(out, linear.scaler);
                detail::write_f64_vec(out, linear.coefficients.data(),
                                      static_cast<std::size_t>(linear.coefficients.size()));
                detail::write_f64(out, linear.intercept);
                break;
            }
            case PredictorKind::Recurrent: {
                const auto& cfg = recurrent.config;
                detail::write_u32(out, static_cast<std::uint32_t>(cfg.units_per_layer));
                detail::write_u32(out, static_cast<std::uint32_t>(cfg.layers));
                detail::write_f64(out, cfg.dropout);
                detail::write_f64(out, cfg.recurrent_dropout);
                detail::write_str(out, cfg.activation);
                detail::write_u32(out, static_cast<std::uint32_t>(cfg.batch_size));
                detail::write_u32(out, static_cast<std::uint32_t>(cfg.epochs));
                detail::write_f64(out, cfg.learning_rate);
                detail::write_u64(out, cfg.seed);
                detail::write_scaler(out, recurrent.scaler);
                const auto& layers = recurrent.net.layers();
                detail::write_u32(out, static_cast<std::uint32_t>(layers.size()));
                for (const auto& layer : layers) {
                    detail::write_u32(out, static_cast<std::uint32_t>(layer.in));
                    detail::write_u32(out, static_cast<std::uint32_t>(layer.units));
                    detail::write_f64_vec(out, layer.wx.data(),
                                          static_cast<std::size_t>(layer.wx.size()));
                    detail::write_f64_vec(out, layer.wh.data(),
                                          static_cast<std::size_t>(layer.wh.size()));
                    detail::write_f64_vec(out, layer.b.data(),
                                          static_cast<std::size_t>(layer.b.size()));
                }
                detail::write_f64_vec(out, recurrent.net.output_weights().data(),
                                      static_cast<std::size_t>(recurrent.net.output_weights().size()));
                detail::write_f64(out, recurrent.net.output_bias());
                break;
            }
            case PredictorKind::TreeEnsemble: {
                const auto& cfg = forest.config();
                detail::write_u32(out, static_cast<std::uint32_t>(cfg.trees));
                detail::write_u32(out, static_cast<std::uint32_t>(cfg.max_depth));
                detail::write_u32(out, static_cast<std::uint32_t>(cfg.min_samples_split));
                detail::write_u8(out, cfg.bootstrap ? 1 : 0);
                detail::write_u32(out, static_cast<std::uint32_t>(cfg.features_per_split));
                detail::write_u64(out, cfg.seed);
                detail::write_u64(out, forest.trees().size());
                for (const auto& tree : forest.trees()) {
                    detail::write_u64(out, tree.nodes.size());
                    for (const auto& node : tree.nodes) {
                        detail::write_u8(out, node.leaf ? 1 : 0);
                        detail::write_u32(out, static_cast<std::uint32_t>(node.feature));
                        detail::write_f64(out, node.threshold);
                        detail::write_f64(out, node.value);
                        detail::write_u32(out, static_cast<std::uint32_t>(node.left));
                        detail::write_u32(out, static_cast<std::uint32_t>(node.right));
                    }
                }
                break;
            }
        }
        if (!out) throw SimError("write failed for model file: " + path);
    }

    static PredictorModel load(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw SimError("cannot open model file: " + path);
        char magic[8];
        if (!in.read(magic, sizeof(magic)) || !std::equal(magic, magic + 8, kMagic))
            throw SimError("not a model file: " + path);
        const auto version = detail::read_u32(in);
        if (version != kFormatVersion)
            throw SimError("unsupported model file version " + std::to_string(version));

        PredictorModel model;
        model.kind = static_cast<PredictorKind>(detail::read_u8(in));
        model.report.kind = model.kind;
        model.report.window = static_cast<int>(detail::read_u32(in));
        model.report.horizon = static_cast<int>(detail::read_u32(in));
        model.report.final_loss = detail::read_f64(in);
        model.report.train_time_ms = detail::read_f64(in);
        model.report.train_examples = detail::read_u64(in);
        model.report.test_examples = detail::read_u64(in);
        model.latency_mean_ = detail::read_f64(in);
        model.latency_samples_ = detail::read_u64(in);

        switch (model.kind) {
            case PredictorKind::Linear: {
                model.linear.scaler = detail::read_scaler(in);
                const auto coefs = detail::read_f64_vec(in);
                model.linear.coefficients =
                    Eigen::Map<const Eigen::VectorXd>(coefs.data(),
                                                      static_cast<Eigen::Index>(coefs.size()));
                model.linear.intercept = detail::read_f64(in);
                model.linear.final_loss = model.report.final_loss;
                break;
            }
            case PredictorKind::Recurrent: {
                auto& cfg = model.recurrent.config;
                cfg.units_per_layer = static_cast<int>(detail::read_u32(in));
                cfg.layers = static_cast<int>(detail::read_u32(in));
                cfg.dropout = detail::read_f64(in);
                cfg.recurrent_dropout = detail::read_f64(in);
                cfg.activation = detail::read_str(in);
                cfg.batch_size = static_cast<int>(detail::read_u32(in));
                cfg.epochs = static_cast<int>(detail::read_u32(in));
                cfg.learning_rate = detail::read_f64(in);
                cfg.seed = detail::read_u64(in);
                model.recurrent.scaler = detail::read_scaler(in);
                model.recurrent.final_loss = model.report.final_loss;
                const auto layer_count = detail::read_u32(in);
                auto& layers = model.recurrent.net.layers();
                layers.resize(layer_count);
                for (auto& layer : layers) {
                    layer.in = static_cast<int>(detail::read_u32(in));
                    layer.units = static_cast<int>(detail::read_u32(in));
                    const auto wx = detail::read_f64_vec(in);
                    const auto wh = detail::read_f64_vec(in);
                    const auto b = detail::read_f64_vec(in);
                    layer.wx = Eigen::Map<const Eigen::MatrixXd>(wx.data(), 4 * layer.units,
                                                                 layer.in);
                    layer.wh = Eigen::Map<const Eigen::MatrixXd>(wh.data(), 4 * layer.units,
                                                                 layer.units);
                    layer.b = Eigen::Map<const Eigen::VectorXd>(
                        b.data(), static_cast<Eigen::Index>(b.size()));
                }
                const auto w_out = detail::read_f64_vec(in);
                model.recurrent.net.output_weights() = Eigen::Map<const Eigen::VectorXd>(
                    w_out.data(), static_cast<Eigen::Index>(w_out.size()));
                model.recurrent.net.output_bias() = detail::read_f64(in);
                break;
            }
            case PredictorKind::TreeEnsemble: {
                auto& cfg = model.forest.mutable_config();
                cfg.trees = static_cast<int>(detail::read_u32(in));
                cfg.max_depth = static_cast<int>(detail::read_u32(in));
                cfg.min_samples_split = static_cast<int>(detail::read_u32(in));
                cfg.bootstrap = detail::read_u8(in) != 0;
                cfg.features_per_split = static_cast<int>(detail::read_u32(in));
                cfg.seed = detail::read_u64(in);
                const auto tree_count = detail::read_u64(in);
                auto& trees = model.forest.mutable_trees();
                trees.resize(tree_count);
                for (auto& tree : trees) {
                    tree.nodes.resize(detail::read_u64(in));
                    for (auto& node : tree.nodes) {
                        node.leaf = detail::read_u8(in) != 0;
                        node.feature = static_cast<int>(detail::read_u32(in));
                        node.threshold = detail::read_f64(in);
                        node.value = detail::read_f64(in);
                        node.left = static_cast<int>(detail::read_u32(in));
                        node.right = static_cast<int>(detail::read_u32(in));
                    }
                }
                break;
            }
        }
        model.report.parameter_count = model.parameter_count();
        return model;
    }

private:
    mutable double latency_mean_ = 100.0;
    mutable std::size_t latency_samples_ = 1;
};

}  // namespace aoisim

#endif  // AOISIM_PREDICTOR_MODEL_HPP
